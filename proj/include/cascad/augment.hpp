#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "circuit.hpp"
#include "error.hpp"

namespace cascad
{

/*! \brief Virtual AND exposing the joint event `target AND condition`. */
struct joint_node
{
  gate_id gate{ invalid_gate };
  gate_id target{ invalid_gate };
  gate_id condition{ invalid_gate };
};

/*! \brief Virtual DIV exposing P(target | condition); fanins are (joint, condition). */
struct cond_node
{
  gate_id gate{ invalid_gate };
  gate_id numerator{ invalid_gate };
  gate_id denominator{ invalid_gate };
};

namespace detail
{

inline void check_condition_operand( circuit const& c, gate_id g, char const* what )
{
  if ( !c.is_valid( g ) )
    throw invalid_operand_error( std::string( what ) + " " + std::to_string( g ) + " out of range" );
  if ( c.kind( g ) == gate_kind::virtual_div )
    throw invalid_operand_error( std::string( what ) + " " + std::to_string( g ) + " is a virtual DIV gate" );
}

inline void check_target_operand( circuit const& c, gate_id g )
{
  if ( !c.is_valid( g ) )
    throw invalid_operand_error( "target " + std::to_string( g ) + " out of range" );
  if ( c.is_virtual( g ) )
    throw invalid_operand_error( "target " + std::to_string( g ) + " is a virtual gate" );
}

} // namespace detail

/*! \brief Appends (or finds) the virtual AND of `target` and `condition`.
 *
 * The condition may be a Boolean gate or the virtual AND produced by
 * `chain_conditions`; the target must be Boolean and distinct from it.
 */
inline std::pair<circuit, joint_node> insert_joint( circuit const& c, gate_id target, gate_id condition )
{
  detail::check_target_operand( c, target );
  detail::check_condition_operand( c, condition, "condition" );
  if ( target == condition )
    throw invalid_operand_error( "insert_joint: target and condition are the same gate" );
  circuit out = c;
  auto const g = out.create_virtual_and( target, condition );
  return { std::move( out ), joint_node{ g, target, condition } };
}

/*! \brief Appends (or finds) the virtual DIV for P(target | condition), creating the joint node if needed.
 *
 * `target == condition` is allowed and yields the degenerate node P(A | A).
 */
inline std::pair<circuit, cond_node> insert_cond( circuit const& c, gate_id target, gate_id condition )
{
  detail::check_target_operand( c, target );
  detail::check_condition_operand( c, condition, "condition" );
  circuit out = c;
  auto const joint = out.create_virtual_and( target, condition );
  auto const div = out.create_virtual_div( joint, condition );
  return { std::move( out ), cond_node{ div, joint, condition } };
}

/*! \brief Single gate computing the conjunction of the given (possibly negated) conditions.
 *
 * Negative polarities go through (shared) NOT gates; two or more conditions
 * form a left-leaning chain of virtual AND gates.  One positive condition is
 * returned as is.
 */
inline std::pair<circuit, gate_id> chain_conditions( circuit const& c, std::vector<signal> const& conditions )
{
  if ( conditions.empty() )
    throw invalid_operand_error( "chain_conditions: no conditions" );
  std::set<gate_id> seen;
  for ( auto s : conditions )
  {
    detail::check_target_operand( c, s.gate );
    if ( !seen.insert( s.gate ).second )
      throw invalid_operand_error( "chain_conditions: duplicate condition gate " + std::to_string( s.gate ) );
  }
  circuit out = c;
  auto acc = out.create_signal( conditions.front() );
  for ( std::size_t i = 1; i < conditions.size(); ++i )
    acc = out.create_virtual_and( acc, out.create_signal( conditions[i] ) );
  return { std::move( out ), acc };
}

inline constexpr std::uint32_t influence_depth = 10u;

/*! \brief Local region affected by conditioning on one gate. */
struct influence_region
{
  gate_id condition{ invalid_gate };
  gate_id anchor{ invalid_gate };
  std::vector<gate_id> members; /* sorted */
};

/*! \brief Influence area of `condition`.
 *
 * The anchor is a proper ancestor with at least two Boolean fanouts and at
 * most 10 levels above the condition; the highest-level candidate wins, ties
 * go to the smaller id, and without candidates the condition anchors itself.
 * Members are the anchor's fanout cone bounded to 10 edges.
 */
inline influence_region influence_area( circuit const& c, gate_id condition )
{
  detail::check_target_operand( c, condition );
  auto const cone = fanin_cone( c, condition );
  auto anchor = condition;
  std::optional<std::uint32_t> best_level;
  for ( auto g : cone.members )
  {
    if ( g == condition || c.is_virtual( g ) )
      continue;
    if ( c.num_fanouts( g, false ) < 2u )
      continue;
    if ( c.level( condition ) - c.level( g ) > influence_depth )
      continue;
    if ( !best_level || c.level( g ) > *best_level )
    {
      best_level = c.level( g );
      anchor = g;
    }
  }
  return { condition, anchor, fanout_cone( c, anchor, influence_depth ).members };
}

/*! \brief Inserts joint and conditional nodes for every Boolean member of the influence area paired with `condition`. */
inline std::pair<circuit, std::vector<cond_node>> augment_influence_area( circuit const& c, gate_id condition )
{
  auto const area = influence_area( c, condition );
  circuit out = c;
  std::vector<cond_node> nodes;
  for ( auto g : area.members )
  {
    if ( g == condition || c.is_virtual( g ) )
      continue;
    auto const joint = out.create_virtual_and( g, condition );
    nodes.push_back( { out.create_virtual_div( joint, condition ), joint, condition } );
  }
  return { std::move( out ), std::move( nodes ) };
}

//----------------------------------------------------------------------
// JSON graph format
//
//   {"format": "cascad-graph", "version": 1,
//    "gates": [{"id": 0, "kind": "PI", "fanins": []}, ...],
//    "pis": [...], "pos": [...]}
//
// Gates are listed in topological order with ids 0..n-1.
//----------------------------------------------------------------------

inline nlohmann::json to_json_graph( circuit const& c )
{
  nlohmann::json gates = nlohmann::json::array();
  for ( gate_id g = 0; g < c.size(); ++g )
  {
    auto fanins = c.fanins( g );
    gates.push_back( { { "id", g }, { "kind", to_string( c.kind( g ) ) }, { "fanins", std::vector<gate_id>( fanins.begin(), fanins.end() ) } } );
  }
  return { { "format", "cascad-graph" },
           { "version", 1 },
           { "gates", std::move( gates ) },
           { "pis", std::vector<gate_id>( c.pis().begin(), c.pis().end() ) },
           { "pos", std::vector<gate_id>( c.pos().begin(), c.pos().end() ) } };
}

inline circuit from_json_graph( nlohmann::json const& j )
{
  try
  {
    if ( j.value( "format", std::string{} ) != "cascad-graph" )
      throw parse_error( "JSON graph: missing or wrong \"format\"" );
    circuit c;
    auto const& gates = j.at( "gates" );
    for ( std::size_t i = 0; i < gates.size(); ++i )
    {
      auto const& e = gates[i];
      if ( e.at( "id" ).get<std::size_t>() != i )
        throw parse_error( "JSON graph: gate ids must be 0..n-1 in order (entry " + std::to_string( i ) + ")" );
      auto const kind = gate_kind_from_string( e.at( "kind" ).get<std::string>() );
      auto const fanins = e.at( "fanins" ).get<std::vector<gate_id>>();
      if ( fanins.size() != fanin_count( kind ) )
        throw parse_error( "JSON graph: gate " + std::to_string( i ) + " has wrong fanin count" );
      for ( auto f : fanins )
        if ( f >= i )
          throw parse_error( "JSON graph: gate " + std::to_string( i ) + " has a fanin that is not topologically earlier" );
      gate_id got = invalid_gate;
      switch ( kind )
      {
      case gate_kind::pi:
        got = c.create_pi();
        break;
      case gate_kind::const0:
        got = c.get_constant0();
        break;
      case gate_kind::and_gate:
        got = c.create_and( fanins[0], fanins[1] );
        break;
      case gate_kind::not_gate:
        got = c.create_not( fanins[0] );
        break;
      case gate_kind::virtual_and:
        got = c.create_virtual_and( fanins[0], fanins[1] );
        break;
      case gate_kind::virtual_div:
        got = c.create_virtual_div( fanins[0], fanins[1] );
        break;
      }
      if ( got != i )
        throw parse_error( "JSON graph: gate " + std::to_string( i ) + " duplicates an existing shared node" );
    }
    auto const pis = j.at( "pis" ).get<std::vector<gate_id>>();
    if ( !std::equal( pis.begin(), pis.end(), c.pis().begin(), c.pis().end() ) )
      throw parse_error( "JSON graph: \"pis\" does not match the PI gates" );
    for ( auto po : j.at( "pos" ).get<std::vector<gate_id>>() )
      c.create_po( po );
    return c;
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw parse_error( std::string( "JSON graph: " ) + e.what() );
  }
  catch ( invalid_operand_error const& e )
  {
    throw parse_error( std::string( "JSON graph: " ) + e.what() );
  }
}

} // namespace cascad
