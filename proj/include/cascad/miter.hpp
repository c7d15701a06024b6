#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "circuit.hpp"
#include "error.hpp"

namespace cascad
{

/*! \brief `a OR b` as NOT(AND(NOT a, NOT b)). */
inline gate_id create_or( circuit& c, gate_id a, gate_id b )
{
  return c.create_not( c.create_and( c.create_not( a ), c.create_not( b ) ) );
}

/*! \brief `a XNOR b` as AND(NOT(a AND NOT b), NOT(NOT a AND b)). */
inline gate_id create_xnor( circuit& c, gate_id a, gate_id b )
{
  auto const t1 = c.create_and( a, c.create_not( b ) );
  auto const t2 = c.create_and( c.create_not( a ), b );
  return c.create_and( c.create_not( t1 ), c.create_not( t2 ) );
}

inline gate_id create_xor( circuit& c, gate_id a, gate_id b )
{
  return c.create_not( create_xnor( c, a, b ) );
}

/*! \brief Miter of two circuits over shared PIs.
 *
 * Each pair of outputs is compared with an XOR; the single PO is the OR of
 * all XORs, so it can be 1 iff the circuits differ on some input.  An empty
 * pairing compares the POs position by position.
 */
inline circuit build_miter( circuit const& left, circuit const& right, std::vector<std::pair<gate_id, gate_id>> po_pairing = {} )
{
  if ( left.num_pis() != right.num_pis() )
    throw shape_error( "miter: PI counts differ (" + std::to_string( left.num_pis() ) + " vs " + std::to_string( right.num_pis() ) + ")" );
  if ( left.has_virtual_gates() || right.has_virtual_gates() )
    throw unsupported_error( "miter: operands must not contain virtual gates" );
  if ( po_pairing.empty() )
  {
    if ( left.num_pos() != right.num_pos() )
      throw shape_error( "miter: PO counts differ and no pairing was given" );
    for ( std::size_t i = 0; i < left.num_pos(); ++i )
      po_pairing.emplace_back( left.pos()[i], right.pos()[i] );
  }
  if ( po_pairing.empty() )
    throw shape_error( "miter: nothing to compare" );

  circuit m;
  std::vector<gate_id> pis;
  for ( std::size_t i = 0; i < left.num_pis(); ++i )
    pis.push_back( m.create_pi() );
  auto const lmap = copy_boolean_gates( left, m, pis );
  auto const rmap = copy_boolean_gates( right, m, pis );

  std::vector<gate_id> equal;
  for ( auto [l, r] : po_pairing )
  {
    if ( !left.is_valid( l ) || !right.is_valid( r ) )
      throw invalid_operand_error( "miter: pairing references an invalid gate" );
    equal.push_back( create_xnor( m, lmap[l], rmap[r] ) );
  }
  auto all_equal = equal.front();
  for ( std::size_t i = 1; i < equal.size(); ++i )
    all_equal = m.create_and( all_equal, equal[i] );
  m.create_po( m.create_not( all_equal ) );
  return m;
}

/*! \brief Rebuilds `c` gate by gate; `override_and` may replace the construction of an AND gate.
 *
 * The callback receives the destination circuit, the old-to-new map so far
 * and the old gate id, and returns the new id or `std::nullopt` to copy the
 * gate unchanged.
 */
inline circuit rebuild( circuit const& c, std::function<std::optional<gate_id>( circuit&, std::vector<gate_id> const&, gate_id )> const& override_and )
{
  if ( c.has_virtual_gates() )
    throw unsupported_error( "rebuild: virtual gates are not supported" );
  circuit out;
  std::vector<gate_id> map( c.size(), invalid_gate );
  for ( gate_id g = 0; g < c.size(); ++g )
  {
    auto const& gt = c[g];
    switch ( gt.kind )
    {
    case gate_kind::pi:
      map[g] = out.create_pi();
      break;
    case gate_kind::const0:
      map[g] = out.get_constant0();
      break;
    case gate_kind::not_gate:
      map[g] = out.create_not( map[gt.inputs[0]] );
      break;
    case gate_kind::and_gate:
      if ( auto r = override_and ? override_and( out, map, g ) : std::nullopt )
        map[g] = *r;
      else
        map[g] = out.create_and( map[gt.inputs[0]], map[gt.inputs[1]] );
      break;
    default:
      break;
    }
  }
  for ( auto po : c.pos() )
    out.create_po( map[po] );
  return out;
}

enum class mutation_kind
{
  any,
  flip_inversion,
  swap_fanin
};

struct mutation
{
  circuit result;
  gate_id site{ invalid_gate }; /* AND gate in the original circuit */
  unsigned fanin{ 0 };
  mutation_kind kind{ mutation_kind::flip_inversion };
  gate_id replacement{ invalid_gate }; /* for swap_fanin: the new fanin in the original circuit */

  std::string describe() const
  {
    if ( kind == mutation_kind::swap_fanin )
      return "swap_fanin@" + std::to_string( site ) + "." + std::to_string( fanin ) + "->" + std::to_string( replacement );
    return "flip_inversion@" + std::to_string( site ) + "." + std::to_string( fanin );
  }
};

/*! \brief Applies exactly one seeded local change to an AND gate.
 *
 * Either one fanin's inversion is flipped (a NOT driver is bypassed, any
 * other driver gets a NOT), or one fanin is swapped for another gate on the
 * same level.  Only AND gates feeding some PO are mutated.  The result is
 * not guaranteed to be functionally different.
 */
inline mutation mutate_circuit( circuit const& c, std::uint64_t seed, mutation_kind kind = mutation_kind::any )
{
  // sites are drawn from the PO cones, where a change can be observed
  std::vector<bool> observed( c.size(), false );
  for ( auto po : c.pos() )
    for ( auto g : fanin_cone( c, po ).members )
      observed[g] = true;
  std::vector<gate_id> ands;
  for ( gate_id g = 0; g < c.size(); ++g )
    if ( c.kind( g ) == gate_kind::and_gate && observed[g] )
      ands.push_back( g );
  if ( ands.empty() )
    throw invalid_operand_error( "mutate_circuit: no AND gate to mutate" );

  std::mt19937_64 rng( seed );
  mutation m;
  m.site = ands[std::uniform_int_distribution<std::size_t>( 0, ands.size() - 1 )( rng )];
  m.fanin = static_cast<unsigned>( rng() & 1u );
  auto const old_fanin = c.fanins( m.site )[m.fanin];

  m.kind = kind;
  if ( kind == mutation_kind::any )
    m.kind = ( rng() & 1u ) ? mutation_kind::swap_fanin : mutation_kind::flip_inversion;
  if ( m.kind == mutation_kind::swap_fanin )
  {
    std::vector<gate_id> candidates;
    for ( gate_id g = 0; g < c.size(); ++g )
      if ( g < m.site && g != old_fanin && !c.is_virtual( g ) && c.level( g ) == c.level( old_fanin ) )
        candidates.push_back( g );
    if ( candidates.empty() )
    {
      if ( kind == mutation_kind::swap_fanin )
        throw invalid_operand_error( "mutate_circuit: no same-level signal to swap in" );
      m.kind = mutation_kind::flip_inversion;
    }
    else
      m.replacement = candidates[std::uniform_int_distribution<std::size_t>( 0, candidates.size() - 1 )( rng )];
  }

  m.result = rebuild( c, [&]( circuit& out, std::vector<gate_id> const& map, gate_id g ) -> std::optional<gate_id> {
    if ( g != m.site )
      return std::nullopt;
    std::array<gate_id, 2> in{ map[c.fanins( g )[0]], map[c.fanins( g )[1]] };
    if ( m.kind == mutation_kind::swap_fanin )
      in[m.fanin] = map[m.replacement];
    else if ( c.kind( old_fanin ) == gate_kind::not_gate )
      in[m.fanin] = map[c.fanins( old_fanin )[0]];
    else
      in[m.fanin] = out.create_not( in[m.fanin] );
    return out.create_and( in[0], in[1] );
  } );
  return m;
}

enum class rewrite_kind
{
  double_negation_insert,
  double_negation_remove,
  reassociate,
  commute
};

inline std::string to_string( rewrite_kind k )
{
  switch ( k )
  {
  case rewrite_kind::double_negation_insert:
    return "dneg_insert";
  case rewrite_kind::double_negation_remove:
    return "dneg_remove";
  case rewrite_kind::reassociate:
    return "reassociate";
  case rewrite_kind::commute:
    return "commute";
  }
  return "?";
}

/*! \brief Applies one function-preserving rewrite at a seeded site.
 *
 * Returns `std::nullopt` when the circuit has no site for the rewrite.
 * AND(AND(a, b), c) re-associates to AND(a, AND(b, c)).
 */
inline std::optional<circuit> rewrite_once( circuit const& c, rewrite_kind kind, std::mt19937_64& rng )
{
  std::vector<std::pair<gate_id, unsigned>> sites;
  for ( gate_id g = 0; g < c.size(); ++g )
  {
    if ( c.kind( g ) != gate_kind::and_gate )
      continue;
    for ( unsigned k = 0; k < 2; ++k )
    {
      auto const f = c.fanins( g )[k];
      switch ( kind )
      {
      case rewrite_kind::double_negation_insert:
        sites.emplace_back( g, k );
        break;
      case rewrite_kind::double_negation_remove:
        if ( c.kind( f ) == gate_kind::not_gate && c.kind( c.fanins( f )[0] ) == gate_kind::not_gate )
          sites.emplace_back( g, k );
        break;
      case rewrite_kind::reassociate:
        if ( c.kind( f ) == gate_kind::and_gate )
          sites.emplace_back( g, k );
        break;
      case rewrite_kind::commute:
        if ( k == 0 )
          sites.emplace_back( g, k );
        break;
      }
    }
  }
  if ( sites.empty() )
    return std::nullopt;
  auto const [site, k] = sites[std::uniform_int_distribution<std::size_t>( 0, sites.size() - 1 )( rng )];

  return rebuild( c, [&, site = site, k = k]( circuit& out, std::vector<gate_id> const& map, gate_id g ) -> std::optional<gate_id> {
    if ( g != site )
      return std::nullopt;
    auto const f = c.fanins( g )[k];
    auto const other = map[c.fanins( g )[1 - k]];
    std::array<gate_id, 2> in{ map[c.fanins( g )[0]], map[c.fanins( g )[1]] };
    switch ( kind )
    {
    case rewrite_kind::double_negation_insert:
      in[k] = out.create_not( out.create_not( in[k] ) );
      return out.create_and( in[0], in[1] );
    case rewrite_kind::double_negation_remove:
      in[k] = map[c.fanins( c.fanins( f )[0] )[0]];
      return out.create_and( in[0], in[1] );
    case rewrite_kind::reassociate:
    {
      auto const a = map[c.fanins( f )[0]];
      auto const b = map[c.fanins( f )[1]];
      return out.create_and( a, out.create_and( b, other ) );
    }
    case rewrite_kind::commute:
      return out.create_and( in[1], in[0] );
    }
    return std::nullopt;
  } );
}

} // namespace cascad
