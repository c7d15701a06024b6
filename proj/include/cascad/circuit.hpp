#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"

namespace cascad
{

using gate_id = std::uint32_t;

inline constexpr gate_id invalid_gate = std::numeric_limits<gate_id>::max();

enum class gate_kind : std::uint8_t
{
  pi,
  and_gate,
  not_gate,
  virtual_and,
  virtual_div,
  const0
};

inline constexpr std::size_t fanin_count( gate_kind kind ) noexcept
{
  switch ( kind )
  {
  case gate_kind::pi:
  case gate_kind::const0:
    return 0u;
  case gate_kind::not_gate:
    return 1u;
  default:
    return 2u;
  }
}

inline constexpr bool is_virtual( gate_kind kind ) noexcept
{
  return kind == gate_kind::virtual_and || kind == gate_kind::virtual_div;
}

inline constexpr std::string_view to_string( gate_kind kind ) noexcept
{
  switch ( kind )
  {
  case gate_kind::pi:
    return "PI";
  case gate_kind::and_gate:
    return "AND";
  case gate_kind::not_gate:
    return "NOT";
  case gate_kind::virtual_and:
    return "VIRTUAL_AND";
  case gate_kind::virtual_div:
    return "VIRTUAL_DIV";
  case gate_kind::const0:
    return "CONST0";
  }
  return "?";
}

inline gate_kind gate_kind_from_string( std::string_view name )
{
  for ( auto k : { gate_kind::pi, gate_kind::and_gate, gate_kind::not_gate, gate_kind::virtual_and, gate_kind::virtual_div, gate_kind::const0 } )
  {
    if ( to_string( k ) == name )
      return k;
  }
  throw parse_error( "unknown gate kind '" + std::string( name ) + "'" );
}

struct gate
{
  gate_kind kind{ gate_kind::pi };
  std::array<gate_id, 2> inputs{ invalid_gate, invalid_gate };

  std::span<const gate_id> fanins() const noexcept
  {
    return { inputs.data(), fanin_count( kind ) };
  }
};

/*! \brief A gate reference with a polarity; `positive == false` means the complement. */
struct signal
{
  gate_id gate{ invalid_gate };
  bool positive{ true };

  signal operator!() const noexcept { return { gate, !positive }; }
  friend bool operator==( signal const&, signal const& ) = default;
  friend auto operator<=>( signal const&, signal const& ) = default;
};

/*! \brief Levelized DAG of PI/AND/NOT gates plus observation-only virtual gates.
 *
 * Gates are appended in topological order, so a gate's fanins always have
 * smaller indices and strictly smaller levels.  NOT gates are explicit nodes
 * and at most one NOT exists per driven signal.  Virtual gates may only be
 * consumed by other virtual gates.
 *
 * A circuit is meant to be built once and then shared by const reference;
 * transformations return new values.
 */
class circuit
{
public:
  gate_id create_pi()
  {
    auto const id = append( gate{ gate_kind::pi, {} }, 0u );
    pis_.push_back( id );
    return id;
  }

  gate_id get_constant0()
  {
    if ( const0_ == invalid_gate )
      const0_ = append( gate{ gate_kind::const0, {} }, 0u );
    return const0_;
  }

  gate_id create_and( gate_id a, gate_id b )
  {
    require_boolean( a, "AND" );
    require_boolean( b, "AND" );
    return append( gate{ gate_kind::and_gate, { a, b } }, 1u + std::max( levels_[a], levels_[b] ) );
  }

  gate_id create_not( gate_id a )
  {
    require_boolean( a, "NOT" );
    if ( not_of_[a] != invalid_gate )
      return not_of_[a];
    auto const id = append( gate{ gate_kind::not_gate, { a, invalid_gate } }, 1u + levels_[a] );
    not_of_[a] = id;
    return id;
  }

  /*! \brief Returns `a` or a (shared) NOT of `a`. */
  gate_id create_signal( signal s )
  {
    return s.positive ? s.gate : create_not( s.gate );
  }

  /*! \brief Exposes `a AND b` as a sink; identical operand pairs are reused. */
  gate_id create_virtual_and( gate_id a, gate_id b )
  {
    check_id( a );
    check_id( b );
    if ( gates_[a].kind == gate_kind::virtual_div || gates_[b].kind == gate_kind::virtual_div )
      throw invalid_operand_error( "virtual AND cannot consume a virtual DIV gate" );
    auto const key = pair_key( a, b );
    if ( auto it = virtual_and_of_.find( key ); it != virtual_and_of_.end() )
      return it->second;
    auto const id = append( gate{ gate_kind::virtual_and, { a, b } }, 1u + std::max( levels_[a], levels_[b] ) );
    virtual_and_of_.emplace( key, id );
    return id;
  }

  /*! \brief Fanin order is (numerator, denominator); the numerator must be a virtual AND over the denominator. */
  gate_id create_virtual_div( gate_id joint, gate_id condition )
  {
    check_id( joint );
    check_id( condition );
    if ( gates_[joint].kind != gate_kind::virtual_and || gates_[joint].inputs[1] != condition )
      throw invalid_operand_error( "virtual DIV numerator must be a virtual AND whose condition operand is the denominator" );
    auto const key = pair_key( joint, condition );
    if ( auto it = virtual_div_of_.find( key ); it != virtual_div_of_.end() )
      return it->second;
    auto const id = append( gate{ gate_kind::virtual_div, { joint, condition } }, 1u + std::max( levels_[joint], levels_[condition] ) );
    virtual_div_of_.emplace( key, id );
    return id;
  }

  void create_po( gate_id g )
  {
    require_boolean( g, "PO" );
    pos_.push_back( g );
  }

  std::size_t size() const noexcept { return gates_.size(); }
  gate const& at( gate_id g ) const
  {
    check_id( g );
    return gates_[g];
  }
  gate const& operator[]( gate_id g ) const noexcept { return gates_[g]; }
  gate_kind kind( gate_id g ) const noexcept { return gates_[g].kind; }
  std::span<const gate_id> fanins( gate_id g ) const noexcept { return gates_[g].fanins(); }
  std::span<const gate_id> fanouts( gate_id g ) const noexcept { return fanouts_[g]; }
  std::uint32_t level( gate_id g ) const noexcept { return levels_[g]; }
  std::span<const std::uint32_t> levels() const noexcept { return levels_; }
  std::span<const gate> gates() const noexcept { return gates_; }
  std::span<const gate_id> pis() const noexcept { return pis_; }
  std::span<const gate_id> pos() const noexcept { return pos_; }
  std::size_t num_pis() const noexcept { return pis_.size(); }
  std::size_t num_pos() const noexcept { return pos_.size(); }
  bool is_valid( gate_id g ) const noexcept { return g < gates_.size(); }
  bool is_virtual( gate_id g ) const noexcept { return cascad::is_virtual( gates_[g].kind ); }
  std::optional<gate_id> constant0() const noexcept
  {
    return const0_ == invalid_gate ? std::nullopt : std::optional<gate_id>{ const0_ };
  }

  std::optional<gate_id> find_not( gate_id g ) const noexcept
  {
    return not_of_[g] == invalid_gate ? std::nullopt : std::optional<gate_id>{ not_of_[g] };
  }
  std::optional<gate_id> find_virtual_and( gate_id a, gate_id b ) const
  {
    auto it = virtual_and_of_.find( pair_key( a, b ) );
    return it == virtual_and_of_.end() ? std::nullopt : std::optional<gate_id>{ it->second };
  }
  std::optional<gate_id> find_virtual_div( gate_id joint, gate_id condition ) const
  {
    auto it = virtual_div_of_.find( pair_key( joint, condition ) );
    return it == virtual_div_of_.end() ? std::nullopt : std::optional<gate_id>{ it->second };
  }

  std::uint32_t depth() const noexcept
  {
    std::uint32_t d = 0;
    for ( auto l : levels_ )
      d = std::max( d, l );
    return d;
  }

  std::size_t count( gate_kind k ) const noexcept
  {
    return static_cast<std::size_t>( std::count_if( gates_.begin(), gates_.end(), [k]( auto const& g ) { return g.kind == k; } ) );
  }

  bool has_virtual_gates() const noexcept
  {
    return count( gate_kind::virtual_and ) + count( gate_kind::virtual_div ) > 0u;
  }

  std::size_t num_fanouts( gate_id g, bool include_virtual = true ) const noexcept
  {
    if ( include_virtual )
      return fanouts_[g].size();
    return static_cast<std::size_t>( std::count_if( fanouts_[g].begin(), fanouts_[g].end(), [this]( gate_id u ) { return !is_virtual( u ); } ) );
  }

private:
  static std::uint64_t pair_key( gate_id a, gate_id b ) noexcept
  {
    return ( std::uint64_t{ a } << 32 ) | b;
  }

  void check_id( gate_id g ) const
  {
    if ( g >= gates_.size() )
      throw invalid_operand_error( "gate id " + std::to_string( g ) + " out of range" );
  }

  void require_boolean( gate_id g, char const* consumer ) const
  {
    check_id( g );
    if ( cascad::is_virtual( gates_[g].kind ) )
      throw invalid_operand_error( std::string( consumer ) + " cannot consume virtual gate " + std::to_string( g ) );
  }

  gate_id append( gate g, std::uint32_t level )
  {
    auto const id = static_cast<gate_id>( gates_.size() );
    gates_.push_back( g );
    levels_.push_back( level );
    fanouts_.emplace_back();
    not_of_.push_back( invalid_gate );
    gate_id last = invalid_gate;
    for ( auto f : g.fanins() )
    {
      if ( f != last )
        fanouts_[f].push_back( id );
      last = f;
    }
    return id;
  }

  std::vector<gate> gates_;
  std::vector<std::uint32_t> levels_;
  std::vector<std::vector<gate_id>> fanouts_;
  std::vector<gate_id> not_of_;
  std::vector<gate_id> pis_;
  std::vector<gate_id> pos_;
  gate_id const0_{ invalid_gate };
  std::unordered_map<std::uint64_t, gate_id> virtual_and_of_;
  std::unordered_map<std::uint64_t, gate_id> virtual_div_of_;
};

/*! \brief A gate in a possibly unordered netlist, as read from a file. */
struct raw_gate
{
  gate_kind kind{ gate_kind::pi };
  std::vector<std::uint32_t> fanins;
};

namespace detail
{

/* Iterative DFS returning a topological order; throws `cycle_error` naming one cycle. */
inline std::vector<std::uint32_t> topological_order( std::span<const raw_gate> gates )
{
  auto const n = gates.size();
  enum : std::uint8_t { unvisited, on_stack, done };
  std::vector<std::uint8_t> state( n, unvisited );
  std::vector<std::uint32_t> order;
  order.reserve( n );
  std::vector<std::pair<std::uint32_t, std::size_t>> stack;

  for ( std::uint32_t root = 0; root < n; ++root )
  {
    if ( state[root] != unvisited )
      continue;
    stack.emplace_back( root, 0u );
    state[root] = on_stack;
    while ( !stack.empty() )
    {
      auto& [g, next] = stack.back();
      auto const& fanins = gates[g].fanins;
      if ( next < fanins.size() )
      {
        auto const f = fanins[next++];
        if ( f >= n )
          throw parse_error( "gate " + std::to_string( g ) + " references unknown gate " + std::to_string( f ) );
        if ( state[f] == on_stack )
        {
          std::string msg = "cycle detected:";
          auto it = std::find_if( stack.begin(), stack.end(), [f]( auto const& e ) { return e.first == f; } );
          for ( ; it != stack.end(); ++it )
            msg += " " + std::to_string( it->first ) + " ->";
          msg += " " + std::to_string( f );
          throw cycle_error( msg );
        }
        if ( state[f] == unvisited )
        {
          state[f] = on_stack;
          stack.emplace_back( f, 0u );
        }
      }
      else
      {
        state[g] = done;
        order.push_back( g );
        stack.pop_back();
      }
    }
  }
  return order;
}

} // namespace detail

/*! \brief Levels of an arbitrary-order netlist: 0 for sources, else 1 + max fanin level.
 *
 * NOT gates count as one level.  Throws `cycle_error` on cyclic input.
 */
inline std::vector<std::uint32_t> levelize( std::span<const raw_gate> gates )
{
  std::vector<std::uint32_t> level( gates.size(), 0u );
  for ( auto g : detail::topological_order( gates ) )
  {
    if ( gates[g].fanins.empty() )
      continue;
    std::uint32_t l = 0;
    for ( auto f : gates[g].fanins )
      l = std::max( l, level[f] );
    level[g] = l + 1u;
  }
  return level;
}

/*! \brief Recomputes the levels of a circuit from its fanins. */
inline std::vector<std::uint32_t> levelize( circuit const& c )
{
  std::vector<std::uint32_t> level( c.size(), 0u );
  for ( gate_id g = 0; g < c.size(); ++g )
  {
    auto fanins = c.fanins( g );
    if ( fanins.empty() )
      continue;
    std::uint32_t l = 0;
    for ( auto f : fanins )
      l = std::max( l, level[f] );
    level[g] = l + 1u;
  }
  return level;
}

enum class cone_direction
{
  fanin,
  fanout
};

struct cone
{
  std::vector<gate_id> members; /* sorted ascending */
  gate_id root{ invalid_gate };
  cone_direction direction{ cone_direction::fanin };
  std::optional<std::uint32_t> depth_bound;

  bool contains( gate_id g ) const noexcept
  {
    return std::binary_search( members.begin(), members.end(), g );
  }
  std::size_t size() const noexcept { return members.size(); }
};

namespace detail
{

template<typename Next>
cone bounded_search( circuit const& c, gate_id root, std::optional<std::uint32_t> depth_bound, cone_direction dir, Next&& next )
{
  if ( !c.is_valid( root ) )
    throw invalid_operand_error( "cone root " + std::to_string( root ) + " out of range" );
  std::vector<std::uint32_t> dist( c.size(), std::numeric_limits<std::uint32_t>::max() );
  std::deque<gate_id> queue{ root };
  dist[root] = 0u;
  cone result{ {}, root, dir, depth_bound };
  while ( !queue.empty() )
  {
    auto const g = queue.front();
    queue.pop_front();
    result.members.push_back( g );
    if ( depth_bound && dist[g] >= *depth_bound )
      continue;
    for ( auto u : next( g ) )
    {
      if ( dist[u] == std::numeric_limits<std::uint32_t>::max() )
      {
        dist[u] = dist[g] + 1u;
        queue.push_back( u );
      }
    }
  }
  std::sort( result.members.begin(), result.members.end() );
  return result;
}

} // namespace detail

/*! \brief Gates reachable backward from `root` within `depth_bound` edges (unbounded if absent). */
inline cone fanin_cone( circuit const& c, gate_id root, std::optional<std::uint32_t> depth_bound = std::nullopt )
{
  return detail::bounded_search( c, root, depth_bound, cone_direction::fanin, [&c]( gate_id g ) { return c.fanins( g ); } );
}

/*! \brief Gates reachable forward from `root` within `depth_bound` edges. */
inline cone fanout_cone( circuit const& c, gate_id root, std::optional<std::uint32_t> depth_bound = std::nullopt )
{
  return detail::bounded_search( c, root, depth_bound, cone_direction::fanout, [&c]( gate_id g ) { return c.fanouts( g ); } );
}

/*! \brief Copies the Boolean part of `c` into `dest`, mapping PIs to `pi_map`.
 *
 * Returns the old-to-new gate mapping; virtual gates map to `invalid_gate`.
 */
inline std::vector<gate_id> copy_boolean_gates( circuit const& c, circuit& dest, std::span<const gate_id> pi_map )
{
  if ( pi_map.size() != c.num_pis() )
    throw shape_error( "PI map size does not match circuit PI count" );
  std::vector<gate_id> map( c.size(), invalid_gate );
  std::size_t next_pi = 0;
  for ( gate_id g = 0; g < c.size(); ++g )
  {
    auto const& gt = c[g];
    switch ( gt.kind )
    {
    case gate_kind::pi:
      map[g] = pi_map[next_pi++];
      break;
    case gate_kind::const0:
      map[g] = dest.get_constant0();
      break;
    case gate_kind::and_gate:
      map[g] = dest.create_and( map[gt.inputs[0]], map[gt.inputs[1]] );
      break;
    case gate_kind::not_gate:
      map[g] = dest.create_not( map[gt.inputs[0]] );
      break;
    default:
      break;
    }
  }
  return map;
}

} // namespace cascad
