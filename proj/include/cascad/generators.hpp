#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <tuple>
#include <utility>
#include <vector>

#include "circuit.hpp"
#include "miter.hpp"

namespace cascad
{

struct random_aig_params
{
  std::size_t num_pis{ 8 };
  std::size_t num_ands{ 64 };
  std::size_t num_pos{ 1 };
  /* fanins are drawn from the most recent `window` signals, which controls depth */
  std::size_t window{ 24 };
  double inversion_rate{ 0.4 };
};

/*! \brief Seeded random AIG; POs are the last `num_pos` AND gates. */
inline circuit random_aig( random_aig_params const& p, std::uint64_t seed )
{
  std::mt19937_64 rng( seed );
  circuit c;
  std::vector<gate_id> signals;
  for ( std::size_t i = 0; i < p.num_pis; ++i )
    signals.push_back( c.create_pi() );
  std::bernoulli_distribution invert( p.inversion_rate );
  std::vector<gate_id> ands;
  for ( std::size_t i = 0; i < p.num_ands; ++i )
  {
    auto const lo = signals.size() > p.window ? signals.size() - p.window : 0u;
    std::uniform_int_distribution<std::size_t> pick( lo, signals.size() - 1 );
    auto a = signals[pick( rng )];
    auto b = signals[pick( rng )];
    // reach back to the PIs now and then so they all stay in use
    if ( rng() % 4u == 0 )
      b = signals[rng() % p.num_pis];
    if ( a == b && signals.size() > 1 )
      b = signals[( pick( rng ) + 1 ) % signals.size()];
    if ( invert( rng ) )
      a = c.create_not( a );
    if ( invert( rng ) )
      b = c.create_not( b );
    auto const g = c.create_and( a, b );
    signals.push_back( g );
    ands.push_back( g );
  }
  auto const num_pos = std::min( p.num_pos, ands.size() );
  for ( std::size_t i = ands.size() - num_pos; i < ands.size(); ++i )
    c.create_po( ( rng() & 1u ) ? c.create_not( ands[i] ) : ands[i] );
  if ( ands.empty() )
    c.create_po( signals.front() );
  return c;
}

/*! \brief Unsigned `bits` x `bits` array multiplier with 2*bits outputs.
 *
 * PIs are a0..a(n-1) followed by b0..b(n-1).  With `swap_operands` the
 * partial-product array is built as b*a, which is functionally identical
 * but structurally different.
 */
inline circuit array_multiplier( std::size_t bits, bool swap_operands = false )
{
  circuit c;
  std::vector<gate_id> a, b;
  for ( std::size_t i = 0; i < bits; ++i )
    a.push_back( c.create_pi() );
  for ( std::size_t i = 0; i < bits; ++i )
    b.push_back( c.create_pi() );
  if ( swap_operands )
    std::swap( a, b );

  auto full_add = [&c]( gate_id x, gate_id y, gate_id z ) {
    auto const t = create_xor( c, x, y );
    auto const sum = create_xor( c, t, z );
    auto const carry = create_or( c, c.create_and( x, y ), c.create_and( t, z ) );
    return std::pair{ sum, carry };
  };
  auto half_add = [&c]( gate_id x, gate_id y ) {
    return std::pair{ create_xor( c, x, y ), c.create_and( x, y ) };
  };

  // row accumulation: acc holds the running sum bits for the current window
  std::vector<gate_id> outputs;
  std::vector<gate_id> acc;
  for ( std::size_t j = 0; j < bits; ++j )
    acc.push_back( c.create_and( a[j], b[0] ) );
  outputs.push_back( acc[0] );
  for ( std::size_t i = 1; i < bits; ++i )
  {
    std::vector<gate_id> next;
    gate_id carry = invalid_gate;
    for ( std::size_t j = 0; j < bits; ++j )
    {
      auto const pp = c.create_and( a[j], b[i] );
      auto const upper = j + 1 < acc.size() ? acc[j + 1] : invalid_gate;
      gate_id sum = pp;
      if ( upper != invalid_gate && carry != invalid_gate )
        std::tie( sum, carry ) = full_add( pp, upper, carry );
      else if ( upper != invalid_gate )
        std::tie( sum, carry ) = half_add( pp, upper );
      else if ( carry != invalid_gate )
        std::tie( sum, carry ) = half_add( pp, carry );
      next.push_back( sum );
    }
    next.push_back( carry == invalid_gate ? c.get_constant0() : carry );
    outputs.push_back( next[0] );
    acc = next;
  }
  for ( std::size_t j = 1; j < acc.size(); ++j )
    outputs.push_back( acc[j] );
  if ( bits == 1 )
    outputs.push_back( c.get_constant0() );
  for ( auto o : outputs )
    c.create_po( o );
  return c;
}

/*! \brief Ripple-carry adder with PIs a0..a(n-1), b0..b(n-1) and n+1 outputs. */
inline circuit ripple_carry_adder( std::size_t bits )
{
  circuit c;
  std::vector<gate_id> a, b;
  for ( std::size_t i = 0; i < bits; ++i )
    a.push_back( c.create_pi() );
  for ( std::size_t i = 0; i < bits; ++i )
    b.push_back( c.create_pi() );
  gate_id carry = invalid_gate;
  for ( std::size_t i = 0; i < bits; ++i )
  {
    auto const t = create_xor( c, a[i], b[i] );
    if ( carry == invalid_gate )
    {
      c.create_po( t );
      carry = c.create_and( a[i], b[i] );
    }
    else
    {
      c.create_po( create_xor( c, t, carry ) );
      carry = create_or( c, c.create_and( a[i], b[i] ), c.create_and( t, carry ) );
    }
  }
  c.create_po( carry == invalid_gate ? c.get_constant0() : carry );
  return c;
}

} // namespace cascad
