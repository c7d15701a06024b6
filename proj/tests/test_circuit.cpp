#include <deque>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include <cascad/aiger.hpp>
#include <cascad/circuit.hpp>
#include <cascad/generators.hpp>
#include <cascad/miter.hpp>

#include "support/oracles.hpp"

using namespace cascad;

namespace
{

circuit and2()
{
  circuit c;
  auto a = c.create_pi(), b = c.create_pi();
  c.create_po( c.create_and( a, b ) );
  return c;
}

/* canonical form: kinds + fanins in gate order, PI/PO lists */
std::string shape( circuit const& c )
{
  std::string s;
  for ( gate_id g = 0; g < c.size(); ++g )
  {
    s += std::string( to_string( c.kind( g ) ) ) + "(";
    for ( auto f : c.fanins( g ) )
      s += std::to_string( f ) + ",";
    s += ")";
  }
  for ( auto p : c.pos() )
    s += " o" + std::to_string( p );
  return s;
}

std::set<gate_id> bfs( circuit const& c, gate_id root, bool forward, std::optional<unsigned> bound )
{
  std::set<gate_id> seen{ root };
  std::deque<std::pair<gate_id, unsigned>> q{ { root, 0u } };
  while ( !q.empty() )
  {
    auto [g, d] = q.front();
    q.pop_front();
    if ( bound && d == *bound )
      continue;
    auto next = forward ? c.fanouts( g ) : c.fanins( g );
    for ( auto u : next )
      if ( seen.insert( u ).second )
        q.emplace_back( u, d + 1 );
  }
  return seen;
}

} // namespace

TEST( Aiger, IdentityCircuit )
{
  auto c = parse_aiger( "aag 1 1 0 1 0\n2\n2\n" );
  ASSERT_EQ( c.num_pis(), 1u );
  ASSERT_EQ( c.num_pos(), 1u );
  EXPECT_EQ( c.pos()[0], c.pis()[0] );
  EXPECT_EQ( emit_aiger( c ), "aag 1 1 0 1 0\n2\n2\n" );
}

TEST( Aiger, SingleAnd )
{
  auto c = parse_aiger( "aag 3 2 0 1 1\n2\n4\n6\n6 2 4\n" );
  EXPECT_EQ( c.num_pis(), 2u );
  EXPECT_EQ( c.count( gate_kind::and_gate ), 1u );
  EXPECT_EQ( c.level( c.pos()[0] ), 1u );
  auto const text = emit_aiger( c );
  EXPECT_NE( text.find( "\n6 2 4\n" ), std::string::npos ) << text;
}

TEST( Aiger, InvertedEdgesBecomeSharedNots )
{
  // both the AND and the output consume !x
  auto c = parse_aiger( "aag 3 2 0 2 1\n2\n4\n6\n3\n6 3 4\n" );
  EXPECT_EQ( c.count( gate_kind::not_gate ), 1u );
  auto const n = *c.find_not( c.pis()[0] );
  EXPECT_EQ( c.pos()[1], n );
  EXPECT_EQ( c.level( c.pos()[0] ), 2u );
}

TEST( Aiger, ConstantFalse )
{
  auto c = parse_aiger( "aag 0 0 0 2 0\n0\n1\n" );
  ASSERT_TRUE( c.constant0() );
  EXPECT_EQ( c.pos()[0], *c.constant0() );
  EXPECT_EQ( c.kind( c.pos()[1] ), gate_kind::not_gate );
  EXPECT_EQ( parse_aiger( emit_aiger( c ) ).size(), c.size() );
}

TEST( Aiger, Errors )
{
  EXPECT_THROW( parse_aiger( "aag 1 1 0 1\n2\n2\n" ), parse_error );
  EXPECT_THROW( parse_aiger( "aag 2 1 1 1 0\n2\n4 2\n4\n" ), parse_error );
  EXPECT_THROW( parse_aiger( "aag 1 1 0 1 0\n2\n8\n" ), parse_error );
  EXPECT_THROW( parse_aiger( "xyz 1 1 0 1 0\n" ), parse_error );
  try
  {
    parse_aiger( "aag 3 2 0 1 1\n2\n4\n6\n6 2 10\n" );
    FAIL();
  }
  catch ( parse_error const& e )
  {
    EXPECT_NE( std::string( e.what() ).find( "line" ), std::string::npos ) << e.what();
  }
}

TEST( Aiger, BinaryRoundTrip )
{
  random_aig_params p;
  p.num_pis = 10;
  p.num_ands = 120;
  p.num_pos = 3;
  auto const c = random_aig( p, 5 );
  auto const bin = emit_aiger( c, aiger_format::binary );
  ASSERT_EQ( bin.rfind( "aig ", 0 ), 0u );
  auto const back = parse_aiger( bin );
  EXPECT_TRUE( oracle::functionally_equal( c, back ) );
  EXPECT_EQ( emit_aiger( back, aiger_format::binary ), bin );
}

TEST( Aiger, RandomRoundTripIsStructuralFixpoint )
{
  for ( std::uint64_t seed = 0; seed < 20; ++seed )
  {
    random_aig_params p;
    p.num_pis = 12;
    p.num_ands = seed < 10 ? 180 : 330;
    p.num_pos = 2;
    auto const once = parse_aiger( emit_aiger( random_aig( p, seed ) ) );
    auto const twice = parse_aiger( emit_aiger( once ) );
    EXPECT_GE( once.size(), seed < 10 ? 190u : 340u );
    EXPECT_EQ( shape( once ), shape( twice ) ) << seed;
    EXPECT_TRUE( oracle::functionally_equal( once, twice ) );
  }
}

TEST( Aiger, VirtualGatesCannotBeEmitted )
{
  auto c = and2();
  c.create_virtual_and( c.pis()[0], c.pis()[1] );
  EXPECT_THROW( emit_aiger( c ), unsupported_error );
}

TEST( Levels, LevelLaw )
{
  circuit c;
  auto a = c.create_pi(), b = c.create_pi();
  auto x = c.create_and( a, b );
  auto n = c.create_not( x );
  EXPECT_EQ( c.level( a ), 0u );
  EXPECT_EQ( c.level( x ), 1u );
  EXPECT_EQ( c.level( n ), 2u );

  gate_id chain = c.create_pi();
  for ( int i = 0; i < 10; ++i )
    chain = c.create_and( chain, c.create_pi() );
  EXPECT_EQ( c.level( chain ), 10u );

  random_aig_params p;
  p.num_ands = 300;
  auto const r = random_aig( p, 9 );
  auto const recomputed = levelize( r );
  for ( gate_id g = 0; g < r.size(); ++g )
  {
    EXPECT_EQ( recomputed[g], r.level( g ) );
    for ( auto f : r.fanins( g ) )
      EXPECT_LT( f, g );
  }
}

TEST( Levels, CycleDetected )
{
  std::vector<raw_gate> g{ { gate_kind::pi, {} }, { gate_kind::and_gate, { 0, 2 } }, { gate_kind::not_gate, { 1 } } };
  try
  {
    levelize( g );
    FAIL();
  }
  catch ( cycle_error const& e )
  {
    std::string const msg = e.what();
    EXPECT_NE( msg.find( '1' ), std::string::npos );
    EXPECT_NE( msg.find( '2' ), std::string::npos );
  }

  std::vector<raw_gate> ok{ { gate_kind::not_gate, { 2 } }, { gate_kind::pi, {} }, { gate_kind::and_gate, { 1, 1 } } };
  EXPECT_EQ( levelize( ok ), ( std::vector<std::uint32_t>{ 2, 0, 1 } ) );
}

TEST( Cones, Trivial )
{
  auto c = and2();
  auto const pi = c.pis()[0];
  EXPECT_EQ( fanin_cone( c, pi ).members, std::vector<gate_id>{ pi } );
  EXPECT_EQ( fanin_cone( c, c.pos()[0] ).members, ( std::vector<gate_id>{ 0, 1, 2 } ) );
  EXPECT_EQ( fanout_cone( c, c.pos()[0], 5 ).members, std::vector<gate_id>{ c.pos()[0] } );

  circuit d;
  auto r = d.create_pi();
  auto n = d.create_not( r );
  d.create_and( n, d.create_pi() );
  EXPECT_EQ( fanout_cone( d, r, 1 ).members, ( std::vector<gate_id>{ r, n } ) );
}

TEST( Cones, MatchBfsOracle )
{
  random_aig_params p;
  p.num_pis = 12;
  p.num_ands = 190;
  for ( std::uint64_t seed = 0; seed < 5; ++seed )
  {
    auto const c = random_aig( p, seed );
    std::mt19937_64 rng( seed );
    for ( int k = 0; k < 20; ++k )
    {
      gate_id const root = rng() % c.size();
      std::optional<unsigned> bound;
      if ( k % 2 )
        bound = static_cast<unsigned>( rng() % 6 );
      auto const in = bfs( c, root, false, bound );
      auto const out = bfs( c, root, true, bound );
      EXPECT_EQ( fanin_cone( c, root, bound ).members, std::vector<gate_id>( in.begin(), in.end() ) );
      EXPECT_EQ( fanout_cone( c, root, bound ).members, std::vector<gate_id>( out.begin(), out.end() ) );
      EXPECT_TRUE( fanin_cone( c, root, bound ).contains( root ) );
    }
  }
}

TEST( Miter, SelfMiterIsUnsat )
{
  random_aig_params p;
  p.num_pis = 8;
  p.num_ands = 60;
  p.num_pos = 2;
  auto const c = random_aig( p, 1 );
  auto const m = build_miter( c, c );
  EXPECT_EQ( m.num_pos(), 1u );
  EXPECT_EQ( m.num_pis(), c.num_pis() );
  EXPECT_FALSE( oracle::circuit_witness( m ) );
  for ( gate_id g = 0; g < m.size(); ++g )
    EXPECT_TRUE( m.kind( g ) == gate_kind::pi || m.kind( g ) == gate_kind::and_gate || m.kind( g ) == gate_kind::not_gate );
}

TEST( Miter, DoubleNegation )
{
  auto const left = and2();
  circuit right;
  auto a = right.create_pi(), b = right.create_pi();
  right.create_po( right.create_not( right.create_not( right.create_and( a, b ) ) ) );
  EXPECT_FALSE( oracle::circuit_witness( build_miter( left, right ) ) );
}

TEST( Miter, DifferingCircuitsHaveWitness )
{
  auto const left = and2();
  circuit right;
  auto a = right.create_pi(), b = right.create_pi();
  right.create_po( right.create_and( a, right.create_not( b ) ) );
  auto const m = build_miter( left, right );
  std::set<std::vector<bool>> witnesses;
  for ( std::uint64_t r = 0; r < 4; ++r )
  {
    auto const in = oracle::row_inputs( 2, r );
    if ( oracle::eval( m, in )[m.pos()[0]] )
      witnesses.insert( in );
  }
  EXPECT_EQ( witnesses, ( std::set<std::vector<bool>>{ { true, false }, { true, true } } ) );
}

TEST( Miter, ShapeMismatch )
{
  circuit three;
  three.create_po( three.create_and( three.create_pi(), three.create_and( three.create_pi(), three.create_pi() ) ) );
  EXPECT_THROW( build_miter( and2(), three ), shape_error );
}

TEST( Miter, SoundnessOnRandomPairs )
{
  random_aig_params p;
  p.num_pis = 6;
  p.num_ands = 25;
  for ( std::uint64_t seed = 0; seed < 30; ++seed )
  {
    auto const l = random_aig( p, seed ), r = random_aig( p, seed + 1000 );
    EXPECT_EQ( oracle::circuit_witness( build_miter( l, r ) ).has_value(), !oracle::functionally_equal( l, r ) );
  }
}

TEST( Mutate, FlipInversionOnAnd )
{
  auto const m = mutate_circuit( and2(), 3, mutation_kind::flip_inversion );
  auto const& r = m.result;
  EXPECT_EQ( r.count( gate_kind::and_gate ), 1u );
  EXPECT_EQ( r.count( gate_kind::not_gate ), 1u );
  auto const po = r.pos()[0];
  auto const f = r.fanins( po );
  EXPECT_TRUE( r.kind( f[0] ) == gate_kind::not_gate || r.kind( f[1] ) == gate_kind::not_gate );
  EXPECT_FALSE( oracle::functionally_equal( and2(), r ) );
}

TEST( Mutate, DeterministicAndUsuallyEffective )
{
  // every AND of a multiplier is observable, so most mutations change the function
  auto const c = array_multiplier( 4 );
  int effective = 0;
  for ( std::uint64_t seed = 0; seed < 40; ++seed )
  {
    auto const a = mutate_circuit( c, seed ), b = mutate_circuit( c, seed );
    EXPECT_EQ( shape( a.result ), shape( b.result ) );
    EXPECT_EQ( a.describe(), b.describe() );
    EXPECT_EQ( levelize( a.result ), std::vector<std::uint32_t>( a.result.levels().begin(), a.result.levels().end() ) );
    bool const differs = !oracle::functionally_equal( c, a.result );
    effective += differs ? 1 : 0;
    EXPECT_EQ( oracle::circuit_witness( build_miter( c, a.result ) ).has_value(), differs );
  }
  EXPECT_GT( effective, 10 );
}

TEST( Mutate, SitesFeedAnOutput )
{
  random_aig_params p;
  p.num_pis = 8;
  p.num_ands = 60;
  for ( std::uint64_t seed = 0; seed < 30; ++seed )
  {
    auto const c = random_aig( p, seed );
    auto const cone = fanin_cone( c, c.pos()[0] ).members;
    auto const m = mutate_circuit( c, seed );
    EXPECT_TRUE( std::binary_search( cone.begin(), cone.end(), m.site ) ) << seed;
  }
}

TEST( Mutate, NoSite )
{
  circuit c;
  c.create_po( c.create_not( c.create_pi() ) );
  EXPECT_THROW( mutate_circuit( c, 0 ), invalid_operand_error );
}

TEST( Rewrite, PreservesFunction )
{
  random_aig_params p;
  p.num_pis = 9;
  p.num_ands = 70;
  auto const c = random_aig( p, 4 );
  std::mt19937_64 rng( 1 );
  for ( auto k : { rewrite_kind::double_negation_insert, rewrite_kind::double_negation_remove, rewrite_kind::reassociate, rewrite_kind::commute } )
  {
    auto cur = c;
    for ( int i = 0; i < 5; ++i )
      if ( auto next = rewrite_once( cur, k, rng ) )
        cur = std::move( *next );
    EXPECT_TRUE( oracle::functionally_equal( c, cur ) ) << to_string( k );
  }
}

TEST( Generators, ArithmeticIsRight )
{
  auto const m = array_multiplier( 3 );
  auto const add = ripple_carry_adder( 3 );
  for ( std::uint64_t r = 0; r < 64; ++r )
  {
    auto const in = oracle::row_inputs( 6, r );
    unsigned a = 0, b = 0;
    for ( int i = 0; i < 3; ++i )
    {
      a |= static_cast<unsigned>( in[i] ) << i;
      b |= static_cast<unsigned>( in[3 + i] ) << i;
    }
    auto const vm = oracle::eval( m, in ), va = oracle::eval( add, in );
    unsigned prod = 0, sum = 0;
    for ( std::size_t k = 0; k < m.num_pos(); ++k )
      prod |= static_cast<unsigned>( vm[m.pos()[k]] ) << k;
    for ( std::size_t k = 0; k < add.num_pos(); ++k )
      sum |= static_cast<unsigned>( va[add.pos()[k]] ) << k;
    EXPECT_EQ( prod, a * b ) << r;
    EXPECT_EQ( sum, a + b ) << r;
  }
  EXPECT_TRUE( oracle::functionally_equal( array_multiplier( 3 ), array_multiplier( 3, true ) ) );
}
