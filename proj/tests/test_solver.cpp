#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include <cascad/solver.hpp>

#include "support/oracles.hpp"

using namespace cascad;

namespace
{

std::vector<bool> model_bits( std::uint64_t a, unsigned nv )
{
  std::vector<bool> m( nv + 1u, false );
  for ( unsigned v = 1; v <= nv; ++v )
    m[v] = ( a >> ( v - 1 ) ) & 1u;
  return m;
}

bool verifies( cnf_formula const& f, std::vector<bool> const& m )
{
  return std::all_of( f.clauses.begin(), f.clauses.end(), [&]( clause_t const& c ) { return satisfies( m, c ); } );
}

/* Pigeons p in [0, n], holes h in [0, n): variable p * n + h + 1. */
cnf_formula pigeonhole( unsigned n )
{
  cnf_formula f;
  auto x = [&]( unsigned p, unsigned h ) { return lit( p * n + h + 1, false ); };
  for ( unsigned p = 0; p <= n; ++p )
  {
    clause_t c;
    for ( unsigned h = 0; h < n; ++h )
      c.push_back( x( p, h ) );
    f.add_clause( c );
  }
  for ( unsigned h = 0; h < n; ++h )
    for ( unsigned p = 0; p <= n; ++p )
      for ( unsigned q = p + 1; q <= n; ++q )
        f.add_clause( { ~x( p, h ), ~x( q, h ) } );
  return f;
}

struct checked_run
{
  solve_outcome outcome;
  oracle::drat_verdict proof;
};

checked_run solve_checked( cnf_formula const& f, solver_config cfg, bool binary )
{
  std::ostringstream drat;
  cfg.drat = &drat;
  cfg.drat_binary = binary;
  checked_run r{ solve( f, cfg ), {} };
  if ( r.outcome.status == solve_status::unsat )
  {
    auto const steps = binary ? oracle::parse_drat_binary( drat.str() ) : oracle::parse_drat_ascii( drat.str() );
    r.proof = oracle::check_drat( oracle::to_ints( f ), steps );
  }
  return r;
}

} // namespace

TEST( Luby, Prefix )
{
  std::vector<std::uint64_t> const want{ 1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8, 1 };
  for ( std::size_t i = 0; i < want.size(); ++i )
    EXPECT_EQ( luby( i ), want[i] ) << i;
}

TEST( Solve, Trivial )
{
  cnf_formula empty;
  auto r = solve( empty );
  EXPECT_EQ( r.status, solve_status::sat );
  cnf_formula free;
  free.num_vars = 4;
  r = solve( free );
  ASSERT_EQ( r.status, solve_status::sat );
  EXPECT_EQ( r.model->size(), 5u );

  cnf_formula contra;
  contra.add_clause( { lit( 1, false ) } );
  contra.add_clause( { lit( 1, true ) } );
  for ( bool binary : { false, true } )
  {
    auto const c = solve_checked( contra, {}, binary );
    EXPECT_EQ( c.outcome.status, solve_status::unsat );
    EXPECT_TRUE( c.proof.ok ) << c.proof.why;
  }
}

TEST( Solve, RejectsOutOfRangeLiterals )
{
  cnf_formula f;
  f.add_clause( { lit( 3, false ) } );
  f.num_vars = 2;
  EXPECT_THROW( solver{ f }, invalid_operand_error );
  solver_config cfg;
  cfg.var_decay = 1.0;
  EXPECT_THROW( cfg.validate(), invalid_operand_error );
  cfg = {};
  cfg.conflict_budget = 0;
  EXPECT_THROW( cfg.validate(), invalid_operand_error );
}

TEST( Solve, RandomAgainstEnumeration )
{
  std::mt19937_64 rng( 2024 );
  int sat = 0, unsat = 0;
  for ( int k = 0; k < 300; ++k )
  {
    unsigned const nv = 5 + rng() % 16;
    auto const ints = oracle::random_3cnf( rng, nv, static_cast<unsigned>( nv * ( 3.6 + 1.4 * ( rng() % 100 ) / 100.0 ) ) );
    auto const f = oracle::from_ints( ints, nv );
    auto const want = oracle::enumerate_sat( ints, nv );
    solver_config cfg;
    cfg.seed = k % 3;
    cfg.reduce_interval = 20;
    cfg.reduce_increment = 5;
    cfg.restart_unit = 4;
    auto const r = solve_checked( f, cfg, k % 2 == 1 );
    ASSERT_EQ( r.outcome.status, want ? solve_status::sat : solve_status::unsat ) << k;
    if ( want )
    {
      ++sat;
      EXPECT_TRUE( verifies( f, *r.outcome.model ) );
    }
    else
    {
      ++unsat;
      EXPECT_TRUE( r.proof.ok ) << k << ": " << r.proof.why;
    }
  }
  EXPECT_GT( sat, 30 );
  EXPECT_GT( unsat, 30 );
}

TEST( Solve, PigeonholeProof )
{
  solver_config cfg;
  cfg.reduce_interval = 30;
  cfg.reduce_increment = 10;
  for ( bool binary : { false, true } )
  {
    auto const r = solve_checked( pigeonhole( 6 ), cfg, binary );
    ASSERT_EQ( r.outcome.status, solve_status::unsat );
    EXPECT_GT( r.outcome.stats.reductions, 0u );
    EXPECT_GT( r.outcome.stats.deleted_clauses, 0u );
    EXPECT_TRUE( r.proof.ok ) << r.proof.why;
  }
}

TEST( Solve, Deterministic )
{
  auto const f = pigeonhole( 5 );
  for ( std::uint64_t seed : { 0u, 7u } )
  {
    solver_config cfg;
    cfg.seed = seed;
    auto const a = solve( f, cfg ), b = solve( f, cfg );
    EXPECT_TRUE( a.stats.same_search( b.stats ) );
  }
}

TEST( Solve, ConflictBudgetAndResume )
{
  auto const f = pigeonhole( 6 );
  solver s( f );
  auto r = s.solve( search_limits{ 100, std::nullopt } );
  ASSERT_EQ( r.status, solve_status::unknown );
  EXPECT_EQ( r.stats.conflicts, 100u );
  EXPECT_EQ( s.decision_level(), 0u );
  r = s.solve( search_limits{ 50, std::nullopt } );
  EXPECT_EQ( r.stats.conflicts, 150u );
  r = s.solve( search_limits{} );
  EXPECT_EQ( r.status, solve_status::unsat );
  // a concluded solver keeps its answer
  EXPECT_EQ( s.solve().status, solve_status::unsat );
}

TEST( Solve, TimeBudget )
{
  solver_config cfg;
  cfg.time_budget = 0.2;
  auto const t0 = std::chrono::steady_clock::now();
  auto const r = solve( pigeonhole( 10 ), cfg );
  EXPECT_EQ( r.status, solve_status::unknown );
  EXPECT_LT( std::chrono::duration<double>( std::chrono::steady_clock::now() - t0 ).count(), 2.0 );
}

TEST( Propagation, MatchesNaiveClosure )
{
  std::mt19937_64 rng( 5 );
  int compared = 0;
  for ( int k = 0; k < 300; ++k )
  {
    unsigned const nv = 8 + rng() % 10;
    auto const ints = oracle::random_3cnf( rng, nv, nv * 3, 2 + rng() % 2 );
    auto const f = oracle::from_ints( ints, nv );
    solver s( f );
    if ( !s.okay() || s.propagate() )
      continue;
    std::map<int, int> assigned;
    for ( auto l : s.trail() )
      assigned[static_cast<int>( l.var() )] = l.negated() ? -1 : 1;
    for ( unsigned step = 0; step < 4; ++step )
    {
      std::vector<lit> free;
      for ( var_t v = 1; v <= nv; ++v )
        if ( s.value( lit( v, false ) ) == 0 )
          free.push_back( lit( v, rng() & 1u ) );
      if ( free.empty() )
        break;
      auto const d = free[rng() % free.size()];
      s.assign_decision( d );
      assigned[static_cast<int>( d.var() )] = d.negated() ? -1 : 1;
      auto const confl = s.propagate();
      auto const want = oracle::naive_propagate( ints, assigned );
      ASSERT_EQ( confl.has_value(), want.conflict );
      ++compared;
      if ( confl )
        break;
      std::map<int, int> got;
      for ( auto l : s.trail() )
        got[static_cast<int>( l.var() )] = l.negated() ? -1 : 1;
      ASSERT_EQ( got, want.value );
      for ( auto l : s.trail() )
      {
        auto const r = s.reason( l.var() );
        if ( r == solver::no_reason )
          continue;
        auto const c = s.clause_literals( r );
        EXPECT_EQ( c[0], l );
        for ( std::size_t i = 1; i < c.size(); ++i )
          EXPECT_EQ( s.value( c[i] ), -1 );
      }
      assigned = got;
    }
  }
  EXPECT_GT( compared, 200 );
}

TEST( Analysis, AssertingAndImplied )
{
  std::mt19937_64 rng( 11 );
  int analysed = 0;
  for ( int k = 0; k < 400 && analysed < 150; ++k )
  {
    unsigned const nv = 8 + rng() % 6;
    auto const ints = oracle::random_3cnf( rng, nv, nv * 4 );
    solver s( oracle::from_ints( ints, nv ) );
    if ( !s.okay() || s.propagate() )
      continue;
    std::optional<solver::clause_ref> confl;
    while ( !confl )
    {
      auto d = s.decide();
      if ( !d )
        break;
      confl = s.propagate();
    }
    if ( !confl )
      continue;
    auto const a = s.analyze( *confl );
    ++analysed;
    oracle::clause learnt;
    for ( auto l : a.learnt )
      learnt.push_back( l.to_dimacs() );
    EXPECT_TRUE( oracle::implies( ints, learnt, nv ) );
    EXPECT_EQ( s.level( a.learnt[0].var() ), s.decision_level() );
    std::uint32_t max_rest = 0;
    for ( std::size_t i = 0; i < a.learnt.size(); ++i )
    {
      EXPECT_EQ( s.value( a.learnt[i] ), -1 );
      if ( i > 0 )
      {
        EXPECT_LT( s.level( a.learnt[i].var() ), s.decision_level() );
        max_rest = std::max( max_rest, s.level( a.learnt[i].var() ) );
      }
    }
    EXPECT_EQ( a.backjump_level, max_rest );
    EXPECT_GE( a.lbd, 1u );
    s.backtrack( a.backjump_level );
    EXPECT_EQ( s.value( a.learnt[0] ), 0 );
    for ( std::size_t i = 1; i < a.learnt.size(); ++i )
      EXPECT_EQ( s.value( a.learnt[i] ), -1 );
  }
  EXPECT_GT( analysed, 100 );
}

TEST( Hooks, PhaseChoiceIsHonoured )
{
  cnf_formula f;
  f.num_vars = 6;
  for ( auto choice : { phase_choice::zero, phase_choice::one } )
  {
    solver_hooks h;
    h.phase = [&]( var_t ) { return choice; };
    auto const r = solve( f, {}, h );
    ASSERT_EQ( r.status, solve_status::sat );
    for ( var_t v = 1; v <= 6; ++v )
      EXPECT_EQ( ( *r.model )[v], choice == phase_choice::one );
  }
  for ( auto ph : { default_phase::true_phase, default_phase::false_phase, default_phase::saved } )
  {
    solver_config cfg;
    cfg.phase = ph;
    solver_hooks h;
    h.phase = []( var_t ) { return phase_choice::abstain; };
    auto const r = solve( f, cfg, h );
    for ( var_t v = 1; v <= 6; ++v )
      EXPECT_EQ( ( *r.model )[v], ph == default_phase::true_phase );
  }
}

TEST( Hooks, ModelGuidedSearchHasNoConflicts )
{
  std::mt19937_64 rng( 99 );
  int tried = 0;
  for ( int k = 0; k < 100; ++k )
  {
    unsigned const nv = 12 + rng() % 8;
    auto const ints = oracle::random_3cnf( rng, nv, nv * 4 );
    auto const m = oracle::enumerate_sat( ints, nv );
    if ( !m )
      continue;
    ++tried;
    auto const bits = model_bits( *m, nv );
    solver_hooks h;
    h.phase = [&]( var_t v ) { return bits[v] ? phase_choice::one : phase_choice::zero; };
    auto const r = solve( oracle::from_ints( ints, nv ), {}, h );
    ASSERT_EQ( r.status, solve_status::sat );
    EXPECT_EQ( r.stats.conflicts, 0u );
  }
  EXPECT_GT( tried, 20 );
}

TEST( Hooks, RestartReportsDecisions )
{
  std::size_t calls = 0, with_decisions = 0;
  solver_hooks h;
  h.on_restart = [&]( std::span<const lit> decisions ) {
    ++calls;
    with_decisions += decisions.empty() ? 0u : 1u;
  };
  solver_config cfg;
  cfg.restart_unit = 2;
  auto const r = solve( pigeonhole( 6 ), cfg, h );
  EXPECT_EQ( r.status, solve_status::unsat );
  EXPECT_EQ( calls, r.stats.restarts );
  EXPECT_GT( with_decisions, 0u );
}

TEST( Learnts, ExportImportPreservesAnswer )
{
  std::mt19937_64 rng( 3 );
  for ( int k = 0; k < 40; ++k )
  {
    unsigned const nv = 18 + rng() % 3;
    auto const ints = oracle::random_3cnf( rng, nv, static_cast<unsigned>( nv * 4.3 ) );
    auto const f = oracle::from_ints( ints, nv );
    auto const want = oracle::enumerate_sat( ints, nv ).has_value();
    solver first( f );
    auto r = first.solve( search_limits{ 30, std::nullopt } );
    if ( r.status != solve_status::unknown )
      continue;
    auto const learnts = first.export_learnts();
    for ( auto const& lc : learnts )
    {
      oracle::clause c;
      for ( auto l : lc.lits )
        c.push_back( l.to_dimacs() );
      EXPECT_TRUE( oracle::implies( ints, c, nv ) );
      EXPECT_GT( lc.lits.size(), 1u );
    }
    solver second( f, solver_config::unsat_tuned() );
    second.import_learnts( learnts );
    EXPECT_EQ( second.stats().imported_clauses, learnts.size() );
    EXPECT_EQ( second.solve().status, want ? solve_status::sat : solve_status::unsat );

    // dropping every learnt clause mid-search keeps the answer
    first.filter_learnts( []( learnt_clause const& ) { return false; } );
    EXPECT_EQ( first.num_learnts(), 0u );
    EXPECT_EQ( first.solve().status, want ? solve_status::sat : solve_status::unsat );
  }
}

TEST( Learnts, TautologyAndSatisfiedImportsAreSkipped )
{
  cnf_formula f;
  f.add_clause( { lit( 1, false ), lit( 2, false ) } );
  f.add_clause( { lit( 3, false ) } );
  solver s( f );
  std::vector<learnt_clause> in{ { { lit( 1, false ), lit( 1, true ) }, 2, 0.0, {} }, { { lit( 3, false ), lit( 2, true ) }, 2, 0.0, {} } };
  s.import_learnts( in );
  EXPECT_EQ( s.num_learnts(), 0u );
  EXPECT_EQ( s.solve().status, solve_status::sat );
}

TEST( Learnts, ReplaceInstallsOnlyRetained )
{
  auto const f = pigeonhole( 6 );
  solver s( f );
  s.solve( search_limits{ 200, std::nullopt } );
  auto all = s.export_learnts();
  ASSERT_GT( all.size(), 4u );
  std::vector<learnt_clause> half( all.begin(), all.begin() + static_cast<std::ptrdiff_t>( all.size() / 2 ) );
  s.replace_learnts( half );
  auto const after = s.export_learnts();
  ASSERT_EQ( after.size(), half.size() );
  for ( std::size_t i = 0; i < half.size(); ++i )
  {
    auto a = after[i].lits, b = half[i].lits;
    std::sort( a.begin(), a.end() );
    std::sort( b.begin(), b.end() );
    EXPECT_EQ( a, b );
  }
  EXPECT_EQ( s.solve().status, solve_status::unsat );
}

TEST( Learnts, ReduceKeepsCoreTier )
{
  auto const f = pigeonhole( 6 );
  solver_config cfg;
  cfg.reduce_interval = 1000000;
  solver s( f, cfg );
  s.solve( search_limits{ 300, std::nullopt } );
  auto const before = s.export_learnts();
  std::size_t core = 0;
  for ( auto const& lc : before )
    core += lc.lbd <= cfg.keep_lbd ? 1u : 0u;
  s.reduce_db();
  s.reduce_db();
  auto const after = s.export_learnts();
  EXPECT_LT( after.size(), before.size() );
  std::size_t core_after = 0;
  for ( auto const& lc : after )
    core_after += lc.lbd <= cfg.keep_lbd ? 1u : 0u;
  EXPECT_EQ( core_after, core );
  EXPECT_EQ( s.solve().status, solve_status::unsat );
}

TEST( Learnts, RequireLevelZero )
{
  auto const f = pigeonhole( 4 );
  solver s( f );
  s.propagate();
  s.decide();
  EXPECT_THROW( s.export_learnts(), invalid_operand_error );
  EXPECT_THROW( s.import_learnts( {} ), invalid_operand_error );
}

TEST( Output, FormatModel )
{
  std::vector<bool> m{ false, true, false, true };
  EXPECT_EQ( format_model( m ), "v 1 -2 3 0\n" );
}

TEST( DratOracle, ClausesAreSets )
{
  // {a, a, b} with b false propagates a
  EXPECT_TRUE( oracle::rup( { { 1, 1, 2 }, { -1 } }, { 2 } ) );
  EXPECT_FALSE( oracle::rup( { { 1, 1, 2 } }, { 1 } ) );
  auto const f = oracle::from_ints( { { 1, 1, 2 }, { -1, -1 }, { -2, 1 } }, 2 );
  std::ostringstream drat;
  solver_config cfg;
  cfg.drat = &drat;
  ASSERT_EQ( solve( f, cfg ).status, solve_status::unsat );
  EXPECT_TRUE( oracle::check_drat( oracle::to_ints( f ), oracle::parse_drat_ascii( drat.str() ) ).ok );
}
