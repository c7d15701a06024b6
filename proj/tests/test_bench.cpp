#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include <cascad/aiger.hpp>
#include <cascad/bench.hpp>
#include <cascad/generators.hpp>

#include "support/oracles.hpp"

using namespace cascad;
namespace fs = std::filesystem;

namespace
{

std::vector<named_circuit> small_bases()
{
  // bases with a balanced-enough output so that mutations are observable
  std::vector<named_circuit> out;
  for ( std::uint64_t seed = 100; out.size() < 3; ++seed )
  {
    random_aig_params p;
    p.num_pis = 8;
    p.num_ands = 60;
    auto c = random_aig( p, seed );
    std::size_t ones = 0;
    for ( std::uint64_t r = 0; r < 256; ++r )
      ones += oracle::eval( c, oracle::row_inputs( 8, r ) )[c.pos()[0]] ? 1u : 0u;
    if ( ones >= 16 && ones <= 240 )
      out.push_back( { "rand" + std::to_string( out.size() ), std::move( c ) } );
  }
  return out;
}

fs::path scratch_dir( std::string const& name )
{
  auto const d = fs::temp_directory_path() / ( "cascad-test-" + name + "-" + std::to_string( ::getpid() ) );
  fs::remove_all( d );
  fs::create_directories( d );
  return d;
}

run_record rec( std::string id, std::string cfg, std::string status, double solve, double inference = 0.0 )
{
  run_record r;
  r.case_id = std::move( id );
  r.config = std::move( cfg );
  r.status = std::move( status );
  r.solve_seconds = solve;
  r.inference_seconds = inference;
  return r;
}

std::vector<bool> bits_of( std::string const& s )
{
  std::vector<bool> v;
  for ( char ch : s )
    v.push_back( ch == '1' );
  return v;
}

bench_case trivial_unsat()
{
  auto const base = small_bases()[0].network;
  return { "self", build_miter( base, base ), expected_status::unsat, "rand0", "identity", 0, std::nullopt };
}

} // namespace

TEST( GenSuite, LabelsAreVerified )
{
  auto const cases = gen_suite( small_bases(), 6, 6, 42 );
  ASSERT_EQ( cases.size(), 12u );
  std::size_t sat = 0, unsat = 0;
  for ( auto const& c : cases )
  {
    ASSERT_EQ( c.miter.num_pos(), 1u );
    auto const w = oracle::circuit_witness( c.miter );
    if ( c.expected == expected_status::unsat )
    {
      ++unsat;
      EXPECT_FALSE( w ) << c.id;
      EXPECT_EQ( c.id.rfind( "unsat-", 0 ), 0u );
    }
    else
    {
      ++sat;
      ASSERT_EQ( c.expected, expected_status::sat );
      ASSERT_TRUE( c.witness );
      EXPECT_TRUE( w );
      auto const v = oracle::eval( c.miter, bits_of( *c.witness ) );
      EXPECT_TRUE( v[c.miter.pos()[0]] ) << c.id;
      EXPECT_TRUE( evaluate_output( c.miter, *c.witness ) );
    }
    EXPECT_FALSE( c.recipe.empty() );
  }
  EXPECT_EQ( sat, 6u );
  EXPECT_EQ( unsat, 6u );
}

TEST( GenSuite, DeterministicManifests )
{
  auto const a = gen_suite( small_bases(), 4, 4, 7 ), b = gen_suite( small_bases(), 4, 4, 7 ), c = gen_suite( small_bases(), 4, 4, 8 );
  EXPECT_EQ( suite_manifest( a, 7 ).dump(), suite_manifest( b, 7 ).dump() );
  for ( std::size_t i = 0; i < a.size(); ++i )
    EXPECT_EQ( emit_aiger( a[i].miter, aiger_format::ascii ), emit_aiger( b[i].miter, aiger_format::ascii ) );
  EXPECT_NE( suite_manifest( a, 7 )["cases"].dump(), suite_manifest( c, 8 )["cases"].dump() );
}

TEST( GenSuite, WriteReadRoundTrip )
{
  auto const dir = scratch_dir( "suite" );
  auto const cases = gen_suite( small_bases(), 3, 3, 5 );
  write_suite( cases, 5, dir );
  auto const back = read_suite( dir / "manifest.json" );
  ASSERT_EQ( back.size(), cases.size() );
  for ( std::size_t i = 0; i < cases.size(); ++i )
  {
    EXPECT_EQ( back[i].id, cases[i].id );
    EXPECT_EQ( back[i].expected, cases[i].expected );
    EXPECT_EQ( back[i].witness, cases[i].witness );
    EXPECT_EQ( back[i].recipe, cases[i].recipe );
    EXPECT_TRUE( oracle::functionally_equal( back[i].miter, cases[i].miter ) );
  }
  std::ofstream( dir / "bad.json" ) << R"({"format":"other","cases":[]})";
  EXPECT_THROW( read_suite( dir / "bad.json" ), parse_error );
  EXPECT_THROW( read_suite( dir / "missing.json" ), error );
  fs::remove_all( dir );
}

TEST( GenSuite, LargeBasesAreUnlabelled )
{
  random_aig_params p;
  p.num_pis = 20;
  p.num_ands = 120;
  std::vector<named_circuit> bases{ { "big", random_aig( p, 3 ) } };
  auto const cases = gen_suite( bases, 1, 2, 1 );
  for ( auto const& c : cases )
  {
    if ( c.id.rfind( "unsat", 0 ) == 0 )
      EXPECT_EQ( c.expected, expected_status::unknown );
    else
      EXPECT_TRUE( c.witness && evaluate_output( c.miter, *c.witness ) );
  }
}

TEST( GenSuite, Errors )
{
  EXPECT_THROW( gen_suite( {}, 1, 1, 0 ), invalid_operand_error );
  circuit wire;
  wire.create_po( wire.create_pi() );
  EXPECT_THROW( gen_suite( { { "wire", wire } }, 1, 0, 0 ), error );
}

TEST( Par2, Examples )
{
  EXPECT_EQ( par2_value( rec( "a", "x", "SAT", 10.0 ), 300.0 ), 10.0 );
  EXPECT_EQ( par2_value( rec( "a", "x", "TIMEOUT", 300.0 ), 300.0 ), 600.0 );
  EXPECT_EQ( par2_value( rec( "a", "x", "ERROR", 1.0 ), 300.0 ), 600.0 );
  EXPECT_EQ( par2_value( rec( "a", "x", "UNKNOWN", 1.0 ), 300.0 ), 600.0 );
  EXPECT_EQ( par2_value( rec( "a", "x", "UNSAT", 299.0, 2.0 ), 300.0 ), 600.0 );
  EXPECT_EQ( par2_value( rec( "a", "x", "UNSAT", 200.0, 2.5 ), 300.0 ), 202.5 );
  auto const s = par2( { rec( "a", "x", "SAT", 10.0 ), rec( "b", "x", "TIMEOUT", 300.0 ) }, 300.0 );
  EXPECT_EQ( s.mean, 305.0 );
  ASSERT_EQ( s.per_case.size(), 2u );
  EXPECT_EQ( s.per_case[1].second, 600.0 );
  EXPECT_EQ( par2( {}, 10.0 ).mean, 0.0 );
  EXPECT_THROW( par2( {}, 0.0 ), invalid_operand_error );
}

TEST( Par2, Properties )
{
  std::mt19937_64 rng( 4 );
  std::uniform_real_distribution<double> t( 0.0, 150.0 );
  char const* statuses[] = { "SAT", "UNSAT", "TIMEOUT", "ERROR", "UNKNOWN" };
  for ( int k = 0; k < 200; ++k )
  {
    double const cutoff = 100.0;
    std::vector<run_record> rs;
    auto const n = 1 + rng() % 30;
    for ( std::size_t i = 0; i < n; ++i )
      rs.push_back( rec( "c" + std::to_string( i ), "x", statuses[rng() % 5], t( rng ), t( rng ) / 10.0 ) );
    auto const s = par2( rs, cutoff );
    double sum = 0.0;
    for ( std::size_t i = 0; i < n; ++i )
    {
      auto const& r = rs[i];
      double const overall = r.solve_seconds + r.inference_seconds;
      bool const ok = ( r.status == "SAT" || r.status == "UNSAT" ) && overall <= cutoff;
      double const want = ok ? overall : 2.0 * cutoff;
      EXPECT_EQ( s.per_case[i].second, want );
      EXPECT_TRUE( want <= cutoff || want == 2.0 * cutoff );
      sum += want;
    }
    EXPECT_EQ( s.mean, sum / static_cast<double>( n ) );

    // making one case slower never lowers the mean
    auto slower = rs;
    slower[0].solve_seconds += 50.0;
    EXPECT_GE( par2( slower, cutoff ).mean, s.mean );
  }
}

TEST( Report, ScatterConvention )
{
  std::vector<run_record> rs{ rec( "a", "baseline", "SAT", 10.0 ), rec( "a", "ours", "SAT", 2.0 ), rec( "b", "baseline", "SAT", 1.0 ),
                              rec( "b", "ours", "TIMEOUT", 30.0 ), rec( "c", "ours", "SAT", 1.0 ) };
  auto const pts = scatter( rs, "baseline", 30.0 );
  ASSERT_EQ( pts.size(), 2u );
  EXPECT_TRUE( pts[0].above_diagonal() );
  EXPECT_EQ( pts[0].ours, 2.0 );
  EXPECT_EQ( pts[0].baseline, 10.0 );
  EXPECT_FALSE( pts[1].above_diagonal() );
  EXPECT_EQ( pts[1].ours, 30.0 );
  auto const j = report( rs, 30.0 );
  EXPECT_EQ( j["scatter_points"], 2 );
  EXPECT_EQ( j["scatter_above_diagonal"], 1 );
  EXPECT_NE( j["scatter_csv"].get<std::string>().find( "a,ours,2,10" ), std::string::npos );
}

TEST( Report, Cactus )
{
  auto const one = cactus_csv( { rec( "a", "ours", "UNSAT", 3.0 ), rec( "b", "ours", "TIMEOUT", 9.0 ) } );
  EXPECT_EQ( one, "config,solved,seconds\nours,1,3\n" );
  auto const two = cactus_csv( { rec( "a", "x", "SAT", 5.0 ), rec( "b", "x", "SAT", 1.0, 0.5 ) } );
  EXPECT_EQ( two, "config,solved,seconds\nx,1,1.5\nx,2,5\n" );
}

TEST( Report, Par2TableSeparatesInference )
{
  auto const j = par2_summary( { rec( "a", "ours", "SAT", 3.0, 1.0 ), rec( "b", "ours", "SAT", 5.0, 0.5 ) }, 10.0 );
  ASSERT_EQ( j.size(), 1u );
  EXPECT_EQ( j[0]["solving_seconds"], 8.0 );
  EXPECT_EQ( j[0]["inference_seconds"], 1.5 );
  EXPECT_EQ( j[0]["overall_seconds"], 9.5 );
  EXPECT_EQ( j[0]["par2"], 4.75 );
}

TEST( Report, RecordsCsvRoundTrip )
{
  std::mt19937_64 rng( 9 );
  std::vector<run_record> rs;
  for ( int i = 0; i < 50; ++i )
  {
    auto r = rec( "case," + std::to_string( i ), "cfg\"" + std::to_string( i % 3 ), i % 2 ? "SAT" : "TIMEOUT", std::ldexp( static_cast<double>( rng() ), -60 ), 0.1 * i );
    r.expected = "UNSAT";
    r.stage = 1 + i % 2;
    r.stats.conflicts = rng();
    r.stats.decisions = rng() % 1000;
    r.stats.wall_seconds = 1.0 / 3.0;
    r.message = i % 5 == 0 ? "multi\nline, \"quoted\"" : "";
    rs.push_back( r );
  }
  auto const back = parse_records_csv( records_csv( rs ) );
  ASSERT_EQ( back.size(), rs.size() );
  for ( std::size_t i = 0; i < rs.size(); ++i )
    EXPECT_EQ( back[i], rs[i] ) << i;
  EXPECT_THROW( parse_records_csv( "nope\n" ), parse_error );
  EXPECT_THROW( parse_records_csv( std::string( detail::records_header ) + "\na,b\n" ), parse_error );
}

TEST( Report, JsonRecordRoundTrip )
{
  auto r = rec( "x", "y", "UNSAT", 1.25, 0.5 );
  r.stats.conflicts = 17;
  r.stage = 2;
  auto const j = to_json( r );
  EXPECT_EQ( j["overall_seconds"], 1.75 );
  EXPECT_EQ( record_from_json( j ), r );
}

TEST( Configs, FromJson )
{
  auto const c = run_config_from_json( nlohmann::json::parse( R"({"label":"ours","mode":"clause-filter","threshold":0.85,"budget":100,"score_mode":"independent"})" ) );
  EXPECT_EQ( c.mode, run_mode::clause_filter );
  EXPECT_EQ( c.filter.threshold, 0.85 );
  EXPECT_EQ( c.filter.conflict_budget, 100u );
  EXPECT_EQ( c.filter.mode, clause_mode::independent );
  auto const a = run_config_from_json( nlohmann::json::parse( R"({"label":"a","mode":"adaptive","probe":2.5,"tau":0.01})" ) );
  EXPECT_EQ( a.adaptive.probe_seconds, 2.5 );
  EXPECT_EQ( a.adaptive.tau, 0.01 );
  auto const u = run_config_from_json( nlohmann::json::parse( R"({"label":"u","unsat_tuned":true})" ) );
  EXPECT_EQ( u.solver.restart_unit, solver_config::unsat_tuned().restart_unit );
  EXPECT_THROW( run_config_from_json( nlohmann::json::parse( R"({"mode":"phase"})" ) ), parse_error );
  EXPECT_THROW( run_config_from_json( nlohmann::json::parse( R"({"label":"x","mode":"magic"})" ) ), parse_error );

  auto const dir = scratch_dir( "cfg" );
  std::ofstream( dir / "dup.json" ) << R"([{"label":"a"},{"label":"a"}])";
  EXPECT_THROW( read_run_configs( dir / "dup.json" ), parse_error );
  fs::remove_all( dir );
}

TEST( Execute, EveryModeAgreesWithOracle )
{
  auto const cases = gen_suite( small_bases(), 3, 3, 11 );
  std::vector<run_config> configs;
  for ( auto m : { run_mode::baseline, run_mode::phase, run_mode::clause_filter, run_mode::adaptive } )
  {
    run_config c;
    c.label = to_string( m );
    c.mode = m;
    c.filter.conflict_budget = 5;
    configs.push_back( c );
  }
  for ( auto const& bc : cases )
    for ( auto const& cfg : configs )
    {
      auto const r = execute_case( bc, cfg );
      EXPECT_EQ( r.status, to_string( bc.expected ) ) << bc.id << " " << cfg.label;
      EXPECT_GE( r.inference_seconds, 0.0 );
      if ( cfg.mode == run_mode::baseline )
      {
        EXPECT_EQ( r.inference_seconds, 0.0 );
      }
    }
}

TEST( RunSuite, BaselineOnTrivialUnsat )
{
  auto const dir = scratch_dir( "run" );
  run_options opt;
  opt.cutoff_seconds = 30.0;
  opt.out = dir / "results.jsonl";
  auto const rs = run_suite( { trivial_unsat() }, { run_config{} }, opt );
  ASSERT_EQ( rs.size(), 1u );
  EXPECT_EQ( rs[0].status, "UNSAT" );
  EXPECT_EQ( rs[0].config, "baseline" );
  auto const back = read_records_jsonl( opt.out );
  ASSERT_EQ( back.size(), 1u );
  EXPECT_EQ( back[0].status, "UNSAT" );
  // a second run appends
  run_suite( { trivial_unsat() }, { run_config{} }, opt );
  EXPECT_EQ( read_records_jsonl( opt.out ).size(), 2u );
  fs::remove_all( dir );
}

TEST( RunSuite, DeterministicStatsAcrossProcesses )
{
  auto const cases = gen_suite( small_bases(), 4, 4, 3 );
  run_config phase;
  phase.label = "phase";
  phase.mode = run_mode::phase;
  run_options opt;
  opt.cutoff_seconds = 60.0;
  opt.jobs = 3;
  auto const a = run_suite( cases, { run_config{}, phase }, opt );
  auto const b = run_suite( cases, { run_config{}, phase }, opt );
  ASSERT_EQ( a.size(), 16u );
  for ( std::size_t i = 0; i < a.size(); ++i )
  {
    EXPECT_EQ( a[i].case_id, b[i].case_id );
    EXPECT_EQ( a[i].config, b[i].config );
    EXPECT_EQ( a[i].status, b[i].status );
    EXPECT_TRUE( a[i].stats.same_search( b[i].stats ) ) << a[i].case_id;
    EXPECT_EQ( a[i].status, a[i].expected );
  }
}

TEST( RunSuite, TimeoutAndErrorRecords )
{
  bench_case hard{ "hard", build_miter( array_multiplier( 9 ), array_multiplier( 9, true ) ), expected_status::unknown, "mul9", "commute", 0, std::nullopt };
  run_config broken;
  broken.label = "broken";
  broken.mode = run_mode::phase;
  broken.estimator.backend = estimator_backend::external;
  broken.estimator.external_command = { "/nonexistent/estimator" };
  run_options opt;
  opt.cutoff_seconds = 0.5;
  opt.jobs = 2;
  auto const t0 = std::chrono::steady_clock::now();
  auto const rs = run_suite( { hard }, { run_config{}, broken }, opt );
  EXPECT_LT( std::chrono::duration<double>( std::chrono::steady_clock::now() - t0 ).count(), 10.0 );
  ASSERT_EQ( rs.size(), 2u );
  EXPECT_EQ( rs[0].status, "TIMEOUT" );
  EXPECT_EQ( rs[0].solve_seconds, 0.5 );
  EXPECT_EQ( par2_value( rs[0], 0.5 ), 1.0 );
  EXPECT_EQ( rs[1].status, "ERROR" );
  EXPECT_FALSE( rs[1].message.empty() );
  EXPECT_THROW( run_suite( {}, {}, run_options{ 0.0, 1, {} } ), invalid_operand_error );
}

TEST( RunSuite, CorrectnessAlarm )
{
  auto cases = gen_suite( small_bases(), 1, 0, 2 );
  cases[0].expected = expected_status::unsat; // deliberately wrong label on a SAT miter
  auto const dir = scratch_dir( "alarm" );
  run_options opt;
  opt.cutoff_seconds = 30.0;
  opt.out = dir / "results.jsonl";
  EXPECT_THROW( run_suite( cases, { run_config{} }, opt ), correctness_alarm );
  auto const back = read_records_jsonl( opt.out );
  ASSERT_EQ( back.size(), 1u );
  EXPECT_EQ( back[0].status, "SAT" );
  EXPECT_TRUE( contradicts( back[0] ) );
  fs::remove_all( dir );
}
