#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aiger.hpp"
#include "circuit.hpp"
#include "cnf.hpp"
#include "error.hpp"
#include "estimator.hpp"
#include "external_estimator.hpp"
#include "generators.hpp"
#include "heuristics.hpp"
#include "miter.hpp"
#include "simulation.hpp"
#include "solver.hpp"

namespace cascad
{

enum class expected_status
{
  sat,
  unsat,
  unknown
};

inline std::string to_string( expected_status e )
{
  switch ( e )
  {
  case expected_status::sat:
    return "SAT";
  case expected_status::unsat:
    return "UNSAT";
  case expected_status::unknown:
    return "unknown";
  }
  return "?";
}

inline expected_status expected_from_string( std::string const& s )
{
  if ( s == "SAT" )
    return expected_status::sat;
  if ( s == "UNSAT" )
    return expected_status::unsat;
  if ( s == "unknown" )
    return expected_status::unknown;
  throw parse_error( "unknown expected status '" + s + "'" );
}

struct named_circuit
{
  std::string name;
  circuit network;
};

struct bench_case
{
  std::string id;
  circuit miter;
  expected_status expected{ expected_status::unknown };
  std::string base;
  std::string recipe;
  std::uint64_t seed{ 0 };
  /* PI assignment (one char per PI) on which the two sides differ */
  std::optional<std::string> witness;
};

/* PIs up to which generated labels are verified by truth table */
inline constexpr std::size_t verified_pi_limit = 16u;

struct gen_options
{
  std::size_t max_retries{ 32 };
  std::size_t max_rewrites{ 6 };
  /* random patterns tried on larger circuits to find a witness */
  std::size_t witness_patterns{ 4096 };
};

namespace detail
{

/* First input row on which the miter output is 1, if any. */
inline std::optional<std::string> find_witness( circuit const& miter, std::size_t random_patterns, std::uint64_t seed )
{
  auto const m = miter.num_pis();
  auto const po = miter.pos().front();
  pattern_block inputs = m <= verified_pi_limit ? exhaustive_patterns( m ) : sample_patterns( simulation_plan{ random_patterns, {}, 0.5, seed }, m );
  auto const t = simulate( miter, inputs );
  auto const row = t.row( po );
  for ( std::size_t w = 0; w < row.size(); ++w )
  {
    if ( row[w] == 0u )
      continue;
    auto const p = w * 64u + static_cast<std::size_t>( std::countr_zero( row[w] ) );
    std::string wit;
    for ( std::size_t j = 0; j < m; ++j )
      wit.push_back( inputs.bit( j, p ) ? '1' : '0' );
    return wit;
  }
  return std::nullopt;
}

} // namespace detail

/*! \brief Value of the first PO of `c` under a PI assignment given as a 0/1 string. */
inline bool evaluate_output( circuit const& c, std::string const& assignment )
{
  if ( assignment.size() != c.num_pis() )
    throw shape_error( "assignment length does not match the PI count" );
  pattern_block in( c.num_pis(), 1u );
  for ( std::size_t j = 0; j < assignment.size(); ++j )
    in.set( j, 0u, assignment[j] == '1' );
  return simulate( c, in ).bit( c.pos().front(), 0u );
}

/*! \brief The first `count` random circuits, by seed from `seed` on, whose outputs are all non-constant.
 *
 * Requires at most `verified_pi_limit` PIs; constant outputs are detected by truth table.
 */
inline std::vector<named_circuit> nonconstant_random_bases( random_aig_params const& p, std::size_t count, std::uint64_t seed, std::string const& prefix = "rnd" )
{
  if ( p.num_pis > verified_pi_limit )
    throw invalid_operand_error( "nonconstant_random_bases: too many PIs for a truth table" );
  std::vector<named_circuit> out;
  for ( std::uint64_t s = seed; out.size() < count; ++s )
  {
    if ( s - seed > 1000u * ( count + 1u ) )
      throw error( "nonconstant_random_bases: no suitable circuit found" );
    auto c = random_aig( p, s );
    auto const t = exact_truth_table( c ).traces;
    bool const varies = std::all_of( c.pos().begin(), c.pos().end(), [&]( gate_id po ) {
      auto const k = t.popcount( po );
      return k > 0u && k < t.num_patterns();
    } );
    if ( varies )
      out.push_back( { prefix + std::to_string( out.size() ), std::move( c ) } );
  }
  return out;
}

/*! \brief Built-in base circuits, all within the exhaustive labelling limit.
 *
 * Array multipliers of 4 to 8 bits, ripple-carry adders of 6 to 8 bits and
 * four random 16-PI circuits with 8 non-constant outputs.
 */
inline std::vector<named_circuit> standard_bases( std::uint64_t seed = 500 )
{
  std::vector<named_circuit> out;
  for ( std::size_t b = 4; b <= 8; ++b )
    out.push_back( { "mul" + std::to_string( b ), array_multiplier( b ) } );
  for ( std::size_t b = 6; b <= 8; ++b )
    out.push_back( { "add" + std::to_string( b ), ripple_carry_adder( b ) } );
  random_aig_params p;
  p.num_pis = 16;
  p.num_ands = 300;
  p.num_pos = 8;
  p.window = 400;
  p.inversion_rate = 0.5;
  for ( auto& b : nonconstant_random_bases( p, 4, seed ) )
    out.push_back( std::move( b ) );
  return out;
}

/*! \brief Deterministic LEC suite: UNSAT miters against rewritten copies, SAT miters against verified mutants. */
inline std::vector<bench_case> gen_suite( std::vector<named_circuit> const& bases, std::size_t n_sat, std::size_t n_unsat, std::uint64_t seed, gen_options const& opt = {} )
{
  if ( bases.empty() )
    throw invalid_operand_error( "gen_suite: no base circuits" );
  std::vector<bench_case> cases;
  auto id_of = []( char const* prefix, std::size_t k ) {
    std::ostringstream ss;
    ss << prefix << '-' << std::setw( 3 ) << std::setfill( '0' ) << k;
    return ss.str();
  };

  for ( std::size_t k = 0; k < n_unsat; ++k )
  {
    auto const& base = bases[k % bases.size()];
    auto const case_seed = counter_draw( seed, 0x0a5a7u, k );
    std::mt19937_64 rng( case_seed );
    circuit rewritten = base.network;
    std::string recipe;
    auto const steps = 1u + rng() % opt.max_rewrites;
    for ( std::size_t s = 0; s < steps; ++s )
    {
      auto const kind = static_cast<rewrite_kind>( rng() % 4u );
      if ( auto r = rewrite_once( rewritten, kind, rng ) )
      {
        rewritten = std::move( *r );
        recipe += ( recipe.empty() ? "" : "+" ) + to_string( kind );
      }
    }
    if ( recipe.empty() )
      recipe = "identity";
    bench_case bc{ id_of( "unsat", k ), build_miter( base.network, rewritten ), expected_status::unknown, base.name, recipe, case_seed, std::nullopt };
    if ( base.network.num_pis() <= verified_pi_limit )
    {
      if ( detail::find_witness( bc.miter, 0, 0 ) )
        throw correctness_alarm( "gen_suite: rewrite recipe '" + recipe + "' changed the function of " + base.name );
      bc.expected = expected_status::unsat;
    }
    cases.push_back( std::move( bc ) );
  }

  for ( std::size_t k = 0; k < n_sat; ++k )
  {
    auto const& base = bases[k % bases.size()];
    auto const case_seed = counter_draw( seed, 0x05a7u, k );
    bool done = false;
    for ( std::size_t attempt = 0; attempt < opt.max_retries && !done; ++attempt )
    {
      auto const mseed = counter_draw( case_seed, attempt, 0u );
      auto m = mutate_circuit( base.network, mseed );
      auto miter = build_miter( base.network, m.result );
      auto wit = detail::find_witness( miter, opt.witness_patterns, mseed );
      if ( !wit )
        continue;
      cases.push_back( { id_of( "sat", k ), std::move( miter ), expected_status::sat, base.name, m.describe(), mseed, std::move( wit ) } );
      done = true;
    }
    if ( !done )
      throw error( "gen_suite: " + id_of( "sat", k ) + ": every mutation of " + base.name + " stayed equivalent after " + std::to_string( opt.max_retries ) + " tries" );
  }
  return cases;
}

//----------------------------------------------------------------------
// manifest
//----------------------------------------------------------------------

inline nlohmann::json suite_manifest( std::vector<bench_case> const& cases, std::uint64_t seed )
{
  nlohmann::json list = nlohmann::json::array();
  for ( auto const& c : cases )
  {
    nlohmann::json e = { { "id", c.id }, { "aig", c.id + ".aag" }, { "expected", to_string( c.expected ) }, { "base", c.base }, { "recipe", c.recipe }, { "seed", c.seed } };
    if ( c.witness )
      e["witness"] = *c.witness;
    list.push_back( std::move( e ) );
  }
  return { { "format", "cascad-suite" }, { "version", 1 }, { "seed", seed }, { "cases", std::move( list ) } };
}

/* Writes `manifest.json` and one ASCII AIGER file per case into `dir`. */
inline void write_suite( std::vector<bench_case> const& cases, std::uint64_t seed, std::filesystem::path const& dir )
{
  std::filesystem::create_directories( dir );
  for ( auto const& c : cases )
  {
    std::ofstream os( dir / ( c.id + ".aag" ), std::ios::binary );
    os << emit_aiger( c.miter, aiger_format::ascii );
    if ( !os )
      throw error( "cannot write " + ( dir / ( c.id + ".aag" ) ).string() );
  }
  std::ofstream os( dir / "manifest.json" );
  os << suite_manifest( cases, seed ).dump( 2 ) << "\n";
  if ( !os )
    throw error( "cannot write " + ( dir / "manifest.json" ).string() );
}

inline std::vector<bench_case> read_suite( std::filesystem::path const& manifest_path )
{
  std::ifstream is( manifest_path );
  if ( !is )
    throw error( "cannot open suite manifest " + manifest_path.string() );
  nlohmann::json j;
  try
  {
    j = nlohmann::json::parse( is );
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw parse_error( "suite manifest: " + std::string( e.what() ) );
  }
  if ( j.value( "format", std::string{} ) != "cascad-suite" )
    throw parse_error( "suite manifest: wrong format tag" );
  std::vector<bench_case> cases;
  auto const dir = manifest_path.parent_path();
  for ( auto const& e : j.at( "cases" ) )
  {
    bench_case c;
    c.id = e.at( "id" ).get<std::string>();
    c.miter = read_aiger_file( ( dir / e.at( "aig" ).get<std::string>() ).string() );
    c.expected = expected_from_string( e.at( "expected" ).get<std::string>() );
    c.base = e.value( "base", std::string{} );
    c.recipe = e.value( "recipe", std::string{} );
    c.seed = e.value( "seed", std::uint64_t{ 0 } );
    if ( e.contains( "witness" ) )
      c.witness = e["witness"].get<std::string>();
    cases.push_back( std::move( c ) );
  }
  return cases;
}

//----------------------------------------------------------------------
// run configurations
//----------------------------------------------------------------------

enum class run_mode
{
  baseline,
  phase,
  clause_filter,
  adaptive
};

inline std::string to_string( run_mode m )
{
  switch ( m )
  {
  case run_mode::baseline:
    return "baseline";
  case run_mode::phase:
    return "phase";
  case run_mode::clause_filter:
    return "clause-filter";
  case run_mode::adaptive:
    return "adaptive";
  }
  return "?";
}

inline run_mode run_mode_from_string( std::string const& s )
{
  for ( auto m : { run_mode::baseline, run_mode::phase, run_mode::clause_filter, run_mode::adaptive } )
    if ( to_string( m ) == s )
      return m;
  throw parse_error( "unknown run mode '" + s + "'" );
}

inline estimator_config exact_estimator()
{
  estimator_config e;
  e.backend = estimator_backend::exact;
  return e;
}

struct run_config
{
  std::string label{ "baseline" };
  run_mode mode{ run_mode::baseline };
  solver_config solver{};
  estimator_config estimator = exact_estimator();
  double tau{ 0.005 };
  refresh_schedule refresh{};
  clause_filter_policy filter{};
  adaptive_policy adaptive{};
  /* per-run conflict limit inside the child (the wall cutoff is enforced outside) */
  std::optional<std::uint64_t> conflict_limit;
};

inline default_phase default_phase_from_string( std::string const& s )
{
  if ( s == "saved" )
    return default_phase::saved;
  if ( s == "false" )
    return default_phase::false_phase;
  if ( s == "true" )
    return default_phase::true_phase;
  throw parse_error( "unknown phase default '" + s + "'" );
}

inline estimator_backend backend_from_string( std::string const& s )
{
  if ( s == "exact" )
    return estimator_backend::exact;
  if ( s == "simulation" )
    return estimator_backend::simulation;
  if ( s == "external" )
    return estimator_backend::external;
  throw parse_error( "unknown estimator backend '" + s + "'" );
}

/*! \brief Config from JSON, e.g. {"label":"ours","mode":"phase","tau":0.005,"estimator":"exact"}. */
inline run_config run_config_from_json( nlohmann::json const& j )
{
  try
  {
    run_config c;
    c.label = j.at( "label" ).get<std::string>();
    c.mode = run_mode_from_string( j.value( "mode", std::string( "baseline" ) ) );
    if ( j.value( "unsat_tuned", false ) )
      c.solver = solver_config::unsat_tuned();
    c.solver.restart_unit = j.value( "restart_unit", c.solver.restart_unit );
    c.solver.keep_lbd = j.value( "keep_lbd", c.solver.keep_lbd );
    c.solver.seed = j.value( "seed", c.solver.seed );
    if ( j.contains( "phase_default" ) )
      c.solver.phase = default_phase_from_string( j["phase_default"].get<std::string>() );
    c.estimator.backend = backend_from_string( j.value( "estimator", std::string( "exact" ) ) );
    c.estimator.num_patterns = j.value( "patterns", c.estimator.num_patterns );
    c.estimator.seed = j.value( "estimator_seed", c.estimator.seed );
    if ( j.contains( "external_command" ) )
      c.estimator.external_command = j["external_command"].get<std::vector<std::string>>();
    c.tau = j.value( "tau", c.tau );
    c.refresh.every_restarts = j.value( "refresh_every", c.refresh.every_restarts );
    c.refresh.max_conditions = j.value( "refresh_conditions", c.refresh.max_conditions );
    c.filter.threshold = j.value( "threshold", c.filter.threshold );
    c.filter.conflict_budget = j.value( "budget", c.filter.conflict_budget );
    if ( j.value( "score_mode", std::string( "correlated" ) ) == "independent" )
      c.filter.mode = clause_mode::independent;
    c.adaptive.probe_seconds = j.value( "probe", c.adaptive.probe_seconds );
    c.adaptive.tau = c.tau;
    c.adaptive.refresh = c.refresh;
    c.adaptive.probe_config = c.solver;
    if ( j.contains( "conflict_limit" ) )
      c.conflict_limit = j["conflict_limit"].get<std::uint64_t>();
    return c;
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw parse_error( "run config: " + std::string( e.what() ) );
  }
}

inline std::vector<run_config> read_run_configs( std::filesystem::path const& path )
{
  std::ifstream is( path );
  if ( !is )
    throw error( "cannot open config file " + path.string() );
  nlohmann::json j;
  try
  {
    j = nlohmann::json::parse( is );
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw parse_error( "config file: " + std::string( e.what() ) );
  }
  std::vector<run_config> out;
  std::set<std::string> labels;
  for ( auto const& e : j )
  {
    out.push_back( run_config_from_json( e ) );
    if ( !labels.insert( out.back().label ).second )
      throw parse_error( "config file: duplicate label '" + out.back().label + "'" );
  }
  return out;
}

//----------------------------------------------------------------------
// running
//----------------------------------------------------------------------

struct run_record
{
  std::string case_id;
  std::string config;
  /* SAT, UNSAT, UNKNOWN, TIMEOUT or ERROR */
  std::string status;
  std::string expected{ "unknown" };
  double solve_seconds{ 0.0 };
  double inference_seconds{ 0.0 };
  solver_stats stats;
  int stage{ 1 };
  std::string message;

  double overall_seconds() const noexcept { return solve_seconds + inference_seconds; }
  bool solved() const noexcept { return status == "SAT" || status == "UNSAT"; }
  friend bool operator==( run_record const&, run_record const& ) = default;
};

inline bool operator==( solver_stats const& a, solver_stats const& b ) noexcept
{
  return a.same_search( b ) && a.wall_seconds == b.wall_seconds;
}

inline nlohmann::json to_json( run_record const& r )
{
  return { { "case", r.case_id },
           { "config", r.config },
           { "status", r.status },
           { "expected", r.expected },
           { "solve_seconds", r.solve_seconds },
           { "inference_seconds", r.inference_seconds },
           { "overall_seconds", r.overall_seconds() },
           { "stage", r.stage },
           { "stats", to_json( r.stats ) },
           { "message", r.message } };
}

inline run_record record_from_json( nlohmann::json const& j )
{
  run_record r;
  r.case_id = j.at( "case" ).get<std::string>();
  r.config = j.at( "config" ).get<std::string>();
  r.status = j.at( "status" ).get<std::string>();
  r.expected = j.value( "expected", std::string( "unknown" ) );
  r.solve_seconds = j.value( "solve_seconds", 0.0 );
  r.inference_seconds = j.value( "inference_seconds", 0.0 );
  r.stage = j.value( "stage", 1 );
  if ( j.contains( "stats" ) )
    r.stats = stats_from_json( j["stats"] );
  r.message = j.value( "message", std::string{} );
  return r;
}

inline std::vector<run_record> read_records_jsonl( std::filesystem::path const& path )
{
  std::ifstream is( path );
  if ( !is )
    throw error( "cannot open results file " + path.string() );
  std::vector<run_record> out;
  std::string line;
  std::size_t n = 0;
  while ( std::getline( is, line ) )
  {
    ++n;
    if ( line.find_first_not_of( " \t\r" ) == std::string::npos )
      continue;
    try
    {
      out.push_back( record_from_json( nlohmann::json::parse( line ) ) );
    }
    catch ( nlohmann::json::exception const& e )
    {
      throw parse_error( path.string() + ":" + std::to_string( n ) + ": " + e.what() );
    }
  }
  return out;
}

/*! \brief Runs one configuration on one case in this process. */
inline run_record execute_case( bench_case const& bc, run_config const& cfg )
{
  run_record r;
  r.case_id = bc.id;
  r.config = cfg.label;
  r.expected = to_string( bc.expected );
  if ( bc.miter.num_pos() != 1 )
    throw shape_error( "case " + bc.id + " must have exactly one output" );
  auto const po = bc.miter.pos().front();
  auto const enc = tseitin_encode( bc.miter );

  using clock = std::chrono::steady_clock;
  std::unique_ptr<estimator> est;
  if ( cfg.mode != run_mode::baseline )
  {
    auto const t0 = clock::now();
    est = make_estimator( bc.miter, cfg.estimator );
    r.inference_seconds += std::chrono::duration<double>( clock::now() - t0 ).count();
  }
  search_limits lim{ cfg.conflict_limit, std::nullopt };
  solve_outcome out;
  double inner_inference = 0.0;
  auto const t0 = clock::now();
  switch ( cfg.mode )
  {
  case run_mode::baseline:
  {
    solver s( enc.cnf, cfg.solver );
    out = s.solve( lim );
    break;
  }
  case run_mode::phase:
  {
    auto policy = std::make_shared<phase_policy>( build_phase_policy( *est, po, enc.map, cfg.tau, cfg.refresh ) );
    solver s( enc.cnf, cfg.solver, make_phase_hooks( policy, est.get(), &enc.map ) );
    out = s.solve( lim );
    inner_inference = policy->inference_seconds;
    break;
  }
  case run_mode::clause_filter:
  {
    solver s( enc.cnf, cfg.solver );
    auto run = run_clause_filter( s, cfg.filter, *est, enc.map, lim );
    out = run.outcome;
    inner_inference = run.inference_seconds;
    break;
  }
  case run_mode::adaptive:
  {
    auto a = adaptive_solve( enc.cnf, enc.map, *est, po, cfg.adaptive );
    out = a.outcome;
    r.stage = a.stage;
    inner_inference = a.inference_seconds;
    break;
  }
  }
  r.inference_seconds += inner_inference;
  r.solve_seconds = std::max( 0.0, std::chrono::duration<double>( clock::now() - t0 ).count() - inner_inference );
  r.stats = out.stats;
  r.status = to_string( out.status );
  if ( out.status == solve_status::sat )
  {
    std::string wit;
    for ( auto pi : bc.miter.pis() )
      wit.push_back( ( *out.model )[*enc.map.var_of( pi )] ? '1' : '0' );
    if ( !evaluate_output( bc.miter, wit ) )
      throw correctness_alarm( "case " + bc.id + ": SAT model does not set the miter output" );
  }
  return r;
}

/* Hard failure when a run contradicts a verified label. */
inline bool contradicts( run_record const& r ) noexcept
{
  return ( r.expected == "SAT" && r.status == "UNSAT" ) || ( r.expected == "UNSAT" && r.status == "SAT" );
}

struct run_options
{
  double cutoff_seconds{ 300.0 };
  unsigned jobs{ 1 };
  /* JSON-lines results file, appended per finished run; empty disables */
  std::filesystem::path out;
};

/*! \brief Runs every (case, config) pair in its own forked process under a wall cutoff.
 *
 * Timeouts are recorded as TIMEOUT with the cutoff as solve time, crashes and
 * child errors as ERROR.  A result that contradicts a verified label is
 * written out, remaining children are killed and `correctness_alarm` is thrown.
 */
inline std::vector<run_record> run_suite( std::vector<bench_case> const& cases, std::vector<run_config> const& configs, run_options const& opt )
{
  if ( !( opt.cutoff_seconds > 0.0 ) )
    throw invalid_operand_error( "cutoff must be positive" );
  using clock = std::chrono::steady_clock;
  struct task
  {
    std::size_t index;
    pid_t pid;
    int fd;
    clock::time_point start;
    std::string data;
  };
  std::vector<std::pair<std::size_t, std::size_t>> work;
  for ( std::size_t i = 0; i < cases.size(); ++i )
    for ( std::size_t k = 0; k < configs.size(); ++k )
      work.emplace_back( i, k );
  std::vector<std::optional<run_record>> results( work.size() );
  std::ofstream sink;
  if ( !opt.out.empty() )
  {
    if ( opt.out.has_parent_path() )
      std::filesystem::create_directories( opt.out.parent_path() );
    sink.open( opt.out, std::ios::app );
    if ( !sink )
      throw error( "cannot open results file " + opt.out.string() );
  }
  std::vector<task> running;
  std::size_t next = 0;
  auto const jobs = std::max( 1u, opt.jobs );

  auto kill_all = [&] {
    for ( auto& t : running )
    {
      ::kill( t.pid, SIGKILL );
      ::waitpid( t.pid, nullptr, 0 );
      ::close( t.fd );
    }
    running.clear();
  };
  auto base_record = [&]( std::size_t index ) {
    run_record r;
    r.case_id = cases[work[index].first].id;
    r.config = configs[work[index].second].label;
    r.expected = to_string( cases[work[index].first].expected );
    return r;
  };

  while ( next < work.size() || !running.empty() )
  {
    while ( next < work.size() && running.size() < jobs )
    {
      int fds[2];
      if ( ::pipe( fds ) != 0 )
        throw error( std::string( "run_suite: pipe: " ) + std::strerror( errno ) );
      sink.flush();
      auto const pid = ::fork();
      if ( pid < 0 )
        throw error( std::string( "run_suite: fork: " ) + std::strerror( errno ) );
      if ( pid == 0 )
      {
        ::close( fds[0] );
        std::string line;
        int code = 0;
        try
        {
          auto const& [ci, ki] = work[next];
          line = to_json( execute_case( cases[ci], configs[ki] ) ).dump();
        }
        catch ( std::exception const& e )
        {
          line = nlohmann::json{ { "error", e.what() } }.dump();
          code = 3;
        }
        line += "\n";
        std::size_t off = 0;
        while ( off < line.size() )
        {
          auto const n = ::write( fds[1], line.data() + off, line.size() - off );
          if ( n <= 0 )
            break;
          off += static_cast<std::size_t>( n );
        }
        ::close( fds[1] );
        std::_Exit( code );
      }
      ::close( fds[1] );
      running.push_back( { next, pid, fds[0], clock::now(), {} } );
      ++next;
    }

    std::vector<pollfd> pfds;
    for ( auto const& t : running )
      pfds.push_back( { t.fd, POLLIN, 0 } );
    ::poll( pfds.data(), pfds.size(), 50 );

    for ( std::size_t i = 0; i < running.size(); )
    {
      auto& t = running[i];
      bool finished = false;
      std::optional<run_record> rec;
      if ( pfds[i].revents & ( POLLIN | POLLHUP | POLLERR ) )
      {
        char buf[4096];
        auto const n = ::read( t.fd, buf, sizeof( buf ) );
        if ( n > 0 )
          t.data.append( buf, static_cast<std::size_t>( n ) );
        else if ( n == 0 || ( n < 0 && errno != EINTR && errno != EAGAIN ) )
        {
          finished = true;
          int st = 0;
          ::waitpid( t.pid, &st, 0 );
          ::close( t.fd );
          auto r = base_record( t.index );
          try
          {
            auto const j = nlohmann::json::parse( t.data );
            if ( j.contains( "error" ) )
            {
              r.status = "ERROR";
              r.message = j["error"].get<std::string>();
            }
            else
              r = record_from_json( j );
          }
          catch ( nlohmann::json::exception const& )
          {
            r.status = "ERROR";
            r.message = WIFSIGNALED( st ) ? "child killed by signal " + std::to_string( WTERMSIG( st ) ) : "child produced no record";
          }
          rec = std::move( r );
        }
      }
      if ( !finished && std::chrono::duration<double>( clock::now() - t.start ).count() > opt.cutoff_seconds )
      {
        ::kill( t.pid, SIGKILL );
        ::waitpid( t.pid, nullptr, 0 );
        ::close( t.fd );
        auto r = base_record( t.index );
        r.status = "TIMEOUT";
        r.solve_seconds = opt.cutoff_seconds;
        rec = std::move( r );
        finished = true;
      }
      if ( !finished )
      {
        ++i;
        continue;
      }
      if ( sink.is_open() )
      {
        sink << to_json( *rec ).dump() << "\n";
        sink.flush();
      }
      auto const alarm = contradicts( *rec );
      results[t.index] = std::move( rec );
      auto const bad = t.index;
      running.erase( running.begin() + static_cast<std::ptrdiff_t>( i ) );
      if ( alarm )
      {
        kill_all();
        throw correctness_alarm( "case " + results[bad]->case_id + " config " + results[bad]->config + ": got " + results[bad]->status + ", expected " + results[bad]->expected );
      }
    }
  }
  std::vector<run_record> out;
  for ( auto& r : results )
    out.push_back( std::move( *r ) );
  return out;
}

//----------------------------------------------------------------------
// scoring and reports
//----------------------------------------------------------------------

struct par2_score
{
  double cutoff{ 0.0 };
  std::vector<std::pair<std::string, double>> per_case;
  double mean{ 0.0 };
};

/* Solved within the cutoff scores its overall time; anything else scores twice the cutoff. */
inline double par2_value( run_record const& r, double cutoff ) noexcept
{
  auto const t = r.overall_seconds();
  return r.solved() && t <= cutoff ? t : 2.0 * cutoff;
}

inline par2_score par2( std::vector<run_record> const& records, double cutoff )
{
  if ( !( cutoff > 0.0 ) )
    throw invalid_operand_error( "par2: cutoff must be positive" );
  par2_score s;
  s.cutoff = cutoff;
  double sum = 0.0;
  for ( auto const& r : records )
  {
    auto const v = par2_value( r, cutoff );
    s.per_case.emplace_back( r.case_id, v );
    sum += v;
  }
  s.mean = records.empty() ? 0.0 : sum / static_cast<double>( records.size() );
  return s;
}

inline std::map<std::string, std::vector<run_record>> by_config( std::vector<run_record> const& records )
{
  std::map<std::string, std::vector<run_record>> out;
  for ( auto const& r : records )
    out[r.config].push_back( r );
  return out;
}

/* Number of instances solved within each time: one row per solved run. */
inline std::string cactus_csv( std::vector<run_record> const& records )
{
  std::ostringstream os;
  os << std::setprecision( 17 ) << "config,solved,seconds\n";
  for ( auto const& [label, rs] : by_config( records ) )
  {
    std::vector<double> times;
    for ( auto const& r : rs )
      if ( r.solved() )
        times.push_back( r.overall_seconds() );
    std::sort( times.begin(), times.end() );
    for ( std::size_t i = 0; i < times.size(); ++i )
      os << label << ',' << i + 1 << ',' << times[i] << '\n';
  }
  return os.str();
}

struct scatter_point
{
  std::string case_id;
  std::string config;
  double ours{ 0.0 };
  double baseline{ 0.0 };

  /* plotted as (ours, baseline): above the diagonal means ours is faster */
  bool above_diagonal() const noexcept { return baseline > ours; }
};

inline std::vector<scatter_point> scatter( std::vector<run_record> const& records, std::string const& baseline_label, double cutoff )
{
  std::map<std::string, double> base;
  for ( auto const& r : records )
    if ( r.config == baseline_label )
      base[r.case_id] = r.solved() && r.overall_seconds() <= cutoff ? r.overall_seconds() : cutoff;
  std::vector<scatter_point> out;
  for ( auto const& r : records )
  {
    if ( r.config == baseline_label )
      continue;
    auto it = base.find( r.case_id );
    if ( it == base.end() )
      continue;
    auto const ours = r.solved() && r.overall_seconds() <= cutoff ? r.overall_seconds() : cutoff;
    out.push_back( { r.case_id, r.config, ours, it->second } );
  }
  return out;
}

inline std::string scatter_csv( std::vector<scatter_point> const& pts )
{
  std::ostringstream os;
  os << std::setprecision( 17 ) << "case,config,ours_seconds,baseline_seconds\n";
  for ( auto const& p : pts )
    os << p.case_id << ',' << p.config << ',' << p.ours << ',' << p.baseline << '\n';
  return os.str();
}

inline nlohmann::json par2_summary( std::vector<run_record> const& records, double cutoff )
{
  nlohmann::json out = nlohmann::json::array();
  for ( auto const& [label, rs] : by_config( records ) )
  {
    auto const s = par2( rs, cutoff );
    double solve = 0.0, inference = 0.0;
    std::size_t solved = 0;
    for ( auto const& r : rs )
    {
      solve += r.solve_seconds;
      inference += r.inference_seconds;
      solved += r.solved() ? 1u : 0u;
    }
    out.push_back( { { "config", label },
                     { "cases", rs.size() },
                     { "solved", solved },
                     { "par2", s.mean },
                     { "solving_seconds", solve },
                     { "inference_seconds", inference },
                     { "overall_seconds", solve + inference } } );
  }
  return out;
}

inline std::string par2_csv( std::vector<run_record> const& records, double cutoff )
{
  std::ostringstream os;
  os << std::setprecision( 17 ) << "config,cases,solved,par2,solving_seconds,inference_seconds,overall_seconds\n";
  for ( auto const& e : par2_summary( records, cutoff ) )
    os << e["config"].get<std::string>() << ',' << e["cases"].get<std::size_t>() << ',' << e["solved"].get<std::size_t>() << ',' << e["par2"].get<double>() << ','
       << e["solving_seconds"].get<double>() << ',' << e["inference_seconds"].get<double>() << ',' << e["overall_seconds"].get<double>() << '\n';
  return os.str();
}

namespace detail
{

inline std::string csv_field( std::string const& s )
{
  if ( s.find_first_of( ",\"\n" ) == std::string::npos )
    return s;
  std::string out = "\"";
  for ( auto ch : s )
  {
    if ( ch == '"' )
      out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split( std::string const& line )
{
  std::vector<std::string> out( 1 );
  bool quoted = false;
  for ( std::size_t i = 0; i < line.size(); ++i )
  {
    auto const ch = line[i];
    if ( quoted )
    {
      if ( ch == '"' && i + 1 < line.size() && line[i + 1] == '"' )
      {
        out.back() += '"';
        ++i;
      }
      else if ( ch == '"' )
        quoted = false;
      else
        out.back() += ch;
    }
    else if ( ch == '"' )
      quoted = true;
    else if ( ch == ',' )
      out.emplace_back();
    else
      out.back() += ch;
  }
  if ( quoted )
    throw parse_error( "records CSV: unterminated quote" );
  return out;
}

inline constexpr char const* records_header =
    "case,config,status,expected,stage,solve_seconds,inference_seconds,conflicts,decisions,propagations,restarts,learnt_clauses,learnt_units,deleted_clauses,reductions,imported_clauses,wall_seconds,message";

} // namespace detail

inline std::string records_csv( std::vector<run_record> const& records )
{
  std::ostringstream os;
  os << std::setprecision( 17 ) << detail::records_header << '\n';
  for ( auto const& r : records )
  {
    auto const& s = r.stats;
    os << detail::csv_field( r.case_id ) << ',' << detail::csv_field( r.config ) << ',' << r.status << ',' << r.expected << ',' << r.stage << ',' << r.solve_seconds << ','
       << r.inference_seconds << ',' << s.conflicts << ',' << s.decisions << ',' << s.propagations << ',' << s.restarts << ',' << s.learnt_clauses << ',' << s.learnt_units
       << ',' << s.deleted_clauses << ',' << s.reductions << ',' << s.imported_clauses << ',' << s.wall_seconds << ',' << detail::csv_field( r.message ) << '\n';
  }
  return os.str();
}

inline std::vector<run_record> parse_records_csv( std::string const& text )
{
  std::istringstream is( text );
  std::string line;
  if ( !std::getline( is, line ) || line != detail::records_header )
    throw parse_error( "records CSV: missing or unexpected header" );
  std::vector<run_record> out;
  std::size_t n = 1;
  while ( std::getline( is, line ) )
  {
    ++n;
    if ( line.empty() )
      continue;
    // a quoted field may span lines
    std::string more;
    while ( std::count( line.begin(), line.end(), '"' ) % 2 == 1 && std::getline( is, more ) )
    {
      line += '\n' + more;
      ++n;
    }
    auto f = detail::csv_split( line );
    if ( f.size() != 18 )
      throw parse_error( "records CSV line " + std::to_string( n ) + ": expected 18 fields, got " + std::to_string( f.size() ) );
    try
    {
      run_record r;
      r.case_id = f[0];
      r.config = f[1];
      r.status = f[2];
      r.expected = f[3];
      r.stage = std::stoi( f[4] );
      r.solve_seconds = std::stod( f[5] );
      r.inference_seconds = std::stod( f[6] );
      auto u = [&]( std::size_t i ) { return static_cast<std::uint64_t>( std::stoull( f[i] ) ); };
      r.stats.conflicts = u( 7 );
      r.stats.decisions = u( 8 );
      r.stats.propagations = u( 9 );
      r.stats.restarts = u( 10 );
      r.stats.learnt_clauses = u( 11 );
      r.stats.learnt_units = u( 12 );
      r.stats.deleted_clauses = u( 13 );
      r.stats.reductions = u( 14 );
      r.stats.imported_clauses = u( 15 );
      r.stats.wall_seconds = std::stod( f[16] );
      r.message = f[17];
      out.push_back( std::move( r ) );
    }
    catch ( std::logic_error const& )
    {
      throw parse_error( "records CSV line " + std::to_string( n ) + ": malformed number" );
    }
  }
  return out;
}

/*! \brief All report artifacts in one JSON object (CSV payloads as strings). */
inline nlohmann::json report( std::vector<run_record> const& records, double cutoff, std::string const& baseline_label = "baseline" )
{
  auto const pts = scatter( records, baseline_label, cutoff );
  std::size_t above = 0;
  for ( auto const& p : pts )
    above += p.above_diagonal() ? 1u : 0u;
  return { { "cutoff", cutoff },
           { "par2", par2_summary( records, cutoff ) },
           { "scatter_points", pts.size() },
           { "scatter_above_diagonal", above },
           { "cactus_csv", cactus_csv( records ) },
           { "scatter_csv", scatter_csv( pts ) },
           { "par2_csv", par2_csv( records, cutoff ) } };
}

} // namespace cascad
