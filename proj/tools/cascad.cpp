#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <cascad/aiger.hpp>
#include <cascad/augment.hpp>
#include <cascad/bench.hpp>
#include <cascad/cnf.hpp>
#include <cascad/estimator.hpp>
#include <cascad/external_estimator.hpp>
#include <cascad/generators.hpp>
#include <cascad/heuristics.hpp>
#include <cascad/simulation.hpp>
#include <cascad/solver.hpp>

namespace
{

using namespace cascad;

std::string slurp( std::string const& path )
{
  std::ifstream is( path, std::ios::binary );
  if ( !is )
    throw error( "cannot open " + path );
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spit( std::string const& path, std::string const& data )
{
  std::ofstream os( path, std::ios::binary );
  os << data;
  if ( !os )
    throw error( "cannot write " + path );
}

/* AIGER (.aag/.aig) or JSON graph (.json) */
circuit load_circuit( std::string const& path )
{
  if ( path.size() >= 5 && path.substr( path.size() - 5 ) == ".json" )
  {
    try
    {
      return from_json_graph( nlohmann::json::parse( slurp( path ) ) );
    }
    catch ( nlohmann::json::exception const& e )
    {
      throw parse_error( path + ": " + e.what() );
    }
  }
  return parse_aiger( slurp( path ) );
}

nlohmann::json circuit_stats( circuit const& c )
{
  return { { "gates", c.size() },
           { "pis", c.num_pis() },
           { "pos", c.num_pos() },
           { "ands", c.count( gate_kind::and_gate ) },
           { "nots", c.count( gate_kind::not_gate ) },
           { "virtual_ands", c.count( gate_kind::virtual_and ) },
           { "virtual_divs", c.count( gate_kind::virtual_div ) },
           { "depth", c.depth() } };
}

std::vector<double> parse_workload( std::string const& spec, std::size_t num_pis )
{
  if ( spec.rfind( "uniform:", 0 ) == 0 )
    return std::vector<double>( num_pis, std::stod( spec.substr( 8 ) ) );
  std::vector<double> w;
  std::stringstream ss( spec );
  std::string tok;
  while ( std::getline( ss, tok, ',' ) )
    w.push_back( std::stod( tok ) );
  return w;
}

/* "12" or "!12" */
cascad::signal parse_signal( std::string const& s )
{
  if ( !s.empty() && s[0] == '!' )
    return { static_cast<gate_id>( std::stoul( s.substr( 1 ) ) ), false };
  return { static_cast<gate_id>( std::stoul( s ) ), true };
}

int cmd_parse( std::string const& in, std::string const& json_out, std::string const& aig_out, std::string const& cnf_out, std::string const& map_out )
{
  auto const c = load_circuit( in );
  std::cout << circuit_stats( c ).dump() << "\n";
  if ( !json_out.empty() )
    spit( json_out, to_json_graph( c ).dump( 1 ) + "\n" );
  if ( !aig_out.empty() )
    spit( aig_out, emit_aiger( c, aig_out.ends_with( ".aig" ) ? aiger_format::binary : aiger_format::ascii ) );
  if ( !cnf_out.empty() || !map_out.empty() )
  {
    auto const enc = tseitin_encode( c );
    if ( !cnf_out.empty() )
      spit( cnf_out, emit_dimacs( enc.cnf ) );
    if ( !map_out.empty() )
      spit( map_out, emit_var_map( enc.map ) );
  }
  return 0;
}

int cmd_augment( std::string const& in, std::string const& out, std::vector<std::string> const& targets, std::vector<std::string> const& conds, std::optional<gate_id> influence )
{
  auto c = load_circuit( in );
  nlohmann::json added = nlohmann::json::array();
  if ( influence )
  {
    auto const area = influence_area( c, *influence );
    auto [aug, nodes] = augment_influence_area( c, *influence );
    c = std::move( aug );
    std::cout << nlohmann::json{ { "anchor", area.anchor }, { "members", area.members } }.dump() << "\n";
    for ( auto const& n : nodes )
      added.push_back( nlohmann::json{ { "div", n.gate }, { "joint", n.numerator }, { "condition", n.denominator } } );
  }
  if ( !targets.empty() )
  {
    if ( conds.empty() )
      throw invalid_operand_error( "augment: --target needs --cond" );
    std::vector<cascad::signal> cs;
    for ( auto const& s : conds )
      cs.push_back( parse_signal( s ) );
    auto [chained, cond] = chain_conditions( c, cs );
    c = std::move( chained );
    for ( auto const& t : targets )
    {
      auto [aug, node] = insert_cond( c, static_cast<gate_id>( std::stoul( t ) ), cond );
      c = std::move( aug );
      added.push_back( nlohmann::json{ { "div", node.gate }, { "joint", node.numerator }, { "condition", node.denominator } } );
    }
  }
  std::cout << added.dump() << "\n";
  auto const text = to_json_graph( c ).dump( 1 ) + "\n";
  if ( out.empty() )
    std::cout << text;
  else
    spit( out, text );
  return 0;
}

int cmd_sim( std::string const& in, std::size_t patterns, std::string const& workload, std::uint64_t seed, std::string const& out, unsigned threads, bool exact )
{
  auto const c = load_circuit( in );
  pattern_traces t;
  if ( exact )
    t = exact_truth_table( c ).traces;
  else
  {
    simulation_plan plan;
    plan.num_patterns = patterns;
    plan.seed = seed;
    if ( !workload.empty() )
      plan.workload = parse_workload( workload, c.num_pis() );
    plan.validate( c.num_pis() );
    t = simulate( c, sample_patterns( plan, c.num_pis() ), threads );
  }
  nlohmann::json probs = nlohmann::json::array();
  for ( gate_id g = 0; g < c.size(); ++g )
    probs.push_back( t.has_trace( g ) ? nlohmann::json( trace_probability( t, g ) ) : nlohmann::json() );
  std::cout << nlohmann::json{ { "patterns", t.num_patterns() }, { "probabilities", probs } }.dump() << "\n";
  if ( !out.empty() )
  {
    std::ofstream os( out, std::ios::binary );
    write_traces( os, t );
    if ( !os )
      throw error( "cannot write " + out );
  }
  return 0;
}

int report_outcome( solve_outcome const& o, bool print_model )
{
  switch ( o.status )
  {
  case solve_status::sat:
    std::cout << "s SATISFIABLE\n";
    if ( print_model )
      std::cout << format_model( *o.model );
    break;
  case solve_status::unsat:
    std::cout << "s UNSATISFIABLE\n";
    break;
  case solve_status::unknown:
    std::cout << "s UNKNOWN\n";
    break;
  }
  std::cout << "c stats " << to_json( o.stats ).dump() << "\n";
  return o.status == solve_status::sat ? 10 : o.status == solve_status::unsat ? 20 : 0;
}

int cmd_solve( std::string const& in, std::string const& drat, bool drat_binary, std::optional<std::uint64_t> conflicts, std::optional<double> seconds, std::uint64_t seed, bool model )
{
  auto const f = parse_dimacs( slurp( in ) );
  solver_config cfg;
  cfg.seed = seed;
  cfg.conflict_budget = conflicts;
  cfg.time_budget = seconds;
  std::ofstream proof;
  if ( !drat.empty() )
  {
    proof.open( drat, std::ios::binary );
    if ( !proof )
      throw error( "cannot write " + drat );
    cfg.drat = &proof;
    cfg.drat_binary = drat_binary;
  }
  return report_outcome( solve( f, cfg ), model );
}

struct csat_args
{
  std::string in;
  std::string mode{ "phase" };
  double tau{ 0.005 };
  std::string refresh;
  double threshold{ 0.9 };
  std::uint64_t budget{ 50000 };
  std::string score_mode{ "correlated" };
  double probe{ 5.0 };
  std::string backend{ "exact" };
  std::size_t patterns{ 20000 };
  std::uint64_t seed{ 0 };
  std::vector<std::string> external;
  std::string report;
  std::optional<std::uint64_t> conflicts;
  std::optional<double> seconds;
  bool model{ false };
};

int cmd_csat( csat_args const& a )
{
  auto const c = load_circuit( a.in );
  if ( c.num_pos() != 1 )
    throw shape_error( "csat: circuit must have exactly one output, has " + std::to_string( c.num_pos() ) );
  auto const po = c.pos().front();
  auto const enc = tseitin_encode( c );
  estimator_config ecfg;
  ecfg.backend = backend_from_string( a.backend );
  ecfg.num_patterns = a.patterns;
  ecfg.seed = a.seed;
  ecfg.external_command = a.external;
  solver_config scfg;
  scfg.seed = a.seed;
  nlohmann::json rep = { { "mode", a.mode } };

  auto est = a.mode == "baseline" ? nullptr : make_estimator( c, ecfg );
  solve_outcome out;
  if ( a.mode == "baseline" )
  {
    solver s( enc.cnf, scfg );
    out = s.solve( { a.conflicts, a.seconds } );
  }
  else if ( a.mode == "phase" )
  {
    refresh_schedule r;
    if ( !a.refresh.empty() )
    {
      auto const colon = a.refresh.find( ':' );
      r.every_restarts = static_cast<std::uint32_t>( std::stoul( a.refresh.substr( 0, colon ) ) );
      if ( colon != std::string::npos )
        r.max_conditions = std::stoul( a.refresh.substr( colon + 1 ) );
    }
    auto policy = std::make_shared<phase_policy>( build_phase_policy( *est, po, enc.map, a.tau, r ) );
    solver s( enc.cnf, scfg, make_phase_hooks( policy, est.get(), &enc.map ) );
    out = s.solve( { a.conflicts, a.seconds } );
    std::size_t forced = 0;
    for ( var_t v = 1; v < policy->table.size(); ++v )
      forced += phase_hook( *policy, v ) != phase_choice::abstain ? 1u : 0u;
    rep["phased_variables"] = forced;
    rep["refreshes"] = policy->refreshes;
    rep["inference_seconds"] = policy->inference_seconds;
  }
  else if ( a.mode == "clause-filter" )
  {
    clause_filter_policy fp;
    fp.threshold = a.threshold;
    fp.conflict_budget = a.budget;
    if ( a.score_mode == "independent" )
      fp.mode = clause_mode::independent;
    else if ( a.score_mode != "correlated" )
      throw invalid_operand_error( "unknown score mode '" + a.score_mode + "'" );
    solver s( enc.cnf, scfg );
    auto run = run_clause_filter( s, fp, *est, enc.map, { a.conflicts, a.seconds } );
    out = run.outcome;
    nlohmann::json reps = nlohmann::json::array();
    for ( auto const& fr : run.reports )
      reps.push_back( to_json( fr ) );
    rep["filter"] = reps;
  }
  else if ( a.mode == "adaptive" )
  {
    adaptive_policy ap;
    ap.probe_seconds = a.probe;
    ap.tau = a.tau;
    ap.probe_config = scfg;
    ap.stage2_seconds = a.seconds;
    auto r = adaptive_solve( enc.cnf, enc.map, *est, po, ap );
    out = r.outcome;
    rep["stage"] = r.stage;
    rep["stage1_seconds"] = r.stage1_seconds;
    rep["stage2_seconds"] = r.stage2_seconds;
    rep["inference_seconds"] = r.inference_seconds;
  }
  else
    throw invalid_operand_error( "unknown csat mode '" + a.mode + "'" );

  rep["status"] = to_string( out.status );
  rep["stats"] = to_json( out.stats );
  if ( out.status == solve_status::sat )
  {
    std::string wit;
    for ( auto pi : c.pis() )
      wit.push_back( ( *out.model )[*enc.map.var_of( pi )] ? '1' : '0' );
    rep["witness"] = wit;
  }
  if ( !a.report.empty() )
    spit( a.report, rep.dump( 2 ) + "\n" );
  std::cerr << rep.dump() << "\n";
  return report_outcome( out, a.model );
}

int cmd_bench_gen( std::vector<std::string> const& bases, bool standard, std::size_t random_bases, std::size_t random_pis, std::size_t random_ands, std::size_t n_sat, std::size_t n_unsat,
                   std::uint64_t seed, std::string const& out )
{
  std::vector<named_circuit> nb;
  if ( standard )
    nb = standard_bases();
  for ( auto const& b : bases )
    nb.push_back( { std::filesystem::path( b ).stem().string(), load_circuit( b ) } );
  for ( std::size_t i = 0; i < random_bases; ++i )
  {
    random_aig_params p;
    p.num_pis = random_pis;
    p.num_ands = random_ands;
    nb.push_back( { "random-" + std::to_string( i ), random_aig( p, counter_draw( seed, 0xba5eu, i ) ) } );
  }
  auto const cases = gen_suite( nb, n_sat, n_unsat, seed );
  write_suite( cases, seed, out );
  std::cout << "wrote " << cases.size() << " cases to " << out << "\n";
  return 0;
}

int cmd_bench_run( std::string const& suite, std::string const& configs, double cutoff, unsigned jobs, std::string const& out )
{
  auto const cases = read_suite( suite );
  auto const cfgs = read_run_configs( configs );
  run_options opt;
  opt.cutoff_seconds = cutoff;
  opt.jobs = jobs;
  opt.out = out;
  auto const records = run_suite( cases, cfgs, opt );
  std::cout << par2_summary( records, cutoff ).dump( 2 ) << "\n";
  return 0;
}

int cmd_bench_score( std::string const& results, double cutoff )
{
  auto const records = read_records_jsonl( results );
  std::cout << par2_csv( records, cutoff );
  return 0;
}

int cmd_bench_report( std::string const& results, double cutoff, std::string const& baseline, std::string const& out )
{
  auto const records = read_records_jsonl( results );
  auto const rep = report( records, cutoff, baseline );
  std::filesystem::create_directories( out );
  auto const dir = std::filesystem::path( out );
  spit( ( dir / "cactus.csv" ).string(), rep["cactus_csv"].get<std::string>() );
  spit( ( dir / "scatter.csv" ).string(), rep["scatter_csv"].get<std::string>() );
  spit( ( dir / "par2.csv" ).string(), rep["par2_csv"].get<std::string>() );
  spit( ( dir / "records.csv" ).string(), records_csv( records ) );
  nlohmann::json summary = { { "cutoff", cutoff }, { "par2", rep["par2"] }, { "scatter_points", rep["scatter_points"] }, { "scatter_above_diagonal", rep["scatter_above_diagonal"] } };
  spit( ( dir / "summary.json" ).string(), summary.dump( 2 ) + "\n" );
  std::cout << summary.dump( 2 ) << "\n";
  return 0;
}

} // namespace

int main( int argc, char** argv )
{
  CLI::App app{ "cascad: circuit-aware SAT solving toolkit" };
  app.require_subcommand( 1 );

  std::string in, out, json_out, aig_out, cnf_out, map_out;
  auto* parse = app.add_subcommand( "parse", "Read a circuit, print statistics, optionally convert or encode it" );
  parse->add_option( "input", in, "AIGER or JSON graph" )->required();
  parse->add_option( "--json", json_out, "write the JSON graph" );
  parse->add_option( "--aig", aig_out, "write AIGER (.aag ASCII, .aig binary)" );
  parse->add_option( "--cnf", cnf_out, "write the Tseitin CNF with the outputs asserted" );
  parse->add_option( "--map", map_out, "write the variable-to-gate map" );

  std::vector<std::string> targets, conds;
  std::optional<gate_id> influence;
  auto* augment = app.add_subcommand( "augment", "Insert virtual joint/conditional nodes" );
  augment->add_option( "input", in )->required();
  augment->add_option( "--target", targets, "target gate ids" );
  augment->add_option( "--cond", conds, "condition signals (id or !id), chained when several" );
  augment->add_option( "--influence", influence, "augment the influence area of this condition gate" );
  augment->add_option( "--out", out, "output JSON graph (default stdout)" );

  std::size_t patterns = 20000;
  std::string workload;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool exact = false;
  auto* sim = app.add_subcommand( "sim", "Simulate random or workload-biased patterns" );
  sim->add_option( "input", in )->required();
  sim->add_option( "--patterns", patterns );
  sim->add_option( "--workload", workload, "comma-separated rho per PI, or uniform:rho" );
  sim->add_option( "--seed", seed );
  sim->add_option( "--threads", threads );
  sim->add_flag( "--exact", exact, "exhaustive truth table instead of sampling" );
  sim->add_option( "--out", out, "trace file" );

  std::string drat;
  bool drat_binary = false, model = true;
  std::optional<std::uint64_t> conflicts;
  std::optional<double> seconds;
  auto* solve_cmd = app.add_subcommand( "solve", "Solve a DIMACS CNF" );
  solve_cmd->add_option( "input", in )->required();
  solve_cmd->add_option( "--drat", drat, "proof output" );
  solve_cmd->add_flag( "--binary-drat", drat_binary );
  solve_cmd->add_option( "--conflicts", conflicts );
  solve_cmd->add_option( "--time", seconds );
  solve_cmd->add_option( "--seed", seed );
  solve_cmd->add_flag( "!--no-model", model, "omit the v lines" );

  csat_args ca;
  auto* csat = app.add_subcommand( "csat", "Circuit SAT with probability-guided heuristics" );
  csat->add_option( "input", ca.in )->required();
  csat->add_option( "--mode", ca.mode, "baseline | phase | clause-filter | adaptive" );
  csat->add_option( "--tau", ca.tau );
  csat->add_option( "--refresh", ca.refresh, "k:c refreshes every k restarts with up to c decisions" );
  csat->add_option( "--threshold", ca.threshold );
  csat->add_option( "--budget", ca.budget );
  csat->add_option( "--score-mode", ca.score_mode, "correlated | independent" );
  csat->add_option( "--probe", ca.probe );
  csat->add_option( "--estimator", ca.backend, "exact | simulation | external" );
  csat->add_option( "--patterns", ca.patterns );
  csat->add_option( "--seed", ca.seed );
  csat->add_option( "--external", ca.external, "estimator command line" );
  csat->add_option( "--report", ca.report, "JSON report file" );
  csat->add_option( "--conflicts", ca.conflicts );
  csat->add_option( "--time", ca.seconds );
  csat->add_flag( "--model", ca.model );

  auto* bench = app.add_subcommand( "bench", "Benchmark suites" );
  bench->require_subcommand( 1 );
  std::vector<std::string> bases;
  std::size_t random_bases = 0, random_pis = 12, random_ands = 120, n_sat = 50, n_unsat = 50;
  auto* gen = bench->add_subcommand( "gen", "Generate a LEC suite" );
  gen->add_option( "--bases", bases, "base circuits" );
  bool standard = false;
  gen->add_flag( "--standard", standard, "include the built-in multiplier, adder and random bases" );
  gen->add_option( "--random", random_bases, "number of random base circuits" );
  gen->add_option( "--random-pis", random_pis );
  gen->add_option( "--random-ands", random_ands );
  gen->add_option( "--sat", n_sat );
  gen->add_option( "--unsat", n_unsat );
  gen->add_option( "--seed", seed );
  gen->add_option( "--out", out, "suite directory" )->required();

  std::string suite, configs, results, baseline = "baseline";
  double cutoff = 300.0;
  unsigned jobs = 1;
  auto* run = bench->add_subcommand( "run", "Run configurations on a suite" );
  run->add_option( "--suite", suite, "manifest.json" )->required();
  run->add_option( "--configs", configs, "JSON list of run configurations" )->required();
  run->add_option( "--cutoff", cutoff );
  run->add_option( "--jobs", jobs );
  run->add_option( "--out", out, "JSON-lines results" )->required();

  auto* score = bench->add_subcommand( "score", "PAR-2 per configuration" );
  score->add_option( "--results", results )->required();
  score->add_option( "--cutoff", cutoff );

  auto* rep = bench->add_subcommand( "report", "Cactus, scatter and PAR-2 tables" );
  rep->add_option( "--results", results )->required();
  rep->add_option( "--cutoff", cutoff );
  rep->add_option( "--baseline", baseline );
  rep->add_option( "--out", out, "output directory" )->required();

  CLI11_PARSE( app, argc, argv );

  try
  {
    if ( *parse )
      return cmd_parse( in, json_out, aig_out, cnf_out, map_out );
    if ( *augment )
      return cmd_augment( in, out, targets, conds, influence );
    if ( *sim )
      return cmd_sim( in, patterns, workload, seed, out, threads, exact );
    if ( *solve_cmd )
      return cmd_solve( in, drat, drat_binary, conflicts, seconds, seed, model );
    if ( *csat )
      return cmd_csat( ca );
    if ( *gen )
      return cmd_bench_gen( bases, standard, random_bases, random_pis, random_ands, n_sat, n_unsat, seed, out );
    if ( *run )
      return cmd_bench_run( suite, configs, cutoff, jobs, out );
    if ( *score )
      return cmd_bench_score( results, cutoff );
    if ( *rep )
      return cmd_bench_report( results, cutoff, baseline, out );
  }
  catch ( cascad::error const& e )
  {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  catch ( std::exception const& e )
  {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
