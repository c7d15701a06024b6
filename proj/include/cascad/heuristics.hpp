#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "circuit.hpp"
#include "cnf.hpp"
#include "error.hpp"
#include "estimator.hpp"
#include "solver.hpp"

namespace cascad
{

//----------------------------------------------------------------------
// phase selection
//----------------------------------------------------------------------

/*! \brief Three-way rule: 0 if p < tau, 1 if p > 1 - tau, abstain otherwise (and without information). */
inline constexpr phase_choice phase_rule( std::optional<double> p, double tau ) noexcept
{
  if ( !p )
    return phase_choice::abstain;
  if ( *p < tau )
    return phase_choice::zero;
  if ( *p > 1.0 - tau )
    return phase_choice::one;
  return phase_choice::abstain;
}

struct refresh_schedule
{
  /* 0 keeps the table static; k > 0 recomputes it every k restarts */
  std::uint32_t every_restarts{ 0 };
  std::size_t max_conditions{ 8 };

  bool enabled() const noexcept { return every_restarts > 0; }
};

struct phase_policy
{
  double tau{ 0.005 };
  gate_id po{ invalid_gate };
  refresh_schedule refresh;
  /* indexed by variable; absent means no information */
  std::vector<std::optional<double>> table;
  /* the PO-only table, used where a refreshed entry is undefined */
  std::vector<std::optional<double>> static_table;
  std::uint32_t refreshes{ 0 };
  double inference_seconds{ 0.0 };
};

inline void check_tau( double tau )
{
  if ( !( tau > 0.0 && tau < 0.5 ) )
    throw invalid_operand_error( "tau must lie in (0, 0.5)" );
}

namespace detail
{

inline std::vector<std::optional<double>> gate_table_to_vars( std::vector<std::optional<double>> const& by_gate, var_gate_map const& map )
{
  std::vector<std::optional<double>> by_var( map.num_vars() + 1u );
  for ( var_t v = 1; v <= map.num_vars(); ++v )
    if ( auto g = map.gate_of( v ); g && *g < by_gate.size() )
      by_var[v] = by_gate[*g];
  return by_var;
}

inline double seconds_since( std::chrono::steady_clock::time_point t ) noexcept
{
  return std::chrono::duration<double>( std::chrono::steady_clock::now() - t ).count();
}

} // namespace detail

/*! \brief Table of P(gate(v) = 1 | po = 1) per variable; estimator failures leave the table empty. */
inline phase_policy build_phase_policy( estimator& est, gate_id po, var_gate_map const& map, double tau, refresh_schedule refresh = {} )
{
  check_tau( tau );
  auto const t0 = std::chrono::steady_clock::now();
  phase_policy p;
  p.tau = tau;
  p.po = po;
  p.refresh = refresh;
  try
  {
    p.table = detail::gate_table_to_vars( est.phase_table( po ), map );
  }
  catch ( invalid_operand_error const& )
  {
    throw;
  }
  catch ( error const& )
  {
    p.table.assign( map.num_vars() + 1u, std::nullopt );
  }
  p.static_table = p.table;
  p.inference_seconds = detail::seconds_since( t0 );
  return p;
}

inline phase_choice phase_hook( phase_policy const& p, var_t v ) noexcept
{
  return phase_rule( v < p.table.size() ? p.table[v] : std::nullopt, p.tau );
}

/*! \brief Recomputes the table conditioned on po = 1 and the most recent mapped decisions.
 *
 * Decisions without a gate image are ignored; undefined entries fall back to
 * the static table; an estimator failure keeps the previous table.
 */
inline phase_policy refresh_phase_policy( phase_policy const& p, estimator& est, var_gate_map const& map, std::span<const lit> decisions )
{
  auto const t0 = std::chrono::steady_clock::now();
  phase_policy out = p;
  std::vector<signal> conditions{ signal{ p.po, true } };
  std::vector<signal> recent;
  for ( auto it = decisions.rbegin(); it != decisions.rend() && recent.size() < p.refresh.max_conditions; ++it )
    if ( auto s = lit_to_signal( map, *it ) )
      recent.push_back( *s );
  if ( recent.empty() )
  {
    out.table = p.static_table;
    return out;
  }
  conditions.insert( conditions.end(), recent.begin(), recent.end() );
  try
  {
    auto fresh = detail::gate_table_to_vars( est.conditional_table( conditions ), map );
    for ( std::size_t v = 0; v < fresh.size(); ++v )
      if ( !fresh[v] && v < p.static_table.size() )
        fresh[v] = p.static_table[v];
    out.table = std::move( fresh );
    ++out.refreshes;
  }
  catch ( error const& )
  {
  }
  out.inference_seconds += detail::seconds_since( t0 );
  return out;
}

/*! \brief Solver hooks backed by a shared policy; with a refresh schedule the table is swapped at restart boundaries. */
inline solver_hooks make_phase_hooks( std::shared_ptr<phase_policy> policy, estimator* est = nullptr, var_gate_map const* map = nullptr )
{
  solver_hooks h;
  h.phase = [policy]( var_t v ) { return phase_hook( *policy, v ); };
  if ( policy->refresh.enabled() && est && map )
  {
    auto counter = std::make_shared<std::uint64_t>( 0u );
    h.on_restart = [policy, est, map, counter]( std::span<const lit> decisions ) {
      if ( ++*counter % policy->refresh.every_restarts == 0 )
        *policy = refresh_phase_policy( *policy, *est, *map, decisions );
    };
  }
  return h;
}

//----------------------------------------------------------------------
// clause filter
//----------------------------------------------------------------------

struct clause_filter_policy
{
  std::uint64_t conflict_budget{ 50000 };
  double threshold{ 0.9 };
  clause_mode mode{ clause_mode::correlated };
  unmapped_policy unmapped{ unmapped_policy::keep };
  /* fire again every `period` conflicts after the first checkpoint */
  std::optional<std::uint64_t> period;
  /* split used for the per-LBD low/high probability counts */
  double low_probability_cut{ 0.8 };

  void validate() const
  {
    if ( conflict_budget == 0 )
      throw invalid_operand_error( "clause filter budget must be >= 1" );
    if ( !( threshold > 0.0 && threshold <= 1.0 ) )
      throw invalid_operand_error( "clause filter threshold must lie in (0, 1]" );
    if ( period && *period == 0 )
      throw invalid_operand_error( "clause filter period must be >= 1" );
  }
};

struct scored_clause
{
  clause_t lits;
  std::uint32_t lbd{ 1 };
  /* absent for exempt clauses and estimator failures */
  std::optional<double> prob;
  bool kept{ true };
  bool failed{ false };
};

struct lbd_bucket
{
  std::size_t total{ 0 };
  std::size_t low_probability{ 0 };
  std::size_t kept{ 0 };
};

struct filter_report
{
  std::uint64_t fired_at{ 0 };
  /* false when the search finished before the checkpoint and the report was taken at solve end */
  bool at_checkpoint{ false };
  double threshold{ 0.0 };
  std::size_t exported{ 0 };
  std::size_t kept{ 0 };
  std::size_t dropped{ 0 };
  std::size_t exempt{ 0 };
  std::size_t failures{ 0 };
  std::array<std::size_t, 10> histogram{};
  /* LBD 1, 2 and 3+ */
  std::array<lbd_bucket, 3> by_lbd{};
  double inference_seconds{ 0.0 };
  std::vector<scored_clause> clauses;
};

inline nlohmann::json to_json( filter_report const& r, bool with_clauses = false )
{
  nlohmann::json buckets = nlohmann::json::array();
  char const* names[] = { "1", "2", "3+" };
  for ( std::size_t i = 0; i < 3; ++i )
    buckets.push_back( { { "lbd", names[i] }, { "total", r.by_lbd[i].total }, { "low_probability", r.by_lbd[i].low_probability }, { "kept", r.by_lbd[i].kept } } );
  nlohmann::json j = { { "fired_at", r.fired_at },
                       { "at_checkpoint", r.at_checkpoint },
                       { "threshold", r.threshold },
                       { "clauses", r.exported },
                       { "kept", r.kept },
                       { "dropped", r.dropped },
                       { "exempt", r.exempt },
                       { "failures", r.failures },
                       { "histogram", r.histogram },
                       { "by_lbd", buckets },
                       { "inference_seconds", r.inference_seconds } };
  if ( with_clauses )
  {
    nlohmann::json cs = nlohmann::json::array();
    for ( auto const& c : r.clauses )
    {
      std::vector<int> lits;
      for ( auto l : c.lits )
        lits.push_back( l.to_dimacs() );
      cs.push_back( { { "lits", lits }, { "lbd", c.lbd }, { "prob", c.prob ? nlohmann::json( *c.prob ) : nlohmann::json() }, { "kept", c.kept }, { "failed", c.failed } } );
    }
    j["scored"] = std::move( cs );
  }
  return j;
}

/*! \brief Scores `clauses` and decides retention: kept iff P < threshold, or exempt, or the estimator failed.
 *  Threshold 1 keeps everything, including clauses scored exactly 1. */
inline filter_report score_learnts( std::vector<learnt_clause> const& clauses, clause_filter_policy const& policy, estimator& est, var_gate_map const& map )
{
  auto const t0 = std::chrono::steady_clock::now();
  filter_report r;
  r.threshold = policy.threshold;
  r.exported = clauses.size();
  for ( auto const& lc : clauses )
  {
    scored_clause sc{ lc.lits, lc.lbd, std::nullopt, true, false };
    try
    {
      sc.prob = est.clause_prob( lc.lits, map, policy.mode, policy.unmapped );
    }
    catch ( error const& )
    {
      sc.failed = true;
    }
    auto& bucket = r.by_lbd[std::min<std::uint32_t>( lc.lbd, 3u ) - 1u];
    ++bucket.total;
    if ( sc.failed )
      ++r.failures;
    else if ( !sc.prob )
      ++r.exempt;
    else
    {
      sc.kept = policy.threshold >= 1.0 || *sc.prob < policy.threshold;
      r.histogram[std::min<std::size_t>( 9u, static_cast<std::size_t>( std::floor( *sc.prob * 10.0 ) ) )]++;
      if ( *sc.prob < policy.low_probability_cut )
        ++bucket.low_probability;
    }
    if ( sc.kept )
    {
      ++r.kept;
      ++bucket.kept;
    }
    else
      ++r.dropped;
    r.clauses.push_back( std::move( sc ) );
  }
  r.inference_seconds = detail::seconds_since( t0 );
  return r;
}

struct filter_run
{
  solve_outcome outcome;
  std::vector<filter_report> reports;
  double inference_seconds{ 0.0 };
};

/*! \brief Solves with the pause-score-reinsert protocol.
 *
 * The solver runs until the conflict budget, exports its learnt clauses,
 * keeps those scoring below the threshold, reinstalls them and resumes.  If
 * the search ends first, one report is taken at solve end without touching
 * the database.  `limits` bound the whole run.
 */
inline filter_run run_clause_filter( solver& s, clause_filter_policy const& policy, estimator& est, var_gate_map const& map, search_limits limits = {} )
{
  policy.validate();
  filter_run run;
  auto const start = std::chrono::steady_clock::now();
  auto const start_conflicts = s.stats().conflicts;
  auto next_fire = start_conflicts + policy.conflict_budget;
  for ( ;; )
  {
    search_limits step;
    step.conflicts = next_fire - s.stats().conflicts;
    if ( limits.conflicts )
    {
      auto const used = s.stats().conflicts - start_conflicts;
      if ( used >= *limits.conflicts )
        break;
      step.conflicts = std::min( *step.conflicts, *limits.conflicts - used );
    }
    if ( limits.seconds )
    {
      auto const left = *limits.seconds - detail::seconds_since( start );
      if ( left <= 0.0 )
        break;
      step.seconds = left;
    }
    run.outcome = s.solve( step );
    if ( run.outcome.status != solve_status::unknown )
    {
      if ( run.reports.empty() )
      {
        s.backtrack( 0 );
        auto rep = score_learnts( s.export_learnts(), policy, est, map );
        rep.fired_at = s.stats().conflicts;
        rep.at_checkpoint = false;
        run.inference_seconds += rep.inference_seconds;
        run.reports.push_back( std::move( rep ) );
      }
      return run;
    }
    if ( s.stats().conflicts < next_fire )
      break; // stopped by the caller's limits
    auto rep = score_learnts( s.export_learnts(), policy, est, map );
    rep.fired_at = s.stats().conflicts;
    rep.at_checkpoint = true;
    std::vector<learnt_clause> retained;
    for ( auto const& sc : rep.clauses )
      if ( sc.kept )
        retained.push_back( { sc.lits, sc.lbd, 0.0, sc.prob } );
    s.replace_learnts( retained );
    run.inference_seconds += rep.inference_seconds;
    run.reports.push_back( std::move( rep ) );
    if ( !policy.period )
      next_fire = std::numeric_limits<std::uint64_t>::max();
    else
      next_fire = s.stats().conflicts + *policy.period;
  }
  run.outcome.status = solve_status::unknown;
  run.outcome.model.reset();
  run.outcome.stats = s.stats();
  return run;
}

//----------------------------------------------------------------------
// adaptive UNSAT switch
//----------------------------------------------------------------------

struct adaptive_policy
{
  double probe_seconds{ 5.0 };
  solver_config probe_config{};
  double tau{ 0.005 };
  refresh_schedule refresh{};
  solver_config unsat_config{ solver_config::unsat_tuned() };
  /* hand stage-1 learnt clauses to stage 2 (stage-2 proofs are then not self-contained) */
  bool carryover{ false };
  /* limit for stage 2; absent means unlimited */
  std::optional<double> stage2_seconds;

  void validate() const
  {
    if ( !( probe_seconds > 0.0 ) )
      throw invalid_operand_error( "probe budget must be positive" );
    check_tau( tau );
  }
};

struct adaptive_outcome
{
  solve_outcome outcome;
  int stage{ 1 };
  double stage1_seconds{ 0.0 };
  double stage2_seconds{ 0.0 };
  double inference_seconds{ 0.0 };
};

/*! \brief Probe with phase guidance for a fixed wall budget; on UNKNOWN rerun with the UNSAT-tuned configuration and no hook. */
inline adaptive_outcome adaptive_solve( cnf_formula const& f, var_gate_map const& map, estimator& est, gate_id po, adaptive_policy const& policy )
{
  policy.validate();
  adaptive_outcome r;
  auto policy_ptr = std::make_shared<phase_policy>( build_phase_policy( est, po, map, policy.tau, policy.refresh ) );
  r.inference_seconds = policy_ptr->inference_seconds;

  auto const t1 = std::chrono::steady_clock::now();
  solver probe( f, policy.probe_config, make_phase_hooks( policy_ptr, &est, &map ) );
  r.outcome = probe.solve( search_limits{ std::nullopt, policy.probe_seconds } );
  r.stage1_seconds = detail::seconds_since( t1 );
  r.inference_seconds = policy_ptr->inference_seconds;
  if ( r.outcome.status != solve_status::unknown )
    return r;

  r.stage = 2;
  auto const t2 = std::chrono::steady_clock::now();
  solver tuned( f, policy.unsat_config );
  if ( policy.carryover )
    tuned.import_learnts( probe.export_learnts() );
  r.outcome = tuned.solve( search_limits{ std::nullopt, policy.stage2_seconds } );
  r.stage2_seconds = detail::seconds_since( t2 );
  return r;
}

} // namespace cascad
