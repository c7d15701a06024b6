#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "circuit.hpp"
#include "cnf.hpp"
#include "error.hpp"
#include "simulation.hpp"

namespace cascad
{

enum class estimator_backend
{
  exact,
  simulation,
  external
};

enum class division_mode
{
  /* count(A and C) / count(C) on one shared pattern set */
  trace_ratio,
  /* ratio of two separately perturbed estimates; only for demonstrating error amplification */
  quotient
};

enum class clause_mode
{
  correlated,
  independent
};

enum class unmapped_policy
{
  keep,
  treat_half
};

struct estimator_config
{
  estimator_backend backend{ estimator_backend::simulation };
  std::size_t num_patterns{ 20000 };
  std::uint64_t seed{ 0 };
  /* per-PI rho for the simulation backend; empty means 0.5 everywhere */
  std::vector<double> workload;
  double polar_threshold{ 0.1 };
  /* P(C) below this (but > 0) flags a conditional as low confidence; default 1/N for simulation, 0 for exact */
  std::optional<double> denominator_floor;
  division_mode division{ division_mode::trace_ratio };
  /* quotient mode: each of P(A and C) and P(C) is shifted by +-quotient_noise with a seeded sign */
  double quotient_noise{ 0.0 };
  /* external backend: argv of the child process and per-query timeout */
  std::vector<std::string> external_command;
  double external_timeout_seconds{ 10.0 };

  void validate() const
  {
    if ( !( polar_threshold > 0.0 && polar_threshold < 0.5 ) )
      throw invalid_operand_error( "polar threshold must lie in (0, 0.5)" );
    if ( denominator_floor && !( *denominator_floor >= 0.0 ) )
      throw invalid_operand_error( "denominator floor must be >= 0" );
    if ( backend == estimator_backend::simulation && num_patterns == 0 )
      throw invalid_operand_error( "simulation backend needs at least one pattern" );
    if ( !( quotient_noise >= 0.0 ) )
      throw invalid_operand_error( "quotient noise must be >= 0" );
    if ( backend == estimator_backend::external && external_command.empty() )
      throw invalid_operand_error( "external backend needs a command" );
    if ( !( external_timeout_seconds > 0.0 ) )
      throw invalid_operand_error( "external timeout must be positive" );
  }

  double epsilon() const noexcept
  {
    if ( denominator_floor )
      return *denominator_floor;
    return backend == estimator_backend::simulation ? 1.0 / static_cast<double>( num_patterns ) : 0.0;
  }
};

enum class cond_status
{
  defined,
  undefined_condition
};

struct cond_result
{
  cond_status status{ cond_status::defined };
  /* meaningful only when defined */
  double probability{ 0.0 };
  /* P(C) as seen by the backend; absent when the backend does not report it */
  std::optional<double> condition_probability;
  bool low_confidence_polar{ false };

  bool defined() const noexcept { return status == cond_status::defined; }
};

/*! \brief Probability queries over one circuit.
 *
 * `cond_prob` canonicalizes the condition list (sorted, duplicates removed),
 * answers degenerate queries directly and memoizes everything else.
 * Implementations must be safe for concurrent queries.
 */
class estimator
{
public:
  explicit estimator( estimator_config cfg ) : cfg_( std::move( cfg ) ) { cfg_.validate(); }
  virtual ~estimator() = default;

  estimator_config const& config() const noexcept { return cfg_; }

  virtual double node_prob( signal s ) = 0;
  double node_prob( gate_id g, bool positive = true ) { return node_prob( signal{ g, positive } ); }

  cond_result cond_prob( signal target, std::vector<signal> conditions )
  {
    if ( conditions.empty() )
      throw invalid_operand_error( "cond_prob: empty condition list" );
    std::sort( conditions.begin(), conditions.end() );
    conditions.erase( std::unique( conditions.begin(), conditions.end() ), conditions.end() );
    for ( auto s : conditions )
    {
      if ( s == target )
        return { cond_status::defined, 1.0, std::nullopt, false };
      if ( s == !target )
        return { cond_status::defined, 0.0, std::nullopt, false };
    }
    key k{ target, conditions };
    {
      std::shared_lock lock( memo_mutex_ );
      if ( auto it = memo_.find( k ); it != memo_.end() )
        return it->second;
    }
    auto r = compute_cond( target, conditions );
    if ( r.defined() && r.condition_probability && *r.condition_probability > 0.0 && *r.condition_probability < cfg_.epsilon() )
      r.low_confidence_polar = true;
    std::unique_lock lock( memo_mutex_ );
    memo_.insert_or_assign( std::move( k ), r );
    return r;
  }

  cond_result cond_prob( signal target, signal condition ) { return cond_prob( target, std::vector<signal>{ condition } ); }

  /*! \brief P(g = 1 | conditions) for every gate; absent for virtual gates and undefined conditions. */
  virtual std::vector<std::optional<double>> conditional_table( std::vector<signal> const& conditions )
  {
    std::vector<std::optional<double>> table( num_gates() );
    for ( gate_id g = 0; g < table.size(); ++g )
    {
      if ( !is_boolean_gate( g ) )
        continue;
      auto r = cond_prob( signal{ g, true }, conditions );
      if ( r.defined() )
        table[g] = r.probability;
    }
    return table;
  }

  /*! \brief P(s = 1 | po = 1) for every Boolean gate s. */
  std::vector<std::optional<double>> phase_table( gate_id po )
  {
    if ( po >= num_gates() || !is_boolean_gate( po ) )
      throw invalid_operand_error( "phase_table: invalid output gate " + std::to_string( po ) );
    return conditional_table( { signal{ po, true } } );
  }

  bool is_polar( gate_id g )
  {
    auto const p = node_prob( signal{ g, true } );
    return std::min( p, 1.0 - p ) < cfg_.polar_threshold;
  }

  /*! \brief P(l1 or ... or lk) over circuit signals. */
  double clause_prob( std::span<const signal> literals, clause_mode mode = clause_mode::correlated )
  {
    if ( literals.empty() )
      throw invalid_operand_error( "clause_prob: empty clause" );
    std::vector<signal> lits( literals.begin(), literals.end() );
    std::sort( lits.begin(), lits.end() );
    if ( std::adjacent_find( lits.begin(), lits.end() ) != lits.end() )
      throw invalid_operand_error( "clause_prob: duplicate literal" );
    if ( mode == clause_mode::independent )
    {
      double none = 1.0;
      for ( auto s : lits )
        none *= 1.0 - node_prob( s );
      return std::clamp( 1.0 - none, 0.0, 1.0 );
    }
    return std::clamp( correlated_or( lits ), 0.0, 1.0 );
  }

  /*! \brief Scores a CNF clause; absent means the clause is exempt from probability-based filtering.
   *
   * Under `keep`, a correlated score needs every variable mapped, and an
   * independent score needs at least one.  Under `treat_half`, unmapped
   * literals count as independent events of probability 0.5.
   */
  std::optional<double> clause_prob( std::span<const lit> clause, var_gate_map const& map, clause_mode mode, unmapped_policy policy = unmapped_policy::keep )
  {
    std::vector<signal> mapped;
    std::size_t unmapped = 0;
    for ( auto l : clause )
    {
      if ( auto s = lit_to_signal( map, l ) )
        mapped.push_back( *s );
      else
        ++unmapped;
    }
    if ( mapped.empty() && policy == unmapped_policy::keep )
      return std::nullopt;
    if ( unmapped > 0 && mode == clause_mode::correlated && policy == unmapped_policy::keep )
      return std::nullopt;
    auto const half_none = std::pow( 0.5, static_cast<double>( unmapped ) );
    if ( mapped.empty() )
      return 1.0 - half_none;
    return 1.0 - ( 1.0 - clause_prob( mapped, mode ) ) * half_none;
  }

  virtual std::size_t num_gates() const noexcept = 0;

protected:
  /* conditions are sorted, unique and do not mention the target */
  virtual cond_result compute_cond( signal target, std::vector<signal> const& conditions ) = 0;
  virtual bool is_boolean_gate( gate_id g ) const noexcept = 0;

  /* 1 - P(!l1) P(!l2 | !l1) ... via the chain rule */
  virtual double correlated_or( std::vector<signal> const& lits )
  {
    double none = 1.0 - node_prob( lits[0] );
    std::vector<signal> given{ !lits[0] };
    for ( std::size_t i = 1; i < lits.size() && none > 0.0; ++i )
    {
      auto r = cond_prob( !lits[i], given );
      if ( !r.defined() )
        return 1.0;
      none *= r.probability;
      given.push_back( !lits[i] );
    }
    return 1.0 - none;
  }

  estimator_config cfg_;

private:
  struct key
  {
    signal target;
    std::vector<signal> conditions;
    friend auto operator<=>( key const&, key const& ) = default;
  };

  std::shared_mutex memo_mutex_;
  std::map<key, cond_result> memo_;
};

/*! \brief Estimator over exhaustive (EXACT) or sampled (SIMULATION) traces. */
class trace_estimator : public estimator
{
public:
  trace_estimator( circuit const& c, estimator_config cfg ) : estimator( std::move( cfg ) ), c_( c )
  {
    switch ( cfg_.backend )
    {
    case estimator_backend::exact:
      traces_ = exact_truth_table( c_ ).traces;
      break;
    case estimator_backend::simulation:
    {
      simulation_plan plan;
      plan.num_patterns = cfg_.num_patterns;
      plan.seed = cfg_.seed;
      plan.workload = cfg_.workload;
      plan.validate( c_.num_pis() );
      traces_ = simulate( c_, sample_patterns( plan, c_.num_pis() ) );
      break;
    }
    case estimator_backend::external:
      throw invalid_operand_error( "trace_estimator cannot serve the external backend" );
    }
  }

  /* Uses precomputed traces of `c` (e.g. loaded from a trace file). */
  trace_estimator( circuit const& c, pattern_traces traces, estimator_config cfg ) : estimator( std::move( cfg ) ), c_( c ), traces_( std::move( traces ) )
  {
    if ( traces_.num_gates() != c_.size() )
      throw shape_error( "trace set does not match the circuit size" );
  }

  circuit const& network() const noexcept { return c_; }
  pattern_traces const& traces() const noexcept { return traces_; }
  std::size_t num_gates() const noexcept override { return c_.size(); }

  using estimator::node_prob;
  double node_prob( signal s ) override
  {
    check_traced( s.gate );
    auto const p = static_cast<double>( traces_.popcount( s.gate ) ) / static_cast<double>( traces_.num_patterns() );
    return s.positive ? p : 1.0 - p;
  }

  std::vector<std::optional<double>> conditional_table( std::vector<signal> const& conditions ) override
  {
    if ( cfg_.division == division_mode::quotient )
      return estimator::conditional_table( conditions );
    if ( conditions.empty() )
      throw invalid_operand_error( "conditional_table: empty condition list" );
    auto const cond = conjunction( conditions );
    auto const count_c = popcount( cond );
    std::vector<std::optional<double>> table( c_.size() );
    if ( count_c == 0 )
      return table;
    for ( gate_id g = 0; g < c_.size(); ++g )
    {
      if ( c_.is_virtual( g ) )
        continue;
      auto const row = traces_.row( g );
      std::size_t joint = 0;
      for ( std::size_t w = 0; w < row.size(); ++w )
        joint += static_cast<std::size_t>( std::popcount( row[w] & cond[w] ) );
      table[g] = static_cast<double>( joint ) / static_cast<double>( count_c );
    }
    return table;
  }

protected:
  bool is_boolean_gate( gate_id g ) const noexcept override { return g < c_.size() && !c_.is_virtual( g ); }

  cond_result compute_cond( signal target, std::vector<signal> const& conditions ) override
  {
    check_traced( target.gate );
    auto const cond = conjunction( conditions );
    auto const n = static_cast<double>( traces_.num_patterns() );
    auto const count_c = popcount( cond );
    auto joint = cond;
    and_into( joint, target );
    auto const count_joint = popcount( joint );

    cond_result r;
    r.condition_probability = static_cast<double>( count_c ) / n;
    if ( cfg_.division == division_mode::quotient )
    {
      auto const h = query_hash( target, conditions );
      auto const sign = [&]( std::uint64_t stream ) { return ( counter_draw( cfg_.seed, h, stream ) & 1u ) ? 1.0 : -1.0; };
      auto const pj = static_cast<double>( count_joint ) / n + sign( 0 ) * cfg_.quotient_noise;
      auto const pc = static_cast<double>( count_c ) / n + sign( 1 ) * cfg_.quotient_noise;
      r.condition_probability = std::max( pc, 0.0 );
      if ( pc <= 0.0 )
      {
        r.status = cond_status::undefined_condition;
        return r;
      }
      // deliberately unclamped: the demonstration measures the raw quotient
      r.probability = pj / pc;
      return r;
    }
    if ( count_c == 0 )
    {
      r.status = cond_status::undefined_condition;
      return r;
    }
    r.probability = static_cast<double>( count_joint ) / static_cast<double>( count_c );
    return r;
  }

  double correlated_or( std::vector<signal> const& lits ) override
  {
    std::vector<std::uint64_t> any( traces_.words(), 0u );
    auto const mask = tail_mask( traces_.num_patterns() );
    for ( auto s : lits )
    {
      check_traced( s.gate );
      auto const row = traces_.row( s.gate );
      for ( std::size_t w = 0; w < row.size(); ++w )
        any[w] |= s.positive ? row[w] : ~row[w];
    }
    if ( !any.empty() )
      any.back() &= mask;
    return static_cast<double>( popcount( any ) ) / static_cast<double>( traces_.num_patterns() );
  }

private:
  void check_traced( gate_id g ) const
  {
    if ( g >= c_.size() )
      throw invalid_operand_error( "gate " + std::to_string( g ) + " out of range" );
    if ( !traces_.has_trace( g ) )
      throw invalid_operand_error( "gate " + std::to_string( g ) + " has no trace (virtual DIV gates are queried through cond_prob)" );
  }

  void and_into( std::vector<std::uint64_t>& acc, signal s ) const
  {
    auto const row = traces_.row( s.gate );
    for ( std::size_t w = 0; w < row.size(); ++w )
      acc[w] &= s.positive ? row[w] : ~row[w];
  }

  std::vector<std::uint64_t> conjunction( std::vector<signal> const& conditions ) const
  {
    std::vector<std::uint64_t> acc( traces_.words(), ~std::uint64_t{ 0 } );
    if ( !acc.empty() )
      acc.back() = tail_mask( traces_.num_patterns() );
    for ( auto s : conditions )
    {
      check_traced( s.gate );
      and_into( acc, s );
    }
    return acc;
  }

  static std::size_t popcount( std::vector<std::uint64_t> const& v ) noexcept
  {
    std::size_t n = 0;
    for ( auto w : v )
      n += static_cast<std::size_t>( std::popcount( w ) );
    return n;
  }

  static std::uint64_t query_hash( signal target, std::vector<signal> const& conditions ) noexcept
  {
    auto h = mix64( ( std::uint64_t{ target.gate } << 1 ) | target.positive );
    for ( auto s : conditions )
      h = mix64( h ^ ( ( std::uint64_t{ s.gate } << 1 ) | s.positive ) );
    return h;
  }

  circuit c_;
  pattern_traces traces_;
};

} // namespace cascad
