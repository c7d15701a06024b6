#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cnf.hpp"
#include "error.hpp"
#include "simulation.hpp"

namespace cascad
{

enum class solve_status
{
  sat,
  unsat,
  unknown
};

inline std::string to_string( solve_status s )
{
  switch ( s )
  {
  case solve_status::sat:
    return "SAT";
  case solve_status::unsat:
    return "UNSAT";
  case solve_status::unknown:
    return "UNKNOWN";
  }
  return "?";
}

enum class default_phase
{
  /* phase saving; never-assigned variables start false */
  saved,
  false_phase,
  true_phase
};

enum class phase_choice
{
  zero,
  one,
  abstain
};

struct solver_config
{
  /* Luby restarts: the i-th restart interval is luby(i) * restart_unit conflicts */
  std::uint32_t restart_unit{ 64 };
  bool restarts{ true };
  /* first reduction after `reduce_interval` conflicts, each later gap grows by `reduce_increment` */
  std::uint64_t reduce_interval{ 2000 };
  std::uint64_t reduce_increment{ 300 };
  std::uint32_t keep_lbd{ 2 };
  default_phase phase{ default_phase::saved };
  /* per solve() call */
  std::optional<std::uint64_t> conflict_budget;
  std::optional<double> time_budget;
  std::uint64_t seed{ 0 };
  double var_decay{ 0.95 };
  double clause_decay{ 0.999 };
  bool minimize{ true };
  std::ostream* drat{ nullptr };
  bool drat_binary{ false };

  void validate() const
  {
    if ( restart_unit == 0 )
      throw invalid_operand_error( "restart unit must be positive" );
    if ( reduce_interval == 0 )
      throw invalid_operand_error( "reduce interval must be positive" );
    if ( conflict_budget && *conflict_budget == 0 )
      throw invalid_operand_error( "conflict budget must be positive" );
    if ( time_budget && !( *time_budget > 0.0 ) )
      throw invalid_operand_error( "time budget must be positive" );
    if ( !( var_decay > 0.0 && var_decay < 1.0 ) || !( clause_decay > 0.0 && clause_decay < 1.0 ) )
      throw invalid_operand_error( "decay factors must lie in (0, 1)" );
  }

  /* Longer restarts, keep LBD <= 3, phase FALSE. */
  static solver_config unsat_tuned()
  {
    solver_config c;
    c.restart_unit = 512;
    c.keep_lbd = 3;
    c.phase = default_phase::false_phase;
    return c;
  }
};

struct solver_hooks
{
  std::function<phase_choice( var_t )> phase;
  /* called at each restart, before backtracking, with the decision literals of the trail */
  std::function<void( std::span<const lit> )> on_restart;
};

struct solver_stats
{
  std::uint64_t conflicts{ 0 };
  std::uint64_t decisions{ 0 };
  std::uint64_t propagations{ 0 };
  std::uint64_t restarts{ 0 };
  std::uint64_t learnt_clauses{ 0 };
  std::uint64_t learnt_units{ 0 };
  std::uint64_t deleted_clauses{ 0 };
  std::uint64_t reductions{ 0 };
  std::uint64_t imported_clauses{ 0 };
  double wall_seconds{ 0.0 };

  /* everything except wall time, which is not reproducible */
  bool same_search( solver_stats const& o ) const noexcept
  {
    return conflicts == o.conflicts && decisions == o.decisions && propagations == o.propagations && restarts == o.restarts &&
           learnt_clauses == o.learnt_clauses && learnt_units == o.learnt_units && deleted_clauses == o.deleted_clauses && reductions == o.reductions &&
           imported_clauses == o.imported_clauses;
  }
};

inline nlohmann::json to_json( solver_stats const& s )
{
  return { { "conflicts", s.conflicts },
           { "decisions", s.decisions },
           { "propagations", s.propagations },
           { "restarts", s.restarts },
           { "learnt_clauses", s.learnt_clauses },
           { "learnt_units", s.learnt_units },
           { "deleted_clauses", s.deleted_clauses },
           { "reductions", s.reductions },
           { "imported_clauses", s.imported_clauses },
           { "wall_seconds", s.wall_seconds } };
}

inline solver_stats stats_from_json( nlohmann::json const& j )
{
  solver_stats s;
  s.conflicts = j.value( "conflicts", std::uint64_t{ 0 } );
  s.decisions = j.value( "decisions", std::uint64_t{ 0 } );
  s.propagations = j.value( "propagations", std::uint64_t{ 0 } );
  s.restarts = j.value( "restarts", std::uint64_t{ 0 } );
  s.learnt_clauses = j.value( "learnt_clauses", std::uint64_t{ 0 } );
  s.learnt_units = j.value( "learnt_units", std::uint64_t{ 0 } );
  s.deleted_clauses = j.value( "deleted_clauses", std::uint64_t{ 0 } );
  s.reductions = j.value( "reductions", std::uint64_t{ 0 } );
  s.imported_clauses = j.value( "imported_clauses", std::uint64_t{ 0 } );
  s.wall_seconds = j.value( "wall_seconds", 0.0 );
  return s;
}

struct solve_outcome
{
  solve_status status{ solve_status::unknown };
  /* indexed by variable; entry 0 is unused */
  std::optional<std::vector<bool>> model;
  solver_stats stats;
};

struct learnt_clause
{
  clause_t lits;
  std::uint32_t lbd{ 1 };
  double activity{ 0.0 };
  std::optional<double> prob;
};

struct conflict_analysis
{
  /* asserting literal first, then the literal of the backjump level */
  clause_t learnt;
  std::uint32_t backjump_level{ 0 };
  std::uint32_t lbd{ 0 };
};

struct search_limits
{
  /* conflicts and seconds allowed in this call */
  std::optional<std::uint64_t> conflicts;
  std::optional<double> seconds;
};

/*! \brief Luby sequence 1 1 2 1 1 2 4 ... (0-based index). */
inline std::uint64_t luby( std::uint64_t i ) noexcept
{
  std::uint64_t size = 1, seq = 0;
  while ( size < i + 1 )
  {
    ++seq;
    size = 2 * size + 1;
  }
  while ( size - 1 != i )
  {
    size = ( size - 1 ) >> 1;
    --seq;
    i = i % size;
  }
  return std::uint64_t{ 1 } << seq;
}

inline bool satisfies( std::vector<bool> const& model, clause_t const& c ) noexcept
{
  return std::any_of( c.begin(), c.end(), [&]( lit l ) { return l.var() < model.size() && model[l.var()] != l.negated(); } );
}

/*! \brief CDCL solver: two watched literals, first-UIP learning with minimization,
 *  exponential VSIDS, Luby restarts, tiered learnt-clause reduction, DRAT output.
 *
 * `solve` may be called again after an UNKNOWN outcome and continues the
 * search.  Export/import of learnt clauses is only allowed at decision level 0,
 * which is where `solve` leaves the solver after a budget stop.
 */
class solver
{
public:
  using clause_ref = std::uint32_t;
  static constexpr clause_ref no_reason = std::numeric_limits<clause_ref>::max();

  explicit solver( cnf_formula const& f, solver_config cfg = {}, solver_hooks hooks = {} ) : cfg_( std::move( cfg ) ), hooks_( std::move( hooks ) ), n_( f.num_vars )
  {
    cfg_.validate();
    val_.assign( n_ + 1u, 0 );
    level_.assign( n_ + 1u, 0u );
    reason_.assign( n_ + 1u, no_reason );
    saved_.assign( n_ + 1u, false );
    activity_.assign( n_ + 1u, 0.0 );
    seen_.assign( n_ + 1u, 0u );
    heap_index_.assign( n_ + 1u, -1 );
    watches_.resize( 2u * ( n_ + 1u ) );
    for ( var_t v = 1; v <= n_; ++v )
    {
      if ( cfg_.seed != 0 )
        activity_[v] = static_cast<double>( counter_draw( cfg_.seed, 0xac7u, v ) >> 11 ) * 0x1p-53 * 1e-5;
      heap_insert( v );
    }
    next_reduce_ = cfg_.reduce_interval;
    original_ = f.clauses;
    for ( auto const& c : f.clauses )
    {
      for ( auto l : c )
        if ( l.var() == 0 || l.var() > n_ )
          throw invalid_operand_error( "clause literal " + std::to_string( l.to_dimacs() ) + " outside the declared variables" );
      add_input_clause( c );
    }
  }

  solver( solver const& ) = delete;
  solver& operator=( solver const& ) = delete;

  var_t num_vars() const noexcept { return n_; }
  solver_config const& config() const noexcept { return cfg_; }
  solver_stats const& stats() const noexcept { return stats_; }
  solver_hooks& hooks() noexcept { return hooks_; }
  bool okay() const noexcept { return ok_; }

  solve_outcome solve() { return solve( search_limits{ cfg_.conflict_budget, cfg_.time_budget } ); }

  solve_outcome solve( search_limits lim )
  {
    using clock = std::chrono::steady_clock;
    auto const start = clock::now();
    std::uint64_t const stop_conflicts = lim.conflicts ? stats_.conflicts + *lim.conflicts : std::numeric_limits<std::uint64_t>::max();
    auto finish = [&]( solve_status s ) {
      stats_.wall_seconds += std::chrono::duration<double>( clock::now() - start ).count();
      solve_outcome out;
      out.status = s;
      out.stats = stats_;
      if ( s == solve_status::sat )
        out.model = final_model_;
      return out;
    };
    auto timed_out = [&] { return lim.seconds && std::chrono::duration<double>( clock::now() - start ).count() >= *lim.seconds; };

    if ( final_ )
      return finish( *final_ );
    if ( !ok_ )
      return conclude_unsat( finish );

    std::uint64_t idle_checks = 0;
    for ( ;; )
    {
      if ( auto confl = propagate() )
      {
        ++stats_.conflicts;
        ++conflicts_since_restart_;
        if ( decision_level() == 0 )
        {
          ok_ = false;
          return conclude_unsat( finish );
        }
        auto a = analyze( *confl );
        backtrack( a.backjump_level );
        learn( a );
        var_inc_ /= cfg_.var_decay;
        cla_inc_ /= cfg_.clause_decay;
        if ( stats_.conflicts >= stop_conflicts || timed_out() )
        {
          backtrack( 0 );
          return finish( solve_status::unknown );
        }
        continue;
      }
      if ( ( ++idle_checks & 1023u ) == 0 && timed_out() )
      {
        backtrack( 0 );
        return finish( solve_status::unknown );
      }
      if ( cfg_.restarts && conflicts_since_restart_ >= luby( restart_index_ ) * cfg_.restart_unit )
      {
        restart();
        continue;
      }
      if ( stats_.conflicts >= next_reduce_ )
      {
        ++reduce_round_;
        next_reduce_ = stats_.conflicts + cfg_.reduce_interval + reduce_round_ * cfg_.reduce_increment;
        reduce_db();
      }
      if ( !decide() )
      {
        final_model_.assign( n_ + 1u, false );
        for ( var_t v = 1; v <= n_; ++v )
          final_model_[v] = val_[v] > 0;
        for ( auto const& c : original_ )
          if ( !satisfies( final_model_, c ) )
            throw correctness_alarm( "solver model violates an input clause" );
        final_ = solve_status::sat;
        return finish( solve_status::sat );
      }
    }
  }

  //--------------------------------------------------------------------
  // stepping interface
  //--------------------------------------------------------------------

  std::uint32_t decision_level() const noexcept { return static_cast<std::uint32_t>( trail_lim_.size() ); }
  std::span<const lit> trail() const noexcept { return trail_; }
  /* 1 true, -1 false, 0 unassigned */
  int value( lit l ) const noexcept
  {
    auto const v = val_[l.var()];
    return l.negated() ? -v : v;
  }
  std::uint32_t level( var_t v ) const noexcept { return level_[v]; }
  clause_ref reason( var_t v ) const noexcept { return reason_[v]; }
  std::span<const lit> clause_literals( clause_ref c ) const noexcept { return clauses_[c].lits; }

  /* Opens a new decision level and assigns `l`; the literal must be unassigned. */
  void assign_decision( lit l )
  {
    if ( l.var() == 0 || l.var() > n_ || val_[l.var()] != 0 )
      throw invalid_operand_error( "assign_decision: literal is out of range or already assigned" );
    trail_lim_.push_back( trail_.size() );
    enqueue( l, no_reason );
  }

  /* Picks the most active unassigned variable, applies the phase rule and assigns it. */
  std::optional<lit> decide()
  {
    var_t v = 0;
    while ( !heap_.empty() )
    {
      auto const top = heap_pop();
      if ( val_[top] == 0 )
      {
        v = top;
        break;
      }
    }
    if ( v == 0 )
      return std::nullopt;
    bool negated = true;
    auto choice = hooks_.phase ? hooks_.phase( v ) : phase_choice::abstain;
    if ( choice == phase_choice::zero )
      negated = true;
    else if ( choice == phase_choice::one )
      negated = false;
    else if ( cfg_.phase == default_phase::saved )
      negated = !saved_[v];
    else
      negated = cfg_.phase == default_phase::false_phase;
    ++stats_.decisions;
    lit const d( v, negated );
    trail_lim_.push_back( trail_.size() );
    enqueue( d, no_reason );
    return d;
  }

  /*! \brief Unit propagation to fixpoint; returns the conflicting clause if any. */
  std::optional<clause_ref> propagate()
  {
    while ( qhead_ < trail_.size() )
    {
      auto const p = trail_[qhead_++];
      auto const false_lit = ~p;
      auto& ws = watches_[p.code];
      ++stats_.propagations;
      std::size_t i = 0, j = 0;
      while ( i < ws.size() )
      {
        auto const w = ws[i];
        if ( value( w.blocker ) == 1 )
        {
          ws[j++] = ws[i++];
          continue;
        }
        auto& c = clauses_[w.cref].lits;
        if ( c[0] == false_lit )
          std::swap( c[0], c[1] );
        ++i;
        auto const first = c[0];
        watcher const nw{ w.cref, first };
        if ( first != w.blocker && value( first ) == 1 )
        {
          ws[j++] = nw;
          continue;
        }
        bool moved = false;
        for ( std::size_t k = 2; k < c.size(); ++k )
        {
          if ( value( c[k] ) != -1 )
          {
            std::swap( c[1], c[k] );
            watches_[( ~c[1] ).code].push_back( nw );
            moved = true;
            break;
          }
        }
        if ( moved )
          continue;
        ws[j++] = nw;
        if ( value( first ) == -1 )
        {
          while ( i < ws.size() )
            ws[j++] = ws[i++];
          ws.resize( j );
          qhead_ = trail_.size();
          return w.cref;
        }
        enqueue( first, w.cref );
      }
      ws.resize( j );
    }
    return std::nullopt;
  }

  /*! \brief First-UIP analysis of a conflict above level 0. */
  conflict_analysis analyze( clause_ref confl )
  {
    if ( decision_level() == 0 )
      throw invalid_operand_error( "analyze: conflict at decision level 0" );
    conflict_analysis a;
    a.learnt.push_back( lit{} );
    std::size_t path = 0;
    std::optional<lit> p;
    auto index = trail_.size();
    for ( ;; )
    {
      auto& cd = clauses_[confl];
      if ( cd.learnt )
        touch_learnt( confl );
      for ( std::size_t j = p ? 1u : 0u; j < cd.lits.size(); ++j )
      {
        auto const q = cd.lits[j];
        auto const v = q.var();
        if ( seen_[v] || level_[v] == 0 )
          continue;
        bump_var( v );
        seen_[v] = 1;
        if ( level_[v] >= decision_level() )
          ++path;
        else
          a.learnt.push_back( q );
      }
      do
        --index;
      while ( !seen_[trail_[index].var()] );
      p = trail_[index];
      seen_[p->var()] = 0;
      if ( --path == 0 )
        break;
      confl = reason_[p->var()];
    }
    a.learnt[0] = ~*p;

    to_clear_.assign( a.learnt.begin(), a.learnt.end() );
    if ( cfg_.minimize )
    {
      std::uint32_t abstract = 0;
      for ( std::size_t i = 1; i < a.learnt.size(); ++i )
        abstract |= abstract_level( a.learnt[i].var() );
      std::size_t j = 1;
      for ( std::size_t i = 1; i < a.learnt.size(); ++i )
        if ( reason_[a.learnt[i].var()] == no_reason || !redundant( a.learnt[i], abstract ) )
          a.learnt[j++] = a.learnt[i];
      a.learnt.resize( j );
    }
    for ( auto l : to_clear_ )
      seen_[l.var()] = 0;

    if ( a.learnt.size() > 1 )
    {
      std::size_t best = 1;
      for ( std::size_t i = 2; i < a.learnt.size(); ++i )
        if ( level_[a.learnt[i].var()] > level_[a.learnt[best].var()] )
          best = i;
      std::swap( a.learnt[1], a.learnt[best] );
      a.backjump_level = level_[a.learnt[1].var()];
    }
    a.lbd = compute_lbd( a.learnt );
    return a;
  }

  void backtrack( std::uint32_t target )
  {
    if ( decision_level() <= target )
      return;
    for ( auto i = trail_.size(); i-- > trail_lim_[target]; )
    {
      auto const v = trail_[i].var();
      saved_[v] = !trail_[i].negated();
      val_[v] = 0;
      reason_[v] = no_reason;
      if ( heap_index_[v] < 0 )
        heap_insert( v );
    }
    trail_.resize( trail_lim_[target] );
    trail_lim_.resize( target );
    qhead_ = trail_.size();
  }

  //--------------------------------------------------------------------
  // clause database
  //--------------------------------------------------------------------

  /* Snapshots of all stored learnt clauses; learnt units live on the level-0 trail and are not included. */
  std::vector<learnt_clause> export_learnts() const
  {
    require_level0( "export_learnts" );
    std::vector<learnt_clause> out;
    for ( auto cr : learnts_ )
    {
      auto const& c = clauses_[cr];
      out.push_back( { c.lits, c.lbd, c.activity, std::nullopt } );
    }
    return out;
  }

  /* Adds clauses the formula implies; literals false at level 0 are dropped and satisfied or tautological clauses skipped. */
  void import_learnts( std::span<const learnt_clause> clauses )
  {
    require_level0( "import_learnts" );
    for ( auto const& lc : clauses )
    {
      ++stats_.imported_clauses;
      add_derived_clause( lc.lits, std::max<std::uint32_t>( lc.lbd, 1u ) );
      if ( !ok_ )
        return;
    }
  }

  /* Installs `retained`, then deletes every learnt clause that was present before. */
  void replace_learnts( std::span<const learnt_clause> retained )
  {
    require_level0( "replace_learnts" );
    auto old = learnts_;
    learnts_.clear();
    import_learnts( retained );
    auto fresh = std::move( learnts_ );
    learnts_ = std::move( old );
    delete_learnts( [&]( clause_ref ) { return true; } );
    learnts_.insert( learnts_.end(), fresh.begin(), fresh.end() );
  }

  /* Deletes the learnt clauses for which `keep` is false. */
  void filter_learnts( std::function<bool( learnt_clause const& )> const& keep )
  {
    require_level0( "filter_learnts" );
    delete_learnts( [&]( clause_ref cr ) {
      auto const& c = clauses_[cr];
      return !keep( { c.lits, c.lbd, c.activity, std::nullopt } );
    } );
  }

  std::size_t num_learnts() const noexcept { return learnts_.size(); }

  /*! \brief Tiered reduction: keep LBD <= keep bound, recently used, and reason clauses. */
  void reduce_db()
  {
    ++stats_.reductions;
    delete_learnts( [&]( clause_ref cr ) {
      auto& c = clauses_[cr];
      if ( c.lbd <= cfg_.keep_lbd || c.used || locked( cr ) )
      {
        c.used = false;
        return false;
      }
      return true;
    } );
  }

private:
  struct clause_data
  {
    clause_t lits;
    bool learnt{ false };
    bool used{ false };
    std::uint32_t lbd{ 0 };
    double activity{ 0.0 };
  };

  struct watcher
  {
    clause_ref cref;
    lit blocker;
  };

  template<typename Finish>
  solve_outcome conclude_unsat( Finish& finish )
  {
    if ( !final_ )
    {
      drat_add( {} );
      final_ = solve_status::unsat;
    }
    return finish( solve_status::unsat );
  }

  void require_level0( char const* what ) const
  {
    if ( decision_level() != 0 )
      throw invalid_operand_error( std::string( what ) + " requires decision level 0" );
  }

  void enqueue( lit l, clause_ref from )
  {
    auto const v = l.var();
    val_[v] = l.negated() ? -1 : 1;
    level_[v] = decision_level();
    reason_[v] = from;
    trail_.push_back( l );
  }

  static clause_t normalize( clause_t c, bool& tautology )
  {
    std::sort( c.begin(), c.end() );
    c.erase( std::unique( c.begin(), c.end() ), c.end() );
    tautology = false;
    for ( std::size_t i = 1; i < c.size(); ++i )
      if ( c[i].var() == c[i - 1].var() )
        tautology = true;
    return c;
  }

  /* Input clauses are stored as given (no level-0 simplification) so the proof refers to the original formula. */
  void add_input_clause( clause_t const& raw )
  {
    if ( !ok_ )
      return;
    bool taut = false;
    auto c = normalize( raw, taut );
    if ( taut )
      return;
    if ( c.size() == 1 )
    {
      auto const v = value( c[0] );
      if ( v == -1 )
        ok_ = false;
      else if ( v == 0 )
        enqueue( c[0], no_reason );
      return;
    }
    // watch two non-false literals when possible
    std::stable_partition( c.begin(), c.end(), [&]( lit l ) { return value( l ) != -1; } );
    auto const cr = alloc( std::move( c ), false, 0u );
    attach( cr );
    auto const& cl = clauses_[cr].lits;
    if ( value( cl[0] ) == -1 )
      ok_ = false;
    else if ( value( cl[1] ) == -1 && value( cl[0] ) == 0 )
      enqueue( cl[0], cr );
  }

  void add_derived_clause( clause_t const& raw, std::uint32_t lbd )
  {
    bool taut = false;
    auto c = normalize( raw, taut );
    if ( taut || c.empty() )
      return;
    if ( std::any_of( c.begin(), c.end(), [&]( lit l ) { return value( l ) == 1 && level_[l.var()] == 0; } ) )
      return;
    clause_t kept;
    for ( auto l : c )
      if ( value( l ) != -1 )
        kept.push_back( l );
    drat_add( kept );
    if ( kept.empty() )
    {
      ok_ = false;
      return;
    }
    if ( kept.size() == 1 )
    {
      enqueue( kept[0], no_reason );
      return;
    }
    auto const cr = alloc( std::move( kept ), true, std::min<std::uint32_t>( lbd, static_cast<std::uint32_t>( c.size() ) ) );
    clauses_[cr].used = true;
    attach( cr );
    learnts_.push_back( cr );
  }

  void learn( conflict_analysis const& a )
  {
    ++stats_.learnt_clauses;
    drat_add( a.learnt );
    if ( a.learnt.size() == 1 )
    {
      ++stats_.learnt_units;
      enqueue( a.learnt[0], no_reason );
      return;
    }
    auto const cr = alloc( a.learnt, true, a.lbd );
    clauses_[cr].used = true;
    attach( cr );
    learnts_.push_back( cr );
    bump_clause( cr );
    enqueue( a.learnt[0], cr );
  }

  clause_ref alloc( clause_t lits, bool learnt, std::uint32_t lbd )
  {
    clause_data d{ std::move( lits ), learnt, false, lbd, 0.0 };
    if ( !free_.empty() )
    {
      auto const cr = free_.back();
      free_.pop_back();
      clauses_[cr] = std::move( d );
      return cr;
    }
    clauses_.push_back( std::move( d ) );
    return static_cast<clause_ref>( clauses_.size() - 1u );
  }

  void attach( clause_ref cr )
  {
    auto const& c = clauses_[cr].lits;
    watches_[( ~c[0] ).code].push_back( { cr, c[1] } );
    watches_[( ~c[1] ).code].push_back( { cr, c[0] } );
  }

  bool locked( clause_ref cr ) const noexcept
  {
    auto const first = clauses_[cr].lits[0];
    return reason_[first.var()] == cr && value( first ) == 1;
  }

  template<typename Drop>
  void delete_learnts( Drop&& drop )
  {
    std::vector<std::uint8_t> dead( clauses_.size(), 0u );
    std::size_t j = 0;
    bool any = false;
    for ( auto cr : learnts_ )
    {
      if ( !drop( cr ) )
      {
        learnts_[j++] = cr;
        continue;
      }
      // reasons at level 0 are never consulted
      auto const first = clauses_[cr].lits[0].var();
      if ( reason_[first] == cr )
      {
        if ( level_[first] != 0 )
          throw invalid_operand_error( "cannot delete a reason clause above level 0" );
        // keep the proof able to derive the level-0 fact without this clause
        drat_add( std::span<const lit>( clauses_[cr].lits.data(), 1u ) );
        reason_[first] = no_reason;
      }
      drat_delete( clauses_[cr].lits );
      ++stats_.deleted_clauses;
      dead[cr] = 1u;
      any = true;
    }
    learnts_.resize( j );
    if ( !any )
      return;
    for ( auto& ws : watches_ )
      ws.erase( std::remove_if( ws.begin(), ws.end(), [&]( watcher const& w ) { return dead[w.cref] != 0u; } ), ws.end() );
    for ( clause_ref cr = 0; cr < dead.size(); ++cr )
      if ( dead[cr] )
      {
        clauses_[cr].lits.clear();
        clauses_[cr].lits.shrink_to_fit();
        free_.push_back( cr );
      }
  }

  void restart()
  {
    ++stats_.restarts;
    ++restart_index_;
    conflicts_since_restart_ = 0;
    if ( hooks_.on_restart )
    {
      std::vector<lit> decisions;
      for ( auto pos : trail_lim_ )
        decisions.push_back( trail_[pos] );
      hooks_.on_restart( decisions );
    }
    backtrack( 0 );
  }

  void touch_learnt( clause_ref cr )
  {
    auto& c = clauses_[cr];
    c.used = true;
    bump_clause( cr );
    if ( c.lbd > cfg_.keep_lbd )
    {
      auto const l = compute_lbd( c.lits );
      if ( l < c.lbd )
        c.lbd = l;
    }
  }

  std::uint32_t compute_lbd( std::span<const lit> lits )
  {
    ++lbd_stamp_;
    if ( level_stamp_.size() <= decision_level() )
      level_stamp_.resize( decision_level() + 1u, 0u );
    std::uint32_t n = 0;
    for ( auto l : lits )
    {
      auto const lv = level_[l.var()];
      if ( level_stamp_[lv] != lbd_stamp_ )
      {
        level_stamp_[lv] = lbd_stamp_;
        ++n;
      }
    }
    return std::max<std::uint32_t>( n, 1u );
  }

  std::uint32_t abstract_level( var_t v ) const noexcept { return 1u << ( level_[v] & 31u ); }

  bool redundant( lit p, std::uint32_t abstract )
  {
    std::vector<lit> stack{ p };
    auto const top = to_clear_.size();
    while ( !stack.empty() )
    {
      auto const q = stack.back();
      stack.pop_back();
      auto const& c = clauses_[reason_[q.var()]].lits;
      for ( std::size_t i = 1; i < c.size(); ++i )
      {
        auto const l = c[i];
        auto const v = l.var();
        if ( seen_[v] || level_[v] == 0 )
          continue;
        if ( reason_[v] != no_reason && ( abstract_level( v ) & abstract ) != 0u )
        {
          seen_[v] = 1;
          stack.push_back( l );
          to_clear_.push_back( l );
          continue;
        }
        for ( auto k = top; k < to_clear_.size(); ++k )
          seen_[to_clear_[k].var()] = 0;
        to_clear_.resize( top );
        return false;
      }
    }
    return true;
  }

  void bump_var( var_t v )
  {
    if ( ( activity_[v] += var_inc_ ) > 1e100 )
    {
      for ( var_t u = 1; u <= n_; ++u )
        activity_[u] *= 1e-100;
      var_inc_ *= 1e-100;
    }
    if ( heap_index_[v] >= 0 )
      heap_up( static_cast<std::size_t>( heap_index_[v] ) );
  }

  void bump_clause( clause_ref cr )
  {
    if ( ( clauses_[cr].activity += cla_inc_ ) > 1e20 )
    {
      for ( auto c : learnts_ )
        clauses_[c].activity *= 1e-20;
      cla_inc_ *= 1e-20;
    }
  }

  void drat_write( char tag, std::span<const lit> lits )
  {
    auto& os = *cfg_.drat;
    if ( cfg_.drat_binary )
    {
      os.put( tag );
      for ( auto l : lits )
      {
        auto u = static_cast<std::uint64_t>( l.code );
        while ( u > 127u )
        {
          os.put( static_cast<char>( 0x80u | ( u & 0x7fu ) ) );
          u >>= 7;
        }
        os.put( static_cast<char>( u ) );
      }
      os.put( 0 );
    }
    else
    {
      if ( tag == 'd' )
        os << "d ";
      for ( auto l : lits )
        os << l.to_dimacs() << ' ';
      os << "0\n";
    }
    if ( !os )
      throw error( "DRAT sink write failed" );
  }
  void drat_add( std::span<const lit> lits )
  {
    if ( cfg_.drat )
      drat_write( 'a', lits );
  }
  void drat_delete( std::span<const lit> lits )
  {
    if ( cfg_.drat )
      drat_write( 'd', lits );
  }

  // binary max-heap over activity, ties to the smaller variable
  bool heap_before( var_t a, var_t b ) const noexcept
  {
    return activity_[a] > activity_[b] || ( activity_[a] == activity_[b] && a < b );
  }
  void heap_insert( var_t v )
  {
    heap_index_[v] = static_cast<int>( heap_.size() );
    heap_.push_back( v );
    heap_up( heap_.size() - 1u );
  }
  void heap_up( std::size_t i )
  {
    auto const v = heap_[i];
    while ( i > 0 )
    {
      auto const parent = ( i - 1u ) / 2u;
      if ( !heap_before( v, heap_[parent] ) )
        break;
      heap_[i] = heap_[parent];
      heap_index_[heap_[i]] = static_cast<int>( i );
      i = parent;
    }
    heap_[i] = v;
    heap_index_[v] = static_cast<int>( i );
  }
  var_t heap_pop()
  {
    auto const top = heap_.front();
    auto const last = heap_.back();
    heap_.pop_back();
    heap_index_[top] = -1;
    if ( heap_.empty() )
      return top;
    std::size_t i = 0;
    for ( ;; )
    {
      auto child = 2u * i + 1u;
      if ( child >= heap_.size() )
        break;
      if ( child + 1u < heap_.size() && heap_before( heap_[child + 1u], heap_[child] ) )
        ++child;
      if ( !heap_before( heap_[child], last ) )
        break;
      heap_[i] = heap_[child];
      heap_index_[heap_[i]] = static_cast<int>( i );
      i = child;
    }
    heap_[i] = last;
    heap_index_[last] = static_cast<int>( i );
    return top;
  }

  solver_config cfg_;
  solver_hooks hooks_;
  var_t n_;
  bool ok_{ true };
  std::optional<solve_status> final_;
  std::vector<bool> final_model_;
  std::vector<clause_t> original_;

  std::vector<std::int8_t> val_;
  std::vector<std::uint32_t> level_;
  std::vector<clause_ref> reason_;
  std::vector<bool> saved_;
  std::vector<double> activity_;
  std::vector<std::uint8_t> seen_;
  std::vector<lit> trail_;
  std::vector<std::size_t> trail_lim_;
  std::size_t qhead_{ 0 };

  std::vector<clause_data> clauses_;
  std::vector<clause_ref> free_;
  std::vector<clause_ref> learnts_;
  std::vector<std::vector<watcher>> watches_;
  std::vector<lit> to_clear_;
  std::vector<std::uint64_t> level_stamp_;
  std::uint64_t lbd_stamp_{ 0 };

  std::vector<var_t> heap_;
  std::vector<int> heap_index_;
  double var_inc_{ 1.0 };
  double cla_inc_{ 1.0 };

  std::uint64_t conflicts_since_restart_{ 0 };
  std::uint64_t restart_index_{ 0 };
  std::uint64_t next_reduce_{ 0 };
  std::uint64_t reduce_round_{ 0 };

  solver_stats stats_;
};

/*! \brief One-shot convenience wrapper. */
inline solve_outcome solve( cnf_formula const& f, solver_config cfg = {}, solver_hooks hooks = {} )
{
  solver s( f, std::move( cfg ), std::move( hooks ) );
  return s.solve();
}

/*! \brief DIMACS-style model lines: "v 1 -2 3 ... 0". */
inline std::string format_model( std::vector<bool> const& model )
{
  std::string out;
  std::string line = "v";
  for ( std::size_t v = 1; v < model.size(); ++v )
  {
    auto const tok = " " + std::string( model[v] ? "" : "-" ) + std::to_string( v );
    if ( line.size() + tok.size() > 78 )
    {
      out += line + "\n";
      line = "v";
    }
    line += tok;
  }
  out += line + " 0\n";
  return out;
}

} // namespace cascad
