#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "circuit.hpp"
#include "error.hpp"

namespace cascad
{

/*! \brief Stateless 64-bit mixer (splitmix64 finalizer). */
inline constexpr std::uint64_t mix64( std::uint64_t x ) noexcept
{
  x += 0x9e3779b97f4a7c15ull;
  x = ( x ^ ( x >> 30 ) ) * 0xbf58476d1ce4e5b9ull;
  x = ( x ^ ( x >> 27 ) ) * 0x94d049bb133111ebull;
  return x ^ ( x >> 31 );
}

/*! \brief Counter-based draw keyed by (seed, stream, counter); order-independent. */
inline constexpr std::uint64_t counter_draw( std::uint64_t seed, std::uint64_t stream, std::uint64_t counter ) noexcept
{
  return mix64( mix64( seed ^ mix64( stream ) ) ^ counter );
}

/*! \brief Threshold T with P(u < T) = rho for u uniform on [0, 2^64). */
inline std::uint64_t bernoulli_threshold( double rho ) noexcept
{
  if ( rho <= 0.0 )
    return 0u;
  if ( rho >= 1.0 )
    return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>( std::ldexp( static_cast<long double>( rho ), 64 ) );
}

struct simulation_plan
{
  std::size_t num_patterns{ 20000 };
  /* per-PI activation probability; empty means `default_workload` for every PI */
  std::vector<double> workload;
  double default_workload{ 0.5 };
  std::uint64_t seed{ 0 };

  double rho( std::size_t pi ) const noexcept
  {
    return workload.empty() ? default_workload : workload[pi];
  }

  void validate( std::size_t num_pis ) const
  {
    if ( num_patterns == 0 )
      throw invalid_operand_error( "simulation plan needs at least one pattern" );
    if ( !workload.empty() && workload.size() != num_pis )
      throw shape_error( "workload has " + std::to_string( workload.size() ) + " entries for " + std::to_string( num_pis ) + " PIs" );
    auto bad = []( double r ) { return !( r >= 0.0 && r <= 1.0 ); };
    if ( bad( default_workload ) || std::any_of( workload.begin(), workload.end(), bad ) )
      throw invalid_operand_error( "workload probabilities must lie in [0, 1]" );
  }
};

inline constexpr std::size_t words_for( std::size_t num_patterns ) noexcept
{
  return ( num_patterns + 63u ) / 64u;
}

/* mask of valid lanes in the last word */
inline constexpr std::uint64_t tail_mask( std::size_t num_patterns ) noexcept
{
  auto const r = num_patterns % 64u;
  return r == 0 ? ~std::uint64_t{ 0 } : ( std::uint64_t{ 1 } << r ) - 1u;
}

/*! \brief Bit-packed input patterns, one row of `words()` words per PI. */
class pattern_block
{
public:
  pattern_block() = default;
  pattern_block( std::size_t num_inputs, std::size_t num_patterns )
      : num_inputs_( num_inputs ), num_patterns_( num_patterns ), words_( words_for( num_patterns ) ), bits_( num_inputs * words_, 0u )
  {}

  std::size_t num_inputs() const noexcept { return num_inputs_; }
  std::size_t num_patterns() const noexcept { return num_patterns_; }
  std::size_t words() const noexcept { return words_; }
  std::span<std::uint64_t> row( std::size_t pi ) noexcept { return { bits_.data() + pi * words_, words_ }; }
  std::span<const std::uint64_t> row( std::size_t pi ) const noexcept { return { bits_.data() + pi * words_, words_ }; }
  bool bit( std::size_t pi, std::size_t pattern ) const noexcept
  {
    return ( row( pi )[pattern / 64u] >> ( pattern % 64u ) ) & 1u;
  }
  void set( std::size_t pi, std::size_t pattern, bool value ) noexcept
  {
    auto& w = row( pi )[pattern / 64u];
    auto const m = std::uint64_t{ 1 } << ( pattern % 64u );
    w = value ? ( w | m ) : ( w & ~m );
  }

private:
  std::size_t num_inputs_{ 0 };
  std::size_t num_patterns_{ 0 };
  std::size_t words_{ 0 };
  std::vector<std::uint64_t> bits_;
};

/*! \brief Independent Bernoulli(rho_i) bits for every PI and pattern.
 *
 * Bit (i, p) depends only on (seed, i, p), so any partitioning of the work
 * yields the same block.
 */
inline pattern_block sample_patterns( simulation_plan const& plan, std::size_t num_pis )
{
  plan.validate( num_pis );
  pattern_block block( num_pis, plan.num_patterns );
  for ( std::size_t i = 0; i < num_pis; ++i )
  {
    auto const rho = plan.rho( i );
    auto const threshold = bernoulli_threshold( rho );
    auto row = block.row( i );
    for ( std::size_t p = 0; p < plan.num_patterns; ++p )
    {
      bool const one = rho >= 1.0 || counter_draw( plan.seed, i, p ) < threshold;
      if ( one )
        row[p / 64u] |= std::uint64_t{ 1 } << ( p % 64u );
    }
  }
  return block;
}

/*! \brief Per-gate simulation traces over a common set of patterns.
 *
 * VIRTUAL_DIV gates carry no trace.  Lanes past `num_patterns()` are zero.
 */
class pattern_traces
{
public:
  pattern_traces() = default;
  pattern_traces( std::size_t num_gates, std::size_t num_patterns )
      : num_gates_( num_gates ), num_patterns_( num_patterns ), words_( words_for( num_patterns ) ), data_( num_gates * words_, 0u ), has_trace_( num_gates, 1u )
  {}

  std::size_t num_gates() const noexcept { return num_gates_; }
  std::size_t num_patterns() const noexcept { return num_patterns_; }
  std::size_t words() const noexcept { return words_; }
  bool has_trace( gate_id g ) const noexcept { return g < num_gates_ && has_trace_[g]; }
  std::span<const std::uint64_t> row( gate_id g ) const noexcept { return { data_.data() + std::size_t{ g } * words_, words_ }; }
  std::span<std::uint64_t> mutable_row( gate_id g ) noexcept { return { data_.data() + std::size_t{ g } * words_, words_ }; }
  void clear_trace( gate_id g ) noexcept { has_trace_[g] = 0u; }
  bool bit( gate_id g, std::size_t pattern ) const noexcept
  {
    return ( row( g )[pattern / 64u] >> ( pattern % 64u ) ) & 1u;
  }
  std::size_t popcount( gate_id g ) const noexcept
  {
    std::size_t n = 0;
    for ( auto w : row( g ) )
      n += static_cast<std::size_t>( std::popcount( w ) );
    return n;
  }

  friend bool operator==( pattern_traces const&, pattern_traces const& ) = default;

private:
  std::size_t num_gates_{ 0 };
  std::size_t num_patterns_{ 0 };
  std::size_t words_{ 0 };
  std::vector<std::uint64_t> data_;
  std::vector<std::uint8_t> has_trace_;
};

/*! \brief Bit-parallel simulation, level by level in gate order.
 *
 * With `num_threads > 1` the pattern words are split into contiguous
 * ranges; the result is bit-identical to the single-threaded run.
 */
inline pattern_traces simulate( circuit const& c, pattern_block const& inputs, unsigned num_threads = 1 )
{
  if ( inputs.num_inputs() != c.num_pis() )
    throw shape_error( "simulate: pattern block has " + std::to_string( inputs.num_inputs() ) + " inputs, circuit has " + std::to_string( c.num_pis() ) + " PIs" );
  pattern_traces t( c.size(), inputs.num_patterns() );
  auto const words = t.words();
  auto const mask = tail_mask( inputs.num_patterns() );

  std::vector<std::size_t> pi_index( c.size(), 0 );
  for ( std::size_t i = 0; i < c.num_pis(); ++i )
    pi_index[c.pis()[i]] = i;
  for ( gate_id g = 0; g < c.size(); ++g )
    if ( c.kind( g ) == gate_kind::virtual_div )
      t.clear_trace( g );

  auto run = [&]( std::size_t begin, std::size_t end ) {
    for ( gate_id g = 0; g < c.size(); ++g )
    {
      auto out = t.mutable_row( g );
      auto const& gt = c[g];
      switch ( gt.kind )
      {
      case gate_kind::pi:
      {
        auto in = inputs.row( pi_index[g] );
        std::copy( in.begin() + begin, in.begin() + end, out.begin() + begin );
        break;
      }
      case gate_kind::const0:
      case gate_kind::virtual_div:
        break;
      case gate_kind::not_gate:
      {
        auto a = t.row( gt.inputs[0] );
        for ( auto w = begin; w < end; ++w )
          out[w] = ~a[w];
        if ( end == words )
          out[words - 1] &= mask;
        break;
      }
      case gate_kind::and_gate:
      case gate_kind::virtual_and:
      {
        auto a = t.row( gt.inputs[0] );
        auto b = t.row( gt.inputs[1] );
        for ( auto w = begin; w < end; ++w )
          out[w] = a[w] & b[w];
        break;
      }
      }
    }
  };

  auto const threads = std::max<std::size_t>( 1u, std::min<std::size_t>( num_threads, words ) );
  if ( threads <= 1 )
  {
    run( 0, words );
    return t;
  }
  std::vector<std::thread> pool;
  auto const chunk = ( words + threads - 1 ) / threads;
  for ( std::size_t k = 0; k < threads; ++k )
  {
    auto const b = k * chunk;
    auto const e = std::min( words, b + chunk );
    if ( b < e )
      pool.emplace_back( run, b, e );
  }
  for ( auto& th : pool )
    th.join();
  return t;
}

inline constexpr std::size_t max_truth_table_inputs = 20u;

/*! \brief Traces over all 2^m input rows.
 *
 * Row r assigns PI j the bit (r >> (m - 1 - j)) & 1, i.e. the first PI is
 * the most significant digit of the binary row counter.
 */
struct truth_table
{
  std::size_t num_inputs{ 0 };
  pattern_traces traces;

  std::size_t num_rows() const noexcept { return traces.num_patterns(); }
  bool value( gate_id g, std::size_t row ) const noexcept { return traces.bit( g, row ); }
};

inline pattern_block exhaustive_patterns( std::size_t num_inputs )
{
  if ( num_inputs > max_truth_table_inputs )
    throw capacity_error( "truth table over " + std::to_string( num_inputs ) + " inputs exceeds the cap of " + std::to_string( max_truth_table_inputs ) );
  auto const rows = std::size_t{ 1 } << num_inputs;
  pattern_block block( num_inputs, rows );
  for ( std::size_t j = 0; j < num_inputs; ++j )
  {
    auto const shift = num_inputs - 1 - j;
    auto row = block.row( j );
    if ( shift < 6 )
    {
      // period shorter than a word: build one word pattern and replicate
      std::uint64_t w = 0;
      for ( std::size_t b = 0; b < 64; ++b )
        if ( ( b >> shift ) & 1u )
          w |= std::uint64_t{ 1 } << b;
      for ( auto& x : row )
        x = w;
      row[row.size() - 1] &= tail_mask( rows );
    }
    else
    {
      for ( std::size_t k = 0; k < row.size(); ++k )
        row[k] = ( ( ( k * 64u ) >> shift ) & 1u ) ? ~std::uint64_t{ 0 } : 0u;
    }
  }
  return block;
}

inline truth_table exact_truth_table( circuit const& c )
{
  return { c.num_pis(), simulate( c, exhaustive_patterns( c.num_pis() ) ) };
}

/*! \brief Fraction of patterns on which `g` evaluates to 1. */
inline double trace_probability( pattern_traces const& traces, gate_id g )
{
  if ( !traces.has_trace( g ) )
    throw invalid_operand_error( "gate " + std::to_string( g ) + " has no trace (virtual DIV gates are evaluated by the estimator)" );
  return static_cast<double>( traces.popcount( g ) ) / static_cast<double>( traces.num_patterns() );
}

inline std::vector<double> workload_grid()
{
  return { 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9 };
}

struct workload_suite_result
{
  std::size_t num_sims{ 0 };
  std::size_t patterns_per_sim{ 0 };
  /* pi_vectors[j][s]: fraction of ones of PI j in simulation s */
  std::vector<std::vector<double>> pi_vectors;
  /* workloads[s][j]: rho used for PI j in simulation s */
  std::vector<std::vector<double>> workloads;
  /* per gate, over all num_sims * patterns_per_sim patterns; empty for VIRTUAL_DIV */
  std::vector<std::optional<double>> node_probabilities;
};

/*! \brief Repeated biased simulations.
 *
 * With a non-empty `fixed_workload` every simulation uses it; otherwise each
 * PI draws its rho independently per simulation from `grid`.
 */
inline workload_suite_result run_workload_suite( circuit const& c, std::size_t num_sims = 200, std::size_t patterns_per_sim = 100, std::uint64_t seed = 0,
                                                 std::vector<double> fixed_workload = {}, std::vector<double> grid = workload_grid() )
{
  if ( num_sims == 0 || patterns_per_sim == 0 )
    throw invalid_operand_error( "run_workload_suite: counts must be positive" );
  if ( fixed_workload.empty() && grid.empty() )
    throw invalid_operand_error( "run_workload_suite: empty workload grid" );
  auto const m = c.num_pis();
  workload_suite_result r;
  r.num_sims = num_sims;
  r.patterns_per_sim = patterns_per_sim;
  r.pi_vectors.assign( m, std::vector<double>( num_sims, 0.0 ) );
  std::vector<std::size_t> ones( c.size(), 0u );

  for ( std::size_t s = 0; s < num_sims; ++s )
  {
    simulation_plan plan;
    plan.num_patterns = patterns_per_sim;
    plan.seed = counter_draw( seed, 0x5157u, s );
    if ( !fixed_workload.empty() )
      plan.workload = fixed_workload;
    else
    {
      plan.workload.resize( m );
      for ( std::size_t j = 0; j < m; ++j )
        plan.workload[j] = grid[counter_draw( seed, 0x9a1du + s, j ) % grid.size()];
    }
    auto const t = simulate( c, sample_patterns( plan, m ) );
    for ( std::size_t j = 0; j < m; ++j )
      r.pi_vectors[j][s] = trace_probability( t, c.pis()[j] );
    for ( gate_id g = 0; g < c.size(); ++g )
      if ( t.has_trace( g ) )
        ones[g] += t.popcount( g );
    r.workloads.push_back( std::move( plan.workload ) );
  }
  auto const total = static_cast<double>( num_sims * patterns_per_sim );
  r.node_probabilities.resize( c.size() );
  for ( gate_id g = 0; g < c.size(); ++g )
    if ( c.kind( g ) != gate_kind::virtual_div )
      r.node_probabilities[g] = static_cast<double>( ones[g] ) / total;
  return r;
}

//----------------------------------------------------------------------
// Trace file: "CTRC", u32 version, u64 num_gates, u64 num_patterns, then
// per gate ceil(N/64) little-endian u64 words.  Gates without a trace are
// written as zero rows.
//----------------------------------------------------------------------

inline constexpr std::uint32_t trace_file_version = 1u;

namespace detail
{

inline void put_le( std::ostream& os, std::uint64_t v, unsigned bytes )
{
  for ( unsigned i = 0; i < bytes; ++i )
    os.put( static_cast<char>( ( v >> ( 8u * i ) ) & 0xffu ) );
}

inline std::uint64_t get_le( std::istream& is, unsigned bytes )
{
  std::uint64_t v = 0;
  for ( unsigned i = 0; i < bytes; ++i )
  {
    auto const ch = is.get();
    if ( ch == std::char_traits<char>::eof() )
      throw parse_error( "trace file truncated" );
    v |= std::uint64_t{ static_cast<unsigned char>( ch ) } << ( 8u * i );
  }
  return v;
}

} // namespace detail

inline void write_traces( std::ostream& os, pattern_traces const& t )
{
  os.write( "CTRC", 4 );
  detail::put_le( os, trace_file_version, 4 );
  detail::put_le( os, t.num_gates(), 8 );
  detail::put_le( os, t.num_patterns(), 8 );
  for ( gate_id g = 0; g < t.num_gates(); ++g )
    for ( auto w : t.row( g ) )
      detail::put_le( os, t.has_trace( g ) ? w : 0u, 8 );
}

inline pattern_traces read_traces( std::istream& is )
{
  char magic[4] = {};
  is.read( magic, 4 );
  if ( !is || std::memcmp( magic, "CTRC", 4 ) != 0 )
    throw parse_error( "not a trace file (bad magic)" );
  auto const version = detail::get_le( is, 4 );
  if ( version != trace_file_version )
    throw parse_error( "unsupported trace file version " + std::to_string( version ) );
  auto const num_gates = detail::get_le( is, 8 );
  auto const num_patterns = detail::get_le( is, 8 );
  if ( num_patterns == 0 || num_gates > ( std::uint64_t{ 1 } << 32 ) )
    throw parse_error( "trace file header out of range" );
  pattern_traces t( num_gates, num_patterns );
  for ( gate_id g = 0; g < num_gates; ++g )
    for ( auto& w : t.mutable_row( g ) )
      w = detail::get_le( is, 8 );
  return t;
}

} // namespace cascad
