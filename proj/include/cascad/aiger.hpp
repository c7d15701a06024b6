#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "circuit.hpp"
#include "error.hpp"

namespace cascad
{

enum class aiger_format
{
  ascii,
  binary
};

namespace detail
{

struct aiger_header
{
  bool binary{ false };
  std::uint64_t max_var{ 0 }, inputs{ 0 }, latches{ 0 }, outputs{ 0 }, ands{ 0 };
};

class aiger_cursor
{
public:
  explicit aiger_cursor( std::string_view bytes ) : bytes_( bytes ) {}

  bool at_end() const noexcept { return pos_ >= bytes_.size(); }
  std::size_t offset() const noexcept { return pos_; }
  std::size_t line() const noexcept { return line_; }

  /* Next line without the terminating newline. */
  std::string_view next_line()
  {
    if ( at_end() )
      fail( "unexpected end of file" );
    auto const end = bytes_.find( '\n', pos_ );
    auto const stop = end == std::string_view::npos ? bytes_.size() : end;
    auto text = bytes_.substr( pos_, stop - pos_ );
    if ( !text.empty() && text.back() == '\r' )
      text.remove_suffix( 1 );
    pos_ = end == std::string_view::npos ? bytes_.size() : end + 1;
    ++line_;
    return text;
  }

  unsigned char next_byte()
  {
    if ( at_end() )
      fail( "unexpected end of file in binary AND section" );
    return static_cast<unsigned char>( bytes_[pos_++] );
  }

  std::uint64_t decode_delta()
  {
    std::uint64_t x = 0;
    unsigned shift = 0;
    while ( true )
    {
      auto const start = pos_;
      auto const ch = next_byte();
      if ( shift > 56 )
        throw parse_error( "AIGER: delta encoding overflow at byte offset " + std::to_string( start ) );
      x |= std::uint64_t{ ch & 0x7fu } << shift;
      if ( !( ch & 0x80u ) )
        return x;
      shift += 7;
    }
  }

  [[noreturn]] void fail( std::string const& what ) const
  {
    throw parse_error( "AIGER line " + std::to_string( line_ == 0 ? 1 : line_ ) + " (byte offset " + std::to_string( pos_ ) + "): " + what );
  }

private:
  std::string_view bytes_;
  std::size_t pos_{ 0 };
  std::size_t line_{ 0 };
};

inline std::vector<std::uint64_t> split_numbers( std::string_view text, aiger_cursor const& cur )
{
  std::vector<std::uint64_t> nums;
  std::size_t i = 0;
  while ( i < text.size() )
  {
    if ( text[i] == ' ' || text[i] == '\t' )
    {
      ++i;
      continue;
    }
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars( text.data() + i, text.data() + text.size(), v );
    if ( ec != std::errc{} || ( ptr != text.data() + text.size() && *ptr != ' ' && *ptr != '\t' ) )
      cur.fail( "expected unsigned integer in '" + std::string( text ) + "'" );
    nums.push_back( v );
    i = static_cast<std::size_t>( ptr - text.data() );
  }
  return nums;
}

} // namespace detail

/*! \brief Parses combinational AIGER (ASCII "aag" or binary "aig").
 *
 * Inverted edges become explicit NOT gates, shared per driver; literal 0
 * becomes CONST0.  PIs come first, AND gates follow in topological order.
 * Latches, and the 1.9 extension sections (bad, constraints, justice,
 * fairness), are rejected.
 */
inline circuit parse_aiger( std::string_view bytes )
{
  detail::aiger_cursor cur( bytes );
  detail::aiger_header h;

  {
    auto const line = cur.next_line();
    std::string_view rest;
    if ( line.starts_with( "aag " ) )
      rest = line.substr( 4 );
    else if ( line.starts_with( "aig " ) )
    {
      h.binary = true;
      rest = line.substr( 4 );
    }
    else
      cur.fail( "malformed header, expected 'aag' or 'aig'" );
    auto const nums = detail::split_numbers( rest, cur );
    if ( nums.size() < 5 || nums.size() > 9 )
      cur.fail( "malformed header, expected 'M I L O A'" );
    h.max_var = nums[0];
    h.inputs = nums[1];
    h.latches = nums[2];
    h.outputs = nums[3];
    h.ands = nums[4];
    if ( h.latches > 0 )
      cur.fail( "sequential AIGER (latch count " + std::to_string( h.latches ) + ") is not supported" );
    for ( std::size_t i = 5; i < nums.size(); ++i )
      if ( nums[i] != 0 )
        cur.fail( "bad/constraint/justice/fairness sections are not supported" );
    if ( h.max_var < h.inputs + h.ands )
      cur.fail( "header M is smaller than I + L + A" );
    if ( h.binary && h.max_var != h.inputs + h.ands )
      cur.fail( "binary AIGER requires M = I + L + A" );
    if ( h.max_var > ( std::uint64_t{ 1 } << 30 ) )
      cur.fail( "circuit too large" );
  }

  enum class var_role : std::uint8_t { undefined, input, and_gate };
  std::vector<var_role> role( h.max_var + 1, var_role::undefined );
  std::vector<std::uint64_t> input_vars;
  std::vector<std::uint64_t> output_lits;
  // and_defs[k] = {lhs var, rhs0 lit, rhs1 lit}
  struct and_def
  {
    std::uint64_t var, rhs0, rhs1;
    std::size_t line;
  };
  std::vector<and_def> and_defs;
  std::vector<std::size_t> and_index( h.max_var + 1, 0 );

  auto check_literal = [&]( std::uint64_t lit ) {
    if ( ( lit >> 1 ) > h.max_var )
      cur.fail( "literal " + std::to_string( lit ) + " exceeds maximum variable index" );
  };

  if ( h.binary )
  {
    for ( std::uint64_t i = 0; i < h.inputs; ++i )
    {
      input_vars.push_back( i + 1 );
      role[i + 1] = var_role::input;
    }
  }
  else
  {
    for ( std::uint64_t i = 0; i < h.inputs; ++i )
    {
      auto const nums = detail::split_numbers( cur.next_line(), cur );
      if ( nums.size() != 1 )
        cur.fail( "expected one input literal" );
      auto const lit = nums[0];
      check_literal( lit );
      if ( lit < 2 || ( lit & 1u ) )
        cur.fail( "input literal " + std::to_string( lit ) + " must be positive and even" );
      if ( role[lit >> 1] != var_role::undefined )
        cur.fail( "variable " + std::to_string( lit >> 1 ) + " defined twice" );
      role[lit >> 1] = var_role::input;
      input_vars.push_back( lit >> 1 );
    }
  }

  for ( std::uint64_t i = 0; i < h.outputs; ++i )
  {
    auto const nums = detail::split_numbers( cur.next_line(), cur );
    if ( nums.size() != 1 )
      cur.fail( "expected one output literal" );
    check_literal( nums[0] );
    output_lits.push_back( nums[0] );
  }

  for ( std::uint64_t i = 0; i < h.ands; ++i )
  {
    and_def d{};
    if ( h.binary )
    {
      auto const lhs = 2u * ( h.inputs + i + 1u );
      auto const off = cur.offset();
      auto const d0 = cur.decode_delta();
      auto const d1 = cur.decode_delta();
      if ( d0 == 0 || d0 > lhs || d1 > lhs - d0 )
        throw parse_error( "AIGER: invalid binary AND delta at byte offset " + std::to_string( off ) );
      d = { lhs >> 1, lhs - d0, lhs - d0 - d1, cur.line() };
    }
    else
    {
      auto const nums = detail::split_numbers( cur.next_line(), cur );
      if ( nums.size() != 3 )
        cur.fail( "expected 'lhs rhs0 rhs1'" );
      for ( auto n : nums )
        check_literal( n );
      if ( nums[0] < 2 || ( nums[0] & 1u ) )
        cur.fail( "AND lhs " + std::to_string( nums[0] ) + " must be positive and even" );
      d = { nums[0] >> 1, nums[1], nums[2], cur.line() };
    }
    if ( role[d.var] != var_role::undefined )
      cur.fail( "variable " + std::to_string( d.var ) + " defined twice" );
    role[d.var] = var_role::and_gate;
    and_index[d.var] = and_defs.size();
    and_defs.push_back( d );
  }
  // symbol table and comments: ignored

  auto check_defined = [&]( std::uint64_t lit, std::size_t line ) {
    auto const v = lit >> 1;
    if ( v != 0 && role[v] == var_role::undefined )
      throw parse_error( "AIGER line " + std::to_string( line ) + ": dangling literal " + std::to_string( lit ) + " (variable " + std::to_string( v ) + " never defined)" );
  };
  for ( auto const& d : and_defs )
  {
    check_defined( d.rhs0, d.line );
    check_defined( d.rhs1, d.line );
  }
  for ( std::size_t i = 0; i < output_lits.size(); ++i )
    check_defined( output_lits[i], h.binary ? 2 + i : 2 + h.inputs + i );

  // order AND definitions topologically (ASCII files may list them in any order)
  std::vector<raw_gate> raw( and_defs.size() );
  for ( std::size_t k = 0; k < and_defs.size(); ++k )
  {
    raw[k].kind = gate_kind::and_gate;
    for ( auto lit : { and_defs[k].rhs0, and_defs[k].rhs1 } )
      if ( role[lit >> 1] == var_role::and_gate )
        raw[k].fanins.push_back( static_cast<std::uint32_t>( and_index[lit >> 1] ) );
  }
  std::vector<std::uint32_t> order;
  try
  {
    order = detail::topological_order( raw );
  }
  catch ( cycle_error const& e )
  {
    throw cycle_error( std::string( "AIGER AND definitions are cyclic (indices are AND positions): " ) + e.what() );
  }

  circuit c;
  std::vector<gate_id> gate_of( h.max_var + 1, invalid_gate );
  for ( auto v : input_vars )
    gate_of[v] = c.create_pi();
  auto signal_of = [&]( std::uint64_t lit ) {
    auto const v = lit >> 1;
    auto const base = v == 0 ? c.get_constant0() : gate_of[v];
    return ( lit & 1u ) ? c.create_not( base ) : base;
  };
  for ( auto k : order )
  {
    auto const& d = and_defs[k];
    auto const a = signal_of( d.rhs0 );
    auto const b = signal_of( d.rhs1 );
    gate_of[d.var] = c.create_and( a, b );
  }
  for ( auto lit : output_lits )
    c.create_po( signal_of( lit ) );
  return c;
}

inline circuit read_aiger_file( std::string const& path )
{
  std::ifstream in( path, std::ios::binary );
  if ( !in )
    throw parse_error( "cannot open AIGER file '" + path + "'" );
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_aiger( ss.str() );
}

namespace detail
{

inline void encode_delta( std::string& out, std::uint64_t x )
{
  while ( x & ~std::uint64_t{ 0x7f } )
  {
    out.push_back( static_cast<char>( ( x & 0x7f ) | 0x80 ) );
    x >>= 7;
  }
  out.push_back( static_cast<char>( x ) );
}

} // namespace detail

/*! \brief Writes `c` as AIGER; NOT gates are folded back into inverted edges. */
inline std::string emit_aiger( circuit const& c, aiger_format format = aiger_format::ascii )
{
  if ( c.has_virtual_gates() )
    throw unsupported_error( "AIGER cannot express virtual gates; use the JSON graph format" );

  std::vector<std::uint64_t> lit_of( c.size(), 0 );
  std::uint64_t next_var = 1;
  for ( auto pi : c.pis() )
    lit_of[pi] = 2u * next_var++;
  std::vector<gate_id> ands;
  for ( gate_id g = 0; g < c.size(); ++g )
  {
    switch ( c.kind( g ) )
    {
    case gate_kind::const0:
      lit_of[g] = 0;
      break;
    case gate_kind::not_gate:
      lit_of[g] = lit_of[c.fanins( g )[0]] ^ 1u;
      break;
    case gate_kind::and_gate:
      lit_of[g] = 2u * next_var++;
      ands.push_back( g );
      break;
    default:
      break;
    }
  }

  auto const num_inputs = c.num_pis();
  std::string out;
  out += format == aiger_format::ascii ? "aag " : "aig ";
  out += std::to_string( num_inputs + ands.size() ) + " " + std::to_string( num_inputs ) + " 0 " + std::to_string( c.num_pos() ) + " " + std::to_string( ands.size() ) + "\n";
  if ( format == aiger_format::ascii )
    for ( auto pi : c.pis() )
      out += std::to_string( lit_of[pi] ) + "\n";
  for ( auto po : c.pos() )
    out += std::to_string( lit_of[po] ) + "\n";
  for ( auto g : ands )
  {
    auto r0 = lit_of[c.fanins( g )[0]];
    auto r1 = lit_of[c.fanins( g )[1]];
    if ( format == aiger_format::ascii )
      out += std::to_string( lit_of[g] ) + " " + std::to_string( r0 ) + " " + std::to_string( r1 ) + "\n";
    else
    {
      if ( r0 < r1 )
        std::swap( r0, r1 );
      detail::encode_delta( out, lit_of[g] - r0 );
      detail::encode_delta( out, r0 - r1 );
    }
  }
  return out;
}

} // namespace cascad
