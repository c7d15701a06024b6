#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "circuit.hpp"
#include "error.hpp"

namespace cascad
{

using var_t = std::uint32_t;

/*! \brief CNF literal over a 1-based variable; code = 2 * var + negated. */
struct lit
{
  std::uint32_t code{ 0 };

  constexpr lit() = default;
  constexpr lit( var_t v, bool negated ) : code( 2u * v + ( negated ? 1u : 0u ) ) {}

  constexpr var_t var() const noexcept { return code >> 1; }
  constexpr bool negated() const noexcept { return code & 1u; }
  constexpr lit operator~() const noexcept
  {
    lit l;
    l.code = code ^ 1u;
    return l;
  }
  constexpr int to_dimacs() const noexcept
  {
    return negated() ? -static_cast<int>( var() ) : static_cast<int>( var() );
  }
  static constexpr lit from_dimacs( int x ) noexcept
  {
    return x < 0 ? lit( static_cast<var_t>( -x ), true ) : lit( static_cast<var_t>( x ), false );
  }
  static constexpr lit from_code( std::uint32_t c ) noexcept
  {
    lit l;
    l.code = c;
    return l;
  }

  friend constexpr bool operator==( lit, lit ) = default;
  friend constexpr auto operator<=>( lit, lit ) = default;
};

using clause_t = std::vector<lit>;

struct cnf_formula
{
  var_t num_vars{ 0 };
  std::vector<clause_t> clauses;
  std::vector<std::string> comments;

  /* Adds a non-empty clause, growing `num_vars` as needed. */
  void add_clause( clause_t c )
  {
    if ( c.empty() )
      throw invalid_operand_error( "cnf_formula: empty clause" );
    for ( auto l : c )
    {
      if ( l.var() == 0 )
        throw invalid_operand_error( "cnf_formula: variable 0 is not a valid variable" );
      num_vars = std::max( num_vars, l.var() );
    }
    clauses.push_back( std::move( c ) );
  }

  friend bool operator==( cnf_formula const&, cnf_formula const& ) = default;
};

/*! \brief Gate-to-variable map; total over Boolean gates, partial in the other direction. */
class var_gate_map
{
public:
  var_gate_map() = default;
  var_gate_map( std::size_t num_gates, var_t num_vars ) : var_of_( num_gates, 0u ), gate_of_( num_vars + 1u, invalid_gate ) {}

  void bind( gate_id g, var_t v )
  {
    if ( g >= var_of_.size() )
      var_of_.resize( g + 1u, 0u );
    if ( v >= gate_of_.size() )
      gate_of_.resize( v + 1u, invalid_gate );
    if ( var_of_[g] != 0u || gate_of_[v] != invalid_gate )
      throw invalid_operand_error( "var_gate_map: gate " + std::to_string( g ) + " or variable " + std::to_string( v ) + " already bound" );
    var_of_[g] = v;
    gate_of_[v] = g;
  }

  std::optional<var_t> var_of( gate_id g ) const noexcept
  {
    if ( g >= var_of_.size() || var_of_[g] == 0u )
      return std::nullopt;
    return var_of_[g];
  }
  std::optional<gate_id> gate_of( var_t v ) const noexcept
  {
    if ( v >= gate_of_.size() || gate_of_[v] == invalid_gate )
      return std::nullopt;
    return gate_of_[v];
  }
  var_t num_vars() const noexcept { return gate_of_.empty() ? 0u : static_cast<var_t>( gate_of_.size() - 1u ); }
  std::size_t num_gates() const noexcept { return var_of_.size(); }

  friend bool operator==( var_gate_map const&, var_gate_map const& ) = default;

private:
  std::vector<var_t> var_of_;
  std::vector<gate_id> gate_of_;
};

/*! \brief Circuit signal of a literal; absent for auxiliary variables. */
inline std::optional<signal> lit_to_signal( var_gate_map const& map, lit l ) noexcept
{
  auto g = map.gate_of( l.var() );
  if ( !g )
    return std::nullopt;
  return signal{ *g, !l.negated() };
}

inline lit signal_to_lit( var_gate_map const& map, signal s )
{
  auto v = map.var_of( s.gate );
  if ( !v )
    throw invalid_operand_error( "gate " + std::to_string( s.gate ) + " has no CNF variable" );
  return lit( *v, !s.positive );
}

struct encoded_circuit
{
  cnf_formula cnf;
  var_gate_map map;
};

/*! \brief Tseitin encoding with one variable per Boolean gate (NOT gates included).
 *
 * Variables follow gate order over the non-virtual gates, starting at 1.
 * Each asserted output adds a unit clause.
 */
inline encoded_circuit tseitin_encode( circuit const& c, std::vector<signal> const& assert_outputs )
{
  encoded_circuit e;
  var_t next = 1;
  for ( gate_id g = 0; g < c.size(); ++g )
    if ( !c.is_virtual( g ) )
      e.map.bind( g, next++ );
  e.cnf.num_vars = next - 1u;
  auto pos = [&]( gate_id g ) { return lit( *e.map.var_of( g ), false ); };

  for ( gate_id g = 0; g < c.size(); ++g )
  {
    auto const& gt = c[g];
    switch ( gt.kind )
    {
    case gate_kind::const0:
      e.cnf.add_clause( { ~pos( g ) } );
      break;
    case gate_kind::and_gate:
    {
      auto const z = pos( g ), a = pos( gt.inputs[0] ), b = pos( gt.inputs[1] );
      e.cnf.add_clause( { ~z, a } );
      if ( a == b )
      {
        e.cnf.add_clause( { z, ~a } );
        break;
      }
      e.cnf.add_clause( { ~z, b } );
      e.cnf.add_clause( { z, ~a, ~b } );
      break;
    }
    case gate_kind::not_gate:
    {
      auto const z = pos( g ), a = pos( gt.inputs[0] );
      e.cnf.add_clause( { ~z, ~a } );
      e.cnf.add_clause( { z, a } );
      break;
    }
    default:
      break;
    }
  }
  for ( auto s : assert_outputs )
  {
    if ( !c.is_valid( s.gate ) )
      throw invalid_operand_error( "asserted output " + std::to_string( s.gate ) + " out of range" );
    if ( c.is_virtual( s.gate ) )
      throw unsupported_error( "cannot assert virtual gate " + std::to_string( s.gate ) );
    e.cnf.add_clause( { lit( *e.map.var_of( s.gate ), !s.positive ) } );
  }
  return e;
}

/*! \brief Encodes `c` with every PO asserted to 1. */
inline encoded_circuit tseitin_encode( circuit const& c )
{
  std::vector<signal> outs;
  for ( auto po : c.pos() )
    outs.push_back( { po, true } );
  return tseitin_encode( c, outs );
}

//----------------------------------------------------------------------
// DIMACS
//----------------------------------------------------------------------

inline std::string emit_dimacs( cnf_formula const& f, bool with_comments = false )
{
  std::string out;
  if ( with_comments )
    for ( auto const& c : f.comments )
      out += "c " + c + "\n";
  out += "p cnf " + std::to_string( f.num_vars ) + " " + std::to_string( f.clauses.size() ) + "\n";
  for ( auto const& c : f.clauses )
  {
    for ( auto l : c )
    {
      out += std::to_string( l.to_dimacs() );
      out += ' ';
    }
    out += "0\n";
  }
  return out;
}

/*! \brief Parses DIMACS CNF.  Clause count and variable range must match the header. */
inline cnf_formula parse_dimacs( std::string_view text, bool keep_comments = false )
{
  cnf_formula f;
  bool header = false;
  std::size_t declared_clauses = 0;
  clause_t current;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto fail = [&]( std::string const& what ) -> void { throw parse_error( "DIMACS line " + std::to_string( line_no ) + ": " + what ); };

  while ( pos < text.size() )
  {
    auto end = text.find( '\n', pos );
    if ( end == std::string_view::npos )
      end = text.size();
    auto line = text.substr( pos, end - pos );
    pos = end + 1;
    ++line_no;
    if ( !line.empty() && line.back() == '\r' )
      line.remove_suffix( 1 );
    auto const first = line.find_first_not_of( " \t" );
    if ( first == std::string_view::npos )
      continue;
    line = line.substr( first );
    if ( line[0] == 'c' )
    {
      if ( keep_comments )
      {
        auto body = line.substr( 1 );
        if ( !body.empty() && body[0] == ' ' )
          body.remove_prefix( 1 );
        f.comments.emplace_back( body );
      }
      continue;
    }
    if ( line[0] == '%' )
      break;
    if ( line[0] == 'p' )
    {
      if ( header )
        fail( "duplicate header" );
      std::istringstream ss{ std::string( line ) };
      std::string p, cnf;
      long long v = -1, c = -1;
      ss >> p >> cnf >> v >> c;
      std::string extra;
      if ( !ss || p != "p" || cnf != "cnf" || v < 0 || c < 0 || ( ss >> extra ) )
        fail( "malformed header, expected 'p cnf V C'" );
      f.num_vars = static_cast<var_t>( v );
      declared_clauses = static_cast<std::size_t>( c );
      header = true;
      continue;
    }
    if ( !header )
      fail( "clause before 'p cnf' header" );
    std::size_t i = 0;
    while ( i < line.size() )
    {
      if ( line[i] == ' ' || line[i] == '\t' )
      {
        ++i;
        continue;
      }
      long long x = 0;
      auto [ptr, ec] = std::from_chars( line.data() + i, line.data() + line.size(), x );
      if ( ec != std::errc{} )
        fail( "expected integer literal" );
      i = static_cast<std::size_t>( ptr - line.data() );
      if ( x == 0 )
      {
        if ( current.empty() )
          fail( "empty clause" );
        f.clauses.push_back( std::move( current ) );
        current.clear();
        continue;
      }
      if ( static_cast<unsigned long long>( std::llabs( x ) ) > f.num_vars )
        fail( "literal " + std::to_string( x ) + " exceeds declared variable count " + std::to_string( f.num_vars ) );
      current.push_back( lit::from_dimacs( static_cast<int>( x ) ) );
    }
  }
  if ( !current.empty() )
    throw parse_error( "DIMACS: last clause is not terminated by 0" );
  if ( !header )
    throw parse_error( "DIMACS: missing 'p cnf' header" );
  if ( f.clauses.size() != declared_clauses )
    throw parse_error( "DIMACS: header declares " + std::to_string( declared_clauses ) + " clauses, body has " + std::to_string( f.clauses.size() ) );
  return f;
}

/*! \brief Sidecar map lines `v <var> g <gate>`. */
inline std::string emit_var_map( var_gate_map const& map )
{
  std::string out;
  for ( var_t v = 1; v <= map.num_vars(); ++v )
    if ( auto g = map.gate_of( v ) )
      out += "v " + std::to_string( v ) + " g " + std::to_string( *g ) + "\n";
  return out;
}

inline var_gate_map parse_var_map( std::string_view text )
{
  var_gate_map map;
  std::istringstream ss{ std::string( text ) };
  std::string line;
  std::size_t line_no = 0;
  while ( std::getline( ss, line ) )
  {
    ++line_no;
    if ( line.find_first_not_of( " \t\r" ) == std::string::npos )
      continue;
    std::istringstream ls( line );
    std::string vt, gt;
    long long v = 0, g = 0;
    if ( !( ls >> vt >> v >> gt >> g ) || vt != "v" || gt != "g" || v <= 0 || g < 0 )
      throw parse_error( "var map line " + std::to_string( line_no ) + ": expected 'v <var> g <gate>'" );
    try
    {
      map.bind( static_cast<gate_id>( g ), static_cast<var_t>( v ) );
    }
    catch ( invalid_operand_error const& e )
    {
      throw parse_error( "var map line " + std::to_string( line_no ) + ": " + e.what() );
    }
  }
  return map;
}

} // namespace cascad
