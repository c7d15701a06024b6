#pragma once

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "augment.hpp"
#include "estimator.hpp"

namespace cascad
{

/*! \brief Estimator served by a child process speaking line-delimited JSON on stdin/stdout.
 *
 * Requests:
 *   {"op":"load","graph":"<path>"}                          -> {"ok":true}
 *   {"op":"node_prob","gate":g,"pol":1}                       -> {"p":x}
 *   {"op":"cond_prob","target":[g,1],"conditions":[[h,0],...]} -> {"p":x} or {"undefined":true}
 * Polarity is 1 for the signal and 0 for its complement.  A reply may carry
 * "pc" with P(C).  Replies outside [0, 1], malformed replies, {"error":...}
 * and timeouts raise `protocol_error`; after a timeout the child is killed
 * and every later query fails.
 */
class external_estimator : public estimator
{
public:
  external_estimator( circuit const& c, estimator_config cfg ) : estimator( std::move( cfg ) ), c_( c )
  {
    if ( cfg_.backend != estimator_backend::external )
      throw invalid_operand_error( "external_estimator requires the external backend" );
    graph_path_ = write_graph( c_ );
    spawn();
    auto const reply = request( { { "op", "load" }, { "graph", graph_path_ } } );
    if ( !reply.contains( "ok" ) || reply["ok"] != true )
      throw protocol_error( "external estimator: load handshake failed: " + reply.dump() );
  }

  ~external_estimator() override
  {
    shutdown();
    std::error_code ec;
    std::filesystem::remove( graph_path_, ec );
  }

  external_estimator( external_estimator const& ) = delete;
  external_estimator& operator=( external_estimator const& ) = delete;

  std::size_t num_gates() const noexcept override { return c_.size(); }

  using estimator::node_prob;
  double node_prob( signal s ) override
  {
    if ( !c_.is_valid( s.gate ) || c_.kind( s.gate ) == gate_kind::virtual_div )
      throw invalid_operand_error( "node_prob: gate " + std::to_string( s.gate ) + " is not queryable" );
    nlohmann::json q = { { "op", "node_prob" }, { "gate", s.gate }, { "pol", s.positive ? 1 : 0 } };
    return probability( q, request( q ) );
  }

protected:
  bool is_boolean_gate( gate_id g ) const noexcept override { return g < c_.size() && !c_.is_virtual( g ); }

  cond_result compute_cond( signal target, std::vector<signal> const& conditions ) override
  {
    nlohmann::json conds = nlohmann::json::array();
    for ( auto s : conditions )
      conds.push_back( { s.gate, s.positive ? 1 : 0 } );
    nlohmann::json q = { { "op", "cond_prob" }, { "target", { target.gate, target.positive ? 1 : 0 } }, { "conditions", conds } };
    auto const reply = request( q );
    cond_result r;
    if ( reply.contains( "pc" ) )
      r.condition_probability = probability( q, reply, "pc" );
    if ( reply.value( "undefined", false ) )
    {
      r.status = cond_status::undefined_condition;
      return r;
    }
    r.probability = probability( q, reply );
    return r;
  }

private:
  static std::string write_graph( circuit const& c )
  {
    auto tmpl = ( std::filesystem::temp_directory_path() / "cascad-graph-XXXXXX" ).string();
    auto const fd = ::mkstemp( tmpl.data() );
    if ( fd < 0 )
      throw error( std::string( "external estimator: cannot create graph file: " ) + std::strerror( errno ) );
    ::close( fd );
    std::ofstream( tmpl ) << to_json_graph( c ).dump();
    return tmpl;
  }

  void spawn()
  {
    int to_child[2], from_child[2];
    if ( ::pipe( to_child ) != 0 || ::pipe( from_child ) != 0 )
      throw error( std::string( "external estimator: pipe: " ) + std::strerror( errno ) );
    std::vector<char*> argv;
    for ( auto& a : cfg_.external_command )
      argv.push_back( a.data() );
    argv.push_back( nullptr );
    pid_ = ::fork();
    if ( pid_ < 0 )
      throw error( std::string( "external estimator: fork: " ) + std::strerror( errno ) );
    if ( pid_ == 0 )
    {
      ::dup2( to_child[0], STDIN_FILENO );
      ::dup2( from_child[1], STDOUT_FILENO );
      ::close( to_child[0] );
      ::close( to_child[1] );
      ::close( from_child[0] );
      ::close( from_child[1] );
      ::execvp( argv[0], argv.data() );
      std::_Exit( 127 );
    }
    ::close( to_child[0] );
    ::close( from_child[1] );
    // a dead child must surface as a write error, not kill us
    ::signal( SIGPIPE, SIG_IGN );
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
  }

  void shutdown() noexcept
  {
    if ( write_fd_ >= 0 )
      ::close( write_fd_ );
    if ( read_fd_ >= 0 )
      ::close( read_fd_ );
    write_fd_ = read_fd_ = -1;
    if ( pid_ > 0 )
    {
      ::kill( pid_, SIGKILL );
      ::waitpid( pid_, nullptr, 0 );
      pid_ = -1;
    }
  }

  nlohmann::json request( nlohmann::json const& q )
  {
    std::lock_guard lock( io_mutex_ );
    if ( pid_ <= 0 )
      throw protocol_error( "external estimator: connection closed; query " + q.dump() );
    auto line = q.dump() + "\n";
    std::size_t off = 0;
    while ( off < line.size() )
    {
      auto const n = ::write( write_fd_, line.data() + off, line.size() - off );
      if ( n < 0 && errno == EINTR )
        continue;
      if ( n <= 0 )
      {
        shutdown();
        throw protocol_error( "external estimator: write failed for query " + q.dump() );
      }
      off += static_cast<std::size_t>( n );
    }

    using clock = std::chrono::steady_clock;
    auto const deadline = clock::now() + std::chrono::duration_cast<clock::duration>( std::chrono::duration<double>( cfg_.external_timeout_seconds ) );
    for ( ;; )
    {
      if ( auto nl = buffer_.find( '\n' ); nl != std::string::npos )
      {
        auto const reply_text = buffer_.substr( 0, nl );
        buffer_.erase( 0, nl + 1 );
        nlohmann::json reply;
        try
        {
          reply = nlohmann::json::parse( reply_text );
        }
        catch ( nlohmann::json::exception const& )
        {
          throw protocol_error( "external estimator: malformed reply '" + reply_text + "' to query " + q.dump() );
        }
        if ( !reply.is_object() )
          throw protocol_error( "external estimator: reply is not an object for query " + q.dump() );
        if ( reply.contains( "error" ) )
          throw protocol_error( "external estimator: " + reply["error"].dump() + " for query " + q.dump() );
        return reply;
      }
      auto const left = std::chrono::duration_cast<std::chrono::milliseconds>( deadline - clock::now() ).count();
      if ( left <= 0 )
      {
        shutdown();
        throw protocol_error( "external estimator: timeout after " + std::to_string( cfg_.external_timeout_seconds ) + " s for query " + q.dump() );
      }
      pollfd p{ read_fd_, POLLIN, 0 };
      auto const rc = ::poll( &p, 1, static_cast<int>( std::min<long long>( left, 1000 ) ) );
      if ( rc < 0 && errno == EINTR )
        continue;
      if ( rc <= 0 )
        continue;
      char buf[4096];
      auto const n = ::read( read_fd_, buf, sizeof( buf ) );
      if ( n < 0 && errno == EINTR )
        continue;
      if ( n <= 0 )
      {
        shutdown();
        throw protocol_error( "external estimator: child closed its output; query " + q.dump() );
      }
      buffer_.append( buf, static_cast<std::size_t>( n ) );
    }
  }

  static double probability( nlohmann::json const& q, nlohmann::json const& reply, char const* field = "p" )
  {
    if ( !reply.contains( field ) || !reply[field].is_number() )
      throw protocol_error( std::string( "external estimator: reply lacks numeric \"" ) + field + "\" for query " + q.dump() );
    auto const p = reply[field].get<double>();
    if ( !( p >= 0.0 && p <= 1.0 ) )
      throw protocol_error( "external estimator: probability " + reply[field].dump() + " outside [0, 1] for query " + q.dump() );
    return p;
  }

  circuit c_;
  std::string graph_path_;
  pid_t pid_{ -1 };
  int write_fd_{ -1 };
  int read_fd_{ -1 };
  std::string buffer_;
  std::mutex io_mutex_;
};

/*! \brief Estimator for `cfg.backend`. */
inline std::unique_ptr<estimator> make_estimator( circuit const& c, estimator_config cfg )
{
  if ( cfg.backend == estimator_backend::external )
    return std::make_unique<external_estimator>( c, std::move( cfg ) );
  return std::make_unique<trace_estimator>( c, std::move( cfg ) );
}

} // namespace cascad
