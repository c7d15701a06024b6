// Stand-in for an external estimator process.  argv[1] selects the behavior:
//   good       exact answers from the loaded graph
//   garbage    replies that are not JSON
//   range      probabilities outside [0, 1]
//   error      {"error": ...} for every probability query
//   slow       never answers probability queries
//   die        exits after the handshake
//   nohello    rejects the handshake

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>

#include <json.hpp>

#include <cascad/augment.hpp>
#include <cascad/estimator.hpp>

int main( int argc, char** argv )
{
  std::string const mode = argc > 1 ? argv[1] : "good";
  std::unique_ptr<cascad::trace_estimator> est;
  std::string line;
  while ( std::getline( std::cin, line ) )
  {
    auto const q = nlohmann::json::parse( line );
    auto const op = q.at( "op" ).get<std::string>();
    nlohmann::json reply;
    if ( op == "load" )
    {
      if ( mode == "nohello" )
      {
        std::cout << R"({"ok":false})" << std::endl;
        continue;
      }
      std::ifstream in( q.at( "graph" ).get<std::string>() );
      auto const c = cascad::from_json_graph( nlohmann::json::parse( in ) );
      cascad::estimator_config cfg;
      cfg.backend = cascad::estimator_backend::exact;
      est = std::make_unique<cascad::trace_estimator>( c, cfg );
      std::cout << R"({"ok":true})" << std::endl;
      if ( mode == "die" )
        return 0;
      continue;
    }
    if ( mode == "slow" )
    {
      std::this_thread::sleep_for( std::chrono::seconds( 30 ) );
      continue;
    }
    if ( mode == "garbage" )
    {
      std::cout << "p=0.5 please" << std::endl;
      continue;
    }
    if ( mode == "error" )
    {
      std::cout << R"({"error":"model not loaded"})" << std::endl;
      continue;
    }
    if ( mode == "range" )
    {
      std::cout << R"({"p":1.25})" << std::endl;
      continue;
    }
    if ( op == "node_prob" )
    {
      reply["p"] = est->node_prob( q.at( "gate" ).get<cascad::gate_id>(), q.at( "pol" ).get<int>() == 1 );
    }
    else if ( op == "cond_prob" )
    {
      auto const t = q.at( "target" );
      std::vector<cascad::signal> conds;
      for ( auto const& c : q.at( "conditions" ) )
        conds.push_back( { c[0].get<cascad::gate_id>(), c[1].get<int>() == 1 } );
      auto const r = est->cond_prob( { t[0].get<cascad::gate_id>(), t[1].get<int>() == 1 }, conds );
      if ( r.condition_probability )
        reply["pc"] = *r.condition_probability;
      if ( r.defined() )
        reply["p"] = r.probability;
      else
        reply["undefined"] = true;
    }
    else
      reply["error"] = "unknown op " + op;
    std::cout << reply.dump() << std::endl;
  }
  return 0;
}
