#pragma once

#include <stdexcept>
#include <string>

namespace cascad
{

/*! \brief Base class of all errors thrown by the library. */
class error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/*! \brief Malformed input file (AIGER, DIMACS, JSON graph, trace file). */
class parse_error : public error
{
public:
  using error::error;
};

/*! \brief Mismatched sizes or counts between two arguments. */
class shape_error : public error
{
public:
  using error::error;
};

class cycle_error : public error
{
public:
  using error::error;
};

/*! \brief A construct that the requested operation cannot express. */
class unsupported_error : public error
{
public:
  using error::error;
};

class capacity_error : public error
{
public:
  using error::error;
};

class invalid_operand_error : public error
{
public:
  using error::error;
};

/*! \brief Failure talking to an external estimator process. */
class protocol_error : public error
{
public:
  using error::error;
};

/*! \brief A run contradicted a verified expected status. */
class correctness_alarm : public error
{
public:
  using error::error;
};

} // namespace cascad
