#pragma once

#include <stdexcept>
#include <string>

namespace laflow {

// Base class for all engine errors. Subclasses map to CLI exit codes:
// config errors -> 2, data errors -> 3, solver errors -> 4.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public Error {
public:
  using Error::Error;
};

class FormatError : public Error {
public:
  using Error::Error;
};

class ParamError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class LabelError : public Error {
public:
  using Error::Error;
};

class UnsupportedOrientation : public Error {
public:
  using Error::Error;
};

class GeometryError : public Error {
public:
  using Error::Error;
};

class AmbiguousDirection : public Error {
public:
  using Error::Error;
};

class ProbeError : public Error {
public:
  using Error::Error;
};

class WindowError : public Error {
public:
  using Error::Error;
};

class PeakError : public Error {
public:
  using Error::Error;
};

class RatioError : public Error {
public:
  using Error::Error;
};

class TopologyError : public Error {
public:
  using Error::Error;
};

class SolverError : public Error {
public:
  using Error::Error;
};

class DesignError : public Error {
public:
  using Error::Error;
};

class DegenerateError : public Error {
public:
  using Error::Error;
};

class SpecError : public Error {
public:
  using Error::Error;
};

}  // namespace laflow
