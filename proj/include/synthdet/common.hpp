#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace synthdet {

inline constexpr const char* kProjectName = "synthdet";
inline constexpr const char* kProjectVersion = "0.1.0";

// Base class for all toolkit errors. Subclasses map 1:1 onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument values, violated preconditions, malformed inputs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Unusable configuration (unsupported resolution, unknown backend id, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An external adapter process failed; message carries its diagnostic.
class AdapterError : public Error {
 public:
  using Error::Error;
};

// Requested capability the model/architecture does not provide.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Filesystem / serialization failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Execution policy for kernels that exist in serial and OpenMP variants.
// Serial is the reference implementation; Parallel must produce bit-identical
// results for any thread count (kernels only parallelize over independent
// output elements).
enum class Exec { Serial, Parallel };

}  // namespace synthdet
