#pragma once
#include <stdexcept>
#include <string>

namespace geoshape {

// Error taxonomy maps onto process exit codes: config/contract problems -> 2,
// numerical divergence -> 3, file format / I/O problems -> 4.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContractViolation : Error {
  explicit ContractViolation(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct DivergenceError : Error {
  DivergenceError(const std::string& msg, long step) : Error(msg + " (step " + std::to_string(step) + ")"), step_index(step) {}
  long step_index = -1;
};

struct FormatError : Error {
  FormatError(const std::string& path, long byte_offset, const std::string& what)
      : Error(path + ": byte " + std::to_string(byte_offset) + ": " + what), offset(byte_offset) {}
  long offset = 0;
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

inline int exit_code_for(const ConfigError&) { return 2; }
inline int exit_code_for(const ContractViolation&) { return 2; }
inline int exit_code_for(const DivergenceError&) { return 3; }
inline int exit_code_for(const FormatError&) { return 4; }
inline int exit_code_for(const IoError&) { return 4; }

}  // namespace geoshape
