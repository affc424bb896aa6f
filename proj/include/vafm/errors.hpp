#pragma once

#include <stdexcept>
#include <string>

namespace vafm {

// Input file or dataset schema violation (CLI exit code 2).
class schema_error : public std::runtime_error {
public:
  explicit schema_error(const std::string &msg) : std::runtime_error(msg) {}
};

// Numerical failure such as a non-positive-definite solve (CLI exit code 3).
class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string &msg) : std::runtime_error(msg) {}
};

// Invalid run configuration (CLI exit code 4).
class config_error : public std::runtime_error {
public:
  explicit config_error(const std::string &msg) : std::runtime_error(msg) {}
};

}  // namespace vafm
