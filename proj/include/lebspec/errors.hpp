#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lebspec {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Precondition / argument violation.
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(what) {}
};

// Malformed structured input (JSON config, stored artifact).
class SchemaError : public Error {
 public:
  SchemaError(std::string path, std::string field, const std::string& what)
      : Error(path + (field.empty() ? "" : " [" + field + "]") + ": " + what),
        path_(std::move(path)),
        field_(std::move(field)) {}
  const std::string& path() const noexcept { return path_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string path_, field_;
};

// Two independent computation routes disagreed beyond tolerance.
class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& what) : Error(what) {}
};

// One attempt of a randomized search, kept for JSON-lines logging.
struct AttemptRecord {
  std::uint64_t seed = 0;
  std::vector<double> distances;  // measured weak distances, one per observable
  double independence = 0.0;      // worst product-count discrepancy
  bool accepted = false;
};

// A randomized search exhausted its retry budget.
class SearchFailure : public Error {
 public:
  SearchFailure(const std::string& what, std::vector<AttemptRecord> attempts)
      : Error(what), attempts_(std::move(attempts)) {}
  const std::vector<AttemptRecord>& attempts() const noexcept { return attempts_; }

 private:
  std::vector<AttemptRecord> attempts_;
};

}  // namespace lebspec
