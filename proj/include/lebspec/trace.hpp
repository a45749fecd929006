#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lebspec/construction.hpp"
#include "lebspec/serialize.hpp"

namespace lebspec {

/// Writes a construct-run trace directory: manifest, per-stage systems,
/// subsets, families, targets (JSON + CSV densities), spectral measures,
/// certificates, the final witness (JSON + lambda_min CSV) and the
/// convergence reports. Contents are a pure function of the trace, so equal
/// runs produce byte-identical files.
void write_trace(const std::filesystem::path& dir, const RunTrace& trace,
                 const Json* config = nullptr);

struct VerifyReport {
  std::vector<std::string> discrepancies;
  bool ok() const { return discrepancies.empty(); }
};

/// Recomputes every certified quantity from the stored systems/observables
/// and compares against the stored certificates within the stored
/// tolerances; also cross-checks the CSV exports against the JSON artifacts.
VerifyReport verify_trace(const std::filesystem::path& dir);

}  // namespace lebspec
