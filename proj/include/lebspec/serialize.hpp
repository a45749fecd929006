#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lebspec/circle_measures.hpp"
#include "lebspec/construction.hpp"
#include "lebspec/inducing.hpp"
#include "lebspec/spectra.hpp"
#include "lebspec/systems.hpp"

namespace lebspec {

using Json = nlohmann::json;

// ---- strict schema helpers ----

/// Rejects unknown keys; context names the object for error messages.
void require_keys(const Json& obj, std::initializer_list<const char*> allowed,
                  const std::string& context);
const Json& require_field(const Json& obj, const char* key, const std::string& context);

/// Parses a JSON file; SchemaError carries path and line on failure.
Json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const Json& value);

// ---- domain types <-> JSON ----

Json measure_to_json(const CircleMeasure& m);          // {"P":..., "coeffs": [[re,im],...]}
CircleMeasure measure_from_json(const Json& j, const std::string& context);

Json density_to_json(const DensityGrid& d);            // {"G":..., "values": [...]}
DensityGrid density_from_json(const Json& j, const std::string& context);

Json system_to_json(const FiniteSystem& s);            // {"N":..., "perm": [...]}
SystemPtr system_from_json(const Json& j, const std::string& context);

/// {"values": [[re,im],...], "labels": [...]} with one value per partition
/// class and per-atom class labels.
Json observable_to_json(const Observable& f);
Observable observable_from_json(const Json& j, SystemPtr system, const std::string& context);

Json induced_to_json(const InducedSystem& ind);
Json kac_to_json(const KacReport& kac);

Json certificate_to_json(const MultiplicityCertificate& cert);
Json step_certificate_to_json(const StepCertificate& cert);
Json convergence_to_json(const ConvergenceReport& report);
Json schedule_rows_to_json(const std::vector<ScheduleRow>& rows);
Json attempts_to_json_lines(const std::vector<AttemptRecord>& attempts);  // array; one object per line

// ---- CSV ----

/// Rows "theta,value" with 17 significant digits.
void write_density_csv(const std::filesystem::path& path, const DensityGrid& d);
DensityGrid read_density_csv(const std::filesystem::path& path);

/// Rows "theta,lambda_min".
void write_lambda_min_csv(const std::filesystem::path& path,
                          const std::vector<double>& profile);

std::string format_double(double v);  // %.17g

}  // namespace lebspec
