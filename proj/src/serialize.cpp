#include "lebspec/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace lebspec {

namespace {

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

}  // namespace

void require_keys(const Json& obj, std::initializer_list<const char*> allowed,
                  const std::string& context) {
  if (!obj.is_object()) throw SchemaError(context, "", "expected a JSON object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw SchemaError(context, key, "unknown key");
  }
}

const Json& require_field(const Json& obj, const char* key, const std::string& context) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(context, key, "missing required field");
  return *it;
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string(), "", "cannot open file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError(path.string(), "line " + std::to_string(line_of_offset(text, e.byte)),
                      e.what());
  }
}

void save_json(const std::filesystem::path& path, const Json& value) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << value.dump(2) << '\n';
}

Json measure_to_json(const CircleMeasure& m) {
  Json coeffs = Json::array();
  for (int p = -m.max_order(); p <= m.max_order(); ++p) {
    coeffs.push_back({m.coeff(p).real(), m.coeff(p).imag()});
  }
  return Json{{"P", m.max_order()}, {"coeffs", std::move(coeffs)}};
}

CircleMeasure measure_from_json(const Json& j, const std::string& context) {
  require_keys(j, {"P", "coeffs"}, context);
  const int P = require_field(j, "P", context).get<int>();
  const Json& coeffs = require_field(j, "coeffs", context);
  if (!coeffs.is_array() || coeffs.size() != static_cast<std::size_t>(2 * P + 1)) {
    throw SchemaError(context, "coeffs", "expected 2*P+1 [re, im] pairs");
  }
  std::vector<std::complex<double>> out;
  out.reserve(coeffs.size());
  for (const auto& pair : coeffs) {
    if (!pair.is_array() || pair.size() != 2) {
      throw SchemaError(context, "coeffs", "expected [re, im] pairs");
    }
    out.emplace_back(pair[0].get<double>(), pair[1].get<double>());
  }
  try {
    return CircleMeasure(P, std::move(out));
  } catch (const InvalidArgument& e) {
    throw SchemaError(context, "coeffs", e.what());
  }
}

Json density_to_json(const DensityGrid& d) {
  return Json{{"G", d.size()}, {"values", d.values}};
}

DensityGrid density_from_json(const Json& j, const std::string& context) {
  require_keys(j, {"G", "values"}, context);
  const std::size_t G = require_field(j, "G", context).get<std::size_t>();
  std::vector<double> values =
      require_field(j, "values", context).get<std::vector<double>>();
  if (values.size() != G) throw SchemaError(context, "values", "length must equal G");
  try {
    return DensityGrid(std::move(values));
  } catch (const InvalidArgument& e) {
    throw SchemaError(context, "values", e.what());
  }
}

Json system_to_json(const FiniteSystem& s) {
  return Json{{"N", s.size()}, {"perm", s.perm}};
}

SystemPtr system_from_json(const Json& j, const std::string& context) {
  require_keys(j, {"N", "perm"}, context);
  const std::size_t n = require_field(j, "N", context).get<std::size_t>();
  std::vector<std::uint32_t> perm =
      require_field(j, "perm", context).get<std::vector<std::uint32_t>>();
  if (perm.size() != n) throw SchemaError(context, "perm", "length must equal N");
  try {
    return make_system(std::move(perm));
  } catch (const InvalidArgument& e) {
    throw SchemaError(context, "perm", e.what());
  }
}

Json observable_to_json(const Observable& f) {
  const Partition& part = f.partition();
  std::vector<std::complex<double>> class_values(part.class_count);
  std::vector<bool> seen(part.class_count, false);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!seen[part.labels[i]]) {
      class_values[part.labels[i]] = f.values()[i];
      seen[part.labels[i]] = true;
    }
  }
  Json values = Json::array();
  for (const auto& v : class_values) values.push_back({v.real(), v.imag()});
  return Json{{"values", std::move(values)}, {"labels", part.labels}};
}

Observable observable_from_json(const Json& j, SystemPtr system, const std::string& context) {
  require_keys(j, {"values", "labels"}, context);
  const Json& values = require_field(j, "values", context);
  std::vector<std::uint32_t> labels =
      require_field(j, "labels", context).get<std::vector<std::uint32_t>>();
  std::vector<std::complex<double>> class_values;
  for (const auto& pair : values) {
    if (!pair.is_array() || pair.size() != 2) {
      throw SchemaError(context, "values", "expected [re, im] pairs");
    }
    class_values.emplace_back(pair[0].get<double>(), pair[1].get<double>());
  }
  std::vector<std::complex<double>> atom_values(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_values.size()) {
      throw SchemaError(context, "labels", "label exceeds the number of class values");
    }
    atom_values[i] = class_values[labels[i]];
  }
  try {
    return Observable(std::move(system), std::move(atom_values), Partition(std::move(labels)));
  } catch (const InvalidArgument& e) {
    throw SchemaError(context, "", e.what());
  }
}

Json induced_to_json(const InducedSystem& ind) {
  return Json{{"parent_label", ind.parent->label},
              {"parent_N", ind.parent->size()},
              {"subset", ind.subset},
              {"return_time", ind.return_time},
              {"induced", system_to_json(*ind.induced)}};
}

Json kac_to_json(const KacReport& kac) {
  return Json{{"expected_return", {kac.expected_return.num, kac.expected_return.den}},
              {"holds", kac.holds}};
}

Json certificate_to_json(const MultiplicityCertificate& cert) {
  Json failures = Json::array();
  for (const auto& w : cert.failures) {
    failures.push_back({{"condition", w.condition},
                        {"i", w.i + 1},
                        {"j", w.j + 1},
                        {"eta", std::string(1, w.eta)},
                        {"theta", w.theta},
                        {"value", w.value}});
  }
  Json pair_devs = Json::array();
  for (const auto& pd : cert.pair_deviations) {
    pair_devs.push_back({{"i", pd.i + 1},
                         {"j", pd.j + 1},
                         {"eta", std::string(1, pd.eta)},
                         {"deviation", pd.deviation}});
  }
  return Json{{"family_size", cert.family_size},
              {"epsilon", cert.epsilon},
              {"tau", cert.tau},
              {"threshold", cert.threshold},
              {"coverage_goal", cert.coverage_goal},
              {"coverage", cert.coverage},
              {"certified_bound", cert.certified_bound},
              {"cond1_ok", cert.cond1_ok},
              {"cond2_ok", cert.cond2_ok},
              {"flatness", cert.flatness},
              {"pair_deviations", std::move(pair_devs)},
              {"failures", std::move(failures)}};
}

namespace {

Json checks_to_json(const std::vector<CheckRecord>& checks) {
  Json out = Json::array();
  for (const auto& c : checks) {
    out.push_back({{"name", c.name},
                   {"value", c.value},
                   {"bound", c.bound},
                   {"tau", c.tau_used},
                   {"pass", c.pass}});
  }
  return out;
}

}  // namespace

Json step_certificate_to_json(const StepCertificate& cert) {
  return Json{{"n", cert.n},
              {"atoms_before", cert.atoms_before},
              {"atoms_after", cert.atoms_after},
              {"alpha", cert.alpha},
              {"tau", cert.tau},
              {"eps", cert.eps},
              {"rho", cert.rho},
              {"delta", cert.delta},
              {"delta_halvings", cert.delta_halvings},
              {"add_seed", cert.add_seed},
              {"induce_seed", cert.induce_seed},
              {"accepted_seed", cert.accepted_seed},
              {"induce_attempts", cert.induce_attempts},
              {"deleted_increment_rel", cert.deleted_increment_rel},
              {"deleted_increment_abs", cert.deleted_increment_abs},
              {"deleted_mass_total", cert.deleted_mass_total},
              {"independence", cert.independence},
              {"return_freq1", cert.return_freq1},
              {"return_freq2", cert.return_freq2},
              {"freq_window", cert.freq_window},
              {"add_distances", cert.add_distances},
              {"A1", checks_to_json(cert.a1)},
              {"A2", checks_to_json(cert.a2)},
              {"A3", checks_to_json(cert.a3)},
              {"A4", checks_to_json(cert.a4)},
              {"mass", checks_to_json(cert.mass)},
              {"A1_pass", cert.a1_pass},
              {"A2_pass", cert.a2_pass},
              {"A3_pass", cert.a3_pass},
              {"A4_pass", cert.a4_pass},
              {"mass_pass", cert.mass_pass},
              {"pass", cert.pass},
              {"track_distances", cert.track_distances}};
}

Json convergence_to_json(const ConvergenceReport& report) {
  Json steps = Json::array();
  for (const auto& s : report.steps) {
    steps.push_back({{"n", s.n},
                     {"good", s.good},
                     {"has_strong", s.has_strong},
                     {"strong", s.strong},
                     {"strong_dev", s.strong_dev},
                     {"weak", s.weak},
                     {"weak_ok", s.weak_ok},
                     {"cauchy_gaps", s.cauchy_gaps}});
  }
  return Json{{"steps", std::move(steps)}, {"all_pass", report.all_pass}};
}

Json schedule_rows_to_json(const std::vector<ScheduleRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back(
        {{"n", r.n}, {"alpha", r.alpha}, {"tau", r.tau}, {"eps", r.eps}, {"rho", r.rho}});
  }
  return out;
}

Json attempts_to_json_lines(const std::vector<AttemptRecord>& attempts) {
  Json out = Json::array();
  for (const auto& a : attempts) {
    out.push_back({{"seed", a.seed},
                   {"distances", a.distances},
                   {"independence", a.independence},
                   {"accepted", a.accepted}});
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_density_csv(const std::filesystem::path& path, const DensityGrid& d) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "theta,value\n";
  for (std::size_t k = 0; k < d.size(); ++k) {
    out << format_double(d.theta(k)) << ',' << format_double(d.values[k]) << '\n';
  }
}

DensityGrid read_density_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string(), "", "cannot open file");
  std::string line;
  if (!std::getline(in, line) || line != "theta,value") {
    throw SchemaError(path.string(), "header", "expected 'theta,value'");
  }
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw SchemaError(path.string(), "line " + std::to_string(line_no), "expected 'theta,value'");
    }
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  return DensityGrid(std::move(values));
}

void write_lambda_min_csv(const std::filesystem::path& path,
                          const std::vector<double>& profile) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "theta,lambda_min\n";
  const std::size_t G = profile.size();
  for (std::size_t k = 0; k < G; ++k) {
    const double theta = kTwoPi * static_cast<double>(k) / static_cast<double>(G);
    out << format_double(theta) << ',' << format_double(profile[k]) << '\n';
  }
}

}  // namespace lebspec
