#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dvs/design_matrix.hpp"
#include "dvs/expdesign.hpp"
#include "dvs/version.hpp"
#include "json.hpp"

namespace dvs {

/// One side of a bound comparison: the realized value against its ceiling.
struct BoundComparison {
  double value = 0.0;
  double bound = 0.0;
  bool holds = false;
};

/// Everything a selection run reports. Subset indices are 0-based in memory
/// and serialized 1-based.
struct SelectionReport {
  std::string method;
  int n = 0;
  int m = 0;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> subset;
  ObjectiveValue obj_a, obj_e, obj_d;
  BoundComparison fro, spec;
  bool guaranteed_bounds = false;  // per-set ceilings rather than expectation ceilings
  std::optional<double> prediction_error;
  nlohmann::ordered_json diagnostics = nlohmann::ordered_json::object();
  double wall_time_ms = 0.0;
};

/// Fills objectives and bound comparisons for a selected subset. Guaranteed
/// mode compares against the per-set ceilings (the ones a derandomized
/// selection must satisfy); otherwise against the expectation ceilings.
inline SelectionReport make_selection_report(const DesignMatrix& A, int k,
                                             const std::string& method, std::uint64_t seed,
                                             std::span<const int> subset,
                                             bool guaranteed_bounds = false) {
  SelectionReport report;
  report.method = method;
  report.n = A.n();
  report.m = A.m();
  report.k = k;
  report.seed = seed;
  report.subset.assign(subset.begin(), subset.end());
  std::sort(report.subset.begin(), report.subset.end());
  report.guaranteed_bounds = guaranteed_bounds;

  report.obj_a = objective(A, report.subset, Criterion::kA);
  report.obj_e = objective(A, report.subset, Criterion::kE);
  report.obj_d = objective(A, report.subset, Criterion::kD);

  const double factor = static_cast<double>(A.m() - A.n() + 1) / (k - A.n() + 1);
  report.fro.value = report.obj_a.value;
  report.fro.bound = factor * pinv_fro_sq(A.matrix(), A.rank_tol_scale());
  report.fro.holds = report.fro.value <= report.fro.bound;
  const double spec_factor =
      guaranteed_bounds ? static_cast<double>(A.n()) * factor
                        : 1.0 + static_cast<double>(A.n()) * (A.m() - k) / (k - A.n() + 1);
  report.spec.value = report.obj_e.value;
  report.spec.bound = spec_factor * pinv_spec_sq(A.matrix(), A.rank_tol_scale());
  report.spec.holds = report.spec.value <= report.spec.bound;
  return report;
}

namespace detail {

inline nlohmann::ordered_json json_number(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string format_fingerprint(std::uint64_t fp) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a:%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const SelectionReport& report) {
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["method"] = report.method;
  j["n"] = report.n;
  j["m"] = report.m;
  j["k"] = report.k;
  j["seed"] = report.seed;
  nlohmann::ordered_json subset = nlohmann::ordered_json::array();
  for (const int i : report.subset) subset.push_back(i + 1);
  j["subset"] = std::move(subset);
  j["objectives"] = {{"A", detail::json_number(report.obj_a.value)},
                     {"E", detail::json_number(report.obj_e.value)},
                     {"D", detail::json_number(report.obj_d.value)},
                     {"singular", report.obj_a.singular}};
  j["bounds"] = {{"kind", report.guaranteed_bounds ? "guaranteed" : "expectation"},
                 {"frobenius",
                  {{"value", detail::json_number(report.fro.value)},
                   {"bound", detail::json_number(report.fro.bound)},
                   {"holds", report.fro.holds}}},
                 {"spectral",
                  {{"value", detail::json_number(report.spec.value)},
                   {"bound", detail::json_number(report.spec.bound)},
                   {"holds", report.spec.holds}}}};
  if (report.prediction_error.has_value())
    j["prediction_error"] = *report.prediction_error;
  else
    j["prediction_error"] = nullptr;
  j["diagnostics"] = report.diagnostics;
  j["wall_time_ms"] = report.wall_time_ms;
  return j;
}

/// Two-line CSV rendering of a report; the subset cell joins 1-based indices
/// with spaces.
inline std::string to_csv(const SelectionReport& report) {
  std::string subset_cell;
  for (std::size_t i = 0; i < report.subset.size(); ++i) {
    if (i > 0) subset_cell += ' ';
    subset_cell += std::to_string(report.subset[i] + 1);
  }
  std::string out =
      "method,n,m,k,seed,subset,objective_A,objective_E,objective_D,fro_value,fro_bound,"
      "fro_holds,spec_value,spec_bound,spec_holds,prediction_error,wall_time_ms\n";
  out += report.method;
  out += ',' + std::to_string(report.n) + ',' + std::to_string(report.m) + ',' +
         std::to_string(report.k) + ',' + std::to_string(report.seed);
  out += ",\"" + subset_cell + "\"";
  out += ',' + detail::format_double(report.obj_a.value);
  out += ',' + detail::format_double(report.obj_e.value);
  out += ',' + detail::format_double(report.obj_d.value);
  out += ',' + detail::format_double(report.fro.value);
  out += ',' + detail::format_double(report.fro.bound);
  out += report.fro.holds ? ",true" : ",false";
  out += ',' + detail::format_double(report.spec.value);
  out += ',' + detail::format_double(report.spec.bound);
  out += report.spec.holds ? ",true" : ",false";
  out += ',';
  if (report.prediction_error.has_value())
    out += detail::format_double(*report.prediction_error);
  out += ',' + detail::format_double(report.wall_time_ms);
  out += '\n';
  return out;
}

}  // namespace dvs
