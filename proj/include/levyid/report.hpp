#ifndef LEVYID_REPORT_HPP
#define LEVYID_REPORT_HPP

#include <chrono>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levyid/levymeasure.hpp"
#include "levyid/limits.hpp"
#include "levyid/statlab.hpp"

// Machine-readable reports. Everything except the "runtime" object is a pure
// function of the resolved config and the seed.
//
// Verdict: every z-scored entry in the report must satisfy |z| <= the
// Bonferroni threshold for z_crit over all z-scored entries in the report,
// and every exact check (finiteness, splits, limit ladders) must pass. Each
// check also carries its own per-entry and within-check verdicts.

namespace levyid::report {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchema = "levy-id/1";

inline json to_json(const Estimate& e) {
  return json{{"value", e.value}, {"se", e.se}, {"ci_lo", e.ci_lo}, {"ci_hi", e.ci_hi}};
}

/// One row of the optional CSV output.
struct CsvRow {
  std::string check;
  std::string label;
  double lhs = 0.0, lhs_se = 0.0, rhs = 0.0, rhs_se = 0.0, z = 0.0;
  bool pass = true;
};

class Report {
 public:
  Report(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed) {}

  /// Adds a named exact check; `pass` enters the overall verdict directly.
  void add(std::string check, json body, bool pass) {
    push(std::move(check), std::move(body), pass);
    exact_pass_ = exact_pass_ && pass;
  }

  void add(const std::string& check, const IdentityReport& r) {
    json entries = json::array();
    for (const auto& e : r.entries) {
      json row{{"label", e.label}, {"lhs", to_json(e.lhs)}, {"rhs", to_json(e.rhs)}, {"z", e.z}, {"pass", e.pass}};
      if (!e.note.empty()) row["note"] = e.note;
      entries.push_back(std::move(row));
      csv_.push_back(CsvRow{check, e.label, e.lhs.value, e.lhs.se, e.rhs.value, e.rhs.se, e.z, e.pass});
    }
    push(check,
        json{{"identity", r.identity},
             {"family", r.family},
             {"z_crit", r.z_crit},
             {"z_bonferroni", r.z_bonferroni},
             {"max_abs_z", r.max_abs_z()},
             {"all_entries_pass", r.all_entries_pass},
             {"bonferroni_pass", r.overall_pass},
             {"entries", entries},
             {"warnings", r.warnings}},
        r.overall_pass);
    for (const auto& e : r.entries) scored_.push_back({std::abs(e.z), r.z_crit});
  }

  void add(const std::string& check, const LimitReport& r) {
    json steps = json::array();
    for (const auto& s : r.steps) {
      json panel = json::array();
      for (std::size_t e = 0; e < s.panel.size(); ++e) {
        panel.push_back(json{{"label", r.labels[e]}, {"tilted", to_json(s.panel[e])}});
        const double se = std::hypot(s.panel[e].se, r.reference[e].se);
        const double z = se > 0.0 ? (s.panel[e].value - r.reference[e].value) / se : 0.0;
        csv_.push_back(CsvRow{check + " delta=" + format(s.delta), r.labels[e], s.panel[e].value, s.panel[e].se, r.reference[e].value,
                              r.reference[e].se, z, true});
      }
      steps.push_back(json{{"delta", s.delta},
                           {"N", s.replicates},
                           {"distance", s.distance},
                           {"se", s.se},
                           {"argmax", r.labels[s.argmax]},
                           {"ess", s.ess},
                           {"ess_warning", s.ess_warning},
                           {"panel", panel}});
    }
    json reference = json::array();
    for (std::size_t e = 0; e < r.reference.size(); ++e) reference.push_back(json{{"label", r.labels[e]}, {"r_a", to_json(r.reference[e])}});
    add(check,
        json{{"family", r.family},
             {"a", r.a},
             {"monotone", r.monotone},
             {"final_within", r.final_within},
             {"reference", reference},
             {"steps", steps},
             {"warnings", r.warnings}},
        r.passed());
  }

  void add(const std::string& check, const std::vector<SplitCheck>& rows, double tol) {
    json entries = json::array();
    bool ok = true;
    for (const auto& c : rows) {
      const bool pass = c.residual <= tol;
      ok = ok && pass;
      entries.push_back(json{{"label", c.label},
                             {"a", c.a},
                             {"nu", c.nu},
                             {"nu_zero_at_a", c.nu_zero},
                             {"nu_positive_at_a", c.nu_positive},
                             {"residual", c.residual},
                             {"pass", pass}});
      csv_.push_back(CsvRow{check + " a=" + format(c.a), c.label, c.nu_zero + c.nu_positive, 0.0, c.nu, 0.0, 0.0, pass});
    }
    add(check, json{{"tolerance", tol}, {"entries", entries}}, ok);
  }

  void add(const std::string& check, const LevyConditionReport& r) {
    json points = json::array();
    for (const auto& p : r.points) {
      json row{{"t", p.t}, {"value", p.value}, {"abs_error", p.abs_error}, {"finite", p.finite}};
      if (!p.diagnostic.empty()) row["diagnostic"] = p.diagnostic;
      points.push_back(std::move(row));
    }
    add(check, json{{"points", points}}, r.all_finite);
  }

  std::size_t scored_entries() const { return scored_.size(); }

  bool passed() const {
    for (const auto& [z, crit] : scored_)
      if (z > bonferroni_z(crit, scored_.size())) return false;
    return exact_pass_;
  }
  const json& results() const { return results_; }

  /// The full document. `config` is embedded verbatim.
  json document(const json& config, double seconds, unsigned workers) const {
    json doc;
    doc["schema"] = kSchema;
    doc["command"] = command_;
    doc["seed"] = seed_;
    doc["config"] = config;
    doc["results"] = results_;
    doc["scored_entries"] = scored_.size();
    doc["pass"] = passed();
    doc["runtime"] = json{{"timestamp", timestamp()}, {"seconds", seconds}, {"workers", workers}};
    return doc;
  }

  void write_csv(std::ostream& out) const {
    out << "check,label,lhs,lhs_se,rhs,rhs_se,z,pass\n";
    out << std::setprecision(17);
    for (const auto& r : csv_)
      out << quote(r.check) << ',' << quote(r.label) << ',' << r.lhs << ',' << r.lhs_se << ',' << r.rhs << ',' << r.rhs_se << ',' << r.z
          << ',' << (r.pass ? "true" : "false") << '\n';
  }

  void add_csv(CsvRow row) { csv_.push_back(std::move(row)); }

  static std::string format(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
  }

 private:
  void push(std::string check, json body, bool pass) {
    json entry;
    entry["check"] = std::move(check);
    entry["pass"] = pass;
    for (auto& [k, v] : body.items()) entry[k] = v;
    results_.push_back(std::move(entry));
  }

  static std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
  }

  static std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    std::ostringstream os;
    os << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
  }

  std::string command_;
  std::uint64_t seed_;
  json results_ = json::array();
  std::vector<CsvRow> csv_;
  std::vector<std::pair<double, double>> scored_;  // (|z|, z_crit)
  bool exact_pass_ = true;
};

/// The report without its runtime object, for determinism comparisons.
inline json without_runtime(json doc) {
  doc.erase("runtime");
  return doc;
}

}  // namespace levyid::report

#endif
