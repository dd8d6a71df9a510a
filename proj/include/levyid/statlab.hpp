#ifndef LEVYID_STATLAB_HPP
#define LEVYID_STATLAB_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "levyid/core.hpp"
#include "levyid/error.hpp"
#include "levyid/parallel.hpp"
#include "levyid/rng.hpp"

namespace levyid {

struct Estimate {
  double value = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool degenerate = false;
};

/// How weighted sums are normalized.
///   self:       sum w_i v_i / sum w_i (ratio estimator)
///   known_mean: sum w_i v_i / N, for weights already divided by their exact mean
enum class Normalization { self, known_mean };

struct McOptions {
  std::size_t replicates = 100000;
  int bootstrap = 500;
  double z_crit = 3.0;
  unsigned workers = 0;
};

/// Replicate-by-entry matrix of functional values, row-major.
class PanelSamples {
 public:
  PanelSamples(std::size_t replicates, std::size_t entries)
      : n_(replicates), m_(entries), data_(replicates * entries, 0.0) {}

  std::size_t replicates() const { return n_; }
  std::size_t entries() const { return m_; }
  double& operator()(std::size_t i, std::size_t e) { return data_[i * m_ + e]; }
  double operator()(std::size_t i, std::size_t e) const { return data_[i * m_ + e]; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * m_, m_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * m_, m_}; }

 private:
  std::size_t n_, m_;
  std::vector<double> data_;
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

/// Point estimates and nonparametric bootstrap errors for every entry of a
/// panel at once. All entries share the same resampled replicate indices.
/// The SE is the half-width of the central 68.27% percentile interval of the
/// bootstrap distribution; the CI is its 2.5%-97.5% percentile interval.
/// `weights` may be empty (all ones).
inline std::vector<Estimate> bootstrap_panel(const PanelSamples& samples, std::span<const double> weights,
                                             Normalization norm, int resamples, const StreamFactory& streams,
                                             unsigned workers = 0) {
  const std::size_t n = samples.replicates(), m = samples.entries();
  require(n >= 1, "bootstrap needs at least one replicate");
  require(weights.empty() || weights.size() == n, "bootstrap weights must match replicates");
  require(n < (std::size_t{1} << 32), "too many replicates for the bootstrap index sampler");
  auto weight = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };

  std::vector<Estimate> out(m);
  double wsum = 0.0;
  std::vector<double> vsum(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weight(i);
    wsum += w;
    for (std::size_t e = 0; e < m; ++e) vsum[e] += w * samples(i, e);
  }
  if (norm == Normalization::self && wsum <= 0.0) throw DomainError("all weights are zero");
  const double denom = norm == Normalization::self ? wsum : static_cast<double>(n);
  for (std::size_t e = 0; e < m; ++e) out[e].value = vsum[e] / denom;

  // Values identical across replicates give a zero-width bootstrap.
  std::vector<bool> constant(m, true);
  for (std::size_t e = 0; e < m; ++e)
    for (std::size_t i = 1; i < n && constant[e]; ++i)
      if (samples(i, e) != samples(0, e)) constant[e] = false;
  bool weights_constant = true;
  for (std::size_t i = 1; i < n && weights_constant; ++i)
    if (weight(i) != weight(0)) weights_constant = false;

  if (n == 1 || resamples <= 1) {
    for (auto& est : out) {
      est.degenerate = true;
      est.ci_lo = est.ci_hi = est.value;
    }
    return out;
  }

  const auto b_count = static_cast<std::size_t>(resamples);
  std::vector<double> boot(b_count * m, std::numeric_limits<double>::quiet_NaN());
  parallel_for(b_count, workers, [&](std::size_t b) {
    RngStream rng = streams.stream(b);
    std::vector<double> s(m, 0.0);
    double ws = 0.0;
    const auto n32 = static_cast<std::uint32_t>(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = rng.index(n32);
      const double w = weight(i);
      ws += w;
      if (w == 0.0) continue;
      const auto row = samples.row(i);
      for (std::size_t e = 0; e < m; ++e) s[e] += w * row[e];
    }
    const double d = norm == Normalization::self ? ws : static_cast<double>(n);
    if (d <= 0.0) return;  // resample with no mass; left as NaN and dropped
    for (std::size_t e = 0; e < m; ++e) boot[b * m + e] = s[e] / d;
  });

  constexpr double kLo68 = 0.15865525393145707, kHi68 = 0.8413447460685429;
  for (std::size_t e = 0; e < m; ++e) {
    std::vector<double> v;
    v.reserve(b_count);
    for (std::size_t b = 0; b < b_count; ++b)
      if (!std::isnan(boot[b * m + e])) v.push_back(boot[b * m + e]);
    std::sort(v.begin(), v.end());
    Estimate& est = out[e];
    est.se = 0.5 * (detail::quantile_sorted(v, kHi68) - detail::quantile_sorted(v, kLo68));
    est.ci_lo = detail::quantile_sorted(v, 0.025);
    est.ci_hi = detail::quantile_sorted(v, 0.975);
    est.degenerate = constant[e] && (weights_constant || norm == Normalization::self);
    if (est.degenerate) {
      est.se = 0.0;
      est.ci_lo = est.ci_hi = est.value;
    }
  }
  return out;
}

/// Laplace functionals exp(-<alpha, path>) of every panel entry, per path.
inline PanelSamples laplace_samples(const std::vector<Path>& paths, const LevyFunctionalPanel& panel) {
  PanelSamples s(paths.size(), panel.size());
  for (std::size_t i = 0; i < paths.size(); ++i)
    for (std::size_t e = 0; e < panel.size(); ++e) s(i, e) = panel[e].functional(paths[i]);
  return s;
}

inline std::vector<Estimate> weighted_laplace_panel(const WeightedEnsemble& ensemble, const LevyFunctionalPanel& panel,
                                                    const StreamFactory& streams, int resamples = 500,
                                                    Normalization norm = Normalization::self, unsigned workers = 0) {
  validate(panel, ensemble.grid);
  return bootstrap_panel(laplace_samples(ensemble.paths, panel), ensemble.weights, norm, resamples, streams, workers);
}

/// Weighted empirical Laplace functional of one panel entry with bootstrap SE.
inline Estimate weighted_laplace(const WeightedEnsemble& ensemble, const PanelEntry& entry, const StreamFactory& streams,
                                 int resamples = 500, Normalization norm = Normalization::self, unsigned workers = 0) {
  return weighted_laplace_panel(ensemble, LevyFunctionalPanel{{entry}}, streams, resamples, norm, workers).front();
}

/// Applies -log to an estimate with the delta-method SE.
inline Estimate neg_log(const Estimate& e) {
  if (!(e.value > 0.0)) throw NumericalError("cannot take -log of a nonpositive Laplace estimate");
  Estimate r;
  r.value = -std::log(e.value);
  r.se = e.se / e.value;
  r.ci_lo = e.ci_hi > 0.0 ? -std::log(e.ci_hi) : std::numeric_limits<double>::infinity();
  r.ci_hi = e.ci_lo > 0.0 ? -std::log(e.ci_lo) : std::numeric_limits<double>::infinity();
  r.degenerate = e.degenerate;
  return r;
}

inline Estimate exact(double value) { return Estimate{value, 0.0, value, value, true}; }

struct Comparison {
  double z = 0.0;
  bool pass = true;
  std::string note;
};

/// Two-sided z-test of lhs against rhs.
inline Comparison compare(const Estimate& lhs, const Estimate& rhs, double z_crit = 3.0) {
  require(std::isfinite(lhs.value) && std::isfinite(rhs.value) && std::isfinite(lhs.se) && std::isfinite(rhs.se),
          "compare needs finite inputs");
  Comparison c;
  const double se = std::hypot(lhs.se, rhs.se);
  const double diff = lhs.value - rhs.value;
  if (se == 0.0) {
    if (std::abs(diff) <= 1e-12 * (1.0 + std::abs(rhs.value))) {
      c.z = 0.0;
      c.pass = true;
    } else {
      c.z = std::copysign(std::numeric_limits<double>::infinity(), diff);
      c.pass = false;
      c.note = "deterministic mismatch";
    }
    return c;
  }
  c.z = diff / se;
  c.pass = std::abs(c.z) <= z_crit;
  return c;
}

/// z threshold that keeps the per-entry two-sided level of `z_crit` as the
/// family-wise level over `m` entries.
inline double bonferroni_z(double z_crit, std::size_t m) {
  if (m <= 1) return z_crit;
  const boost::math::normal_distribution<double> std_normal;
  const double per_entry = 2.0 * boost::math::cdf(boost::math::complement(std_normal, z_crit));
  return boost::math::quantile(boost::math::complement(std_normal, per_entry / (2.0 * static_cast<double>(m))));
}

struct EntryResult {
  std::string label;
  Estimate lhs;
  Estimate rhs;
  double z = 0.0;
  bool pass = true;
  std::string note;
};

/// Per-entry comparisons of two sides of a distributional identity.
struct IdentityReport {
  std::string identity;
  std::string family;
  double z_crit = 3.0;
  double z_bonferroni = 3.0;
  std::vector<EntryResult> entries;
  std::vector<std::string> warnings;
  bool all_entries_pass = true;
  bool overall_pass = true;

  void add(std::string label, const Estimate& lhs, const Estimate& rhs) {
    const Comparison c = compare(lhs, rhs, z_crit);
    entries.push_back(EntryResult{std::move(label), lhs, rhs, c.z, c.pass, c.note});
  }

  /// Fills the per-entry and Bonferroni-adjusted overall verdicts.
  void finalize() {
    z_bonferroni = bonferroni_z(z_crit, entries.size());
    all_entries_pass = true;
    overall_pass = true;
    for (auto& e : entries) {
      e.pass = std::abs(e.z) <= z_crit;
      all_entries_pass = all_entries_pass && e.pass;
      overall_pass = overall_pass && std::abs(e.z) <= z_bonferroni;
      if (e.lhs.degenerate && e.rhs.degenerate && !e.note.empty())
        warnings.push_back(e.label + ": " + e.note);
    }
  }

  bool passed() const { return all_entries_pass && overall_pass; }

  double max_abs_z() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, std::abs(e.z));
    return m;
  }
};

inline std::string describe(const PanelEntry& entry) {
  std::ostringstream os;
  for (std::size_t i = 0; i < entry.alphas.size(); ++i) {
    if (i) os << " + ";
    os << entry.alphas[i] << "*y(" << entry.times[i] << ")";
  }
  return os.str();
}

}  // namespace levyid

#endif
