#ifndef LEVYID_PERMANENTAL_HPP
#define LEVYID_PERMANENTAL_HPP

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "levyid/core.hpp"
#include "levyid/error.hpp"
#include "levyid/levymeasure.hpp"
#include "levyid/parallel.hpp"
#include "levyid/randkit.hpp"
#include "levyid/rng.hpp"
#include "levyid/statlab.hpp"

// Finite-state permanental processes built from a killed, symmetric
// continuous-time chain. Local time is sojourn time (counting reference
// measure), so the Green matrix is the matrix of expected sojourns.
// Laplace functionals use exp(-1/2 sum alpha_i psi(x_i)) throughout, so that
// E exp(-1/2 <alpha, psi>) = det(I + diag(alpha) G)^-beta.

namespace levyid {

/// exp(-1/2 sum alpha_i psi(x_i)) over states x_i.
struct StatePanelEntry {
  std::vector<double> alphas;
  std::vector<std::size_t> states;

  double exponent(std::span<const double> psi) const {
    double s = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) s += alphas[i] * psi[states[i]];
    return 0.5 * s;
  }
  double functional(std::span<const double> psi) const { return std::exp(-exponent(psi)); }
};

using StatePanel = std::vector<StatePanelEntry>;

inline void validate(const StatePanelEntry& entry, std::size_t n) {
  require(!entry.alphas.empty() && entry.alphas.size() == entry.states.size(), "panel entry needs matching alphas and states");
  for (std::size_t i = 0; i < entry.alphas.size(); ++i) {
    require(entry.alphas[i] >= 0.0 && std::isfinite(entry.alphas[i]), "panel alphas must be >= 0");
    require(entry.states[i] < n, "panel state out of range");
  }
}

inline std::string describe(const StatePanelEntry& entry) {
  std::ostringstream os;
  for (std::size_t i = 0; i < entry.alphas.size(); ++i) {
    if (i) os << " + ";
    os << entry.alphas[i] << "*y[" << entry.states[i] << "]";
  }
  return os.str();
}

/// Generator with the sign flipped: diag(total exit rate) - off-diagonal rates.
inline Eigen::MatrixXd negative_generator(const KilledChain& chain) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  Eigen::MatrixXd q = -chain.rates;
  for (Eigen::Index i = 0; i < n; ++i) {
    double exit = chain.kill(i);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) exit += chain.rates(i, j);
    q(i, i) = exit;
  }
  return q;
}

inline bool is_symmetric(const Eigen::MatrixXd& m, double tol = 1e-12) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

namespace detail {

inline Eigen::MatrixXd invert_transient(const Eigen::MatrixXd& q) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(q);
  if (!lu.isInvertible()) throw NumericalError("chain is not transient: the Green system is singular");
  Eigen::MatrixXd g = lu.inverse();
  if (!g.allFinite() || (g.array() < -1e-12).any()) throw NumericalError("chain is not transient: the Green matrix is not finite");
  return g.cwiseMax(0.0);
}

}  // namespace detail

/// g(x, y) = expected total sojourn at y for the chain started at x.
inline Eigen::MatrixXd green_matrix(const KilledChain& chain) {
  validate_chain(chain);
  Eigen::MatrixXd off = chain.rates;
  off.diagonal().setZero();
  require(is_symmetric(off), "only symmetric rate matrices are supported");
  Eigen::MatrixXd g = detail::invert_transient(negative_generator(chain));
  return 0.5 * (g + g.transpose());
}

/// g_a(x, y) = g(x, y) - g(x, a) g(a, y) / g(a, a): the Green matrix of the
/// chain killed at its first visit to a.
inline Eigen::MatrixXd conditional_kernel(const Eigen::MatrixXd& g, std::size_t a) {
  require(a < static_cast<std::size_t>(g.rows()), "state out of range");
  const auto ia = static_cast<Eigen::Index>(a);
  const double gaa = g(ia, ia);
  if (!(gaa > 0.0)) throw DomainError("conditional kernel needs g(a,a) > 0");
  Eigen::MatrixXd out = g - g.col(ia) * g.row(ia) / gaa;
  out.row(ia).setZero();
  out.col(ia).setZero();
  return out;
}

/// The same kernel computed from the chain: invert the generator with state a
/// removed and pad row and column a with zeros.
inline Eigen::MatrixXd green_matrix_killed_at(const KilledChain& chain, std::size_t a) {
  validate_chain(chain);
  const auto n = static_cast<Eigen::Index>(chain.size());
  require(a < chain.size(), "state out of range");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  if (n == 1) return out;
  const Eigen::MatrixXd q = negative_generator(chain);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != static_cast<Eigen::Index>(a)) keep.push_back(i);
  const auto m = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd sub(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) sub(i, j) = q(keep[i], keep[j]);
  const Eigen::MatrixXd gs = detail::invert_transient(sub);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) out(keep[i], keep[j]) = gs(i, j);
  return out;
}

/// Factor L with L L^T = G, from the symmetric eigendecomposition.
class PermanentalSampler {
 public:
  PermanentalSampler(const Eigen::MatrixXd& g, double beta) : beta_(beta) {
    require(beta == 0.5 || beta == 1.0, "permanental beta must be 1/2 or 1");
    require(g.rows() >= 1 && is_symmetric(g, 1e-10), "kernel must be a symmetric square matrix");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of the kernel failed");
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) throw NumericalError("kernel is not positive semi-definite");
    factor_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  std::size_t size() const { return static_cast<std::size_t>(factor_.rows()); }
  double beta() const { return beta_; }

  std::vector<double> operator()(RngStream& rng) const {
    const auto n = factor_.rows();
    std::vector<double> psi(static_cast<std::size_t>(n), 0.0);
    Eigen::VectorXd z(n);
    const int squares = beta_ == 1.0 ? 2 : 1;
    for (int k = 0; k < squares; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) z(i) = sample_normal(rng);
      const Eigen::VectorXd eta = factor_ * z;
      for (Eigen::Index i = 0; i < n; ++i) psi[static_cast<std::size_t>(i)] += eta(i) * eta(i);
    }
    return psi;
  }

 private:
  double beta_;
  Eigen::MatrixXd factor_;
};

inline std::vector<double> sample_permanental(RngStream& rng, const Eigen::MatrixXd& g, double beta) {
  return PermanentalSampler(g, beta)(rng);
}

/// E psi(x) = 2 beta g(x, x).
inline std::vector<double> permanental_mean(const Eigen::MatrixXd& g, double beta) {
  std::vector<double> m(static_cast<std::size_t>(g.rows()));
  for (Eigen::Index i = 0; i < g.rows(); ++i) m[static_cast<std::size_t>(i)] = 2.0 * beta * g(i, i);
  return m;
}

/// -log E exp(-1/2 <alpha, psi>) = beta log det(I + diag(alpha) G).
inline double permanental_laplace_exponent(const Eigen::MatrixXd& g, const StatePanelEntry& entry, double beta) {
  validate(entry, static_cast<std::size_t>(g.rows()));
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(g.rows());
  for (std::size_t i = 0; i < entry.alphas.size(); ++i) alpha(static_cast<Eigen::Index>(entry.states[i])) += entry.alphas[i];
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(g.rows(), g.cols()) + alpha.asDiagonal() * g;
  return beta * std::log(m.determinant());
}

/// Total sojourn per state of the chain started at a, up to and including its
/// last sojourn at a.
inline std::vector<double> sample_local_times(RngStream& rng, const KilledChain& chain, std::size_t a) {
  const std::size_t n = chain.size();
  require(a < n, "state out of range");
  std::vector<double> exit(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    exit[i] = chain.kill(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) exit[i] += chain.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    require(exit[i] > 0.0 || i != a, "start state has no exit");
  }
  std::vector<double> running(n, 0.0), kept(n, 0.0);
  std::size_t x = a;
  for (std::size_t step = 0;; ++step) {
    if (step > 100000000) throw NumericalError("chain did not die; is it transient?");
    if (!(exit[x] > 0.0)) throw NumericalError("chain reached a state with no exit");
    running[x] += sample_exponential(rng, 1.0 / exit[x]);
    if (x == a) kept = running;
    double u = rng.uniform() * exit[x];
    u -= chain.kill(static_cast<Eigen::Index>(x));
    if (u < 0.0) break;
    std::size_t next = x;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == x) continue;
      const double r = chain.rates(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(j));
      if (r <= 0.0) continue;
      next = j;
      u -= r;
      if (u < 0.0) break;
    }
    x = next;
  }
  return kept;
}

/// E L(x) for the chain started at a and killed at its last visit to a.
inline std::vector<double> local_time_mean(const Eigen::MatrixXd& g, std::size_t a) {
  const auto ia = static_cast<Eigen::Index>(a);
  std::vector<double> m(static_cast<std::size_t>(g.rows()));
  for (Eigen::Index x = 0; x < g.rows(); ++x) m[static_cast<std::size_t>(x)] = g(ia, x) * g(x, ia) / g(ia, ia);
  return m;
}

namespace detail {

template <class MakeState>
PanelSamples simulate_state_panel(std::size_t n, const StatePanel& panel, unsigned workers, MakeState&& make_state) {
  PanelSamples out(n, panel.size());
  parallel_for(n, workers, [&](std::size_t i) {
    const std::vector<double> psi = make_state(i);
    auto row = out.row(i);
    for (std::size_t e = 0; e < panel.size(); ++e) row[e] = panel[e].functional(psi);
  });
  return out;
}

}  // namespace detail

/// Index-1 identity psi = (psi | psi(a) = 0) + 2 L^(a), in Laplace panels.
inline IdentityReport verify_permanental_identity(const StreamFactory& streams, const KilledChain& chain, std::size_t a,
                                                  const StatePanel& panel, const McOptions& mc) {
  const Eigen::MatrixXd g = green_matrix(chain);
  for (const auto& e : panel) validate(e, chain.size());
  require(a < chain.size() && g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) > 0.0, "need g(a,a) > 0");
  const PermanentalSampler psi(g, 1.0);
  const PermanentalSampler cond(conditional_kernel(g, a), 1.0);
  const std::size_t n = mc.replicates;

  const auto lhs_streams = streams.fork("perm/psi");
  const auto lhs_samples = detail::simulate_state_panel(n, panel, mc.workers, [&](std::size_t i) {
    RngStream rng = lhs_streams.stream(i);
    return psi(rng);
  });
  const auto cond_streams = streams.fork("perm/conditional");
  const auto lt_streams = streams.fork("perm/local-times");
  const auto rhs_samples = detail::simulate_state_panel(n, panel, mc.workers, [&](std::size_t i) {
    RngStream rng_c = cond_streams.stream(i);
    RngStream rng_l = lt_streams.stream(i);
    std::vector<double> y = cond(rng_c);
    const std::vector<double> l = sample_local_times(rng_l, chain, a);
    for (std::size_t x = 0; x < y.size(); ++x) y[x] += 2.0 * l[x];
    return y;
  });
  const auto lhs = bootstrap_panel(lhs_samples, {}, Normalization::self, mc.bootstrap, streams.fork("perm/boot-lhs"), mc.workers);
  const auto rhs = bootstrap_panel(rhs_samples, {}, Normalization::self, mc.bootstrap, streams.fork("perm/boot-rhs"), mc.workers);

  IdentityReport report;
  report.identity = "permanental";
  report.family = "permanental";
  report.z_crit = mc.z_crit;
  for (std::size_t e = 0; e < panel.size(); ++e) report.add(describe(panel[e]), lhs[e], rhs[e]);
  report.finalize();
  return report;
}

/// Sample means of L^(a)(x) against g(a,x) g(x,a) / g(a,a), per state.
inline IdentityReport check_local_time_moments(const StreamFactory& streams, const KilledChain& chain, std::size_t a,
                                               const McOptions& mc) {
  const Eigen::MatrixXd g = green_matrix(chain);
  const std::size_t n = chain.size();
  PanelSamples samples(mc.replicates, n);
  const auto lt_streams = streams.fork("local-times/draws");
  parallel_for(mc.replicates, mc.workers, [&](std::size_t i) {
    RngStream rng = lt_streams.stream(i);
    const auto l = sample_local_times(rng, chain, a);
    std::copy(l.begin(), l.end(), samples.row(i).begin());
  });
  const auto est = bootstrap_panel(samples, {}, Normalization::self, mc.bootstrap, streams.fork("local-times/boot"), mc.workers);
  const auto oracle = local_time_mean(g, a);

  IdentityReport report;
  report.identity = "local_time_mean";
  report.family = "permanental";
  report.z_crit = mc.z_crit;
  for (std::size_t x = 0; x < n; ++x) report.add("E L[" + std::to_string(x) + "]", est[x], exact(oracle[x]));
  report.finalize();
  return report;
}

struct PermanentalNuOptions {
  std::size_t replicates = 100000;
  int bootstrap = 500;
  unsigned workers = 0;
};

/// nu(F) = sum_a m(a) g(a,a) E[F(2 L^(a)) / sum_x L^(a)(x) m(x)] for
/// F(y) = 1 - exp(-1/2 <alpha, y>), sampling a with probability m(a) / sum m.
inline NuEstimate nu_permanental(const StreamFactory& streams, const KilledChain& chain, const std::vector<double>& m_weights,
                                 const StatePanelEntry& entry, const PermanentalNuOptions& opt = {}) {
  const Eigen::MatrixXd g = green_matrix(chain);
  const std::size_t n = chain.size();
  validate(entry, n);
  require(m_weights.size() == n, "one reference weight per state");
  for (double w : m_weights) require(w > 0.0 && std::isfinite(w), "reference weights must be > 0");
  require(opt.replicates >= 1, "nu_permanental needs N >= 1");

  NuEstimate out;
  out.method = NuEstimate::Method::probabilistic;
  out.replicates = opt.replicates;
  if (std::all_of(entry.alphas.begin(), entry.alphas.end(), [](double x) { return x == 0.0; })) return out;

  const double total_m = std::accumulate(m_weights.begin(), m_weights.end(), 0.0);
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) probs[i] = m_weights[i] / total_m;

  PanelSamples samples(opt.replicates, 1);
  const auto draws = streams.fork("nu-perm/draws");
  parallel_for(opt.replicates, opt.workers, [&](std::size_t i) {
    RngStream rng = draws.stream(i);
    const std::size_t a = sample_discrete_index(rng, probs);
    const auto ia = static_cast<Eigen::Index>(a);
    const auto l = sample_local_times(rng, chain, a);
    double occupation = 0.0;
    for (std::size_t x = 0; x < n; ++x) occupation += l[x] * m_weights[x];
    if (!(occupation > 0.0)) throw NumericalError("zero local-time denominator");
    std::vector<double> y(n);
    for (std::size_t x = 0; x < n; ++x) y[x] = 2.0 * l[x];
    const double f = -std::expm1(-entry.exponent(y));
    samples(i, 0) = total_m * g(ia, ia) * f / occupation;
  });
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < opt.replicates; ++i) {
    s += samples(i, 0);
    s2 += samples(i, 0) * samples(i, 0);
  }
  out.ess = s2 > 0.0 ? s * s / s2 : 0.0;
  out.ess_warning = out.ess < 0.01 * static_cast<double>(opt.replicates);
  const auto est = bootstrap_panel(samples, {}, Normalization::self, opt.bootstrap, streams.fork("nu-perm/boot"), opt.workers).front();
  out.value = est.value;
  out.se = est.se;
  return out;
}

}  // namespace levyid

#endif
