// EM for mixtures of restricted variance-gamma distributions.
//
// The latent structure per observation i and component g is the membership
// z_ig and the gamma mixing variable Y_ig. Given x_i and z_ig = 1, Y_ig is
// GIG(2 gamma_g + alpha_g' S_g^{-1} alpha_g, delta(x_i, mu_g | S_g), gamma_g - p/2),
// so the E-step needs zhat plus a = E[Y], b = E[1/Y] and c = E[log Y] under
// that posterior. The M-step maximises the expected complete-data
// log-likelihood in closed form for (pi, mu, alpha, S) and by a monotone
// scalar root search for gamma.
//
// Partially labelled data are supported: rows carrying a label keep a one-hot
// zhat, and the observed log-likelihood uses the component term for those rows
// and the mixture term for the rest.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vgmix/criteria.hpp"
#include "vgmix/distributions.hpp"
#include "vgmix/errors.hpp"
#include "vgmix/linalg.hpp"
#include "vgmix/simulate.hpp"
#include "vgmix/specfun.hpp"

namespace vgmix {

/// Optional 0-based component label per row; empty span means no labels.
using Labels = std::vector<std::optional<std::size_t>>;

enum class InitStrategy { random_partition, distance_based };

struct GammaBounds {
  double lo = 1e-4;
  double hi = 1e4;
};

struct EMConfig {
  std::size_t max_iter = 1000;
  double aitken_eps = 1e-8;
  double delta_floor = default_delta_floor;
  GammaBounds gamma_bounds{};
  std::size_t n_starts = 5;
  std::uint64_t seed = 0;
  InitStrategy init = InitStrategy::distance_based;
  /// Hold every alpha at zero (symmetric variance-gamma components).
  bool symmetric = false;

  void validate() const {
    if (max_iter == 0 || n_starts == 0) throw InvalidArgument("max_iter and n_starts must be positive");
    if (!(aitken_eps > 0.0) || !(delta_floor > 0.0))
      throw InvalidArgument("tolerances must be positive");
    if (!(gamma_bounds.lo > 0.0) || !(gamma_bounds.lo < gamma_bounds.hi))
      throw InvalidArgument("gamma bounds must satisfy 0 < lo < hi");
  }
};

struct LatentExpectations {
  Matrix zhat;  // n x G
  Matrix a;     // E[Y | x, z = 1]
  Matrix b;     // E[1/Y | x, z = 1]
  Matrix c;     // E[log Y | x, z = 1]
  double loglik = 0.0;
};

struct LoglikTrace {
  std::vector<double> values;

  /// True when no step drops by more than `slack`.
  bool nondecreasing(double slack = 1e-8) const {
    for (std::size_t k = 1; k < values.size(); ++k)
      if (values[k] < values[k - 1] - slack) return false;
    return true;
  }
};

struct GammaSolution {
  double gamma;
  bool at_boundary;
};

struct FitResult {
  VGMixtureModel model;
  double loglik = 0.0;
  LoglikTrace trace;
  double bic = 0.0;
  std::vector<std::size_t> labels;  // MAP component per row, 0-based
  Matrix responsibilities;          // n x G
  std::size_t n_iter = 0;
  bool converged = false;
  bool spiked = false;  // a component with gamma <= p/2 has its mean on an observation
  std::vector<bool> boundary_flags;  // gamma pinned at a bound in the last M-step
  std::uint64_t seed_used = 0;
  std::size_t start_index = 0;
  std::size_t failed_starts = 0;
};

namespace detail {

inline void check_labels(std::span<const std::optional<std::size_t>> labels, std::size_t n,
                         std::size_t n_known) {
  if (labels.empty()) return;
  if (labels.size() != n)
    throw DimensionMismatch("label vector length " + std::to_string(labels.size()) +
                            " differs from row count " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] && *labels[i] >= n_known)
      throw InvalidArgument("label " + std::to_string(*labels[i] + 1) + " on row " +
                            std::to_string(i + 1) + " is out of range 1.." +
                            std::to_string(n_known));
}

inline std::optional<std::size_t> label_of(std::span<const std::optional<std::size_t>> labels,
                                           std::size_t i) {
  return labels.empty() ? std::nullopt : labels[i];
}

/// Normalised responsibilities from per-component log terms log pi_g + log v_g.
/// Returns the log-sum-exp.
inline double normalize_log_terms(std::span<const double> terms, std::span<double> out) {
  const double lse = log_sum_exp(terms);
  for (std::size_t g = 0; g < terms.size(); ++g) out[g] = std::exp(terms[g] - lse);
  return lse;
}

/// Per-component log pi_g + log v*(x | theta_g) for one row.
inline void mixture_log_terms(std::span<const double> x, const VGMixtureModel& model,
                              double delta_floor, std::span<double> out) {
  for (std::size_t g = 0; g < model.size(); ++g)
    out[g] = model.log_weights()[g] + vg_log_density(x, model.component(g), delta_floor);
}

/// Smallest index attaining the row maximum.
inline std::size_t argmax_first(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t g = 1; g < v.size(); ++g)
    if (v[g] > v[best]) best = g;
  return best;
}

/// phi(x) - log x, computed without the cancellation of the two large terms.
inline double digamma_minus_log(double x) {
  if (x < 10.0) return digamma(x) - std::log(x);
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double tail =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 -
                                      inv2 * (1.0 / 132 -
                                              inv2 * (691.0 / 32760 - inv2 * (1.0 / 12)))))));
  return -0.5 * inv - tail;
}

inline Matrix symmetrized(const Matrix& m) {
  Matrix s = m;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  return s;
}

/// Returns sigma unchanged if it factors; otherwise adds 1e-8 * trace / p to the
/// diagonal once. Throws DegenerateComponent if that still fails.
inline Matrix ridge_repaired(Matrix sigma, std::size_t component) {
  try {
    (void)cholesky(sigma);
    return sigma;
  } catch (const NotPositiveDefinite&) {
  }
  const std::size_t p = sigma.rows();
  double trace = 0.0;
  for (std::size_t i = 0; i < p; ++i) trace += sigma(i, i);
  const double ridge = 1e-8 * trace / static_cast<double>(p);
  if (!(ridge > 0.0) || !std::isfinite(ridge))
    throw DegenerateComponent(component, "scatter matrix has no positive trace");
  for (std::size_t i = 0; i < p; ++i) sigma(i, i) += ridge;
  try {
    (void)cholesky(sigma);
  } catch (const NotPositiveDefinite&) {
    throw DegenerateComponent(component, "scatter matrix not positive definite after ridge");
  }
  return sigma;
}

}  // namespace detail

/// E-step: responsibilities, posterior GIG moments and the observed-data
/// log-likelihood at `model`.
inline LatentExpectations e_step(const Matrix& data, const VGMixtureModel& model,
                                 std::span<const std::optional<std::size_t>> labels,
                                 const EMConfig& cfg) {
  const std::size_t n = data.rows();
  const std::size_t G = model.size();
  const std::size_t p = model.dim();
  if (data.cols() != p)
    throw DimensionMismatch("data has " + std::to_string(data.cols()) +
                            " columns, model dimension is " + std::to_string(p));
  detail::check_labels(labels, n, G);

  LatentExpectations lat{Matrix(n, G), Matrix(n, G), Matrix(n, G), Matrix(n, G), 0.0};
  std::vector<double> terms(G);
  double loglik = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = data.row(i);
    for (std::size_t g = 0; g < G; ++g) {
      const auto ev = detail::evaluate_component(x, model.component(g), cfg.delta_floor);
      terms[g] = model.log_weights()[g] + ev.log_density;
      const GIGMoments& m = ev.moments;
      lat.a(i, g) = m.e_y;
      lat.b(i, g) = m.e_inv_y;
      lat.c(i, g) = m.e_log_y;
    }
    if (const auto known = detail::label_of(labels, i)) {
      loglik += terms[*known];
      lat.zhat(i, *known) = 1.0;
    } else {
      loglik += detail::normalize_log_terms(terms, lat.zhat.row(i));
    }
  }
  lat.loglik = loglik;
  return lat;
}

/// Root of phi(gamma) - log(gamma) = mean_c - mean_a + 1 by bisection in
/// log(gamma) inside cfg.gamma_bounds. The left side increases from -inf to 0,
/// so a non-negative right side (or a root outside the bounds) returns the
/// nearest bound with at_boundary set.
inline GammaSolution solve_gamma(double mean_a, double mean_c, double prev_gamma,
                                 const EMConfig& cfg) {
  const double rhs = mean_c - mean_a + 1.0;
  const double lo_bound = cfg.gamma_bounds.lo;
  const double hi_bound = cfg.gamma_bounds.hi;
  if (!std::isfinite(rhs)) throw InvalidArgument("solve_gamma: non-finite moments");
  if (rhs >= 0.0) return {hi_bound, true};
  auto f = [rhs](double g) { return detail::digamma_minus_log(g) - rhs; };
  if (f(hi_bound) < 0.0) return {hi_bound, true};
  if (f(lo_bound) > 0.0) return {lo_bound, true};

  // Bracket around the previous value first; it is usually close.
  double lo = lo_bound;
  double hi = hi_bound;
  if (prev_gamma > lo_bound && prev_gamma < hi_bound) {
    double l = prev_gamma, h = prev_gamma;
    for (int k = 0; k < 60; ++k) {
      l = std::max(lo_bound, l * 0.5);
      h = std::min(hi_bound, h * 2.0);
      if (f(l) <= 0.0 && f(h) >= 0.0) {
        lo = l;
        hi = h;
        break;
      }
    }
  }
  double log_lo = std::log(lo);
  double log_hi = std::log(hi);
  for (int k = 0; k < 200 && log_hi - log_lo > 1e-16; ++k) {
    const double mid = 0.5 * (log_lo + log_hi);
    if (mid <= log_lo || mid >= log_hi) break;
    if (f(std::exp(mid)) < 0.0)
      log_lo = mid;
    else
      log_hi = mid;
  }
  const double g_lo = std::exp(log_lo);
  const double g_hi = std::exp(log_hi);
  return {std::abs(f(g_lo)) <= std::abs(f(g_hi)) ? g_lo : g_hi, false};
}

struct LocationUpdate {
  Vector mu;
  Vector alpha;
};

/// Closed-form location and skewness updates for component g. With
/// cfg.symmetric the skewness is held at zero and mu is the b-weighted mean.
inline LocationUpdate m_step_location(const Matrix& data, const LatentExpectations& lat,
                                      std::size_t g, const EMConfig& cfg) {
  const std::size_t n = data.rows();
  const std::size_t p = data.cols();
  double n_g = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = lat.zhat(i, g);
    n_g += z;
    sum_a += z * lat.a(i, g);
    sum_b += z * lat.b(i, g);
  }
  if (!(n_g > 0.0)) throw DegenerateComponent(g, "no observations assigned");
  LocationUpdate up{Vector(p, 0.0), Vector(p, 0.0)};
  if (cfg.symmetric) {
    for (std::size_t i = 0; i < n; ++i) {
      const double w = lat.zhat(i, g) * lat.b(i, g);
      for (std::size_t j = 0; j < p; ++j) up.mu[j] += w * data(i, j);
    }
    for (auto& v : up.mu) v /= sum_b;
    return up;
  }
  const double a_bar = sum_a / n_g;
  const double b_bar = sum_b / n_g;
  double denom = 0.0;
  for (std::size_t i = 0; i < n; ++i) denom += lat.zhat(i, g) * (a_bar * lat.b(i, g) - 1.0);
  if (!(denom > 1e-12 * n_g * a_bar * b_bar))
    throw DegenerateComponent(g, "location update denominator vanishes (no latent spread)");
  for (std::size_t i = 0; i < n; ++i) {
    const double z = lat.zhat(i, g);
    const double wm = z * (a_bar * lat.b(i, g) - 1.0);
    const double wa = z * (b_bar - lat.b(i, g));
    for (std::size_t j = 0; j < p; ++j) {
      up.mu[j] += wm * data(i, j);
      up.alpha[j] += wa * data(i, j);
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    up.mu[j] /= denom;
    up.alpha[j] /= denom;
  }
  return up;
}

/// M-step. Maximises the expected complete-data log-likelihood at fixed latents.
/// boundary_flags, when given, receives one flag per component for gamma
/// landing on a bound.
inline VGMixtureModel m_step(const Matrix& data, const LatentExpectations& lat,
                             const VGMixtureModel& prev, const EMConfig& cfg,
                             std::vector<bool>* boundary_flags = nullptr) {
  const std::size_t n = data.rows();
  const std::size_t p = data.cols();
  const std::size_t G = lat.zhat.cols();
  if (prev.size() != G || prev.dim() != p)
    throw DimensionMismatch("m_step: previous model does not match latents or data");
  std::vector<double> weights(G);
  std::vector<VGComponent> comps;
  comps.reserve(G);
  if (boundary_flags) boundary_flags->assign(G, false);

  for (std::size_t g = 0; g < G; ++g) {
    double n_g = 0.0, sum_a = 0.0, sum_c = 0.0;
    Vector xbar(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double z = lat.zhat(i, g);
      n_g += z;
      sum_a += z * lat.a(i, g);
      sum_c += z * lat.c(i, g);
      for (std::size_t j = 0; j < p; ++j) xbar[j] += z * data(i, j);
    }
    if (n_g < static_cast<double>(p + 1))
      throw DegenerateComponent(g, "effective size " + std::to_string(n_g) + " below p + 1");
    for (auto& v : xbar) v /= n_g;
    const double a_bar = sum_a / n_g;
    const double c_bar = sum_c / n_g;

    LocationUpdate loc = m_step_location(data, lat, g, cfg);

    Matrix sigma(p, p);
    Vector d(p);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = lat.zhat(i, g) * lat.b(i, g);
      if (w == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) d[j] = data(i, j) - loc.mu[j];
      for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = 0; k <= j; ++k) sigma(j, k) += w * d[j] * d[k];
    }
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = 0; k <= j; ++k) {
        const double dj = xbar[j] - loc.mu[j];
        const double dk = xbar[k] - loc.mu[k];
        const double v = sigma(j, k) / n_g - loc.alpha[j] * dk - dj * loc.alpha[k] +
                         a_bar * loc.alpha[j] * loc.alpha[k];
        sigma(j, k) = v;
        sigma(k, j) = v;
      }
    sigma = detail::ridge_repaired(detail::symmetrized(sigma), g);

    const GammaSolution gs = solve_gamma(a_bar, c_bar, prev.component(g).gamma(), cfg);
    if (boundary_flags) (*boundary_flags)[g] = gs.at_boundary;

    weights[g] = n_g / static_cast<double>(n);
    comps.emplace_back(gs.gamma, std::move(loc.mu), std::move(sigma), std::move(loc.alpha));
  }
  // n_g sums to n up to rounding; renormalise so the weight invariant holds exactly enough.
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  return {std::move(weights), std::move(comps)};
}

struct AitkenEstimate {
  double a;      // ratio of successive increments
  double l_inf;  // extrapolated limit
};

/// Aitken extrapolation from the last three log-likelihoods; nullopt when the
/// ratio is undefined (flat previous step) or equals one.
inline std::optional<AitkenEstimate> aitken_estimate(const LoglikTrace& trace) {
  const auto& l = trace.values;
  if (l.size() < 3) return std::nullopt;
  const double l0 = l[l.size() - 3];
  const double l1 = l[l.size() - 2];
  const double l2 = l[l.size() - 1];
  const double den = l1 - l0;
  if (den == 0.0) return std::nullopt;
  const double a = (l2 - l1) / den;
  if (a == 1.0) return std::nullopt;
  return AitkenEstimate{a, l1 + (l2 - l1) / (1.0 - a)};
}

/// Aitken-accelerated stopping rule on the last three log-likelihoods.
/// Converged iff 0 <= l_inf - l_last < eps; a negative gap means the sequence
/// is not yet in its geometric regime. A flat trace counts as converged.
inline bool aitken_converged(const LoglikTrace& trace, double eps) {
  const auto& l = trace.values;
  if (l.size() < 3) return false;
  if (l[l.size() - 2] == l[l.size() - 3]) return l.back() == l[l.size() - 2];
  const auto est = aitken_estimate(trace);
  if (!est) return false;
  const double gap = est->l_inf - l.back();
  return gap >= 0.0 && gap < eps;
}

/// Initial model from a partition of the rows. Labelled rows stay in their
/// class; the rest are dealt out at random (random_partition) or by
/// nearest-centroid refinement from k-means++ seeds (distance_based).
/// Per part: mu = mean, sigma = covariance (ridged if singular), alpha = 0,
/// gamma = 1, weight = part fraction.
inline VGMixtureModel initialize(const Matrix& data, std::size_t G,
                                 std::span<const std::optional<std::size_t>> labels,
                                 const EMConfig& cfg, Rng& rng) {
  const std::size_t n = data.rows();
  const std::size_t p = data.cols();
  if (G == 0) throw InvalidArgument("number of components must be positive");
  if (n < G * (p + 1))
    throw TooFewObservations("need at least " + std::to_string(G * (p + 1)) +
                             " observations for " + std::to_string(G) +
                             " components in dimension " + std::to_string(p) + ", got " +
                             std::to_string(n));
  detail::check_labels(labels, n, G);

  std::vector<std::size_t> part(n, 0);
  std::vector<std::size_t> free_rows;
  for (std::size_t i = 0; i < n; ++i) {
    if (const auto known = detail::label_of(labels, i))
      part[i] = *known;
    else
      free_rows.push_back(i);
  }

  auto sq_dist = [&](std::size_t i, std::span<const double> c) {
    double s = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double d = data(i, j) - c[j];
      s += d * d;
    }
    return s;
  };
  auto centroids_of = [&](const std::vector<std::size_t>& assign) {
    Matrix cent(G, p);
    std::vector<double> count(G, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      count[assign[i]] += 1.0;
      for (std::size_t j = 0; j < p; ++j) cent(assign[i], j) += data(i, j);
    }
    for (std::size_t g = 0; g < G; ++g)
      for (std::size_t j = 0; j < p; ++j) cent(g, j) = count[g] > 0 ? cent(g, j) / count[g] : 0.0;
    return std::make_pair(cent, count);
  };

  if (cfg.init == InitStrategy::random_partition || G == 1) {
    // Fisher-Yates then round-robin keeps parts balanced.
    for (std::size_t k = free_rows.size(); k > 1; --k) std::swap(free_rows[k - 1], free_rows[rng.index(k)]);
    for (std::size_t k = 0; k < free_rows.size(); ++k) part[free_rows[k]] = k % G;
  } else if (!free_rows.empty()) {
    // Seed centroids: class means of labelled rows, k-means++ for the rest.
    auto [cent, count] = centroids_of(part);
    std::vector<bool> seeded(G, false);
    if (!labels.empty())
      for (std::size_t i = 0; i < n; ++i)
        if (labels[i]) seeded[*labels[i]] = true;
    std::vector<double> best(free_rows.size(), std::numeric_limits<double>::infinity());
    auto refresh = [&](std::size_t g) {
      for (std::size_t k = 0; k < free_rows.size(); ++k)
        best[k] = std::min(best[k], sq_dist(free_rows[k], cent.row(g)));
    };
    bool any_seeded = false;
    for (std::size_t g = 0; g < G; ++g)
      if (seeded[g]) {
        refresh(g);
        any_seeded = true;
      }
    for (std::size_t g = 0; g < G; ++g) {
      if (seeded[g]) continue;
      std::size_t pick = 0;
      if (!any_seeded) {
        pick = rng.index(free_rows.size());
        any_seeded = true;
      } else {
        double total = 0.0;
        for (double b : best) total += b;
        double u = rng.uniform() * total;
        for (pick = 0; pick + 1 < best.size(); ++pick) {
          u -= best[pick];
          if (u <= 0.0) break;
        }
        if (!(total > 0.0)) pick = rng.index(free_rows.size());
      }
      const auto src = data.row(free_rows[pick]);
      std::copy(src.begin(), src.end(), cent.row(g).begin());
      seeded[g] = true;
      refresh(g);
    }
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      for (std::size_t i : free_rows) {
        std::size_t arg = 0;
        double d_best = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < G; ++g) {
          const double d = sq_dist(i, cent.row(g));
          if (d < d_best) {
            d_best = d;
            arg = g;
          }
        }
        if (arg != part[i]) {
          part[i] = arg;
          changed = true;
        }
      }
      if (!changed && iter > 0) break;
      auto next = centroids_of(part);
      for (std::size_t g = 0; g < G; ++g)
        if (next.second[g] > 0)
          for (std::size_t j = 0; j < p; ++j) cent(g, j) = next.first(g, j);
    }
  }

  auto [cent, count] = centroids_of(part);
  std::vector<double> weights(G);
  std::vector<VGComponent> comps;
  comps.reserve(G);
  for (std::size_t g = 0; g < G; ++g) {
    if (count[g] < static_cast<double>(p + 1))
      throw DegenerateComponent(g, "initial partition has fewer than p + 1 rows");
    Matrix cov(p, p);
    for (std::size_t i = 0; i < n; ++i) {
      if (part[i] != g) continue;
      for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = 0; k <= j; ++k)
          cov(j, k) += (data(i, j) - cent(g, j)) * (data(i, k) - cent(g, k));
    }
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = 0; k <= j; ++k) {
        cov(j, k) /= count[g];
        cov(k, j) = cov(j, k);
      }
    weights[g] = count[g] / static_cast<double>(n);
    const auto c = cent.row(g);
    comps.emplace_back(1.0, Vector(c.begin(), c.end()), detail::ridge_repaired(cov, g),
                       Vector(p, 0.0));
  }
  return {std::move(weights), std::move(comps)};
}

namespace detail {

struct StartOutcome {
  VGMixtureModel model;
  LatentExpectations lat;
  LoglikTrace trace;
  std::vector<bool> boundary;
  bool converged;
  bool spiked;
};

// For gamma <= p/2 the density is unbounded at mu. A component whose mean has
// run onto an observation (delta under the floor) is chasing that spike: the
// floored likelihood is finite only because of the floor, so such a fit ranks
// below any fit that stays clear of it.
inline bool on_spike(const Matrix& data, const VGMixtureModel& model, double floor) {
  const double half_p = 0.5 * static_cast<double>(model.dim());
  for (std::size_t g = 0; g < model.size(); ++g) {
    const VGComponent& comp = model.component(g);
    if (comp.gamma() > half_p) continue;
    for (std::size_t i = 0; i < data.rows(); ++i)
      if (component_forms(data.row(i), comp).delta < floor) return true;
  }
  return false;
}

inline StartOutcome run_em(const Matrix& data, VGMixtureModel model,
                           std::span<const std::optional<std::size_t>> labels,
                           const EMConfig& cfg) {
  LoglikTrace trace;
  std::vector<bool> boundary(model.size(), false);
  std::optional<std::pair<VGMixtureModel, LatentExpectations>> prev;
  std::vector<bool> prev_boundary = boundary;
  auto finish = [&](VGMixtureModel m, LatentExpectations l, std::vector<bool> bnd, bool converged) {
    const bool spiked = on_spike(data, m, cfg.delta_floor);
    return StartOutcome{std::move(m), std::move(l), std::move(trace), std::move(bnd), converged, spiked};
  };
  for (;;) {
    LatentExpectations lat = e_step(data, model, labels, cfg);
    if (!std::isfinite(lat.loglik)) throw DegenerateComponent(0, "log-likelihood is not finite");
    // Exact EM cannot decrease the likelihood; a drop means the delta floor is
    // steering the update, so the run stops at the last iterate that did not.
    if (prev && lat.loglik < trace.values.back() - 1e-8)
      return finish(std::move(prev->first), std::move(prev->second), std::move(prev_boundary), false);
    trace.values.push_back(lat.loglik);
    const bool converged = aitken_converged(trace, cfg.aitken_eps);
    if (converged || trace.values.size() > cfg.max_iter)
      return finish(std::move(model), std::move(lat), std::move(boundary), converged);
    prev_boundary = boundary;
    VGMixtureModel next = m_step(data, lat, model, cfg, &boundary);
    prev.emplace(std::move(model), std::move(lat));
    model = std::move(next);
  }
}

}  // namespace detail

/// Fits an H-component mixture. Rows with a label (0-based, < G) are treated
/// as known members of that component; clustering is the case with no labels
/// and H = G. Runs cfg.n_starts seeded initialisations and keeps the one with
/// the highest final log-likelihood. A start whose components collapse is
/// dropped; AllStartsFailed is raised if none survives.
inline FitResult fit_em(const Matrix& data, std::size_t G,
                        std::span<const std::optional<std::size_t>> labels,
                        std::optional<std::size_t> H, const EMConfig& cfg) {
  cfg.validate();
  const std::size_t n_comp = H.value_or(G);
  if (n_comp < G) throw InvalidArgument("H must be at least G");
  if (data.rows() < data.cols() + 1)
    throw TooFewObservations("need more observations than dimensions");
  detail::check_labels(labels, data.rows(), G);

  bool any_free = labels.empty();
  for (const auto& l : labels) any_free = any_free || !l.has_value();
  // Deterministic initialisations need only one start.
  const bool deterministic = !any_free || (n_comp == 1);
  const std::size_t starts = deterministic ? 1 : cfg.n_starts;

  std::optional<detail::StartOutcome> best;
  std::size_t best_start = 0;
  std::size_t failed = 0;
  std::string last_error;
  for (std::size_t s = 0; s < starts; ++s) {
    Rng rng(derive_seed(cfg.seed, s));
    try {
      VGMixtureModel init = initialize(data, n_comp, labels, cfg, rng);
      detail::StartOutcome out = detail::run_em(data, std::move(init), labels, cfg);
      // Spike-free runs outrank spiked ones; then the higher likelihood wins.
      if (!best || std::pair(!out.spiked, out.lat.loglik) > std::pair(!best->spiked, best->lat.loglik)) {
        best = std::move(out);
        best_start = s;
      }
    } catch (const TooFewObservations&) {
      throw;
    } catch (const DegenerateComponent& e) {
      ++failed;
      last_error = e.what();
    }
  }
  if (!best)
    throw AllStartsFailed("all " + std::to_string(starts) + " starts failed; last: " + last_error);

  const std::size_t n = data.rows();
  FitResult r{std::move(best->model)};
  r.loglik = best->lat.loglik;
  r.trace = std::move(best->trace);
  r.bic = bic(r.loglik, count_free_params(r.model), n);
  r.responsibilities = std::move(best->lat.zhat);
  r.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.labels[i] = detail::argmax_first(r.responsibilities.row(i));
  r.n_iter = r.trace.values.size() - 1;
  r.converged = best->converged;
  r.spiked = best->spiked;
  r.boundary_flags = std::move(best->boundary);
  r.seed_used = cfg.seed;
  r.start_index = best_start;
  r.failed_starts = failed;
  return r;
}

}  // namespace vgmix
