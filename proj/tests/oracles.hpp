// Reference computations for the tests, kept independent of the library's
// numerics: adaptive Gauss-Kronrod quadrature, explicit matrix inverses, and a
// direct transcription of the expected complete-data log-likelihood.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "vgmix/vgmix.hpp"

namespace oracle {

using vgmix::Matrix;
using vgmix::Vector;

/// Adaptive 31-point Gauss-Kronrod on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-13, unsigned depth = 12) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, depth, tol);
}

/// Locates the mode of a log-integrand on [lo, hi] by a dense scan followed by
/// golden-section refinement; returns the mode and the interval where the
/// log-integrand stays within `drop` of its maximum.
struct Support {
  double mode, peak, left, right;
};

inline Support find_support(const std::function<double(double)>& logf, double lo, double hi,
                            double drop = 60.0, int grid = 4000) {
  const double step = (hi - lo) / grid;
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  std::vector<double> v(grid + 1);
  for (int k = 0; k <= grid; ++k) {
    v[k] = logf(lo + k * step);
    if (v[k] > best_v) {
      best_v = v[k];
      best = k;
    }
  }
  double a = lo + std::max(best - 1, 0) * step, b = lo + std::min(best + 1, grid) * step;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 100; ++it) {
    const double c = b - phi * (b - a), d = a + phi * (b - a);
    if (logf(c) > logf(d))
      b = d;
    else
      a = c;
  }
  const double mode = 0.5 * (a + b);
  const double peak = std::max(logf(mode), best_v);
  int l = best, r = best;
  while (l > 0 && v[l] > peak - drop) --l;
  while (r < grid && v[r] > peak - drop) ++r;
  return {mode, peak, lo + l * step, lo + r * step};
}

/// log of the integral of exp(logf) over the real line segment [lo, hi],
/// integrated on the region where the integrand is non-negligible.
inline double log_integral(const std::function<double(double)>& logf, double lo, double hi,
                           std::vector<double> breaks = {}) {
  const Support s = find_support(logf, lo, hi);
  std::vector<double> pts{s.left};
  std::sort(breaks.begin(), breaks.end());
  for (double b : breaks)
    if (b > s.left && b < s.right) pts.push_back(b);
  if (s.mode > s.left && s.mode < s.right) pts.push_back(s.mode);
  pts.push_back(s.right);
  std::sort(pts.begin(), pts.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k)
    total += integrate([&](double t) { return std::exp(logf(t) - s.peak); }, pts[k], pts[k + 1]);
  return s.peak + std::log(total);
}

/// log K_nu(x) from the integral representation int_0^inf exp(-x cosh t) cosh(nu t) dt.
inline double log_bessel_k(double nu, double x) {
  const double a = std::abs(nu);
  auto logf = [a, x](double t) {
    // log cosh(a t) without overflow; the constant -x is pulled out.
    const double lc = a * t + std::log1p(std::exp(-2.0 * a * t)) - std::numbers::ln2;
    return -x * (std::cosh(t) - 1.0) + lc;
  };
  const double t_star = std::asinh(a / x);  // near the maximum of the integrand
  const double peak = std::max(logf(t_star), logf(0.0));
  double right = t_star + 1.0;
  while (logf(right) > peak - 60.0) right = t_star + 2.0 * (right - t_star);
  auto f = [&](double t) { return std::exp(logf(t) - peak); };
  double total = 0.0;
  const int pieces = 16;
  for (int k = 0; k < pieces; ++k)
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, right * k / pieces, right * (k + 1) / pieces, 8, 1e-14);
  return -x + peak + std::log(total);
}

/// Unnormalised GIG log-kernel (lambda - 1) log y - (psi y + chi / y) / 2.
inline double gig_log_kernel(double y, double psi, double chi, double lambda) {
  return (lambda - 1.0) * std::log(y) - 0.5 * (psi * y + chi / y);
}

/// E[f(Y)] under GIG(psi, chi, lambda) by quadrature in s = log y, with no
/// Bessel functions involved: ratio of two integrals of the kernel.
inline double gig_moment(const std::function<double(double)>& f, double psi, double chi, double lambda) {
  auto logk = [&](double s) { return gig_log_kernel(std::exp(s), psi, chi, lambda) + s; };
  const Support sup = find_support(logk, -80.0, 80.0, 70.0, 16000);
  auto w = [&](double s) { return std::exp(logk(s) - sup.peak); };
  double num = 0.0, den = 0.0;
  const double pts[3] = {sup.left, sup.mode, sup.right};
  for (int k = 0; k < 2; ++k) {
    num += integrate([&](double s) { return f(std::exp(s)) * w(s); }, pts[k], pts[k + 1], 1e-14);
    den += integrate(w, pts[k], pts[k + 1], 1e-14);
  }
  return num / den;
}

/// Integral over (0, inf) of exp(logf(y)) via s = log y.
inline double integrate_positive(const std::function<double(double)>& logf) {
  auto g = [&](double s) { return logf(std::exp(s)) + s; };
  return std::exp(log_integral(g, -60.0, 60.0));
}

// Integral of exp(logf) over a line, with a break at the centre.
inline double integrate_line(const std::function<double(double)>& logf, double center) {
  return std::exp(log_integral(logf, center - 120.0, center + 120.0, {center}));
}

// Integral of exp(logf) over the plane, nested adaptive quadrature with a
// break through the centre along both axes.
inline double integrate_plane(const std::function<double(double, double)>& logf, std::span<const double> c,
                              double half_width) {
  auto inner = [&](double x1) {
    auto f = [&](double x2) { return std::exp(logf(x1, x2)); };
    return integrate(f, c[1] - half_width, c[1], 1e-11, 10) + integrate(f, c[1], c[1] + half_width, 1e-11, 10);
  };
  return integrate(inner, c[0] - half_width, c[0], 1e-10, 10) + integrate(inner, c[0], c[0] + half_width, 1e-10, 10);
}

/// Gauss-Jordan inverse with partial pivoting.
inline Matrix inverse(const Matrix& m) {
  const std::size_t p = m.rows();
  Matrix a = m, inv = Matrix::identity(p);
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    for (std::size_t k = 0; k < p; ++k) {
      std::swap(a(c, k), a(piv, k));
      std::swap(inv(c, k), inv(piv, k));
    }
    const double d = a(c, c);
    for (std::size_t k = 0; k < p; ++k) {
      a(c, k) /= d;
      inv(c, k) /= d;
    }
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      for (std::size_t k = 0; k < p; ++k) {
        a(r, k) -= f * a(c, k);
        inv(r, k) -= f * inv(c, k);
      }
    }
  }
  return inv;
}

/// log |m| by Gaussian elimination (m symmetric positive definite).
inline double log_det(const Matrix& m) {
  const std::size_t p = m.rows();
  Matrix a = m;
  double ld = 0.0;
  for (std::size_t c = 0; c < p; ++c) {
    ld += std::log(a(c, c));
    for (std::size_t r = c + 1; r < p; ++r) {
      const double f = a(r, c) / a(c, c);
      for (std::size_t k = c; k < p; ++k) a(r, k) -= f * a(c, k);
    }
  }
  return ld;
}

inline double bilinear(std::span<const double> u, const Matrix& m, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) s += u[i] * m(i, j) * v[j];
  return s;
}

inline Vector minus(std::span<const double> a, std::span<const double> b) {
  Vector d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

/// Parameters of one component in raw form, for perturbation tests.
struct RawComponent {
  double gamma;
  Vector mu;
  Matrix sigma;
  Vector alpha;
};

/// Expected complete-data log-likelihood of the model
///   X | Y=y ~ N(mu + y alpha, y Sigma),  Y ~ gamma(gamma, rate gamma)
/// given latents E[Y]=a, E[1/Y]=b, E[log Y]=c and weights zhat.
inline double expected_complete_loglik(const Matrix& data, const vgmix::LatentExpectations& lat,
                                       const std::vector<double>& weights,
                                       const std::vector<RawComponent>& comps) {
  const std::size_t n = data.rows();
  const std::size_t p = data.cols();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double q = 0.0;
  for (std::size_t g = 0; g < comps.size(); ++g) {
    const RawComponent& c = comps[g];
    const Matrix inv = inverse(c.sigma);
    const double ld = log_det(c.sigma);
    const double aqa = bilinear(c.alpha, inv, c.alpha);
    const double lg = boost::math::lgamma(c.gamma);
    for (std::size_t i = 0; i < n; ++i) {
      const double z = lat.zhat(i, g);
      if (z == 0.0) continue;
      const double a = lat.a(i, g), b = lat.b(i, g), cc = lat.c(i, g);
      const Vector d = minus(data.row(i), c.mu);
      const double gauss = -0.5 * p * log2pi - 0.5 * p * cc - 0.5 * ld - 0.5 * b * bilinear(d, inv, d) +
                           bilinear(c.alpha, inv, d) - 0.5 * a * aqa;
      const double gam = c.gamma * std::log(c.gamma) - lg + (c.gamma - 1.0) * cc - c.gamma * a;
      q += z * (std::log(weights[g]) + gauss + gam);
    }
  }
  return q;
}

inline std::vector<RawComponent> raw(const vgmix::VGMixtureModel& m) {
  std::vector<RawComponent> out;
  for (const auto& c : m.components()) out.push_back({c.gamma(), c.mu(), c.sigma(), c.alpha()});
  return out;
}

/// Restricted variance-gamma log-density written out directly from the
/// normal variance-mean mixture, by one-dimensional quadrature over y.
inline double vg_log_density_by_mixing(std::span<const double> x, const RawComponent& c) {
  const std::size_t p = x.size();
  const Matrix inv = inverse(c.sigma);
  const double ld = log_det(c.sigma);
  const Vector d = minus(x, c.mu);
  const double dd = bilinear(d, inv, d), ad = bilinear(c.alpha, inv, d), aa = bilinear(c.alpha, inv, c.alpha);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  auto logf = [&](double y) {
    const double gauss = -0.5 * p * (log2pi + std::log(y)) - 0.5 * ld - 0.5 * dd / y + ad - 0.5 * y * aa;
    const double gam = c.gamma * std::log(c.gamma) - boost::math::lgamma(c.gamma) +
                       (c.gamma - 1.0) * std::log(y) - c.gamma * y;
    return gauss + gam;
  };
  auto g = [&](double s) { return logf(std::exp(s)) + s; };
  return log_integral(g, -80.0, 40.0);
}

/// B B' + p I with B standard normal: a well-conditioned random SPD matrix.
template <class Gen>
Matrix random_spd(std::size_t p, Gen& gen, double ridge = -1.0) {
  std::normal_distribution<double> nd;
  Matrix b(p, p), a(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) b(i, j) = nd(gen);
  const double r = ridge < 0.0 ? static_cast<double>(p) : ridge;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double s = i == j ? r : 0.0;
      for (std::size_t k = 0; k < p; ++k) s += b(i, k) * b(j, k);
      a(i, j) = s;
    }
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
  return a;
}

template <class Gen>
Vector random_vector(std::size_t p, Gen& gen, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(p);
  for (auto& x : v) x = nd(gen);
  return v;
}

}  // namespace oracle
