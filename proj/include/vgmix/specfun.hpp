// Special functions used by the variance-gamma densities and E-step:
// log K_nu(x) (modified Bessel function of the third kind), its order ratio
// and order derivative, digamma and log-gamma.
//
// K_nu is evaluated with Temme's series for x < 2 and Steed's continued
// fraction (CF2) for x >= 2 at a reduced order |mu| <= 1/2, followed by the
// forward recurrence in ratio form. The recurrence carries K_{k+1}/K_k and
// accumulates log K, so nothing over- or underflows for large x or order.

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace vgmix {

inline constexpr double euler_mascheroni = 0.57721566490153286061;

namespace detail {

inline void require_positive_finite(double x, const char* who) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw std::domain_error(std::string(who) + ": argument must be positive and finite");
}

inline void require_finite(double v, const char* who) {
  if (!std::isfinite(v))
    throw std::domain_error(std::string(who) + ": order must be finite");
}

// Taylor coefficients of 1/Gamma(z) around 0, c[k] multiplies z^k.
inline constexpr std::array<double, 27> rgamma_taylor = {
    0.0,
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
};

// Temme's auxiliary gamma quantities for |mu| <= 1/2:
//   gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu),  gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2
// taken from the even/odd parts of the 1/Gamma series so gam1 has no cancellation.
struct TemmeGammas {
  double gam1;
  double gam2;
  double gampl;  // 1/Gamma(1+mu)
  double gammi;  // 1/Gamma(1-mu)
};

inline TemmeGammas temme_gammas(double mu) {
  const double m2 = mu * mu;
  constexpr int last = static_cast<int>(rgamma_taylor.size()) - 1;
  double even = 0.0;  // sum over even k of c[k] mu^(k-2)
  for (int k = last - last % 2; k >= 2; k -= 2) even = even * m2 + rgamma_taylor[k];
  double odd = 0.0;  // sum over odd k of c[k] mu^(k-1)
  for (int k = last - (last + 1) % 2; k >= 1; k -= 2) odd = odd * m2 + rgamma_taylor[k];
  TemmeGammas g{};
  g.gam1 = -even;
  g.gam2 = odd;
  g.gampl = odd + mu * even;  // 1/Gamma(1+mu) = sum c[k] mu^(k-1)
  g.gammi = odd - mu * even;
  return g;
}

// log K_mu(x) = base + rest and K_{mu+1}(x)/K_mu(x) for |mu| <= 1/2. The
// base does not depend on the order, so differences in the order cancel it
// exactly.
struct BesselSeed {
  double base;
  double rest;
  double ratio;
};

inline BesselSeed bessel_k_seed(double mu, double x) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr int max_iter = 100000;
  const double mu2 = mu * mu;
  if (x < 2.0) {
    const double x2 = 0.5 * x;
    const double pimu = std::numbers::pi * mu;
    const double fact = std::abs(pimu) < eps ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = std::abs(e) < eps ? 1.0 : std::sinh(e) / e;
    const TemmeGammas g = temme_gammas(mu);
    double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / g.gampl;
    double q = 0.5 / (e * g.gammi);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    for (int i = 1; i <= max_iter; ++i) {
      ff = (i * ff + p + q) / (i * static_cast<double>(i) - mu2);
      c *= d / i;
      p /= i - mu;
      q /= i + mu;
      const double del = c * ff;
      sum += del;
      sum1 += c * (p - i * ff);
      if (std::abs(del) < std::abs(sum) * eps) break;
    }
    return {0.0, std::log(sum), sum1 * (2.0 / x) / sum};
  }
  // Steed's algorithm for CF2; s carries the normalisation, so the result is
  // already scaled by exp(x).
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25 - mu2;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 2; i <= max_iter; ++i) {
    a -= 2 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < eps) break;
  }
  h = a1 * h;
  return {0.5 * std::log(std::numbers::pi / (2.0 * x)) - x, -std::log(s), (mu + x + 0.5 - h) / x};
}

// log K_nu(x) and K_{nu+1}(x)/K_nu(x) for nu >= 0. When at least one
// recurrence step is taken, prev_ratio holds K_nu(x)/K_{nu-1}(x).
struct BesselUpward {
  double log_k;
  double log_rest;  // log_k less the order-free part of the seed
  double ratio;
  double prev_ratio;
  int steps;
};

inline BesselUpward bessel_k_upward(double nu, double x) {
  const int steps = static_cast<int>(nu + 0.5);
  const double mu = nu - steps;
  const BesselSeed seed = bessel_k_seed(mu, x);
  BesselUpward s{0.0, seed.rest, seed.ratio, std::numeric_limits<double>::quiet_NaN(), steps};
  const double two_over_x = 2.0 / x;
  for (int i = 1; i <= steps; ++i) {
    s.log_rest += std::log(s.ratio);
    s.prev_ratio = s.ratio;
    s.ratio = 1.0 / s.ratio + (mu + i) * two_over_x;
  }
  s.log_k = seed.base + s.log_rest;
  return s;
}

}  // namespace detail

/// log K_nu(x). Even in nu: the order's sign is dropped before evaluation.
inline double log_bessel_k(double nu, double x) {
  detail::require_finite(nu, "log_bessel_k");
  detail::require_positive_finite(x, "log_bessel_k");
  return detail::bessel_k_upward(std::abs(nu), x).log_k;
}

/// K_{nu+1}(x) / K_nu(x).
inline double bessel_k_ratio(double nu, double x) {
  detail::require_finite(nu, "bessel_k_ratio");
  detail::require_positive_finite(x, "bessel_k_ratio");
  if (nu >= 0.0) return detail::bessel_k_upward(nu, x).ratio;
  if (nu <= -1.0) {
    // K_{nu+1}/K_nu = K_{|nu|-1}/K_{|nu|}
    return 1.0 / detail::bessel_k_upward(-nu - 1.0, x).ratio;
  }
  return std::exp(detail::bessel_k_upward(nu + 1.0, x).log_k -
                  detail::bessel_k_upward(-nu, x).log_k);
}

/// d/dnu log K_nu(x), by a central difference with step 1e-5 * max(1, |nu|)
/// on the order-dependent part of log K. Odd in nu.
inline double log_bessel_k_dnu(double nu, double x) {
  detail::require_finite(nu, "log_bessel_k_dnu");
  detail::require_positive_finite(x, "log_bessel_k_dnu");
  const double anu = std::abs(nu);
  if (anu == 0.0) return 0.0;
  const double h = 1e-5 * std::max(1.0, anu);
  auto lk = [x](double v) { return detail::bessel_k_upward(std::abs(v), x).log_rest; };
  const double d = (lk(anu + h) - lk(anu - h)) / (2.0 * h);
  return nu < 0.0 ? -d : d;
}

/// dK_nu(x)/dnu.
inline double bessel_k_dnu(double nu, double x) {
  const double dlog = log_bessel_k_dnu(nu, x);
  if (dlog == 0.0) return 0.0;
  return dlog * std::exp(log_bessel_k(nu, x));
}

/// Digamma for x > 0: upward recurrence to x >= 10, then the asymptotic series.
inline double digamma(double x) {
  detail::require_positive_finite(x, "digamma");
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // B_2k / (2k) for k = 1..7
  const double tail =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 -
                                      inv2 * (1.0 / 132 -
                                              inv2 * (691.0 / 32760 - inv2 * (1.0 / 12)))))));
  return shift + std::log(x) - 0.5 * inv - tail;
}

/// log Gamma(x) for x > 0. Stirling series after shifting the argument to >= 15.
inline double log_gamma_fn(double x) {
  detail::require_positive_finite(x, "log_gamma_fn");
  double log_prod = 0.0;
  double prod = 1.0;
  while (x < 15.0) {
    prod *= x;
    if (prod < 1e-200 || prod > 1e200) {
      log_prod += std::log(prod);
      prod = 1.0;
    }
    x += 1.0;
  }
  log_prod += std::log(prod);
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv * (1.0 / 12 -
             inv2 * (1.0 / 360 -
                     inv2 * (1.0 / 1260 -
                             inv2 * (1.0 / 1680 - inv2 * (1.0 / 1188 - inv2 * (691.0 / 360360))))));
  return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) + series - log_prod;
}

}  // namespace vgmix
