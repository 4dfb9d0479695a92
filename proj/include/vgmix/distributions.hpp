// Log-densities of the generalized inverse Gaussian, gamma, Gaussian,
// generalized hyperbolic and variance-gamma laws, the VG mixture, and the
// GIG moments that drive the E-step.
//
// Everything is in log form. The fitted model is the restricted variance-gamma
// law with lambda = psi / 2 = gamma, so E[Y] = 1 for the gamma mixing variable.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "vgmix/errors.hpp"
#include "vgmix/linalg.hpp"
#include "vgmix/specfun.hpp"

namespace vgmix {

/// Squared Mahalanobis distances below this are lifted to it before a Bessel
/// evaluation; the VG density is unbounded at x = mu when gamma <= p/2.
inline constexpr double default_delta_floor = 1e-10;

inline constexpr double log_two_pi = 1.8378770664093454836;

struct GIGParams {
  double psi = 1.0;
  double chi = 1.0;
  double lambda = 0.0;

  void validate() const {
    if (!(psi > 0.0) || !(chi > 0.0) || !std::isfinite(psi) || !std::isfinite(chi) ||
        !std::isfinite(lambda))
      throw InvalidArgument("GIG parameters require psi > 0, chi > 0 and finite lambda");
  }
};

struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;

  void validate() const {
    if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate))
      throw InvalidArgument("gamma parameters require shape > 0 and rate > 0");
  }
};

struct GIGMoments {
  double e_y;
  double e_inv_y;
  double e_log_y;
};

/// Generalized hyperbolic parameters. |sigma| must be 1 (identifiability of
/// this parameterization); only evaluated, never fitted.
struct GHParams {
  double lambda = 1.0;
  double chi = 1.0;
  double psi = 1.0;
  Vector mu;
  Matrix sigma;
  Vector alpha;

  CholFactor validate() const {
    if (!(chi > 0.0) || !(psi > 0.0)) throw InvalidArgument("GH parameters require chi, psi > 0");
    if (!sigma.is_symmetric() || sigma.rows() != mu.size() || alpha.size() != mu.size())
      throw DimensionMismatch("GH parameters: mu, sigma and alpha disagree in dimension");
    CholFactor chol = cholesky(sigma);
    if (std::abs(std::exp(chol.log_det()) - 1.0) > 1e-8)
      throw InvalidArgument("GH parameters require |sigma| = 1");
    return chol;
  }
};

/// One restricted variance-gamma component (gamma, mu, sigma, alpha).
/// Construction validates and caches the Cholesky factor of sigma along with
/// sigma^{-1} alpha and alpha' sigma^{-1} alpha.
class VGComponent {
 public:
  VGComponent(double gamma, Vector mu, Matrix sigma, Vector alpha)
      : gamma_(gamma), mu_(std::move(mu)), sigma_(std::move(sigma)), alpha_(std::move(alpha)) {
    if (!(gamma_ > 0.0) || !std::isfinite(gamma_))
      throw InvalidArgument("VG component requires gamma > 0");
    const std::size_t p = mu_.size();
    if (p == 0) throw DimensionMismatch("VG component has dimension 0");
    if (sigma_.rows() != p || sigma_.cols() != p || alpha_.size() != p)
      throw DimensionMismatch("VG component: mu, sigma and alpha disagree in dimension");
    if (!sigma_.is_symmetric()) throw InvalidArgument("VG component: sigma is not symmetric");
    chol_ = cholesky(sigma_);
    sigma_inv_alpha_ = chol_.solve(alpha_);
    alpha_quad_ = 0.0;
    for (std::size_t i = 0; i < p; ++i) alpha_quad_ += alpha_[i] * sigma_inv_alpha_[i];
    log_gamma_gamma_ = log_gamma_fn(gamma_);
  }

  double gamma() const noexcept { return gamma_; }
  const Vector& mu() const noexcept { return mu_; }
  const Matrix& sigma() const noexcept { return sigma_; }
  const Vector& alpha() const noexcept { return alpha_; }
  std::size_t dim() const noexcept { return mu_.size(); }

  const CholFactor& chol() const noexcept { return chol_; }
  const Vector& sigma_inv_alpha() const noexcept { return sigma_inv_alpha_; }
  double alpha_quad() const noexcept { return alpha_quad_; }
  double log_gamma_gamma() const noexcept { return log_gamma_gamma_; }

 private:
  double gamma_;
  Vector mu_;
  Matrix sigma_;
  Vector alpha_;
  CholFactor chol_;
  Vector sigma_inv_alpha_;
  double alpha_quad_ = 0.0;
  double log_gamma_gamma_ = 0.0;
};

/// Mixing weights plus components sharing one dimension.
class VGMixtureModel {
 public:
  VGMixtureModel(std::vector<double> weights, std::vector<VGComponent> components)
      : weights_(std::move(weights)), components_(std::move(components)) {
    if (components_.empty()) throw InvalidArgument("mixture needs at least one component");
    if (weights_.size() != components_.size())
      throw DimensionMismatch("mixture: weight count differs from component count");
    double sum = 0.0;
    for (double w : weights_) {
      if (!(w > 0.0) || !std::isfinite(w))
        throw InvalidArgument("mixture weights must be positive");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidArgument("mixture weights must sum to 1");
    for (const auto& c : components_)
      if (c.dim() != components_.front().dim())
        throw DimensionMismatch("mixture components differ in dimension");
    log_weights_.reserve(weights_.size());
    for (double w : weights_) log_weights_.push_back(std::log(w));
  }

  std::size_t size() const noexcept { return components_.size(); }
  std::size_t dim() const noexcept { return components_.front().dim(); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<double>& log_weights() const noexcept { return log_weights_; }
  const std::vector<VGComponent>& components() const noexcept { return components_; }
  const VGComponent& component(std::size_t g) const { return components_.at(g); }

 private:
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<VGComponent> components_;
};

namespace detail {

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// log K_nu(w) together with K_{nu+1}/K_nu and K_{nu-1}/K_nu.
struct BesselTriple {
  double log_k;
  double up;
  double down;
};

inline BesselTriple bessel_k_triple(double nu, double w) {
  const double a = std::abs(nu);
  const BesselUpward s = bessel_k_upward(a, w);
  BesselTriple t{s.log_k, s.ratio, 0.0};
  if (s.steps > 0)
    t.down = 1.0 / s.prev_ratio;
  else  // K_{a-1} = K_{1-a}
    t.down = std::exp(bessel_k_upward(1.0 - a, w).log_k - s.log_k);
  if (nu < 0.0) std::swap(t.up, t.down);
  return t;
}

// delta = (x-mu)' S^{-1} (x-mu) and cross = (x-mu)' S^{-1} alpha for one component.
struct ComponentForms {
  double delta;
  double cross;
};

inline ComponentForms component_forms(std::span<const double> x, const VGComponent& comp) {
  const std::size_t p = comp.dim();
  if (x.size() != p)
    throw DimensionMismatch("observation of length " + std::to_string(x.size()) +
                            " against component of dimension " + std::to_string(p));
  std::array<double, 32> stack{};
  Vector heap;
  std::span<double> d;
  if (p <= stack.size()) {
    d = std::span<double>(stack.data(), p);
  } else {
    heap.resize(p);
    d = heap;
  }
  double cross = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    d[i] = x[i] - comp.mu()[i];
    cross += d[i] * comp.sigma_inv_alpha()[i];
  }
  comp.chol().solve_lower_inplace(d);
  double delta = 0.0;
  for (double v : d) delta += v * v;
  return {delta, cross};
}

}  // namespace detail

namespace detail {

inline GIGMoments gig_moments(const GIGParams& params, double w, const BesselTriple& t) {
  const double scale = std::sqrt(params.chi / params.psi);
  return {scale * t.up, t.down / scale,
          0.5 * std::log(params.chi / params.psi) + log_bessel_k_dnu(params.lambda, w)};
}

}  // namespace detail

inline double gig_log_density(double y, const GIGParams& params) {
  detail::require_positive_finite(y, "gig_log_density");
  params.validate();
  const double lam = params.lambda;
  return 0.5 * lam * (std::log(params.psi) - std::log(params.chi)) + (lam - 1.0) * std::log(y) -
         std::log(2.0) - log_bessel_k(lam, std::sqrt(params.psi * params.chi)) -
         0.5 * (params.psi * y + params.chi / y);
}

/// E[Y], E[1/Y] and E[log Y] under GIG(psi, chi, lambda). E[1/Y] uses the
/// equivalent form sqrt(psi/chi) K_{lambda-1}/K_lambda, which avoids the
/// cancellation in sqrt(psi/chi) K_{lambda+1}/K_lambda - 2 lambda / chi.
inline GIGMoments gig_expectations(const GIGParams& params) {
  params.validate();
  const double w = std::sqrt(params.psi * params.chi);
  return detail::gig_moments(params, w, detail::bessel_k_triple(params.lambda, w));
}

inline double gamma_log_density(double y, const GammaParams& params) {
  detail::require_positive_finite(y, "gamma_log_density");
  params.validate();
  return params.shape * std::log(params.rate) - log_gamma_fn(params.shape) +
         (params.shape - 1.0) * std::log(y) - params.rate * y;
}

inline double mvn_log_density(std::span<const double> x, std::span<const double> mu,
                              const CholFactor& chol) {
  const double p = static_cast<double>(chol.dim());
  return -0.5 * (p * log_two_pi + chol.log_det() + mahalanobis(x, mu, chol));
}

inline double gh_log_density(std::span<const double> x, const GHParams& params) {
  const CholFactor chol = params.validate();
  if (x.size() != params.mu.size()) throw DimensionMismatch("gh_log_density: dimension mismatch");
  const double p = static_cast<double>(x.size());
  const double delta = mahalanobis(x, params.mu, chol);
  const double q = quad_form(params.alpha, chol);
  const double cross = cross_form(x, params.mu, params.alpha, chol);
  const double lam_p = params.lambda - 0.5 * p;
  const double a = params.psi + q;
  const double b = params.chi + delta;
  return 0.5 * lam_p * (std::log(b) - std::log(a)) +
         0.5 * params.lambda * (std::log(params.psi) - std::log(params.chi)) +
         log_bessel_k(lam_p, std::sqrt(a * b)) - 0.5 * p * log_two_pi - 0.5 * chol.log_det() -
         log_bessel_k(params.lambda, std::sqrt(params.chi * params.psi)) + cross;
}

/// Variance-gamma density without the lambda = psi/2 restriction.
inline double vg_log_density_unrestricted(std::span<const double> x, double lambda, double psi,
                                          std::span<const double> mu, const CholFactor& chol,
                                          std::span<const double> alpha,
                                          double delta_floor = default_delta_floor) {
  if (!(lambda > 0.0) || !(psi > 0.0))
    throw InvalidArgument("unrestricted VG density requires lambda > 0 and psi > 0");
  if (x.size() != mu.size() || alpha.size() != mu.size())
    throw DimensionMismatch("vg_log_density_unrestricted: dimension mismatch");
  const double p = static_cast<double>(x.size());
  const double delta = std::max(mahalanobis(x, mu, chol), delta_floor);
  const double a = psi + quad_form(alpha, chol);
  const double cross = cross_form(x, mu, alpha, chol);
  const double lam_p = lambda - 0.5 * p;
  return 0.5 * lam_p * (std::log(delta) - std::log(a)) + (1.0 - lambda) * std::log(2.0) +
         lambda * std::log(psi) + log_bessel_k(lam_p, std::sqrt(a * delta)) -
         log_gamma_fn(lambda) - 0.5 * p * log_two_pi - 0.5 * chol.log_det() + cross;
}

namespace detail {

// Restricted VG log-density from precomputed forms.
inline double vg_log_density_from_forms(const ComponentForms& f, const VGComponent& comp,
                                        double delta_floor, double log_k) {
  const double p = static_cast<double>(comp.dim());
  const double g = comp.gamma();
  const double delta = std::max(f.delta, delta_floor);
  const double a = 2.0 * g + comp.alpha_quad();
  return 0.5 * (g - 0.5 * p) * (std::log(delta) - std::log(a)) + std::log(2.0) +
         g * std::log(g) + log_k - comp.log_gamma_gamma() - 0.5 * p * log_two_pi -
         0.5 * comp.chol().log_det() + f.cross;
}

}  // namespace detail

/// Restricted variance-gamma density (lambda = psi/2 = gamma).
inline double vg_log_density(std::span<const double> x, const VGComponent& comp,
                             double delta_floor = default_delta_floor) {
  const auto f = detail::component_forms(x, comp);
  const double delta = std::max(f.delta, delta_floor);
  const double a = 2.0 * comp.gamma() + comp.alpha_quad();
  const double log_k =
      log_bessel_k(comp.gamma() - 0.5 * static_cast<double>(comp.dim()), std::sqrt(a * delta));
  return detail::vg_log_density_from_forms(f, comp, delta_floor, log_k);
}

namespace detail {

struct ComponentEval {
  double log_density;
  GIGMoments moments;
};

// log v*(x | comp) and the posterior GIG moments from one Bessel evaluation.
// The density matches vg_log_density bit for bit.
inline ComponentEval evaluate_component(std::span<const double> x, const VGComponent& comp,
                                        double delta_floor) {
  const auto f = component_forms(x, comp);
  const GIGParams post{2.0 * comp.gamma() + comp.alpha_quad(), std::max(f.delta, delta_floor),
                       comp.gamma() - 0.5 * static_cast<double>(comp.dim())};
  const double w = std::sqrt(post.psi * post.chi);
  const BesselTriple t = bessel_k_triple(post.lambda, w);
  return {vg_log_density_from_forms(f, comp, delta_floor, t.log_k), gig_moments(post, w, t)};
}

}  // namespace detail

/// Y | X = x ~ GIG(2 gamma + alpha' S^{-1} alpha, delta(x, mu | S), gamma - p/2).
inline GIGParams posterior_gig(std::span<const double> x, const VGComponent& comp,
                               double delta_floor = default_delta_floor) {
  const auto f = detail::component_forms(x, comp);
  return {2.0 * comp.gamma() + comp.alpha_quad(), std::max(f.delta, delta_floor),
          comp.gamma() - 0.5 * static_cast<double>(comp.dim())};
}

inline double mixture_log_density(std::span<const double> x, const VGMixtureModel& model,
                                  double delta_floor = default_delta_floor) {
  std::vector<double> terms(model.size());
  for (std::size_t g = 0; g < model.size(); ++g)
    terms[g] = model.log_weights()[g] + vg_log_density(x, model.component(g), delta_floor);
  return detail::log_sum_exp(terms);
}

}  // namespace vgmix
