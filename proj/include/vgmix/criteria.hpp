#pragma once

#include <cmath>
#include <cstddef>

#include "vgmix/distributions.hpp"

namespace vgmix {

/// Free parameters of a G-component restricted VG mixture in p dimensions:
/// G-1 weights, then per component mu (p), alpha (p), sigma (p(p+1)/2) and gamma.
inline std::size_t count_free_params(std::size_t G, std::size_t p) {
  return (G - 1) + G * (2 * p + p * (p + 1) / 2 + 1);
}

inline std::size_t count_free_params(const VGMixtureModel& model) {
  return count_free_params(model.size(), model.dim());
}

/// BIC = 2 loglik - rho log n (larger is better).
inline double bic(double loglik, std::size_t rho, std::size_t n) {
  return 2.0 * loglik - static_cast<double>(rho) * std::log(static_cast<double>(n));
}

}  // namespace vgmix
