// Seeded samplers: gamma, Gaussian, variance-gamma components and mixtures.

#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "vgmix/distributions.hpp"
#include "vgmix/errors.hpp"
#include "vgmix/linalg.hpp"

namespace vgmix {

/// splitmix64 finaliser; mixes a seed with a stream id into an independent seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// 64-bit Mersenne Twister with the uniform and normal transforms written out,
/// so a seed reproduces the same stream regardless of the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on (0, 1).
  double uniform() {
    for (;;) {
      const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  /// Standard normal by the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Marsaglia-Tsang squeeze/rejection; shape < 1 is boosted by U^{1/shape}.
inline double sample_gamma(double shape, double rate, Rng& rng) {
  GammaParams{shape, rate}.validate();
  double boost = 1.0;
  if (shape < 1.0) {
    boost = std::pow(rng.uniform(), 1.0 / shape);
    shape += 1.0;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double z, v;
    do {
      z = rng.normal();
      v = 1.0 + c * z;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double z2 = z * z;
    if (u < 1.0 - 0.0331 * z2 * z2 || std::log(u) < 0.5 * z2 + d * (1.0 - v + std::log(v))) {
      // boost can underflow to 0 for tiny shapes
      return std::max(boost * d * v / rate, std::numeric_limits<double>::min());
    }
  }
}

/// mu + L z with z standard normal.
inline Vector sample_mvn(std::span<const double> mu, const CholFactor& chol, Rng& rng) {
  chol.check_dim(mu.size());
  const std::size_t p = mu.size();
  Vector z(p);
  for (auto& v : z) v = rng.normal();
  Vector x(mu.begin(), mu.end());
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k <= i; ++k) x[i] += chol.lower()(i, k) * z[k];
  return x;
}

struct VGDraw {
  Vector x;
  double y;
};

/// y ~ gamma(gamma, gamma), x = mu + y alpha + sqrt(y) u with u ~ N(0, sigma).
inline VGDraw sample_vg(const VGComponent& comp, Rng& rng) {
  const double y = sample_gamma(comp.gamma(), comp.gamma(), rng);
  const std::size_t p = comp.dim();
  const Vector zero(p, 0.0);
  Vector u = sample_mvn(zero, comp.chol(), rng);
  const double sy = std::sqrt(y);
  for (std::size_t i = 0; i < p; ++i) u[i] = comp.mu()[i] + y * comp.alpha()[i] + sy * u[i];
  return {std::move(u), y};
}

struct SimulatedData {
  Matrix data;
  std::vector<std::size_t> labels;  // 0-based component index
};

inline SimulatedData sample_mixture(const VGMixtureModel& model, std::size_t n, Rng& rng) {
  SimulatedData out{Matrix(n, model.dim()), std::vector<std::size_t>(n)};
  const auto& w = model.weights();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t g = 0;
    double acc = w[0];
    while (u > acc && g + 1 < w.size()) acc += w[++g];
    out.labels[i] = g;
    const VGDraw draw = sample_vg(model.component(g), rng);
    std::copy(draw.x.begin(), draw.x.end(), out.data.row(i).begin());
  }
  return out;
}

}  // namespace vgmix
