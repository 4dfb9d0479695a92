// Clustering, semi-supervised classification and discriminant analysis on top
// of the EM engine, with BIC selection of the number of components.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vgmix/criteria.hpp"
#include "vgmix/distributions.hpp"
#include "vgmix/em.hpp"
#include "vgmix/errors.hpp"

namespace vgmix {

/// Outcome of fitting one value of G during model selection.
struct CandidateFit {
  std::size_t G = 0;
  std::optional<FitResult> fit;
  std::string error;  // set when fit is empty
};

struct ModelSelection {
  std::vector<CandidateFit> candidates;
  std::size_t best_index = 0;

  const FitResult& best() const { return *candidates.at(best_index).fit; }
  std::size_t best_G() const { return candidates.at(best_index).G; }
};

/// Index of the largest BIC among fitted candidates; ties go to the smaller G.
/// Fits resting on a likelihood spike are considered only when every fit does.
inline std::size_t select_by_bic(const std::vector<CandidateFit>& candidates) {
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (!candidates[k].fit) continue;
    const auto key = [&](std::size_t j) { return std::pair(!candidates[j].fit->spiked, candidates[j].fit->bic); };
    if (!best || key(k) > key(*best)) best = k;
  }
  if (!best) throw AllStartsFailed("no candidate number of components could be fitted");
  return *best;
}

/// Model-based clustering over G in [g_min, g_max].
inline ModelSelection fit_cluster(const Matrix& data, std::size_t g_min, std::size_t g_max,
                                  const EMConfig& cfg) {
  if (g_min == 0 || g_min > g_max) throw InvalidArgument("need 1 <= g_min <= g_max");
  const std::size_t n = data.rows();
  const std::size_t p = data.cols();
  if (n < p + 1)
    throw TooFewObservations("need at least p + 1 = " + std::to_string(p + 1) +
                             " observations, got " + std::to_string(n));
  ModelSelection sel;
  for (std::size_t G = g_min; G <= g_max; ++G) {
    CandidateFit cand{G, std::nullopt, {}};
    try {
      cand.fit = fit_em(data, G, {}, std::nullopt, cfg);
    } catch (const AllStartsFailed& e) {
      cand.error = e.what();
    } catch (const TooFewObservations& e) {
      cand.error = e.what();
    }
    sel.candidates.push_back(std::move(cand));
  }
  sel.best_index = select_by_bic(sel.candidates);
  return sel;
}

/// Model-based classification: rows with a label (0-based, < G) are known
/// members, the rest are classified over H >= G components. Labels may sit on
/// any rows. With no labels and H = G this is clustering at fixed G.
inline FitResult fit_classify(const Matrix& data, std::span<const std::optional<std::size_t>> labels,
                              std::size_t G, std::size_t H, const EMConfig& cfg) {
  if (G == 0) throw InvalidArgument("G must be positive");
  if (H < G) throw InvalidArgument("H must be at least G");
  return fit_em(data, G, labels, H, cfg);
}

struct DiscriminantFit {
  VGMixtureModel model;
  double loglik = 0.0;            // sum over classes of n_g log pi_g + class log-likelihood
  std::vector<FitResult> classes;  // one single-component fit per class
};

/// Discriminant analysis: one VG component per class fitted to that class's
/// rows only; pi_g is the class fraction. Labels are 0-based.
inline DiscriminantFit fit_discriminant(const Matrix& train, std::span<const std::size_t> labels,
                                        const EMConfig& cfg) {
  const std::size_t n = train.rows();
  const std::size_t p = train.cols();
  if (labels.size() != n) throw DimensionMismatch("one label per training row is required");
  if (n == 0) throw TooFewObservations("no training rows");
  std::size_t G = 0;
  for (std::size_t l : labels) G = std::max(G, l + 1);
  std::vector<std::vector<std::size_t>> members(G);
  for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);

  std::vector<double> weights(G);
  std::vector<VGComponent> comps;
  std::vector<FitResult> fits;
  double loglik = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t n_g = members[g].size();
    if (n_g < p + 1)
      throw TooFewObservations("class " + std::to_string(g + 1) + " has " + std::to_string(n_g) +
                               " rows; needs at least " + std::to_string(p + 1));
    Matrix sub(n_g, p);
    for (std::size_t k = 0; k < n_g; ++k) {
      const auto src = train.row(members[g][k]);
      std::copy(src.begin(), src.end(), sub.row(k).begin());
    }
    FitResult f = fit_em(sub, 1, {}, std::nullopt, cfg);
    weights[g] = static_cast<double>(n_g) / static_cast<double>(n);
    loglik += static_cast<double>(n_g) * std::log(weights[g]) + f.loglik;
    comps.push_back(f.model.component(0));
    fits.push_back(std::move(f));
  }
  return {VGMixtureModel(std::move(weights), std::move(comps)), loglik, std::move(fits)};
}

struct Prediction {
  Matrix responsibilities;          // n x G
  std::vector<std::size_t> labels;  // MAP, lowest index on ties
};

inline Prediction predict(const VGMixtureModel& model, const Matrix& data,
                          double delta_floor = default_delta_floor) {
  const std::size_t n = data.rows();
  const std::size_t G = model.size();
  if (n > 0 && data.cols() != model.dim())
    throw DimensionMismatch("data has " + std::to_string(data.cols()) +
                            " columns, model dimension is " + std::to_string(model.dim()));
  Prediction out{Matrix(n, G), std::vector<std::size_t>(n)};
  std::vector<double> terms(G);
  for (std::size_t i = 0; i < n; ++i) {
    detail::mixture_log_terms(data.row(i), model, delta_floor, terms);
    detail::normalize_log_terms(terms, out.responsibilities.row(i));
    out.labels[i] = detail::argmax_first(out.responsibilities.row(i));
  }
  return out;
}

}  // namespace vgmix
