// JSON model document:
//
//   {
//     "format_version": 1,
//     "dimension": p,
//     "weights": [pi_1, ..., pi_G],
//     "components": [
//       {"gamma": g, "mu": [p], "sigma": [[p] x p], "alpha": [p]}, ...
//     ]
//   }
//
// Doubles are written in shortest round-trip form, so load(save(m)) == m bit for bit.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "vgmix/distributions.hpp"
#include "vgmix/errors.hpp"

namespace vgmix {

inline constexpr int model_format_version = 1;

inline std::string save_model(const VGMixtureModel& model) {
  nlohmann::ordered_json doc;
  doc["format_version"] = model_format_version;
  doc["dimension"] = model.dim();
  doc["weights"] = model.weights();
  auto comps = nlohmann::ordered_json::array();
  for (const auto& c : model.components()) {
    nlohmann::ordered_json jc;
    jc["gamma"] = c.gamma();
    jc["mu"] = c.mu();
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < c.dim(); ++i) {
      const auto r = c.sigma().row(i);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    jc["sigma"] = std::move(rows);
    jc["alpha"] = c.alpha();
    comps.push_back(std::move(jc));
  }
  doc["components"] = std::move(comps);
  return doc.dump(2) + "\n";
}

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& obj, const std::string& key,
                                           const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

inline double require_number(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(path, "expected a finite number");
  return d;
}

inline Vector require_vector(const nlohmann::json& v, std::size_t len, const std::string& path) {
  if (!v.is_array()) throw SchemaError(path, "expected an array");
  if (v.size() != len)
    throw SchemaError(path, "expected " + std::to_string(len) + " entries, found " +
                                std::to_string(v.size()));
  Vector out(len);
  for (std::size_t i = 0; i < len; ++i)
    out[i] = require_number(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

}  // namespace detail

/// Parses and validates a model document. Throws SchemaError naming the field.
inline VGMixtureModel load_model(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("$", std::string("not valid JSON: ") + e.what());
  }
  using detail::require_field;
  const auto& version = require_field(doc, "format_version", "");
  if (!version.is_number_integer() || version.get<int>() != model_format_version)
    throw SchemaError("format_version", "unsupported version (expected 1)");
  const auto& dim_field = require_field(doc, "dimension", "");
  if (!dim_field.is_number_integer() || dim_field.get<long long>() < 1)
    throw SchemaError("dimension", "expected a positive integer");
  const auto p = static_cast<std::size_t>(dim_field.get<long long>());

  const auto& w_field = require_field(doc, "weights", "");
  const auto& c_field = require_field(doc, "components", "");
  if (!w_field.is_array() || w_field.empty()) throw SchemaError("weights", "expected a non-empty array");
  if (!c_field.is_array()) throw SchemaError("components", "expected an array");
  const std::size_t G = w_field.size();
  if (c_field.size() != G)
    throw SchemaError("components", "expected " + std::to_string(G) + " components to match weights");
  const Vector weights = detail::require_vector(w_field, G, "weights");
  double sum = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    if (!(weights[g] > 0.0))
      throw SchemaError("weights[" + std::to_string(g) + "]", "weight must be positive");
    sum += weights[g];
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw SchemaError("weights", "weights sum to " + std::to_string(sum) + ", not 1");

  std::vector<VGComponent> comps;
  comps.reserve(G);
  for (std::size_t g = 0; g < G; ++g) {
    const std::string path = "components[" + std::to_string(g) + "]";
    const auto& jc = c_field[g];
    const double gamma = detail::require_number(require_field(jc, "gamma", path), path + ".gamma");
    if (!(gamma > 0.0)) throw SchemaError(path + ".gamma", "gamma must be positive");
    Vector mu = detail::require_vector(require_field(jc, "mu", path), p, path + ".mu");
    Vector alpha = detail::require_vector(require_field(jc, "alpha", path), p, path + ".alpha");
    const auto& js = require_field(jc, "sigma", path);
    if (!js.is_array() || js.size() != p)
      throw SchemaError(path + ".sigma", "expected " + std::to_string(p) + " rows");
    Matrix sigma(p, p);
    for (std::size_t i = 0; i < p; ++i) {
      const Vector r = detail::require_vector(js[i], p, path + ".sigma[" + std::to_string(i) + "]");
      std::copy(r.begin(), r.end(), sigma.row(i).begin());
    }
    if (!sigma.is_symmetric()) throw SchemaError(path + ".sigma", "matrix is not symmetric");
    try {
      comps.emplace_back(gamma, std::move(mu), std::move(sigma), std::move(alpha));
    } catch (const NotPositiveDefinite& e) {
      throw SchemaError(path + ".sigma", e.what());
    }
  }
  return {Vector(weights.begin(), weights.end()), std::move(comps)};
}

}  // namespace vgmix
