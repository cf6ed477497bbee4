// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "evolab/digest.hpp"
#include "evolab/oracle.hpp"

namespace evolab::oracle {

namespace {

using nlohmann::ordered_json;

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

size_t scale_index(const Landscape& landscape, const std::string& scale) {
  for (size_t i = 0; i < landscape.scales.size(); ++i) {
    if (landscape.scales[i] == scale) return i;
  }
  throw Error("UnknownScale", "landscape has no scale '" + scale + "'");
}

}  // namespace

double unit_weight(const Landscape& landscape, const std::string& task, const std::string& unit) {
  auto task_it = landscape.explicit_weights.find(task);
  if (task_it != landscape.explicit_weights.end()) {
    auto unit_it = task_it->second.find(unit);
    if (unit_it != task_it->second.end()) return unit_it->second;
  }
  Rng rng = derive_rng(landscape.seed, {0x77u, fnv1a(task), fnv1a(unit)});
  return rng.normal(0.0, landscape.weight_sigma);
}

std::map<std::string, double> oracle_scores(const tree::UnitTree& design,
                                            const std::string& scale, const Landscape& landscape,
                                            Rng& rng) {
  const size_t idx = scale_index(landscape, scale);
  if (rng.bernoulli(landscape.error_rate)) throw VerificationError();

  const auto bag = tree::unit_bag(design);
  const uint64_t design_bits = fnv1a(tree::canonical_hash(design));
  std::map<std::string, double> scores;
  for (const auto& task : landscape.tasks) {
    double value = 0.0;
    for (const auto& [unit, count] : bag) {
      value += static_cast<double>(count) * unit_weight(landscape, task, unit);
    }
    double noise = 0.0;
    if (landscape.sigma_scale > 0.0) {
      Rng wobble = derive_rng(landscape.seed, {0x5cu, design_bits, idx, fnv1a(task)});
      noise += landscape.sigma_scale * wobble.normal();
    }
    if (landscape.sigma_obs > 0.0) noise += landscape.sigma_obs * rng.normal();
    scores[task] = logistic(landscape.base + landscape.scale_gains[idx] * value + noise);
  }
  return scores;
}

std::string landscape_to_json(const Landscape& landscape) {
  ordered_json j;
  j["schema_version"] = 1;
  j["seed"] = landscape.seed;
  j["tasks"] = landscape.tasks;
  j["scales"] = landscape.scales;
  j["scale_gains"] = landscape.scale_gains;
  j["weight_sigma"] = landscape.weight_sigma;
  j["base"] = landscape.base;
  j["sigma_scale"] = landscape.sigma_scale;
  j["sigma_obs"] = landscape.sigma_obs;
  j["error_rate"] = landscape.error_rate;
  ordered_json weights = ordered_json::object();
  for (const auto& [task, units] : landscape.explicit_weights) {
    ordered_json w = ordered_json::object();
    for (const auto& [unit, value] : units) w[unit] = value;
    weights[task] = std::move(w);
  }
  j["explicit_weights"] = std::move(weights);
  return j.dump(2) + "\n";
}

Landscape landscape_from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  if (j.value("schema_version", 0) != 1) {
    throw Error("BadSchema", "unsupported landscape schema_version");
  }
  Landscape out;
  out.seed = j.value("seed", out.seed);
  out.tasks = j.value("tasks", out.tasks);
  out.scales = j.value("scales", out.scales);
  out.scale_gains = j.value("scale_gains", out.scale_gains);
  out.weight_sigma = j.value("weight_sigma", out.weight_sigma);
  out.base = j.value("base", out.base);
  out.sigma_scale = j.value("sigma_scale", out.sigma_scale);
  out.sigma_obs = j.value("sigma_obs", out.sigma_obs);
  out.error_rate = j.value("error_rate", out.error_rate);
  if (j.contains("explicit_weights")) {
    for (const auto& [task, units] : j.at("explicit_weights").items()) {
      for (const auto& [unit, value] : units.items()) {
        out.explicit_weights[task][unit] = value.get<double>();
      }
    }
  }
  if (out.scale_gains.size() != out.scales.size()) {
    throw Error("BadSchema", "scale_gains must match scales");
  }
  return out;
}

}  // namespace evolab::oracle
