// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic verification oracle: scale-correlated task scores driven by a
// hidden linear landscape over the design's bag of unit names, with
// configurable cross-scale wobble, observation noise and error injection.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "evolab/rng.hpp"
#include "evolab/unit_tree.hpp"

namespace evolab::oracle {

/// Simulated verification-run failure (the run errored before producing
/// scores, not a low score).
class VerificationError : public Error {
 public:
  VerificationError() : Error("VerificationError", "simulated verification run failed") {}
};

struct Landscape {
  uint64_t seed = 17;
  std::vector<std::string> tasks = {"recall", "induction", "compression", "stability"};
  std::vector<std::string> scales = {"14M", "31M", "70M", "125M"};
  std::vector<double> scale_gains = {1.0, 1.1, 1.2, 1.3};  // strictly increasing
  double weight_sigma = 0.12;  // spread of the hidden per-unit-name weights
  double base = 0.0;
  std::map<std::string, std::map<std::string, double>> explicit_weights;  // task -> unit -> w
  double sigma_scale = 0.0;  // deterministic per-(design, scale, task) wobble
  double sigma_obs = 0.0;    // fresh observation noise per verification
  double error_rate = 0.0;   // probability a verification errors out
};

/// Hidden weight of a unit name for a task: the explicit table wins, unknown
/// names get a deterministic hash-derived draw so novel units score
/// consistently.
double unit_weight(const Landscape& landscape, const std::string& task, const std::string& unit);

/// Linear bag score squashed through a logistic into (0, 1):
/// score = squash(base + g_s * <w_task, bag> + noise). Throws
/// VerificationError with probability error_rate.
std::map<std::string, double> oracle_scores(const tree::UnitTree& design,
                                            const std::string& scale, const Landscape& landscape,
                                            Rng& rng);

/// The five starting designs (transformer-, Mamba-, RetNet-, RWKV- and
/// TTT-flavoured stand-ins), every one passing the full checker pipeline.
std::vector<tree::UnitTree> build_seed_trees();

/// Landscape serialization (JSON, schema_version 1).
std::string landscape_to_json(const Landscape& landscape);
Landscape landscape_from_json(const std::string& text);

}  // namespace evolab::oracle
