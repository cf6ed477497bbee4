// SPDX-License-Identifier: Apache-2.0
#pragma once

// Genetic operators over unit trees. All operators are pure: inputs are never
// modified, results are fresh trees.

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "evolab/rng.hpp"
#include "evolab/unit_tree.hpp"

namespace evolab::genome {

class GenomeError : public Error {
 public:
  using Error::Error;
};

enum class GpKind { kMutation, kCrossover, kScratch };
const char* gp_kind_name(GpKind kind);

struct GpOperation {
  GpKind kind = GpKind::kMutation;
  std::vector<std::string> parents;  // design ids: 1 for mutation, 2 for crossover
  std::string target_unit;           // mutation only
};

/// Replaces the subtree rooted at `target` with `replacement`. Parent call
/// sites are rewired to the replacement's root name when it differs. Raises
/// ProtectedUnit / UnknownUnit.
tree::UnitTree mutate(const tree::UnitTree& t, const std::string& target,
                      const tree::UnitNode& replacement);

struct SourceRef {
  enum class Tree { kA, kB };
  Tree which = Tree::kA;
  std::string unit;
};

/// Crossover assembly plan: the new root is either an existing unit (node
/// only, its child slots filled by grafts) or a fresh placeholder decl whose
/// body the search harness implements later. Grafts are whole subtrees taken
/// verbatim from either parent.
struct CrossoverPlan {
  std::string design_name;
  std::variant<SourceRef, tree::UnitDecl> root = SourceRef{};
  std::vector<SourceRef> grafts;
};

/// Builds a new tree from units of `a` and `b` per the plan. The unit multiset
/// of the result is a sub-multiset of bag(a) + bag(b), plus at most one new
/// root. Raises UnknownSource / IncompatibleInterface.
tree::UnitTree crossover(const tree::UnitTree& a, const tree::UnitTree& b,
                         const CrossoverPlan& plan);

/// Single placeholder root; the composed program is the identity on (X, Z).
tree::UnitTree scratch(const tree::UnitDecl& root_decl);

struct GpChoiceConfig {
  std::array<double, 3> probs = {0.75, 0.2, 0.05};  // mutation, crossover, scratch
  int crossover_warmup = 20;
  int scratch_warmup = 30;
};

/// Samples the GP operation for `round`. Kinds whose warmup exceeds the round
/// are masked and their probability mass renormalized onto the rest.
GpKind choose_operation(int round, Rng& rng, const GpChoiceConfig& cfg = {});

}  // namespace evolab::genome
