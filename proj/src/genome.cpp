// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <set>
#include <sstream>

#include "evolab/genome.hpp"

namespace evolab::genome {

namespace {

// Rewrites `call OldName(...)` into `call NewName(...)` in a body fragment.
std::string rewire_calls(const std::string& body, const std::string& from, const std::string& to) {
  dsl::Program program = dsl::parse(body);
  for (auto& line : program.body) {
    if (auto* stmt = std::get_if<dsl::Statement>(&line)) {
      if (stmt->expr.op == dsl::OpKind::kCall && stmt->expr.callee == from) {
        stmt->expr.callee = to;
      }
    }
  }
  return dsl::print(program);
}

bool replace_in(tree::UnitNode& node, const std::string& target, const tree::UnitNode& replacement) {
  for (auto& child : node.children) {
    if (child.decl.name == target) {
      if (child.is_protected) {
        throw GenomeError("ProtectedUnit", "unit '" + target + "' is protected");
      }
      const std::string new_name = replacement.decl.name;
      child = replacement;
      if (new_name != target && node.body.has_value()) {
        node.body = rewire_calls(*node.body, target, new_name);
      }
      return true;
    }
    if (replace_in(child, target, replacement)) return true;
  }
  return false;
}

}  // namespace

const char* gp_kind_name(GpKind kind) {
  switch (kind) {
    case GpKind::kMutation: return "mutation";
    case GpKind::kCrossover: return "crossover";
    case GpKind::kScratch: return "scratch";
  }
  return "?";
}

tree::UnitTree mutate(const tree::UnitTree& t, const std::string& target,
                      const tree::UnitNode& replacement) {
  const tree::UnitNode* node = tree::find_unit(t, target);
  if (node == nullptr) throw GenomeError("UnknownUnit", "no unit named '" + target + "'");
  if (node->is_protected) throw GenomeError("ProtectedUnit", "unit '" + target + "' is protected");

  tree::UnitTree out = t;
  if (out.root.decl.name == target) {
    out.root = replacement;
  } else {
    replace_in(out.root, target, replacement);
  }
  tree::require_valid(out);
  return out;
}

tree::UnitTree crossover(const tree::UnitTree& a, const tree::UnitTree& b,
                         const CrossoverPlan& plan) {
  auto source_tree = [&](const SourceRef& ref) -> const tree::UnitTree& {
    return ref.which == SourceRef::Tree::kA ? a : b;
  };
  auto lookup = [&](const SourceRef& ref) -> const tree::UnitNode& {
    const tree::UnitNode* node = tree::find_unit(source_tree(ref), ref.unit);
    if (node == nullptr) {
      throw GenomeError("UnknownSource", "plan names unit '" + ref.unit + "' missing from parent " +
                                             (ref.which == SourceRef::Tree::kA ? "a" : "b"));
    }
    return *node;
  };

  tree::UnitTree out;
  out.design_name = plan.design_name.empty() ? "crossover_design" : plan.design_name;

  std::vector<tree::UnitNode> grafts;
  grafts.reserve(plan.grafts.size());
  for (const auto& ref : plan.grafts) grafts.push_back(lookup(ref));

  if (const auto* decl = std::get_if<tree::UnitDecl>(&plan.root)) {
    // Fresh placeholder root: the search harness writes its body later,
    // wiring up the grafted children.
    tree::UnitNode root;
    root.decl = *decl;
    root.children = std::move(grafts);
    out.root = std::move(root);
  } else {
    const auto& ref = std::get<SourceRef>(plan.root);
    const tree::UnitNode& source = lookup(ref);
    tree::UnitNode root;
    root.decl = source.decl;
    root.body = source.body;
    root.is_protected = source.is_protected;
    if (root.is_placeholder()) {
      root.children = std::move(grafts);
    } else {
      // Fill each call slot of the root body with a matching graft by name.
      std::set<std::string> slots;
      for (const auto& callee : dsl::parse(*root.body).call_targets()) slots.insert(callee);
      std::set<std::string> used;
      for (auto& graft : grafts) {
        if (!slots.count(graft.decl.name)) {
          throw GenomeError("IncompatibleInterface",
                            "graft '" + graft.decl.name + "' matches no child slot of root '" +
                                root.decl.name + "'");
        }
        if (!used.insert(graft.decl.name).second) {
          throw GenomeError("IncompatibleInterface",
                            "slot '" + graft.decl.name + "' filled by two grafts");
        }
        root.children.push_back(std::move(graft));
      }
      for (const auto& slot : slots) {
        if (!used.count(slot)) {
          throw GenomeError("IncompatibleInterface",
                            "child slot '" + slot + "' of root '" + root.decl.name +
                                "' is left unfilled");
        }
      }
    }
    out.root = std::move(root);
  }

  auto problems = tree::structural_problems(out);
  if (!problems.empty()) {
    throw GenomeError("IncompatibleInterface", problems.front());
  }
  return out;
}

tree::UnitTree scratch(const tree::UnitDecl& root_decl) {
  tree::UnitTree out;
  out.design_name = root_decl.name;
  out.root.decl = root_decl;
  out.root.body.reset();
  tree::require_valid(out);
  return out;
}

GpKind choose_operation(int round, Rng& rng, const GpChoiceConfig& cfg) {
  std::array<double, 3> mass = cfg.probs;
  if (cfg.crossover_warmup > round) mass[1] = 0.0;
  if (cfg.scratch_warmup > round) mass[2] = 0.0;
  const double total = mass[0] + mass[1] + mass[2];
  if (total <= 0.0) throw GenomeError("AllMasked", "every GP operation is masked at this round");
  const double draw = rng.uniform01() * total;
  if (draw < mass[0]) return GpKind::kMutation;
  if (draw < mass[0] + mass[1]) return GpKind::kCrossover;
  return GpKind::kScratch;
}

}  // namespace evolab::genome
