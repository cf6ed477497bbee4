// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "evolab/checker.hpp"
#include "evolab/genome.hpp"
#include "evolab/oracle.hpp"
#include "support.hpp"

using namespace evolab;
using genome::GpKind;

namespace {

std::set<std::string> program_lines(const tree::UnitTree& t) {
  std::istringstream in(dsl::print(tree::compose(t).program));
  std::set<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.insert(line);
  return lines;
}

bool sub_multiset(const std::map<std::string, int>& small, const std::map<std::string, int>& big) {
  for (const auto& [k, v] : small) {
    auto it = big.find(k);
    if (it == big.end() || it->second < v) return false;
  }
  return true;
}

std::map<std::string, int> bag_union(std::map<std::string, int> a,
                                     const std::map<std::string, int>& b) {
  for (const auto& [k, v] : b) a[k] += v;
  return a;
}

}  // namespace

TEST_SUITE("genome") {

TEST_CASE("mutation replaces a leaf with a two-node subtree") {
  const auto gpt = oracle::build_seed_trees()[0];
  const int before = tree::count_units(gpt);

  tree::UnitNode replacement = test::leaf_unit("NewMixer",
                                               "C = call NewCore(X)\n"
                                               "Y = add(X, C)\n");
  replacement.children.push_back(test::leaf_unit("NewCore", "Y = cumsum(X)\n"));

  const auto mutant = genome::mutate(gpt, "GptCausalMixer", replacement);
  CHECK(tree::count_units(mutant) == before - 1 + 2);
  CHECK(tree::find_unit(mutant, "GptCausalMixer") == nullptr);
  CHECK(tree::find_unit(mutant, "NewMixer") != nullptr);
  // Original untouched.
  CHECK(tree::find_unit(gpt, "GptCausalMixer") != nullptr);
  CHECK(tree::count_units(gpt) == before);
}

TEST_CASE("mutating a protected unit or unknown unit raises") {
  const auto gpt = oracle::build_seed_trees()[0];
  const auto replacement = test::leaf_unit("Sub", "Y = norm(X)\n");
  CHECK_THROWS_AS(genome::mutate(gpt, "GptBlock", replacement), genome::GenomeError);
  CHECK_THROWS_AS(genome::mutate(gpt, "NoSuchUnit", replacement), genome::GenomeError);
  try {
    genome::mutate(gpt, "GptBlock", replacement);
  } catch (const genome::GenomeError& e) {
    CHECK(e.kind() == "ProtectedUnit");
  }
}

TEST_CASE("a mutation only changes statements of the replaced subtree") {
  const auto gpt = oracle::build_seed_trees()[0];
  const auto replacement = test::leaf_unit("FreshMlp",
                                           "param Wz dxd uniform(-0.2, 0.2)\n"
                                           "L = linear(X, Wz)\n"
                                           "T = tanh(L)\n"
                                           "Y = add(X, T)\n");
  const auto mutant = genome::mutate(gpt, "GptGatedMlp", replacement);

  const auto parent_lines = program_lines(gpt);
  const auto mutant_lines = program_lines(mutant);
  auto originates_outside_swap = [](const std::string& line) {
    // Allowed differences: statements of the swapped units (including call
    // sites that consume their Y) and Y/export rebinding lines, nothing else.
    return line.find("GptGatedMlp__") == std::string::npos &&
           line.find("FreshMlp__") == std::string::npos && line.rfind("Y = ", 0) != 0 &&
           line.rfind("export ", 0) != 0;
  };
  for (const auto& line : parent_lines) {
    if (mutant_lines.count(line)) continue;
    CAPTURE(line);
    CHECK_FALSE(originates_outside_swap(line));
  }
  for (const auto& line : mutant_lines) {
    if (parent_lines.count(line)) continue;
    CAPTURE(line);
    CHECK_FALSE(originates_outside_swap(line));
  }
}

TEST_CASE("crossover fills root slots from both parents") {
  const auto gpt = oracle::build_seed_trees()[0];
  // Partner: same interface, different mixer body.
  auto partner = gpt;
  partner.design_name = "gpt_variant";
  tree::UnitNode* mixer = tree::find_unit(partner, "GptCausalMixer");
  REQUIRE(mixer != nullptr);
  mixer->body =
      "param Wp dxd uniform(-0.2, 0.2)\n"
      "L = linear(X, Wp)\n"
      "T = tanh(L)\n"
      "C = cumsum(T)\n"
      "Y = scale(C, 0.2)\n";

  genome::CrossoverPlan plan;
  plan.design_name = "gpt_cross";
  plan.root = genome::SourceRef{genome::SourceRef::Tree::kA, "GptBlock"};
  plan.grafts = {{genome::SourceRef::Tree::kB, "GptAttnNorm"},
                 {genome::SourceRef::Tree::kB, "GptCausalMixer"},
                 {genome::SourceRef::Tree::kB, "GptMlpNorm"},
                 {genome::SourceRef::Tree::kB, "GptGatedMlp"}};
  const auto child = genome::crossover(gpt, partner, plan);

  CHECK(sub_multiset(tree::unit_bag(child),
                     bag_union(tree::unit_bag(gpt), tree::unit_bag(partner))));
  CHECK(checker::check_format(child).outcome == checker::Outcome::kPass);
  // The mixer body came from parent B.
  CHECK(tree::find_unit(child, "GptCausalMixer")->body == mixer->body);
}

TEST_CASE("crossover with a fresh root keeps the unit multiset bounded") {
  const auto seeds = oracle::build_seed_trees();
  genome::CrossoverPlan plan;
  plan.design_name = "mix";
  tree::UnitDecl fresh;
  fresh.name = "MixRoot";
  fresh.inputs = {"X"};
  fresh.outputs = {"Y"};
  plan.root = fresh;
  plan.grafts = {{genome::SourceRef::Tree::kA, "GptCausalMixer"},
                 {genome::SourceRef::Tree::kB, "MambaSelectiveScan"}};
  const auto child = genome::crossover(seeds[0], seeds[1], plan);

  auto allowed = bag_union(tree::unit_bag(seeds[0]), tree::unit_bag(seeds[1]));
  allowed["MixRoot"] += 1;
  CHECK(sub_multiset(tree::unit_bag(child), allowed));
  CHECK(child.root.is_placeholder());
  CHECK(child.root.children.size() == 2);
}

TEST_CASE("crossover error cases") {
  const auto seeds = oracle::build_seed_trees();
  // Empty plan: the default root source names no unit.
  genome::CrossoverPlan empty;
  try {
    genome::crossover(seeds[0], seeds[1], empty);
    FAIL("expected UnknownSource");
  } catch (const genome::GenomeError& e) {
    CHECK(e.kind() == "UnknownSource");
  }

  genome::CrossoverPlan mismatch;
  mismatch.root = genome::SourceRef{genome::SourceRef::Tree::kA, "GptBlock"};
  mismatch.grafts = {{genome::SourceRef::Tree::kB, "MambaSelectiveScan"}};
  try {
    genome::crossover(seeds[0], seeds[1], mismatch);
    FAIL("expected IncompatibleInterface");
  } catch (const genome::GenomeError& e) {
    CHECK(e.kind() == "IncompatibleInterface");
  }
}

TEST_CASE("scratch yields a single placeholder unit composing to the identity") {
  tree::UnitDecl decl;
  decl.name = "NewBlock";
  decl.inputs = {"X"};
  decl.outputs = {"Y"};
  const auto t = genome::scratch(decl);
  CHECK(tree::count_units(t) == 1);
  Rng rng(2);
  Tensor x = test::random_tensor(rng, 1, 3, 2);
  CHECK(dsl::evaluate(tree::compose(t).program, x, {}, {}).y.data == x.data);

  tree::UnitDecl bad;  // empty name
  CHECK_THROWS_AS(genome::scratch(bad), tree::TreeError);
}

TEST_CASE("scratch then root mutation equals direct construction") {
  tree::UnitDecl decl;
  decl.name = "Shell";
  const auto shell = genome::scratch(decl);
  const auto body = test::leaf_unit("Shell2", "Y = norm(X)\n");
  const auto mutated = genome::mutate(shell, "Shell", body);
  tree::UnitTree direct;
  direct.design_name = "Shell";
  direct.root = body;
  CHECK(tree::structurally_equal(tree::UnitTree{"x", mutated.root},
                                 tree::UnitTree{"x", direct.root}));
}

TEST_CASE("choose_operation honors warmup masking") {
  genome::GpChoiceConfig cfg;  // warmups: crossover 20, scratch 30
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    CHECK(genome::choose_operation(10, rng, cfg) == GpKind::kMutation);
  }
  bool saw_crossover = false;
  for (int i = 0; i < 10000; ++i) {
    const auto kind = genome::choose_operation(25, rng, cfg);
    CHECK(kind != GpKind::kScratch);
    saw_crossover = saw_crossover || kind == GpKind::kCrossover;
  }
  CHECK(saw_crossover);
}

TEST_CASE("choose_operation frequencies match the configured triple within 3 sigma") {
  genome::GpChoiceConfig cfg;
  Rng rng(6);
  const int n = 1000000;
  std::map<GpKind, int> counts;
  for (int i = 0; i < n; ++i) ++counts[genome::choose_operation(100, rng, cfg)];
  const double expected[3] = {0.75, 0.2, 0.05};
  const GpKind kinds[3] = {GpKind::kMutation, GpKind::kCrossover, GpKind::kScratch};
  for (int k = 0; k < 3; ++k) {
    const double p = expected[k];
    const double sigma = std::sqrt(p * (1 - p) / n);
    const double observed = static_cast<double>(counts[kinds[k]]) / n;
    CHECK(std::abs(observed - p) < 3 * sigma);
  }
}

TEST_CASE("masked probability mass renormalizes onto the remaining kinds") {
  genome::GpChoiceConfig cfg;
  Rng rng(7);
  const int n = 400000;
  int crossover = 0, mutation = 0;
  for (int i = 0; i < n; ++i) {
    const auto kind = genome::choose_operation(25, rng, cfg);  // scratch masked
    if (kind == GpKind::kCrossover) ++crossover;
    if (kind == GpKind::kMutation) ++mutation;
  }
  CHECK(crossover + mutation == n);  // masked kind has exactly zero mass
  const double ratio = static_cast<double>(crossover) / mutation;
  CHECK(ratio == doctest::Approx(0.2 / 0.75).epsilon(0.05));  // unmasked ratio preserved
}

TEST_CASE("all-masked configurations raise") {
  genome::GpChoiceConfig cfg;
  cfg.probs = {0.0, 0.5, 0.5};
  Rng rng(8);
  CHECK_THROWS_AS(genome::choose_operation(0, rng, cfg), genome::GenomeError);
}

}  // TEST_SUITE
