// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <set>
#include <sstream>

#include "evolab/search.hpp"

namespace evolab::search {

namespace {

std::string hex_suffix(Rng& rng) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(6, '0');
  uint64_t bits = rng.next_u64();
  for (char& c : out) {
    c = kHex[bits & 0xf];
    bits >>= 4;
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

// ----- valid leaf templates ------------------------------------------------

std::string tpl_gated_cumsum(Rng& rng) {
  const double a = rng.uniform(0.2, 0.4);
  const double s = rng.uniform(0.1, 0.3);
  std::ostringstream b;
  b << "param Wg dxd uniform(-" << fmt(a) << ", " << fmt(a) << ")\n"
    << "param bg d zeros\n"
    << "param Wv dxd uniform(-" << fmt(a) << ", " << fmt(a) << ")\n"
    << "L1 = linear(X, Wg)\n"
    << "B1 = bias(L1, bg)\n"
    << "G = sigmoid(B1)\n"
    << "V = linear(X, Wv)\n"
    << "GV = mul(G, V)\n"
    << "M = cumsum(GV)\n"
    << "Ms = scale(M, " << fmt(s) << ")\n"
    << "Y = add(X, Ms)\n";
  return b.str();
}

std::string tpl_mlp(Rng& rng) {
  static const char* kActs[] = {"relu", "tanh", "sigmoid"};
  const char* act = kActs[rng.below(3)];
  const double a = rng.uniform(0.2, 0.45);
  std::ostringstream b;
  b << "param W1 dxd uniform(-" << fmt(a) << ", " << fmt(a) << ")\n"
    << "param b1 d zeros\n"
    << "param W2 dxd uniform(-" << fmt(a) << ", " << fmt(a) << ")\n"
    << "N = norm(X)\n"
    << "L1 = linear(N, W1)\n"
    << "B1 = bias(L1, b1)\n"
    << "H = " << act << "(B1)\n"
    << "P = linear(H, W2)\n"
    << "Y = add(X, P)\n";
  return b.str();
}

std::string tpl_shift_mix(Rng& rng) {
  const int k = 1 + static_cast<int>(rng.below(2));
  const double a = rng.uniform(0.2, 0.4);
  std::ostringstream b;
  b << "param Wm dxd uniform(-" << fmt(a) << ", " << fmt(a) << ")\n"
    << "param gw scalar uniform(0.2, 0.8)\n"
    << "P = shift(X, " << k << ")\n"
    << "L1 = linear(X, Wm)\n"
    << "G = sigmoid(L1)\n"
    << "M = mul(G, P)\n"
    << "Ms = scale(M, gw)\n"
    << "Y = add(X, Ms)\n";
  return b.str();
}

std::string tpl_decay_scan(Rng& rng) {
  const double a = rng.uniform(0.2, 0.35);
  const double s = rng.uniform(0.1, 0.25);
  std::ostringstream b;
  b << "param Wv dxd uniform(-" << fmt(a) << ", " << fmt(a) << ")\n"
    << "param Wd dxd uniform(-" << fmt(a) << ", " << fmt(a) << ")\n"
    << "V = linear(X, Wv)\n"
    << "L1 = linear(X, Wd)\n"
    << "Dg = sigmoid(L1)\n"
    << "VD = mul(V, Dg)\n"
    << "S = cumsum(VD)\n"
    << "T = shift(S, 1)\n"
    << "Ts = scale(T, -0.5)\n"
    << "W = add(S, Ts)\n"
    << "N = norm(W)\n"
    << "Ns = scale(N, " << fmt(s) << ")\n"
    << "Y = add(X, Ns)\n";
  return b.str();
}

std::string tpl_export_memory(Rng& rng) {
  const double a = rng.uniform(0.2, 0.4);
  std::ostringstream b;
  b << "param Wk dxd uniform(-" << fmt(a) << ", " << fmt(a) << ")\n"
    << "L1 = linear(X, Wk)\n"
    << "K = tanh(L1)\n"
    << "C = cumsum(K)\n"
    << "S = scale(C, 0.125)\n"
    << "export z_mem_" << hex_suffix(rng) << " = S\n"
    << "Y = add(X, S)\n";
  return b.str();
}

// Wrapper template: routes through `children` sequentially, then a gated
// residual. Used for branching draws and crossover root wiring.
std::string tpl_wrapper(Rng& rng, const std::vector<std::string>& children) {
  (void)rng;  // templates with random variants share the signature
  std::ostringstream b;
  b << "param gw scalar uniform(0.3, 0.7)\n"
    << "N = norm(X)\n";
  std::string carry = "N";
  for (size_t i = 0; i < children.size(); ++i) {
    const std::string var = "C" + std::to_string(i);
    b << var << " = call " << children[i] << "(" << carry << ")\n";
    carry = var;
  }
  b << "Gs = scale(" << carry << ", gw)\n"
    << "Y = add(X, Gs)\n";
  return b.str();
}

// ----- defect templates ----------------------------------------------------

std::string defect_body(BernoulliGenerator::Defect defect, Rng& rng) {
  switch (defect) {
    case BernoulliGenerator::Defect::kSyntax:
      return "H = linear(X\nY = H\n";
    case BernoulliGenerator::Defect::kUnbound:
      return "Y = add(X, missing_var)\n";
    case BernoulliGenerator::Defect::kNonCausal: {
      const double a = rng.uniform(0.2, 0.4);
      return "param Wv dxd uniform(-" + fmt(a) + ", " + fmt(a) +
             ")\nV = linear(X, Wv)\nM = mean_l(V)\nY = add(X, M)\n";
    }
    case BernoulliGenerator::Defect::kDanglingParam: {
      const double a = rng.uniform(0.2, 0.4);
      return "param Wv dxd uniform(-" + fmt(a) + ", " + fmt(a) +
             ")\nparam Wq dxd uniform(-0.3, 0.3)\nV = linear(X, Wv)\nY = add(X, V)\n";
    }
    case BernoulliGenerator::Defect::kUndeclaredCall:
      return "V = call Ghost_" + hex_suffix(rng) + "(X)\nY = V\n";
  }
  return "Y = X\n";
}

std::set<std::string> tree_unit_names(const tree::UnitTree* t) {
  std::set<std::string> names;
  if (t != nullptr) {
    for (const auto& [name, count] : tree::unit_bag(*t)) names.insert(name);
  }
  return names;
}

}  // namespace

GeneratorModel uniform_model(double p, int n) {
  GeneratorModel m;
  m.steps.assign(static_cast<size_t>(n), StepModel{p, 2000.0, 500.0, 800.0});
  return m;
}

BernoulliGenerator::BernoulliGenerator(GeneratorModel model, Options options)
    : model_(std::move(model)), options_(std::move(options)) {
  if (model_.steps.empty()) model_.steps.push_back(StepModel{});
}

double BernoulliGenerator::propose_quality(Rng& rng) {
  return rng.uniform(model_.quality_lo, model_.quality_hi);
}

void BernoulliGenerator::learn(const std::string& body) {
  if (!options_.enable_learning) return;
  // Only leaf fragments transfer across contexts: a body with calls binds to
  // child names that do not exist elsewhere.
  try {
    if (!dsl::parse(body).has_calls()) learned_.push_back(body);
  } catch (const dsl::ParseError&) {
  }
}

Candidate BernoulliGenerator::draw(const UnitContext& ctx, Rng& rng) {
  Candidate out;
  out.cost = model_.attempt_cost(ctx.unit_index);
  out.observer_score = rng.uniform(model_.quality_lo, model_.quality_hi);

  const double p = model_.step(ctx.unit_index).success_prob;
  const bool valid = rng.bernoulli(p);
  if (!valid) {
    const auto& defects = options_.defects;
    out.body = defect_body(defects[rng.below(defects.size())], rng);
    return out;
  }

  if (ctx.force_reuse) {
    std::vector<std::string> children;
    for (const auto* node : ctx.reuse_pool) children.push_back(node->decl.name);
    out.body = tpl_wrapper(rng, children);
    return out;
  }

  if (ctx.remaining_units > 0) {
    // Honor the proposal's size plan: decompose until the budget is spent.
    const int n_children = std::min<int>(ctx.remaining_units, 1 + static_cast<int>(rng.below(2)));
    std::set<std::string> taken = tree_unit_names(ctx.current_tree);
    std::vector<std::string> names;
    for (int i = 0; i < n_children; ++i) {
      std::string name;
      do {
        name = "U" + hex_suffix(rng);
      } while (taken.count(name));
      taken.insert(name);
      names.push_back(name);
      tree::UnitDecl decl;
      decl.name = name;
      decl.requirements = "generated sub-unit";
      decl.inputs = {"X"};
      decl.outputs = {"Y"};
      out.new_children.push_back(std::move(decl));
    }
    out.body = tpl_wrapper(rng, names);
    return out;
  }

  if (!learned_.empty() && rng.bernoulli(0.3)) {
    out.body = learned_[rng.below(learned_.size())];
    return out;
  }

  const uint64_t pick = rng.below(options_.allow_exports ? 5 : 4);
  switch (pick) {
    case 0: out.body = tpl_gated_cumsum(rng); break;
    case 1: out.body = tpl_mlp(rng); break;
    case 2: out.body = tpl_shift_mix(rng); break;
    case 3: out.body = tpl_decay_scan(rng); break;
    default: out.body = tpl_export_memory(rng); break;
  }
  return out;
}

ScriptedGenerator::ScriptedGenerator(std::vector<Candidate> script, double quality)
    : script_(std::move(script)), quality_(quality) {}

Candidate ScriptedGenerator::draw(const UnitContext& ctx, Rng& rng) {
  (void)ctx;
  (void)rng;
  if (next_ >= script_.size()) {
    throw SearchError("ScriptExhausted", "scripted generator ran out of candidates");
  }
  return script_[next_++];
}

}  // namespace evolab::search
