// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "evolab/checker.hpp"

namespace evolab::checker {

namespace {

using nlohmann::ordered_json;

std::string format_witness_list(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += "; ";
    out += item;
  }
  return out;
}

Tensor random_probe(Rng& rng, int64_t b, int64_t l, int64_t d) {
  Tensor x({b, l, d});
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  return x;
}

double global_grad_norm(const dsl::ParamValues& grads) {
  double acc = 0.0;
  for (const auto& [name, g] : grads) {
    for (double v : g.data) acc += v * v;
  }
  return std::sqrt(acc);
}

double copy_loss(const Tensor& y, const std::vector<std::vector<int>>& targets) {
  const int64_t b = y.shape[0], l = y.shape[1], d = y.shape[2];
  const double count = static_cast<double>(b * (l - 1));
  double loss = 0.0;
  for (int64_t bi = 0; bi < b; ++bi) {
    for (int64_t li = 1; li < l; ++li) {
      double max_logit = y.at(bi, li, 0);
      for (int64_t di = 1; di < d; ++di) max_logit = std::max(max_logit, y.at(bi, li, di));
      double sum_exp = 0.0;
      for (int64_t di = 0; di < d; ++di) sum_exp += std::exp(y.at(bi, li, di) - max_logit);
      const double lse = max_logit + std::log(sum_exp);
      loss += (lse - y.at(bi, li, targets[static_cast<size_t>(bi)][static_cast<size_t>(li)])) / count;
    }
  }
  return loss;
}

}  // namespace

const char* check_name(CheckId id) {
  switch (id) {
    case CheckId::kParser: return "parser";
    case CheckId::kFormatter: return "formatter";
    case CheckId::kInitialization: return "initialization";
    case CheckId::kForward: return "forward";
    case CheckId::kBackward: return "backward";
    case CheckId::kCausality: return "causality";
    case CheckId::kDifferentiability: return "differentiability";
    case CheckId::kEffectiveness: return "effectiveness";
  }
  return "?";
}

bool CheckReport::overall_pass() const {
  return std::all_of(results.begin(), results.end(),
                     [](const CheckResult& r) { return r.outcome == Outcome::kPass; });
}

bool CheckReport::static_failure() const {
  return result(CheckId::kParser).outcome == Outcome::kFail ||
         result(CheckId::kFormatter).outcome == Outcome::kFail;
}

const CheckResult& CheckReport::result(CheckId id) const {
  return results[static_cast<size_t>(id)];
}

int CheckReport::exit_code() const {
  if (overall_pass()) return 0;
  return static_failure() ? 2 : 3;
}

std::string CheckReport::to_json() const {
  ordered_json j;
  j["schema_version"] = 1;
  j["overall_pass"] = overall_pass();
  j["verdict"] =
      overall_pass() ? "pass" : (static_failure() ? "static_failure" : "execution_failure");
  ordered_json checks = ordered_json::array();
  for (const auto& r : results) {
    ordered_json c;
    c["name"] = check_name(r.id);
    c["outcome"] =
        r.outcome == Outcome::kPass ? "pass" : (r.outcome == Outcome::kFail ? "fail" : "skipped");
    c["witness"] = r.witness;
    checks.push_back(std::move(c));
  }
  j["checks"] = std::move(checks);
  return j.dump(2) + "\n";
}

dsl::Program reference_program() {
  static const char* kSource =
      "param Wg dxd uniform(-0.3, 0.3)\n"
      "param bg d zeros\n"
      "param Wv dxd uniform(-0.3, 0.3)\n"
      "param W1 dxd uniform(-0.3, 0.3)\n"
      "param b1 d zeros\n"
      "param W2 dxd uniform(-0.3, 0.3)\n"
      "N1 = norm(X)\n"
      "L1 = linear(N1, Wg)\n"
      "B1 = bias(L1, bg)\n"
      "G = sigmoid(B1)\n"
      "V = linear(N1, Wv)\n"
      "GV = mul(G, V)\n"
      "M = cumsum(GV)\n"
      "Ms = scale(M, 0.25)\n"
      "A = add(X, Ms)\n"
      "N2 = norm(A)\n"
      "L2 = linear(N2, W1)\n"
      "B2 = bias(L2, b1)\n"
      "H = relu(B2)\n"
      "P = linear(H, W2)\n"
      "Y = add(A, P)\n";
  return dsl::parse(kSource);
}

CheckerConfig default_checker_config() {
  CheckerConfig cfg;
  cfg.effectiveness.reference = reference_program();
  return cfg;
}

CheckResult check_format(const tree::UnitTree& tree) {
  CheckResult result;
  result.id = CheckId::kFormatter;
  std::vector<std::string> problems = tree::structural_problems(tree);

  std::vector<const tree::UnitNode*> stack = {&tree.root};
  while (!stack.empty()) {
    const tree::UnitNode* node = stack.back();
    stack.pop_back();
    std::set<std::string> declared;
    for (const auto& child : node->children) declared.insert(child.decl.name);
    std::set<std::string> invoked;
    if (!node->is_placeholder()) {
      try {
        dsl::Program body = dsl::parse(*node->body);
        for (const auto& callee : body.call_targets()) invoked.insert(callee);
      } catch (const dsl::ParseError&) {
        // Syntax failures belong to the parser check.
      }
    }
    for (const auto& name : declared) {
      if (!invoked.count(name)) {
        problems.push_back("unit '" + node->decl.name + "' declares child '" + name +
                           "' but never invokes it");
      }
    }
    for (const auto& name : invoked) {
      if (!declared.count(name)) {
        problems.push_back("unit '" + node->decl.name + "' invokes undeclared child '" + name +
                           "'");
      }
    }
    for (const auto& child : node->children) stack.push_back(&child);
  }

  result.outcome = problems.empty() ? Outcome::kPass : Outcome::kFail;
  result.witness = format_witness_list(problems);
  return result;
}

CheckResult check_causality(const dsl::Program& program, int probes, Rng& rng, int64_t b,
                            int64_t l, int64_t d, double tol) {
  CheckResult result;
  result.id = CheckId::kCausality;
  try {
    dsl::ParamValues params = dsl::init_params(program, d, rng);
    for (int probe = 0; probe < probes; ++probe) {
      Tensor x = random_probe(rng, b, l, d);
      const dsl::EvalResult base = dsl::evaluate(program, x, {}, params);
      for (int64_t t = 1; t < l; ++t) {
        Tensor perturbed = x;
        for (int64_t bi = 0; bi < b; ++bi)
          for (int64_t li = t; li < l; ++li)
            for (int64_t di = 0; di < d; ++di) perturbed.at(bi, li, di) = rng.uniform(-1.0, 1.0);
        const dsl::EvalResult got = dsl::evaluate(program, perturbed, {}, params);
        double max_dev = 0.0;
        for (int64_t bi = 0; bi < b; ++bi)
          for (int64_t li = 0; li < t; ++li)
            for (int64_t di = 0; di < d; ++di)
              max_dev = std::max(max_dev, std::abs(got.y.at(bi, li, di) - base.y.at(bi, li, di)));
        if (max_dev > tol) {
          result.outcome = Outcome::kFail;
          std::ostringstream w;
          w << "output at positions < " << t << " changed by " << max_dev
            << " after perturbing positions >= " << t;
          result.witness = w.str();
          return result;
        }
      }
    }
    result.outcome = Outcome::kPass;
  } catch (const Error& e) {
    result.outcome = Outcome::kFail;
    result.witness = e.what();
  }
  return result;
}

CheckResult check_differentiability(const dsl::Program& program, int probes, Rng& rng, int64_t b,
                                    int64_t l, int64_t d) {
  CheckResult result;
  result.id = CheckId::kDifferentiability;
  try {
    dsl::ParamValues params = dsl::init_params(program, d, rng);
    std::map<std::string, double> max_abs_grad;
    for (const auto& p : program.params) max_abs_grad[p.name] = 0.0;
    for (int probe = 0; probe < probes; ++probe) {
      Tensor x = random_probe(rng, b, l, d);
      const dsl::GradResult grads = dsl::gradients(program, x, {}, params, dsl::LossSpec::sum_y());
      for (const auto& [name, g] : grads.param_grads) {
        for (double v : g.data) max_abs_grad[name] = std::max(max_abs_grad[name], std::abs(v));
      }
    }
    std::vector<std::string> dangling;
    for (const auto& [name, mx] : max_abs_grad) {
      if (mx == 0.0) dangling.push_back(name);
    }
    if (!dangling.empty()) {
      result.outcome = Outcome::kFail;
      result.witness = "dangling parameters: " + format_witness_list(dangling);
      return result;
    }
    result.outcome = Outcome::kPass;
  } catch (const Error& e) {
    result.outcome = Outcome::kFail;
    result.witness = e.what();
  }
  return result;
}

CheckResult check_effectiveness(const dsl::Program& program, const EffectivenessConfig& cfg,
                                Rng& rng) {
  CheckResult result;
  result.id = CheckId::kEffectiveness;
  const int64_t b = cfg.batch, l = cfg.seq_len, d = cfg.vocab_size;

  if (cfg.reference.has_value()) {
    const uint64_t own = dsl::flops(program, b, l, d);
    const uint64_t ref = dsl::flops(*cfg.reference, b, l, d);
    const double ratio = ref == 0 ? (own == 0 ? 1.0 : std::numeric_limits<double>::infinity())
                                  : static_cast<double>(own) / static_cast<double>(ref);
    if (ratio > cfg.flop_ratio_bound) {
      result.outcome = Outcome::kFail;
      std::ostringstream w;
      w << "flop ratio " << ratio << " exceeds bound " << cfg.flop_ratio_bound;
      result.witness = w.str();
      return result;
    }
  }

  try {
    dsl::ParamValues params = dsl::init_params(program, d, rng);

    std::vector<std::vector<int>> tokens(static_cast<size_t>(b),
                                         std::vector<int>(static_cast<size_t>(l)));
    for (auto& row : tokens) {
      for (int& t : row) t = static_cast<int>(rng.below(static_cast<uint64_t>(cfg.vocab_size)));
    }
    Tensor x({b, l, d});
    std::vector<std::vector<int>> targets(static_cast<size_t>(b),
                                          std::vector<int>(static_cast<size_t>(l), 0));
    for (int64_t bi = 0; bi < b; ++bi) {
      for (int64_t li = 0; li < l; ++li) {
        x.at(bi, li, tokens[static_cast<size_t>(bi)][static_cast<size_t>(li)]) = 1.0;
        if (li >= 1) {
          targets[static_cast<size_t>(bi)][static_cast<size_t>(li)] =
              tokens[static_cast<size_t>(bi)][static_cast<size_t>(li - 1)];
        }
      }
    }
    const dsl::LossSpec loss = dsl::LossSpec::copy_cross_entropy(targets);

    double initial_loss = 0.0;
    for (int step = 0; step < cfg.steps; ++step) {
      dsl::GradResult g = dsl::gradients(program, x, {}, params, loss);
      if (step == 0) initial_loss = g.loss;
      if (!(g.loss <= cfg.loss_explode_bound)) {
        result.outcome = Outcome::kFail;
        std::ostringstream w;
        w << "loss " << g.loss << " exploded at step " << step;
        result.witness = w.str();
        return result;
      }
      if (g.loss <= 0.0) {
        result.outcome = Outcome::kFail;
        std::ostringstream w;
        w << "loss " << g.loss << " vanished at step " << step;
        result.witness = w.str();
        return result;
      }
      const double gnorm = global_grad_norm(g.param_grads);
      if (gnorm > cfg.gradient_norm_bound) {
        result.outcome = Outcome::kFail;
        std::ostringstream w;
        w << "gradient norm " << gnorm << " exceeds bound " << cfg.gradient_norm_bound
          << " at step " << step;
        result.witness = w.str();
        return result;
      }
      for (auto& [name, value] : params) {
        const Tensor& grad = g.param_grads.at(name);
        for (size_t i = 0; i < value.data.size(); ++i) {
          value.data[i] -= cfg.learning_rate * grad.data[i];
        }
      }
    }
    const double final_loss = copy_loss(dsl::evaluate(program, x, {}, params).y, targets);
    if (!(final_loss < initial_loss)) {
      result.outcome = Outcome::kFail;
      std::ostringstream w;
      w << "final loss " << final_loss << " did not improve on initial " << initial_loss;
      result.witness = w.str();
      return result;
    }
    result.outcome = Outcome::kPass;
  } catch (const Error& e) {
    result.outcome = Outcome::kFail;
    result.witness = e.what();
  }
  return result;
}

CheckReport run_all(const tree::UnitTree& tree, const CheckerConfig& cfg, uint64_t seed) {
  CheckReport report;
  report.results.resize(kCheckCount);
  for (int i = 0; i < kCheckCount; ++i) {
    report.results[static_cast<size_t>(i)].id = static_cast<CheckId>(i);
    report.results[static_cast<size_t>(i)].outcome = Outcome::kSkipped;
  }
  auto set = [&](CheckId id, CheckResult r) {
    r.id = id;
    report.results[static_cast<size_t>(id)] = std::move(r);
  };

  {
    CheckResult r;
    r.id = CheckId::kParser;
    std::vector<std::string> problems;
    std::vector<const tree::UnitNode*> stack = {&tree.root};
    while (!stack.empty()) {
      const tree::UnitNode* node = stack.back();
      stack.pop_back();
      if (!node->is_placeholder()) {
        try {
          dsl::parse(*node->body);
        } catch (const dsl::ParseError& e) {
          problems.push_back("unit '" + node->decl.name + "': " + e.what());
        }
      }
      for (const auto& child : node->children) stack.push_back(&child);
    }
    r.outcome = problems.empty() ? Outcome::kPass : Outcome::kFail;
    r.witness = format_witness_list(problems);
    set(CheckId::kParser, r);
    if (r.outcome == Outcome::kFail) return report;
  }

  {
    CheckResult r = check_format(tree);
    set(CheckId::kFormatter, r);
    if (r.outcome == Outcome::kFail) return report;
  }

  const dsl::Program program = tree::compose(tree).program;

  {
    CheckResult r;
    r.id = CheckId::kInitialization;
    try {
      Rng rng = derive_rng(seed, {1});
      dsl::init_params(program, cfg.probe_d, rng);
      r.outcome = Outcome::kPass;
    } catch (const Error& e) {
      r.outcome = Outcome::kFail;
      r.witness = e.what();
    }
    set(CheckId::kInitialization, r);
    if (r.outcome == Outcome::kFail) return report;
  }

  {
    CheckResult r;
    r.id = CheckId::kForward;
    try {
      Rng rng = derive_rng(seed, {2});
      dsl::ParamValues params = dsl::init_params(program, cfg.probe_d, rng);
      Tensor x = random_probe(rng, cfg.probe_b, cfg.probe_l, cfg.probe_d);
      dsl::EvalResult out = dsl::evaluate(program, x, {}, params);
      if (out.y.shape != x.shape) {
        r.outcome = Outcome::kFail;
        r.witness = "Y shape differs from X";
      } else {
        r.outcome = Outcome::kPass;
      }
    } catch (const Error& e) {
      r.outcome = Outcome::kFail;
      r.witness = e.what();
    }
    set(CheckId::kForward, r);
    if (r.outcome == Outcome::kFail) return report;
  }

  {
    CheckResult r;
    r.id = CheckId::kBackward;
    try {
      Rng rng = derive_rng(seed, {3});
      dsl::ParamValues params = dsl::init_params(program, cfg.probe_d, rng);
      Tensor x = random_probe(rng, cfg.probe_b, cfg.probe_l, cfg.probe_d);
      dsl::gradients(program, x, {}, params, dsl::LossSpec::sum_y());
      r.outcome = Outcome::kPass;
    } catch (const Error& e) {
      r.outcome = Outcome::kFail;
      r.witness = e.what();
    }
    set(CheckId::kBackward, r);
    if (r.outcome == Outcome::kFail) return report;
  }

  {
    Rng rng = derive_rng(seed, {4});
    CheckResult r = check_causality(program, cfg.causality_probes, rng, cfg.probe_b, cfg.probe_l,
                                    cfg.probe_d, cfg.causality_tol);
    set(CheckId::kCausality, r);
    if (r.outcome == Outcome::kFail) return report;
  }

  {
    Rng rng = derive_rng(seed, {5});
    CheckResult r = check_differentiability(program, cfg.differentiability_probes, rng,
                                            cfg.probe_b, cfg.probe_l, cfg.probe_d);
    set(CheckId::kDifferentiability, r);
    if (r.outcome == Outcome::kFail) return report;
  }

  {
    CheckResult r;
    r.id = CheckId::kEffectiveness;
    if (cfg.run_effectiveness) {
      Rng rng = derive_rng(seed, {6});
      r = check_effectiveness(program, cfg.effectiveness, rng);
    } else {
      r.outcome = Outcome::kPass;
    }
    set(CheckId::kEffectiveness, r);
  }
  return report;
}

}  // namespace evolab::checker
