// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared test utilities: finite-difference gradient oracle, random program
// generation for gradient checks, and small tree builders.

#include <cmath>
#include <string>
#include <vector>

#include "evolab/dsl.hpp"
#include "evolab/rng.hpp"
#include "evolab/unit_tree.hpp"

namespace evolab::test {

inline Tensor random_tensor(Rng& rng, int64_t b, int64_t l, int64_t d, double lo = -1.0,
                            double hi = 1.0) {
  Tensor x({b, l, d});
  for (double& v : x.data) v = rng.uniform(lo, hi);
  return x;
}

// Loss evaluated through the forward path only, independent of the
// reverse-mode machinery under test.
inline double forward_loss(const dsl::Program& p, const Tensor& x, const NamedTensorMap& z,
                           const dsl::ParamValues& params, const dsl::LossSpec& loss) {
  const Tensor y = dsl::evaluate(p, x, z, params).y;
  if (loss.kind == dsl::LossSpec::Kind::kSumY) {
    double s = 0.0;
    for (double v : y.data) s += v;
    return s;
  }
  const int64_t b = y.shape[0], l = y.shape[1], d = y.shape[2];
  const double count = static_cast<double>(b * (l - 1));
  double total = 0.0;
  for (int64_t bi = 0; bi < b; ++bi) {
    for (int64_t li = 1; li < l; ++li) {
      double mx = y.at(bi, li, 0);
      for (int64_t di = 1; di < d; ++di) mx = std::max(mx, y.at(bi, li, di));
      double se = 0.0;
      for (int64_t di = 0; di < d; ++di) se += std::exp(y.at(bi, li, di) - mx);
      total += (mx + std::log(se) -
                y.at(bi, li, loss.targets[static_cast<size_t>(bi)][static_cast<size_t>(li)])) /
               count;
    }
  }
  return total;
}

// Central finite differences over every parameter element.
inline dsl::ParamValues fd_gradients(const dsl::Program& p, const Tensor& x,
                                     const NamedTensorMap& z, const dsl::ParamValues& params,
                                     const dsl::LossSpec& loss, double eps = 1e-5) {
  dsl::ParamValues grads;
  for (const auto& [name, value] : params) {
    Tensor g = value;
    for (double& v : g.data) v = 0.0;
    grads.emplace(name, std::move(g));
  }
  dsl::ParamValues work = params;
  for (auto& [name, value] : work) {
    for (size_t i = 0; i < value.data.size(); ++i) {
      const double saved = value.data[i];
      value.data[i] = saved + eps;
      const double up = forward_loss(p, x, z, work, loss);
      value.data[i] = saved - eps;
      const double down = forward_loss(p, x, z, work, loss);
      value.data[i] = saved;
      grads.at(name).data[i] = (up - down) / (2.0 * eps);
    }
  }
  return grads;
}

// max over elements of min(relative, absolute-floored) disagreement.
inline double gradient_disagreement(const dsl::ParamValues& a, const dsl::ParamValues& b) {
  double worst = 0.0;
  for (const auto& [name, ga] : a) {
    const Tensor& gb = b.at(name);
    for (size_t i = 0; i < ga.data.size(); ++i) {
      const double diff = std::abs(ga.data[i] - gb.data[i]);
      const double scale = std::max(std::abs(ga.data[i]), std::abs(gb.data[i]));
      if (diff <= 1e-8) continue;  // absolute floor
      worst = std::max(worst, diff / std::max(scale, 1e-8));
    }
  }
  return worst;
}

// Random straight-line program over the full primitive set; every parameter
// is guaranteed to feed Y.
inline std::string random_program_source(Rng& rng, int statements = 8) {
  std::vector<std::string> vars = {"X"};
  std::string out;
  int param_count = 0;
  auto fresh_param = [&](const char* kind, const std::string& init) {
    std::string name = "p" + std::to_string(param_count++);
    out += "param " + name + " " + kind + " " + init + "\n";
    return name;
  };
  int var_count = 0;
  auto pick_var = [&] { return vars[rng.below(vars.size())]; };
  std::string last = "X";
  for (int i = 0; i < statements; ++i) {
    const std::string target = "v" + std::to_string(var_count++);
    std::string rhs;
    switch (rng.below(10)) {
      case 0: rhs = "linear(" + pick_var() + ", " + fresh_param("dxd", "uniform(-0.4, 0.4)") + ")"; break;
      case 1: rhs = "bias(" + pick_var() + ", " + fresh_param("d", "uniform(-0.2, 0.2)") + ")"; break;
      case 2: rhs = "tanh(" + pick_var() + ")"; break;
      case 3: rhs = "sigmoid(" + pick_var() + ")"; break;
      case 4: rhs = "relu(" + pick_var() + ")"; break;
      case 5: rhs = "add(" + pick_var() + ", " + pick_var() + ")"; break;
      case 6: rhs = "mul(" + pick_var() + ", " + pick_var() + ")"; break;
      case 7: rhs = "cumsum(" + pick_var() + ")"; break;
      case 8: rhs = "norm(" + pick_var() + ")"; break;
      default:
        rhs = "scale(" + pick_var() + ", " + fresh_param("scalar", "uniform(0.2, 0.9)") + ")";
        break;
    }
    out += target + " = " + rhs + "\n";
    vars.push_back(target);
    last = target;
  }
  // Fold everything into Y so no variable (hence no parameter) dangles.
  std::string acc = last;
  int fold = 0;
  for (const auto& v : vars) {
    if (v == "X" || v == acc) continue;
    const std::string target = "f" + std::to_string(fold++);
    out += target + " = add(" + acc + ", " + v + ")\n";
    acc = target;
  }
  out += "Y = " + acc + "\n";
  return out;
}

inline tree::UnitNode leaf_unit(const std::string& name, const std::string& body) {
  tree::UnitNode node;
  node.decl.name = name;
  node.decl.requirements = "test unit";
  node.decl.inputs = {"X"};
  node.decl.outputs = {"Y"};
  node.body = body;
  return node;
}

inline tree::UnitTree single_unit_tree(const std::string& name, const std::string& body) {
  tree::UnitTree t;
  t.design_name = name;
  t.root = leaf_unit(name, body);
  return t;
}

}  // namespace evolab::test
