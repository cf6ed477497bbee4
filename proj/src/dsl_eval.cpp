// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "evolab/dsl.hpp"

namespace evolab::dsl {

namespace {

constexpr double kNormEps = 1e-5;

[[noreturn]] void shape_error(const std::string& message) {
  throw EvalError("ShapeMismatch", message);
}

void require_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) throw EvalError("NonFiniteValue", "non-finite value produced by " + what);
}

// Forward tape: every activation by name, in statement order.
struct Tape {
  int64_t b = 0, l = 0, d = 0;
  std::unordered_map<std::string, Tensor> vars;
  const ParamValues* params = nullptr;

  const Tensor& var(const std::string& name) const { return vars.at(name); }
  const Tensor& param(const std::string& name) const {
    auto it = params->find(name);
    if (it == params->end()) shape_error("missing value for parameter '" + name + "'");
    return it->second;
  }
};

void check_param_shape(const Tensor& value, ParamKind kind, int64_t d, const std::string& name) {
  const auto want = param_shape(kind, d);
  if (value.shape != want) shape_error("parameter '" + name + "' has the wrong shape");
}

Tensor apply_op(const Tape& tape, const Expr& e) {
  const int64_t b = tape.b, l = tape.l, d = tape.d;
  switch (e.op) {
    case OpKind::kAlias:
      return tape.var(e.args[0]);
    case OpKind::kLinear: {
      const Tensor& x = tape.var(e.args[0]);
      const Tensor& w = tape.param(e.param);
      check_param_shape(w, ParamKind::kMatDD, d, e.param);
      Tensor out({b, l, d});
      for (int64_t bi = 0; bi < b; ++bi) {
        for (int64_t li = 0; li < l; ++li) {
          const double* xs = &x.data[static_cast<size_t>((bi * l + li) * d)];
          double* os = &out.data[static_cast<size_t>((bi * l + li) * d)];
          for (int64_t j = 0; j < d; ++j) {
            const double xv = xs[j];
            if (xv == 0.0) continue;
            const double* wr = &w.data[static_cast<size_t>(j * d)];
            for (int64_t i = 0; i < d; ++i) os[i] += xv * wr[i];
          }
        }
      }
      return out;
    }
    case OpKind::kBias: {
      const Tensor& x = tape.var(e.args[0]);
      const Tensor& bias = tape.param(e.param);
      check_param_shape(bias, ParamKind::kVecD, d, e.param);
      Tensor out = x;
      for (int64_t bi = 0; bi < b; ++bi)
        for (int64_t li = 0; li < l; ++li)
          for (int64_t di = 0; di < d; ++di) out.at(bi, li, di) += bias.data[static_cast<size_t>(di)];
      return out;
    }
    case OpKind::kTanh: {
      Tensor out = tape.var(e.args[0]);
      for (double& v : out.data) v = std::tanh(v);
      return out;
    }
    case OpKind::kSigmoid: {
      Tensor out = tape.var(e.args[0]);
      for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
      return out;
    }
    case OpKind::kRelu: {
      Tensor out = tape.var(e.args[0]);
      for (double& v : out.data) v = v > 0.0 ? v : 0.0;
      return out;
    }
    case OpKind::kAdd:
    case OpKind::kMul: {
      const Tensor& a = tape.var(e.args[0]);
      const Tensor& c = tape.var(e.args[1]);
      if (!a.same_shape(c)) shape_error("operands of " + std::string(op_name(e.op)) + " differ in shape");
      Tensor out = a;
      if (e.op == OpKind::kAdd) {
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += c.data[i];
      } else {
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= c.data[i];
      }
      return out;
    }
    case OpKind::kCumsum: {
      const Tensor& x = tape.var(e.args[0]);
      Tensor out({b, l, d});
      for (int64_t bi = 0; bi < b; ++bi) {
        for (int64_t di = 0; di < d; ++di) {
          double acc = 0.0;
          for (int64_t li = 0; li < l; ++li) {
            acc += x.at(bi, li, di);
            out.at(bi, li, di) = acc;
          }
        }
      }
      return out;
    }
    case OpKind::kShift: {
      const Tensor& x = tape.var(e.args[0]);
      Tensor out({b, l, d});
      const int64_t k = e.shift_k;
      for (int64_t bi = 0; bi < b; ++bi)
        for (int64_t li = k; li < l; ++li)
          for (int64_t di = 0; di < d; ++di) out.at(bi, li, di) = x.at(bi, li - k, di);
      return out;
    }
    case OpKind::kMeanL: {
      const Tensor& x = tape.var(e.args[0]);
      Tensor out({b, l, d});
      for (int64_t bi = 0; bi < b; ++bi) {
        for (int64_t di = 0; di < d; ++di) {
          double acc = 0.0;
          for (int64_t li = 0; li < l; ++li) acc += x.at(bi, li, di);
          const double mean = acc / static_cast<double>(l);
          for (int64_t li = 0; li < l; ++li) out.at(bi, li, di) = mean;
        }
      }
      return out;
    }
    case OpKind::kScale: {
      const Tensor& x = tape.var(e.args[0]);
      double factor = e.constant;
      if (e.scale_uses_param) {
        const Tensor& p = tape.param(e.param);
        check_param_shape(p, ParamKind::kScalar, d, e.param);
        factor = p.data[0];
      }
      Tensor out = x;
      for (double& v : out.data) v *= factor;
      return out;
    }
    case OpKind::kNorm: {
      const Tensor& x = tape.var(e.args[0]);
      Tensor out({b, l, d});
      for (int64_t bi = 0; bi < b; ++bi) {
        for (int64_t li = 0; li < l; ++li) {
          double mean = 0.0;
          for (int64_t di = 0; di < d; ++di) mean += x.at(bi, li, di);
          mean /= static_cast<double>(d);
          double var = 0.0;
          for (int64_t di = 0; di < d; ++di) {
            const double c = x.at(bi, li, di) - mean;
            var += c * c;
          }
          var /= static_cast<double>(d);
          const double inv = 1.0 / std::sqrt(var + kNormEps);
          for (int64_t di = 0; di < d; ++di) out.at(bi, li, di) = (x.at(bi, li, di) - mean) * inv;
        }
      }
      return out;
    }
    case OpKind::kCall:
      throw Error("UnresolvedCall",
                  "program contains a call to '" + e.callee + "'; compose the tree first");
  }
  shape_error("unreachable op");
}

Tape run_forward(const Program& program, const Tensor& x, const NamedTensorMap& z,
                 const ParamValues& params) {
  if (x.shape.size() != 3) shape_error("X must have shape (B, L, D)");
  Tape tape;
  tape.b = x.shape[0];
  tape.l = x.shape[1];
  tape.d = x.shape[2];
  tape.params = &params;
  tape.vars.emplace("X", x);
  for (const auto& key : program.inputs) {
    auto it = z.find(key);
    if (it != z.end()) {
      if (it->second.shape != x.shape) shape_error("Z['" + key + "'] must match the shape of X");
      tape.vars.emplace(key, it->second);
    } else {
      tape.vars.emplace(key, Tensor(x.shape));  // absent keys read as zeros
    }
  }
  for (const auto& decl : program.params) {
    auto it = params.find(decl.name);
    if (it == params.end()) shape_error("missing value for parameter '" + decl.name + "'");
    check_param_shape(it->second, decl.kind, tape.d, decl.name);
  }
  for (const auto& line : program.body) {
    const auto* stmt = std::get_if<Statement>(&line);
    if (!stmt) continue;
    Tensor value = apply_op(tape, stmt->expr);
    require_finite(value, "'" + stmt->target + " = " + op_name(stmt->expr.op) + "(...)'");
    tape.vars.emplace(stmt->target, std::move(value));
  }
  return tape;
}

}  // namespace

std::vector<int64_t> param_shape(ParamKind kind, int64_t d) {
  switch (kind) {
    case ParamKind::kScalar: return {};
    case ParamKind::kVecD: return {d};
    case ParamKind::kMatDD: return {d, d};
  }
  return {};
}

ParamValues init_params(const Program& program, int64_t d, Rng& rng) {
  ParamValues out;
  for (const auto& decl : program.params) {
    Tensor t(param_shape(decl.kind, d));
    if (t.data.empty()) t.data.resize(1, 0.0);  // scalar: rank-0, one element
    if (!decl.init.zeros) {
      if (!std::isfinite(decl.init.lo) || !std::isfinite(decl.init.hi) || decl.init.lo > decl.init.hi) {
        throw EvalError("BadInitializer", "uniform bounds for '" + decl.name + "' are invalid");
      }
      for (double& v : t.data) v = rng.uniform(decl.init.lo, decl.init.hi);
    }
    out.emplace(decl.name, std::move(t));
  }
  return out;
}

EvalResult evaluate(const Program& program, const Tensor& x, const NamedTensorMap& z,
                    const ParamValues& params) {
  Tape tape = run_forward(program, x, z, params);
  EvalResult result;
  result.y = tape.var("Y");
  result.z_out = z;
  for (const auto& line : program.body) {
    if (const auto* ex = std::get_if<ExportStmt>(&line)) {
      result.z_out[ex->key] = tape.var(ex->var);
    }
  }
  return result;
}

namespace {

struct LossEval {
  double loss = 0.0;
  Tensor dy;
};

LossEval apply_loss(const LossSpec& loss, const Tensor& y) {
  LossEval out;
  out.dy = Tensor(y.shape);
  const int64_t b = y.shape[0], l = y.shape[1], d = y.shape[2];
  if (loss.kind == LossSpec::Kind::kSumY) {
    for (double v : y.data) out.loss += v;
    std::fill(out.dy.data.begin(), out.dy.data.end(), 1.0);
    return out;
  }
  // Mean cross-entropy over positions >= 1 against the copy targets.
  if (static_cast<int64_t>(loss.targets.size()) != b) {
    shape_error("loss targets must have one row per batch element");
  }
  const int64_t count = b * (l - 1);
  if (count <= 0) shape_error("copy cross-entropy needs L >= 2");
  for (int64_t bi = 0; bi < b; ++bi) {
    if (static_cast<int64_t>(loss.targets[static_cast<size_t>(bi)].size()) != l) {
      shape_error("loss target row length must equal L");
    }
    for (int64_t li = 1; li < l; ++li) {
      const int target = loss.targets[static_cast<size_t>(bi)][static_cast<size_t>(li)];
      if (target < 0 || target >= d) shape_error("loss target out of vocabulary range");
      double max_logit = y.at(bi, li, 0);
      for (int64_t di = 1; di < d; ++di) max_logit = std::max(max_logit, y.at(bi, li, di));
      double sum_exp = 0.0;
      for (int64_t di = 0; di < d; ++di) sum_exp += std::exp(y.at(bi, li, di) - max_logit);
      const double lse = max_logit + std::log(sum_exp);
      out.loss += (lse - y.at(bi, li, target)) / static_cast<double>(count);
      for (int64_t di = 0; di < d; ++di) {
        const double softmax = std::exp(y.at(bi, li, di) - lse);
        out.dy.at(bi, li, di) =
            (softmax - (di == target ? 1.0 : 0.0)) / static_cast<double>(count);
      }
    }
  }
  return out;
}

}  // namespace

GradResult gradients(const Program& program, const Tensor& x, const NamedTensorMap& z,
                     const ParamValues& params, const LossSpec& loss) {
  Tape tape = run_forward(program, x, z, params);
  const int64_t b = tape.b, l = tape.l, d = tape.d;

  GradResult result;
  for (const auto& decl : program.params) {
    Tensor g(param_shape(decl.kind, d));
    if (g.data.empty()) g.data.resize(1, 0.0);
    result.param_grads.emplace(decl.name, std::move(g));
  }

  LossEval seed = apply_loss(loss, tape.var("Y"));
  result.loss = seed.loss;

  std::unordered_map<std::string, Tensor> grads;
  grads.emplace("Y", std::move(seed.dy));
  auto grad_into = [&](const std::string& name, const Tensor& delta) {
    auto it = grads.find(name);
    if (it == grads.end()) {
      grads.emplace(name, delta);
    } else {
      for (size_t i = 0; i < delta.data.size(); ++i) it->second.data[i] += delta.data[i];
    }
  };

  for (auto it = program.body.rbegin(); it != program.body.rend(); ++it) {
    const auto* stmt = std::get_if<Statement>(&*it);
    if (!stmt) continue;  // exports carry no gradient: the loss reads Y only
    auto git = grads.find(stmt->target);
    if (git == grads.end()) continue;  // target never influences the loss
    const Tensor dy = std::move(git->second);
    grads.erase(git);
    const Expr& e = stmt->expr;
    switch (e.op) {
      case OpKind::kAlias:
        grad_into(e.args[0], dy);
        break;
      case OpKind::kLinear: {
        const Tensor& xin = tape.var(e.args[0]);
        const Tensor& w = tape.param(e.param);
        Tensor dx({b, l, d});
        Tensor& dw = result.param_grads.at(e.param);
        for (int64_t bi = 0; bi < b; ++bi) {
          for (int64_t li = 0; li < l; ++li) {
            const double* xs = &xin.data[static_cast<size_t>((bi * l + li) * d)];
            const double* ds = &dy.data[static_cast<size_t>((bi * l + li) * d)];
            double* dxs = &dx.data[static_cast<size_t>((bi * l + li) * d)];
            for (int64_t j = 0; j < d; ++j) {
              const double* wr = &w.data[static_cast<size_t>(j * d)];
              double* dwr = &dw.data[static_cast<size_t>(j * d)];
              double acc = 0.0;
              const double xv = xs[j];
              for (int64_t i = 0; i < d; ++i) {
                acc += ds[i] * wr[i];
                dwr[i] += xv * ds[i];
              }
              dxs[j] = acc;
            }
          }
        }
        grad_into(e.args[0], dx);
        break;
      }
      case OpKind::kBias: {
        Tensor& db = result.param_grads.at(e.param);
        for (int64_t bi = 0; bi < b; ++bi)
          for (int64_t li = 0; li < l; ++li)
            for (int64_t di = 0; di < d; ++di) db.data[static_cast<size_t>(di)] += dy.at(bi, li, di);
        grad_into(e.args[0], dy);
        break;
      }
      case OpKind::kTanh: {
        const Tensor& out = tape.var(stmt->target);
        Tensor dx = dy;
        for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= 1.0 - out.data[i] * out.data[i];
        grad_into(e.args[0], dx);
        break;
      }
      case OpKind::kSigmoid: {
        const Tensor& out = tape.var(stmt->target);
        Tensor dx = dy;
        for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= out.data[i] * (1.0 - out.data[i]);
        grad_into(e.args[0], dx);
        break;
      }
      case OpKind::kRelu: {
        const Tensor& xin = tape.var(e.args[0]);
        Tensor dx = dy;
        for (size_t i = 0; i < dx.data.size(); ++i) {
          if (xin.data[i] <= 0.0) dx.data[i] = 0.0;
        }
        grad_into(e.args[0], dx);
        break;
      }
      case OpKind::kAdd:
        grad_into(e.args[0], dy);
        grad_into(e.args[1], dy);
        break;
      case OpKind::kMul: {
        const Tensor& a = tape.var(e.args[0]);
        const Tensor& c = tape.var(e.args[1]);
        Tensor da = dy, dc = dy;
        for (size_t i = 0; i < dy.data.size(); ++i) {
          da.data[i] *= c.data[i];
          dc.data[i] *= a.data[i];
        }
        grad_into(e.args[0], da);
        grad_into(e.args[1], dc);
        break;
      }
      case OpKind::kCumsum: {
        Tensor dx({b, l, d});
        for (int64_t bi = 0; bi < b; ++bi) {
          for (int64_t di = 0; di < d; ++di) {
            double acc = 0.0;
            for (int64_t li = l - 1; li >= 0; --li) {
              acc += dy.at(bi, li, di);
              dx.at(bi, li, di) = acc;
            }
          }
        }
        grad_into(e.args[0], dx);
        break;
      }
      case OpKind::kShift: {
        Tensor dx({b, l, d});
        const int64_t k = e.shift_k;
        for (int64_t bi = 0; bi < b; ++bi)
          for (int64_t li = k; li < l; ++li)
            for (int64_t di = 0; di < d; ++di) dx.at(bi, li - k, di) += dy.at(bi, li, di);
        grad_into(e.args[0], dx);
        break;
      }
      case OpKind::kMeanL: {
        Tensor dx({b, l, d});
        for (int64_t bi = 0; bi < b; ++bi) {
          for (int64_t di = 0; di < d; ++di) {
            double acc = 0.0;
            for (int64_t li = 0; li < l; ++li) acc += dy.at(bi, li, di);
            const double g = acc / static_cast<double>(l);
            for (int64_t li = 0; li < l; ++li) dx.at(bi, li, di) = g;
          }
        }
        grad_into(e.args[0], dx);
        break;
      }
      case OpKind::kScale: {
        double factor = e.constant;
        if (e.scale_uses_param) {
          factor = tape.param(e.param).data[0];
          const Tensor& xin = tape.var(e.args[0]);
          double acc = 0.0;
          for (size_t i = 0; i < dy.data.size(); ++i) acc += dy.data[i] * xin.data[i];
          result.param_grads.at(e.param).data[0] += acc;
        }
        Tensor dx = dy;
        for (double& v : dx.data) v *= factor;
        grad_into(e.args[0], dx);
        break;
      }
      case OpKind::kNorm: {
        const Tensor& out = tape.var(stmt->target);
        const Tensor& xin = tape.var(e.args[0]);
        Tensor dx({b, l, d});
        for (int64_t bi = 0; bi < b; ++bi) {
          for (int64_t li = 0; li < l; ++li) {
            double mean = 0.0, var = 0.0;
            for (int64_t di = 0; di < d; ++di) mean += xin.at(bi, li, di);
            mean /= static_cast<double>(d);
            for (int64_t di = 0; di < d; ++di) {
              const double c = xin.at(bi, li, di) - mean;
              var += c * c;
            }
            var /= static_cast<double>(d);
            const double inv = 1.0 / std::sqrt(var + kNormEps);
            double mean_dy = 0.0, mean_dy_y = 0.0;
            for (int64_t di = 0; di < d; ++di) {
              mean_dy += dy.at(bi, li, di);
              mean_dy_y += dy.at(bi, li, di) * out.at(bi, li, di);
            }
            mean_dy /= static_cast<double>(d);
            mean_dy_y /= static_cast<double>(d);
            for (int64_t di = 0; di < d; ++di) {
              dx.at(bi, li, di) =
                  inv * (dy.at(bi, li, di) - mean_dy - out.at(bi, li, di) * mean_dy_y);
            }
          }
        }
        grad_into(e.args[0], dx);
        break;
      }
      case OpKind::kCall:
        throw Error("UnresolvedCall", "cannot differentiate an unresolved call");
    }
  }

  if (!std::isfinite(result.loss)) throw EvalError("NonFiniteGradient", "loss is not finite");
  for (const auto& [name, grad] : result.param_grads) {
    if (!grad.all_finite()) {
      throw EvalError("NonFiniteGradient", "gradient of '" + name + "' is not finite");
    }
  }
  return result;
}

uint64_t flops(const Program& program, int64_t b, int64_t l, int64_t d) {
  const uint64_t bld = static_cast<uint64_t>(b) * static_cast<uint64_t>(l) * static_cast<uint64_t>(d);
  uint64_t total = 0;
  for (const auto& line : program.body) {
    const auto* stmt = std::get_if<Statement>(&line);
    if (!stmt) continue;
    switch (stmt->expr.op) {
      case OpKind::kLinear: total += 2 * bld * static_cast<uint64_t>(d); break;
      case OpKind::kBias:
      case OpKind::kTanh:
      case OpKind::kSigmoid:
      case OpKind::kRelu:
      case OpKind::kAdd:
      case OpKind::kMul:
      case OpKind::kCumsum:
      case OpKind::kMeanL:
      case OpKind::kScale: total += bld; break;
      case OpKind::kNorm: total += 5 * bld; break;
      case OpKind::kAlias:
      case OpKind::kShift: break;  // data movement only
      case OpKind::kCall:
        throw Error("UnresolvedCall", "cannot count flops of an unresolved call");
    }
  }
  return total;
}

}  // namespace evolab::dsl
