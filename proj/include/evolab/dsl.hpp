// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal deterministic expression language for block bodies.
//
// Grammar (line oriented, '#' starts a comment, LF or CRLF endings):
//
//   input  <zkey>
//   param  <name> (scalar | d | dxd) (zeros | uniform(<lo>, <hi>))
//   <var>  = <op>(<args...>)  |  <var> = <other-var>
//   <var>  = call <UnitName>(<var>)          (unit fragments only)
//   export <zkey> = <var>
//
// Ops over (B, L, D) activations:
//   linear(x, W)   W: dxd parameter        bias(x, b)     b: d parameter
//   tanh(x) sigmoid(x) relu(x)             add(x, y) mul(x, y)
//   cumsum(x)      causal prefix sum over L
//   shift(x, k)    copy of x shifted k >= 1 positions along L, zero padded
//   mean_l(x)      mean over L broadcast back to every position (non-causal)
//   scale(x, c)    c: numeric literal or scalar parameter
//   norm(x)        layer normalization over D (eps 1e-5, no affine)
//
// The program binds Y exactly once. `input` keys read the caller's Z map
// (missing keys evaluate as zeros shaped like X, mirroring optional kwargs in
// the unit contract). `export` entries merge into the returned Z map,
// last writer wins.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "evolab/errors.hpp"
#include "evolab/rng.hpp"
#include "evolab/tensor.hpp"

namespace evolab::dsl {

class ParseError : public Error {
 public:
  ParseError(std::string kind, const std::string& message, int line, int column)
      : Error(std::move(kind),
              message + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

enum class OpKind {
  kAlias,
  kLinear,
  kBias,
  kTanh,
  kSigmoid,
  kRelu,
  kAdd,
  kMul,
  kCumsum,
  kShift,
  kMeanL,
  kScale,
  kNorm,
  kCall,
};

struct Expr {
  OpKind op = OpKind::kAlias;
  std::vector<std::string> args;  // tensor-variable operands
  std::string param;              // linear/bias weight, or scale's scalar parameter
  double constant = 0.0;          // scale literal
  bool scale_uses_param = false;
  int64_t shift_k = 1;
  std::string callee;  // call target unit name
};

struct Statement {
  std::string target;
  Expr expr;
};

struct ExportStmt {
  std::string key;
  std::string var;
};

using BodyLine = std::variant<Statement, ExportStmt>;

enum class ParamKind { kScalar, kVecD, kMatDD };

struct InitSpec {
  bool zeros = true;
  double lo = 0.0;
  double hi = 0.0;
};

struct ParamDecl {
  std::string name;
  ParamKind kind = ParamKind::kMatDD;
  InitSpec init;
};

struct Program {
  std::vector<std::string> inputs;
  std::vector<ParamDecl> params;
  std::vector<BodyLine> body;

  bool has_calls() const;
  std::vector<std::string> call_targets() const;  // in body order, duplicates preserved
  const ParamDecl* find_param(const std::string& name) const;
};

/// Parses source text. Rejects unknown ops, arity errors, rebinding and
/// unbound variables; requires exactly one Y binding.
Program parse(const std::string& source);

/// Canonical form: inputs, then params, then body, single spaces, LF endings.
/// parse(print(p)) reproduces p and print is idempotent.
std::string print(const Program& program);

using ParamValues = std::map<std::string, Tensor>;

struct EvalResult {
  Tensor y;
  NamedTensorMap z_out;  // caller Z merged with the program's exports
};

/// Deterministic forward evaluation. X must be rank (B, L, D); every Z value
/// and parameter must match its declared shape. Produces a NonFiniteValue
/// error the moment any statement yields NaN/Inf.
EvalResult evaluate(const Program& program, const Tensor& x, const NamedTensorMap& z,
                    const ParamValues& params);

struct LossSpec {
  enum class Kind { kSumY, kCopyCrossEntropy };
  Kind kind = Kind::kSumY;
  // Copy task targets, shape [B][L]; positions l == 0 are excluded from the
  // mean. Values index into the D (vocabulary) axis.
  std::vector<std::vector<int>> targets;

  static LossSpec sum_y() { return LossSpec{}; }
  static LossSpec copy_cross_entropy(std::vector<std::vector<int>> targets) {
    LossSpec spec;
    spec.kind = Kind::kCopyCrossEntropy;
    spec.targets = std::move(targets);
    return spec;
  }
};

struct GradResult {
  double loss = 0.0;
  ParamValues param_grads;  // exact zeros for parameters the loss never touches
};

/// Reverse-mode gradients of the scalar loss with respect to every declared
/// parameter.
GradResult gradients(const Program& program, const Tensor& x, const NamedTensorMap& z,
                     const ParamValues& params, const LossSpec& loss);

/// Symbolic FLOP count: linear 2*B*L*D^2; elementwise, cumsum and mean_l
/// B*L*D; norm 5*B*L*D; alias and shift are free.
uint64_t flops(const Program& program, int64_t b, int64_t l, int64_t d);

/// Materializes parameter tensors from their initializer specs.
ParamValues init_params(const Program& program, int64_t d, Rng& rng);

/// Shape of a declared parameter for embedding width d.
std::vector<int64_t> param_shape(ParamKind kind, int64_t d);

const char* op_name(OpKind op);

}  // namespace evolab::dsl
