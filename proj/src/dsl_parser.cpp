// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "evolab/dsl.hpp"

namespace evolab::dsl {

namespace {

const std::unordered_map<std::string, OpKind>& op_table() {
  static const std::unordered_map<std::string, OpKind> table = {
      {"linear", OpKind::kLinear}, {"bias", OpKind::kBias},     {"tanh", OpKind::kTanh},
      {"sigmoid", OpKind::kSigmoid}, {"relu", OpKind::kRelu},   {"add", OpKind::kAdd},
      {"mul", OpKind::kMul},       {"cumsum", OpKind::kCumsum}, {"shift", OpKind::kShift},
      {"mean_l", OpKind::kMeanL},  {"scale", OpKind::kScale},   {"norm", OpKind::kNorm},
  };
  return table;
}

bool is_reserved(const std::string& word) {
  static const std::unordered_set<std::string> reserved = {
      "input", "param", "export", "call", "scalar", "d",       "dxd",
      "zeros", "uniform", "X",     "linear", "bias", "tanh",   "sigmoid",
      "relu",  "add",    "mul",    "cumsum", "shift", "mean_l", "scale",
      "norm",
  };
  return reserved.count(word) > 0;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Single-line token cursor.
struct Cursor {
  const std::string& text;
  int line;
  size_t pos = 0;

  [[noreturn]] void fail(const std::string& kind, const std::string& message) const {
    throw ParseError(kind, message, line, static_cast<int>(pos) + 1);
  }

  void skip_spaces() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }

  bool at_end() {
    skip_spaces();
    return pos >= text.size();
  }

  bool peek_char(char c) {
    skip_spaces();
    return pos < text.size() && text[pos] == c;
  }

  void expect_char(char c, const std::string& what) {
    skip_spaces();
    if (pos >= text.size() || text[pos] != c) fail("SyntaxError", "expected '" + std::string(1, c) + "' " + what);
    ++pos;
  }

  std::string ident(const std::string& what) {
    skip_spaces();
    if (pos >= text.size() || !is_ident_start(text[pos])) fail("SyntaxError", "expected identifier " + what);
    size_t start = pos;
    while (pos < text.size() && is_ident_char(text[pos])) ++pos;
    return text.substr(start, pos - start);
  }

  double number(const std::string& what) {
    skip_spaces();
    size_t start = pos;
    if (pos < text.size() && (text[pos] == '-' || text[pos] == '+')) ++pos;
    while (pos < text.size() &&
           (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.' ||
            text[pos] == 'e' || text[pos] == 'E' ||
            ((text[pos] == '-' || text[pos] == '+') && pos > start &&
             (text[pos - 1] == 'e' || text[pos - 1] == 'E')))) {
      ++pos;
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data() + start, text.data() + pos, value);
    if (ec != std::errc() || ptr != text.data() + pos || pos == start) {
      pos = start;
      fail("SyntaxError", "expected number " + what);
    }
    return value;
  }

  bool looks_like_number() {
    skip_spaces();
    if (pos >= text.size()) return false;
    char c = text[pos];
    return std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.';
  }
};

struct ParserState {
  Program program;
  std::set<std::string> defined_vars;  // activations: X, inputs, statement targets
  std::set<std::string> param_names;
  std::set<std::string> exported_keys;
  bool saw_y = false;
  bool saw_statement = false;

  ParserState() { defined_vars.insert("X"); }
};

void check_fresh_name(Cursor& cur, const ParserState& st, const std::string& name) {
  if (is_reserved(name)) cur.fail("SyntaxError", "'" + name + "' is a reserved word");
  if (st.defined_vars.count(name) || st.param_names.count(name)) {
    cur.fail("Rebinding", "'" + name + "' is already bound");
  }
}

void require_var(Cursor& cur, const ParserState& st, const std::string& name) {
  if (st.param_names.count(name)) {
    cur.fail("SyntaxError", "'" + name + "' names a parameter, not a tensor variable");
  }
  if (!st.defined_vars.count(name)) cur.fail("UnboundVariable", "'" + name + "' is not defined");
}

void require_param(Cursor& cur, const ParserState& st, const std::string& name) {
  if (!st.param_names.count(name)) {
    cur.fail("UnboundVariable", "'" + name + "' is not a declared parameter");
  }
}

void parse_input(Cursor& cur, ParserState& st) {
  std::string key = cur.ident("after 'input'");
  check_fresh_name(cur, st, key);
  if (st.saw_statement) cur.fail("SyntaxError", "input declarations must precede statements");
  st.program.inputs.push_back(key);
  st.defined_vars.insert(key);
}

void parse_param(Cursor& cur, ParserState& st) {
  ParamDecl decl;
  decl.name = cur.ident("after 'param'");
  check_fresh_name(cur, st, decl.name);
  std::string kind = cur.ident("as parameter shape (scalar, d or dxd)");
  if (kind == "scalar") {
    decl.kind = ParamKind::kScalar;
  } else if (kind == "d") {
    decl.kind = ParamKind::kVecD;
  } else if (kind == "dxd") {
    decl.kind = ParamKind::kMatDD;
  } else {
    cur.fail("SyntaxError", "unknown parameter shape '" + kind + "'");
  }
  std::string init = cur.ident("as initializer (zeros or uniform)");
  if (init == "zeros") {
    decl.init.zeros = true;
  } else if (init == "uniform") {
    decl.init.zeros = false;
    cur.expect_char('(', "after 'uniform'");
    decl.init.lo = cur.number("as uniform lower bound");
    cur.expect_char(',', "between uniform bounds");
    decl.init.hi = cur.number("as uniform upper bound");
    cur.expect_char(')', "after uniform bounds");
  } else {
    cur.fail("SyntaxError", "unknown initializer '" + init + "'");
  }
  st.program.params.push_back(decl);
  st.param_names.insert(decl.name);
}

void parse_export(Cursor& cur, ParserState& st) {
  ExportStmt ex;
  ex.key = cur.ident("after 'export'");
  if (is_reserved(ex.key)) cur.fail("SyntaxError", "'" + ex.key + "' is a reserved word");
  if (st.exported_keys.count(ex.key)) cur.fail("Rebinding", "key '" + ex.key + "' exported twice");
  cur.expect_char('=', "in export");
  ex.var = cur.ident("as exported variable");
  require_var(cur, st, ex.var);
  st.exported_keys.insert(ex.key);
  st.program.body.push_back(ex);
}

Expr parse_call(Cursor& cur, ParserState& st) {
  Expr expr;
  expr.op = OpKind::kCall;
  expr.callee = cur.ident("as called unit name");
  cur.expect_char('(', "after unit name");
  std::string arg = cur.ident("as call argument");
  require_var(cur, st, arg);
  expr.args.push_back(arg);
  cur.expect_char(')', "after call argument");
  return expr;
}

Expr parse_op(Cursor& cur, ParserState& st, const std::string& head) {
  auto it = op_table().find(head);
  if (it == op_table().end()) {
    if (cur.peek_char('(')) cur.fail("UnknownOp", "unknown op '" + head + "'");
    // Plain identifier: alias.
    require_var(cur, st, head);
    Expr expr;
    expr.op = OpKind::kAlias;
    expr.args.push_back(head);
    return expr;
  }

  Expr expr;
  expr.op = it->second;
  cur.expect_char('(', "after op name");
  std::string first = cur.ident("as first operand");
  require_var(cur, st, first);
  expr.args.push_back(first);

  switch (expr.op) {
    case OpKind::kLinear:
    case OpKind::kBias: {
      cur.expect_char(',', "before parameter operand");
      expr.param = cur.ident("as parameter operand");
      require_param(cur, st, expr.param);
      break;
    }
    case OpKind::kAdd:
    case OpKind::kMul: {
      cur.expect_char(',', "before second operand");
      std::string second = cur.ident("as second operand");
      require_var(cur, st, second);
      expr.args.push_back(second);
      break;
    }
    case OpKind::kShift: {
      cur.expect_char(',', "before shift amount");
      double k = cur.number("as shift amount");
      expr.shift_k = static_cast<int64_t>(k);
      if (expr.shift_k < 1 || static_cast<double>(expr.shift_k) != k) {
        cur.fail("SyntaxError", "shift amount must be an integer >= 1");
      }
      break;
    }
    case OpKind::kScale: {
      cur.expect_char(',', "before scale factor");
      if (cur.looks_like_number()) {
        expr.constant = cur.number("as scale factor");
        expr.scale_uses_param = false;
      } else {
        expr.param = cur.ident("as scale parameter");
        require_param(cur, st, expr.param);
        expr.scale_uses_param = true;
      }
      break;
    }
    default:
      break;  // unary ops take a single operand
  }
  cur.expect_char(')', "after operands");
  return expr;
}

void parse_assignment(Cursor& cur, ParserState& st, const std::string& target) {
  if (target != "Y") check_fresh_name(cur, st, target);
  if (target == "Y" && st.saw_y) cur.fail("Rebinding", "Y is already bound");
  cur.expect_char('=', "in assignment");

  Statement stmt;
  stmt.target = target;
  std::string head = cur.ident("as op, variable or 'call'");
  if (head == "call") {
    stmt.expr = parse_call(cur, st);
  } else {
    stmt.expr = parse_op(cur, st, head);
  }
  st.saw_statement = true;
  if (target == "Y") {
    st.saw_y = true;
  } else {
    st.defined_vars.insert(target);
  }
  st.program.body.push_back(stmt);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

bool Program::has_calls() const {
  for (const auto& line : body) {
    if (const auto* stmt = std::get_if<Statement>(&line)) {
      if (stmt->expr.op == OpKind::kCall) return true;
    }
  }
  return false;
}

std::vector<std::string> Program::call_targets() const {
  std::vector<std::string> out;
  for (const auto& line : body) {
    if (const auto* stmt = std::get_if<Statement>(&line)) {
      if (stmt->expr.op == OpKind::kCall) out.push_back(stmt->expr.callee);
    }
  }
  return out;
}

const ParamDecl* Program::find_param(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Program parse(const std::string& source) {
  ParserState st;
  int line_no = 0;
  size_t offset = 0;
  while (offset <= source.size()) {
    size_t eol = source.find('\n', offset);
    std::string line = source.substr(offset, eol == std::string::npos ? std::string::npos : eol - offset);
    offset = (eol == std::string::npos) ? source.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);

    Cursor cur{line, line_no};
    if (cur.at_end()) continue;
    std::string head = cur.ident("at start of statement");
    if (head == "input") {
      parse_input(cur, st);
    } else if (head == "param") {
      parse_param(cur, st);
    } else if (head == "export") {
      parse_export(cur, st);
    } else {
      parse_assignment(cur, st, head);
    }
    if (!cur.at_end()) cur.fail("SyntaxError", "trailing characters");
  }
  if (!st.saw_y) {
    throw ParseError("SyntaxError", "program never binds Y", line_no, 1);
  }
  return st.program;
}

std::string print(const Program& program) {
  std::ostringstream out;
  for (const auto& key : program.inputs) out << "input " << key << "\n";
  for (const auto& p : program.params) {
    out << "param " << p.name << ' ';
    switch (p.kind) {
      case ParamKind::kScalar: out << "scalar"; break;
      case ParamKind::kVecD: out << "d"; break;
      case ParamKind::kMatDD: out << "dxd"; break;
    }
    if (p.init.zeros) {
      out << " zeros\n";
    } else {
      out << " uniform(" << format_double(p.init.lo) << ", " << format_double(p.init.hi) << ")\n";
    }
  }
  for (const auto& line : program.body) {
    if (const auto* ex = std::get_if<ExportStmt>(&line)) {
      out << "export " << ex->key << " = " << ex->var << "\n";
      continue;
    }
    const auto& stmt = std::get<Statement>(line);
    const Expr& e = stmt.expr;
    out << stmt.target << " = ";
    switch (e.op) {
      case OpKind::kAlias:
        out << e.args[0];
        break;
      case OpKind::kCall:
        out << "call " << e.callee << "(" << e.args[0] << ")";
        break;
      case OpKind::kLinear:
      case OpKind::kBias:
        out << op_name(e.op) << "(" << e.args[0] << ", " << e.param << ")";
        break;
      case OpKind::kAdd:
      case OpKind::kMul:
        out << op_name(e.op) << "(" << e.args[0] << ", " << e.args[1] << ")";
        break;
      case OpKind::kShift:
        out << "shift(" << e.args[0] << ", " << e.shift_k << ")";
        break;
      case OpKind::kScale:
        out << "scale(" << e.args[0] << ", "
            << (e.scale_uses_param ? e.param : format_double(e.constant)) << ")";
        break;
      default:
        out << op_name(e.op) << "(" << e.args[0] << ")";
        break;
    }
    out << "\n";
  }
  return out.str();
}

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kAlias: return "alias";
    case OpKind::kLinear: return "linear";
    case OpKind::kBias: return "bias";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kRelu: return "relu";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kCumsum: return "cumsum";
    case OpKind::kShift: return "shift";
    case OpKind::kMeanL: return "mean_l";
    case OpKind::kScale: return "scale";
    case OpKind::kNorm: return "norm";
    case OpKind::kCall: return "call";
  }
  return "?";
}

}  // namespace evolab::dsl
