// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "evolab/digest.hpp"
#include "evolab/unit_tree.hpp"

namespace evolab::tree {

namespace {

bool valid_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

void walk(const UnitNode& node, const auto& fn) {
  fn(node);
  for (const auto& child : node.children) walk(child, fn);
}

}  // namespace

std::vector<std::string> structural_problems(const UnitTree& tree) {
  std::vector<std::string> problems;
  if (tree.design_name.empty()) problems.push_back("design_name is empty");
  std::set<std::string> seen;
  walk(tree.root, [&](const UnitNode& node) {
    if (!valid_identifier(node.decl.name)) {
      problems.push_back("unit name '" + node.decl.name + "' is not a valid identifier");
    } else if (!seen.insert(node.decl.name).second) {
      problems.push_back("duplicate unit name '" + node.decl.name + "'");
    }
    for (const auto& in : node.decl.inputs) {
      if (!valid_identifier(in)) {
        problems.push_back("unit '" + node.decl.name + "' declares invalid input '" + in + "'");
      }
    }
    for (const auto& out : node.decl.outputs) {
      if (!valid_identifier(out)) {
        problems.push_back("unit '" + node.decl.name + "' declares invalid output '" + out + "'");
      }
    }
  });
  return problems;
}

void require_valid(const UnitTree& tree) {
  auto problems = structural_problems(tree);
  if (problems.empty()) return;
  const bool dup = problems.front().rfind("duplicate", 0) == 0;
  throw TreeError(dup ? "DuplicateUnitName" : "InvalidDecl", problems.front());
}

const UnitNode* find_unit(const UnitTree& tree, const std::string& name) {
  const UnitNode* found = nullptr;
  walk(tree.root, [&](const UnitNode& node) {
    if (!found && node.decl.name == name) found = &node;
  });
  return found;
}

UnitNode* find_unit(UnitTree& tree, const std::string& name) {
  return const_cast<UnitNode*>(find_unit(static_cast<const UnitTree&>(tree), name));
}

int count_units(const UnitTree& tree) {
  int n = 0;
  walk(tree.root, [&](const UnitNode&) { ++n; });
  return n;
}

std::map<std::string, int> unit_bag(const UnitTree& tree) {
  std::map<std::string, int> bag;
  walk(tree.root, [&](const UnitNode& node) { ++bag[node.decl.name]; });
  return bag;
}

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

namespace {

struct ComposeState {
  ComposedProgram out;
  std::map<std::string, std::string> zenv;          // key -> flat var of latest export
  std::set<std::string> flat_names;                 // all flat variable names
  std::vector<std::pair<std::string, std::string>> final_exports;  // key -> flat var
};

std::string fresh_flat_name(ComposeState& st, std::string base) {
  while (st.flat_names.count(base)) base += "_zin";
  st.flat_names.insert(base);
  return base;
}

// Inlines `node` with its X bound to flat variable `x_var`; returns the flat
// variable carrying the unit's Y.
std::string inline_unit(ComposeState& st, const UnitNode& node, const std::string& x_var,
                        const std::string& parent) {
  UnitTrace trace;
  trace.decl = node.decl;
  trace.is_protected = node.is_protected;
  trace.placeholder = node.is_placeholder();
  trace.parent = parent;
  trace.x_var = x_var;
  for (const auto& child : node.children) trace.child_order.push_back(child.decl.name);

  if (node.is_placeholder()) {
    trace.y_var = x_var;  // identity on (X, Z)
    st.out.units.push_back(std::move(trace));
    return x_var;
  }

  const dsl::Program body = dsl::parse(*node.body);
  const std::string prefix = node.decl.name + "__";

  std::map<std::string, std::string> local;  // body var -> flat var
  local.emplace("X", x_var);
  for (const auto& key : body.inputs) {
    auto env = st.zenv.find(key);
    if (env != st.zenv.end()) {
      // Bound to an earlier unit's export.
      local.emplace(key, env->second);
      trace.z_reads.emplace_back(key, env->second);
    } else {
      // Caller-supplied Z key: surface it as a flat program input.
      auto already = std::find(st.out.program.inputs.begin(), st.out.program.inputs.end(), key);
      std::string flat;
      if (already != st.out.program.inputs.end()) {
        flat = key;
      } else {
        flat = fresh_flat_name(st, key);
        st.out.program.inputs.push_back(flat);
      }
      local.emplace(key, flat);
      trace.imports.emplace(key, flat);
      trace.z_reads.emplace_back(key, flat);
    }
  }
  std::map<std::string, std::string> local_params;
  for (const auto& p : body.params) {
    dsl::ParamDecl flat = p;
    flat.name = prefix + p.name;
    st.flat_names.insert(flat.name);
    st.out.program.params.push_back(flat);
    local_params.emplace(p.name, flat.name);
  }

  const size_t trace_slot = st.out.units.size();
  st.out.units.push_back(std::move(trace));

  for (const auto& line : body.body) {
    if (const auto* ex = std::get_if<dsl::ExportStmt>(&line)) {
      UnitTrace::Event ev;
      ev.kind = UnitTrace::Event::Kind::kExport;
      ev.key = ex->key;
      ev.flat_var = local.at(ex->var);
      st.zenv[ex->key] = ev.flat_var;
      st.out.units[trace_slot].events.push_back(std::move(ev));
      continue;
    }
    const auto& stmt = std::get<dsl::Statement>(line);
    if (stmt.expr.op == dsl::OpKind::kCall) {
      auto child_it = std::find_if(node.children.begin(), node.children.end(), [&](const UnitNode& c) {
        return c.decl.name == stmt.expr.callee;
      });
      if (child_it == node.children.end()) {
        throw TreeError("DanglingChild", "unit '" + node.decl.name + "' calls undeclared child '" +
                                             stmt.expr.callee + "'");
      }
      UnitTrace::Event ev;
      ev.kind = UnitTrace::Event::Kind::kCall;
      ev.callee = stmt.expr.callee;
      ev.local_target = stmt.target;
      ev.flat_arg = local.at(stmt.expr.args[0]);
      st.out.units[trace_slot].events.push_back(ev);

      const std::string child_y = inline_unit(st, *child_it, ev.flat_arg, node.decl.name);
      // Bind the call result to a unit-scoped alias so the flat program keeps
      // an unambiguous name for it (a placeholder child's Y is its own X).
      dsl::Statement bind;
      bind.target = fresh_flat_name(st, prefix + stmt.target);
      bind.expr.op = dsl::OpKind::kAlias;
      bind.expr.args.push_back(child_y);
      local[stmt.target] = bind.target;
      st.out.program.body.push_back(std::move(bind));
      continue;
    }

    dsl::Statement flat = stmt;
    flat.target = fresh_flat_name(st, prefix + stmt.target);
    for (auto& arg : flat.expr.args) arg = local.at(arg);
    if (!flat.expr.param.empty()) flat.expr.param = local_params.at(flat.expr.param);
    local[stmt.target] = flat.target;

    UnitTrace::Event ev;
    ev.kind = UnitTrace::Event::Kind::kStmt;
    ev.flat_index = st.out.program.body.size();
    st.out.units[trace_slot].events.push_back(ev);
    st.out.program.body.push_back(std::move(flat));
  }

  st.out.units[trace_slot].y_var = local.at("Y");
  return st.out.units[trace_slot].y_var;
}

}  // namespace

ComposedProgram compose(const UnitTree& tree) {
  require_valid(tree);
  ComposeState st;
  st.out.design_name = tree.design_name;
  st.flat_names.insert("X");

  const std::string y = inline_unit(st, tree.root, "X", "");
  dsl::Statement bind_y;
  bind_y.target = "Y";
  bind_y.expr.op = dsl::OpKind::kAlias;
  bind_y.expr.args.push_back(y);
  st.out.program.body.push_back(std::move(bind_y));

  // Final exports, one per key, in sorted key order (zenv is an ordered map).
  for (const auto& [key, var] : st.zenv) {
    dsl::ExportStmt ex;
    ex.key = key;
    ex.var = var;
    st.out.program.body.push_back(std::move(ex));
  }
  return st.out;
}

// ---------------------------------------------------------------------------
// Decomposition
// ---------------------------------------------------------------------------

namespace {

struct Decomposer {
  const ComposedProgram& composed;
  std::unordered_map<std::string, const UnitTrace*> by_name;
  std::unordered_map<std::string, std::string> flat_y_to_unit;  // flat y var -> unit name

  explicit Decomposer(const ComposedProgram& c) : composed(c) {
    for (const auto& u : c.units) {
      by_name.emplace(u.decl.name, &u);
    }
  }

  std::string unrename(const UnitTrace& unit, const std::string& flat) const {
    if (flat == unit.x_var) return "X";
    const std::string prefix = unit.decl.name + "__";
    if (flat.rfind(prefix, 0) == 0) return flat.substr(prefix.size());
    for (const auto& [key, var] : unit.z_reads) {
      if (var == flat) return key;
    }
    throw TreeError("CorruptComposition",
                    "cannot resolve flat variable '" + flat + "' in unit '" + unit.decl.name + "'");
  }

  UnitNode rebuild(const std::string& name) const {
    const UnitTrace& unit = *by_name.at(name);
    UnitNode node;
    node.decl = unit.decl;
    node.is_protected = unit.is_protected;
    if (!unit.placeholder) {
      std::ostringstream body;
      for (const auto& key : unit.z_reads) body << "input " << key.first << "\n";
      const std::string prefix = unit.decl.name + "__";
      for (const auto& ev : unit.events) {
        switch (ev.kind) {
          case UnitTrace::Event::Kind::kStmt: {
            const auto& stmt = std::get<dsl::Statement>(composed.program.body[ev.flat_index]);
            dsl::Statement local = stmt;
            local.target = stmt.target.substr(prefix.size());
            for (auto& arg : local.expr.args) arg = unrename(unit, arg);
            if (!local.expr.param.empty()) local.expr.param = local.expr.param.substr(prefix.size());
            dsl::Program tmp;
            tmp.body.push_back(local);
            // Reuse the canonical printer for a single line.
            std::string text = dsl::print(tmp);
            body << text;
            break;
          }
          case UnitTrace::Event::Kind::kCall:
            body << ev.local_target << " = call " << ev.callee << "(" << unrename(unit, ev.flat_arg)
                 << ")\n";
            break;
          case UnitTrace::Event::Kind::kExport:
            body << "export " << ev.key << " = " << unrename(unit, ev.flat_var) << "\n";
            break;
        }
      }
      // Parameter declarations, in flat order, restricted to this unit.
      std::ostringstream decls;
      for (const auto& p : composed.program.params) {
        if (p.name.rfind(prefix, 0) != 0) continue;
        dsl::Program tmp;
        dsl::ParamDecl local = p;
        local.name = p.name.substr(prefix.size());
        tmp.params.push_back(local);
        decls << dsl::print(tmp);
      }
      node.body = decls.str() + body.str();
    }
    for (const auto& child_name : unit.child_order) node.children.push_back(rebuild(child_name));
    return node;
  }
};

}  // namespace

UnitTree decompose(const ComposedProgram& composed) {
  if (composed.units.empty()) throw TreeError("CorruptComposition", "no units recorded");
  Decomposer d(composed);
  UnitTree tree;
  tree.design_name = composed.design_name;
  tree.root = d.rebuild(composed.units.front().decl.name);
  return tree;
}

// ---------------------------------------------------------------------------
// Identity
// ---------------------------------------------------------------------------

namespace {

std::string canonical_body(const UnitNode& node) {
  if (node.is_placeholder()) return "<placeholder>";
  try {
    return dsl::print(dsl::parse(*node.body));
  } catch (const dsl::ParseError&) {
    return *node.body;  // unparseable bodies hash by raw text
  }
}

void canonical_serialize(const UnitNode& node, std::ostream& out) {
  out << "(unit " << node.decl.name << "\n";
  out << " req " << node.decl.requirements << "\n";
  out << " in";
  for (const auto& i : node.decl.inputs) out << ' ' << i;
  out << "\n out";
  for (const auto& o : node.decl.outputs) out << ' ' << o;
  out << "\n protected " << (node.is_protected ? 1 : 0) << "\n";
  out << " body<<<\n" << canonical_body(node) << ">>>\n";
  std::vector<const UnitNode*> kids;
  for (const auto& c : node.children) kids.push_back(&c);
  std::sort(kids.begin(), kids.end(),
            [](const UnitNode* a, const UnitNode* b) { return a->decl.name < b->decl.name; });
  for (const UnitNode* c : kids) canonical_serialize(*c, out);
  out << ")\n";
}

bool node_equal(const UnitNode& a, const UnitNode& b) {
  if (a.decl != b.decl || a.is_protected != b.is_protected ||
      a.is_placeholder() != b.is_placeholder()) {
    return false;
  }
  if (!a.is_placeholder() && canonical_body(a) != canonical_body(b)) return false;
  if (a.children.size() != b.children.size()) return false;
  auto sorted = [](const UnitNode& n) {
    std::vector<const UnitNode*> kids;
    for (const auto& c : n.children) kids.push_back(&c);
    std::sort(kids.begin(), kids.end(),
              [](const UnitNode* x, const UnitNode* y) { return x->decl.name < y->decl.name; });
    return kids;
  };
  auto ka = sorted(a), kb = sorted(b);
  for (size_t i = 0; i < ka.size(); ++i) {
    if (!node_equal(*ka[i], *kb[i])) return false;
  }
  return true;
}

}  // namespace

bool structurally_equal(const UnitTree& a, const UnitTree& b) {
  return a.design_name == b.design_name && node_equal(a.root, b.root);
}

std::string canonical_hash(const UnitTree& tree) {
  std::ostringstream out;
  out << "(design " << tree.design_name << "\n";
  canonical_serialize(tree.root, out);
  out << ")\n";
  return sha256_hex(out.str());
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

using json = nlohmann::ordered_json;

json unit_to_json(const UnitNode& node) {
  json j;
  j["name"] = node.decl.name;
  j["requirements"] = node.decl.requirements;
  j["inputs"] = node.decl.inputs;
  j["outputs"] = node.decl.outputs;
  j["protected"] = node.is_protected;
  if (node.body.has_value()) {
    j["body"] = *node.body;
  } else {
    j["body"] = nullptr;
  }
  json kids = json::array();
  for (const auto& c : node.children) kids.push_back(unit_to_json(c));
  j["children"] = std::move(kids);
  return j;
}

UnitNode unit_from_json(const json& j) {
  UnitNode node;
  node.decl.name = j.at("name").get<std::string>();
  node.decl.requirements = j.value("requirements", std::string{});
  node.decl.inputs = j.value("inputs", std::vector<std::string>{});
  node.decl.outputs = j.value("outputs", std::vector<std::string>{});
  node.is_protected = j.value("protected", false);
  if (j.contains("body") && !j.at("body").is_null()) {
    node.body = j.at("body").get<std::string>();
  }
  for (const auto& c : j.value("children", json::array())) node.children.push_back(unit_from_json(c));
  return node;
}

}  // namespace

std::string to_json(const UnitTree& tree) {
  json j;
  j["schema_version"] = 1;
  j["design_name"] = tree.design_name;
  j["root"] = unit_to_json(tree.root);
  return j.dump(2) + "\n";
}

UnitTree tree_from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.value("schema_version", 0) != 1) {
    throw TreeError("BadSchema", "unsupported tree schema_version");
  }
  UnitTree tree;
  tree.design_name = j.at("design_name").get<std::string>();
  tree.root = unit_from_json(j.at("root"));
  return tree;
}

}  // namespace evolab::tree
