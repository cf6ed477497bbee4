// SPDX-License-Identifier: Apache-2.0
#pragma once

// Block designs as trees of generalized autoregressive units. Every unit maps
// (X, Z) -> (Y, Z') over (B, L, D) activations; a body invokes its declared
// children by name and receives the child's Y, with the child's exports merged
// into the ambient Z stream (last writer wins). Composition inlines the whole
// tree into one flat, executable DSL program.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evolab/dsl.hpp"
#include "evolab/errors.hpp"

namespace evolab::tree {

class TreeError : public Error {
 public:
  using Error::Error;
};

struct UnitDecl {
  std::string name;
  std::string requirements;
  std::vector<std::string> inputs;   // Z keys the unit reads (X is implicit)
  std::vector<std::string> outputs;  // Z keys the unit exports (Y is implicit)

  bool operator==(const UnitDecl&) const = default;
};

struct UnitNode {
  UnitDecl decl;
  std::optional<std::string> body;  // DSL fragment source; nullopt marks a placeholder
  std::vector<UnitNode> children;
  bool is_protected = false;

  bool is_placeholder() const { return !body.has_value(); }
};

struct UnitTree {
  std::string design_name;
  UnitNode root;
};

/// Structural sanity problems (empty names, duplicate unit names, invalid
/// identifiers). Empty means the tree is well formed.
std::vector<std::string> structural_problems(const UnitTree& tree);
void require_valid(const UnitTree& tree);

const UnitNode* find_unit(const UnitTree& tree, const std::string& name);
UnitNode* find_unit(UnitTree& tree, const std::string& name);
int count_units(const UnitTree& tree);

/// Multiset of unit names, one entry per occurrence.
std::map<std::string, int> unit_bag(const UnitTree& tree);

/// Compose provenance: enough structure to re-factorize the flat program back
/// into the original unit boundaries.
struct UnitTrace {
  UnitDecl decl;
  bool is_protected = false;
  bool placeholder = false;
  std::string parent;  // empty for the root
  std::string x_var;   // flat variable bound to this unit's X
  std::string y_var;   // flat variable holding this unit's Y

  struct Event {
    enum class Kind { kStmt, kCall, kExport };
    Kind kind = Kind::kStmt;
    size_t flat_index = 0;     // kStmt: index into the flat program body
    std::string callee;        // kCall
    std::string local_target;  // kCall: body-local variable bound to the child's Y
    std::string flat_arg;      // kCall: flat variable passed as the child's X
    std::string key;           // kExport
    std::string flat_var;      // kExport: flat variable exported
  };
  std::vector<Event> events;
  std::vector<std::string> child_order;
  std::map<std::string, std::string> imports;  // keys read from the caller's Z
  // Every input key with the flat variable bound to it, in declaration order.
  std::vector<std::pair<std::string, std::string>> z_reads;
};

struct ComposedProgram {
  std::string design_name;
  dsl::Program program;
  std::vector<UnitTrace> units;  // preorder
};

/// Inlines the tree into a single executable program. Placeholder units
/// compose as the identity on (X, Z). Throws DuplicateUnitName, DanglingChild,
/// or the body's parse error.
ComposedProgram compose(const UnitTree& tree);

/// Re-factorizes a composed program by its unit boundaries. For any valid
/// tree, decompose(compose(t)) is structurally identical to t.
UnitTree decompose(const ComposedProgram& composed);

/// True when the trees match up to child-list order (bodies compared in
/// canonical printed form).
bool structurally_equal(const UnitTree& a, const UnitTree& b);

/// SHA-256 digest over a canonical serialization; stable across construction
/// order and runs. Lowercase hex.
std::string canonical_hash(const UnitTree& tree);

/// JSON document (schema_version 1) round trip.
std::string to_json(const UnitTree& tree);
UnitTree tree_from_json(const std::string& text);

}  // namespace evolab::tree
