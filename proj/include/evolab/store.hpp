// SPDX-License-Identifier: Apache-2.0
#pragma once

// The evolution tree: lineage-linked design records with fitness/confidence
// accounting, persisted as an append-only JSON-Lines event log with per-line
// CRC-32 checksums. The store is the single synchronization point of the
// system: all mutating operations are serialized behind one mutex and every
// state change is an event, so replaying a log reconstructs the store exactly.

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evolab/errors.hpp"
#include "evolab/unit_tree.hpp"

namespace evolab::store {

class StoreError : public Error {
 public:
  using Error::Error;
};

enum class Status { kProposed, kImplemented, kVerified, kErroneous };
const char* status_name(Status s);
Status status_from_name(const std::string& name);

using TaskScores = std::map<std::string, double>;

struct DesignRecord {
  std::string id;
  tree::UnitTree design;
  std::string program;  // canonical composed program text
  std::vector<std::string> parents;
  std::string op;  // "seed", "mutation", "crossover" or "scratch"
  double quality = 0.0;
  int round = 0;
  bool is_seed = false;
  std::string selection_branch;  // audit tag: how the parents were selected
  Status status = Status::kProposed;
  int error_count = 0;
  uint64_t added_seq = 0;
  uint64_t first_verified_seq = 0;                // 0 while unverified
  std::map<std::string, TaskScores> results;      // scale -> task -> score
};

struct EvoEvent {
  uint64_t seq = 0;
  std::string kind;  // DesignAdded | VerificationRecorded | StatusChanged
  nlohmann::ordered_json payload;
};

struct DesignInput {
  std::string id;
  tree::UnitTree design;
  std::string program;
  std::vector<std::string> parents;
  std::string op = "scratch";
  double quality = 0.0;
  int round = 0;
  bool is_seed = false;
  std::string selection_branch;
};

class EvoStore {
 public:
  EvoStore() = default;
  EvoStore(const EvoStore&) = delete;
  EvoStore& operator=(const EvoStore&) = delete;

  /// Attaches a log file; the schema header is written immediately and every
  /// event is flushed when appended.
  void open_log(const std::string& path);

  std::string add_design(const DesignInput& input);
  /// Stores one scale's task scores, bumps confidence by one, recomputes
  /// fitness. Scores must lie in [0, 1]. `selection_branch` is an audit tag
  /// recorded in the event payload.
  void record_verification(const std::string& id, const std::string& scale,
                           const TaskScores& scores, const std::string& selection_branch = "");
  void set_status(const std::string& id, Status status);
  /// Counts one failed verification run; the design turns erroneous once
  /// `threshold` failures accumulate.
  void record_verification_error(const std::string& id, int threshold);

  double fitness(const std::string& id) const;  // flat mean over (scale, task) pairs
  int confidence(const std::string& id) const;  // number of verified scales
  DesignRecord record(const std::string& id) const;
  bool contains(const std::string& id) const;
  std::vector<std::string> design_ids() const;  // insertion order
  std::vector<DesignRecord> all_records() const;
  std::map<std::string, int> used_per_scale() const;  // successful verifications
  uint64_t event_count() const;
  std::vector<EvoEvent> events() const;

  /// SHA-256 over a canonical dump of every record; equal digests mean equal
  /// state.
  std::string state_digest() const;

 private:
  void append_event(const std::string& kind, nlohmann::ordered_json payload);
  void apply_event(const EvoEvent& event);
  const DesignRecord& record_ref(const std::string& id) const;

  friend EvoStore& replay_into(EvoStore& store, const std::string& text);

  mutable std::mutex mutex_;
  std::map<std::string, DesignRecord> records_;
  std::vector<std::string> order_;
  std::vector<EvoEvent> events_;
  uint64_t next_seq_ = 1;
  std::unique_ptr<std::ofstream> log_;
};

std::string event_to_line(const EvoEvent& event);

/// Rebuilds a store from a log file. Detects sequence gaps, checksum
/// mismatches and malformed lines (CorruptLog). An unterminated final line is
/// treated as a crash remnant and dropped.
std::unique_ptr<EvoStore> replay(const std::string& path);
std::unique_ptr<EvoStore> replay_text(const std::string& text);

}  // namespace evolab::store
