// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evolab/digest.hpp"
#include "evolab/store.hpp"

namespace evolab::store {

namespace {

using nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

std::string crc_hex(std::string_view bytes) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", crc32_of(bytes));
  return buf;
}

ordered_json record_payload(const DesignInput& input) {
  ordered_json p;
  p["design_id"] = input.id;
  p["tree"] = ordered_json::parse(tree::to_json(input.design));
  p["program"] = input.program;
  p["parents"] = input.parents;
  p["op"] = input.op;
  p["quality"] = input.quality;
  p["round"] = input.round;
  p["is_seed"] = input.is_seed;
  p["selection_branch"] = input.selection_branch;
  return p;
}

}  // namespace

const char* status_name(Status s) {
  switch (s) {
    case Status::kProposed: return "proposed";
    case Status::kImplemented: return "implemented";
    case Status::kVerified: return "verified";
    case Status::kErroneous: return "erroneous";
  }
  return "?";
}

Status status_from_name(const std::string& name) {
  if (name == "proposed") return Status::kProposed;
  if (name == "implemented") return Status::kImplemented;
  if (name == "verified") return Status::kVerified;
  if (name == "erroneous") return Status::kErroneous;
  throw StoreError("CorruptLog", "unknown status '" + name + "'");
}

void EvoStore::open_log(const std::string& path) {
  std::lock_guard lock(mutex_);
  log_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
  if (!log_->good()) throw StoreError("IoError", "cannot open log file '" + path + "'");
  ordered_json header;
  header["schema_version"] = kSchemaVersion;
  (*log_) << header.dump() << "\n";
  log_->flush();
}

std::string event_to_line(const EvoEvent& event) {
  ordered_json j;
  j["seq"] = event.seq;
  j["kind"] = event.kind;
  j["payload"] = event.payload;
  const std::string body = j.dump();
  j["crc"] = crc_hex(body);
  return j.dump();
}

void EvoStore::append_event(const std::string& kind, ordered_json payload) {
  EvoEvent event;
  event.seq = next_seq_++;
  event.kind = kind;
  event.payload = std::move(payload);
  apply_event(event);
  if (log_) {
    (*log_) << event_to_line(event) << "\n";
    log_->flush();
  }
  events_.push_back(std::move(event));
}

void EvoStore::apply_event(const EvoEvent& event) {
  if (event.kind == "DesignAdded") {
    const auto& p = event.payload;
    DesignRecord rec;
    rec.id = p.at("design_id").get<std::string>();
    rec.design = tree::tree_from_json(p.at("tree").dump());
    rec.program = p.at("program").get<std::string>();
    rec.parents = p.at("parents").get<std::vector<std::string>>();
    rec.op = p.at("op").get<std::string>();
    rec.quality = p.at("quality").get<double>();
    rec.round = p.at("round").get<int>();
    rec.is_seed = p.at("is_seed").get<bool>();
    rec.selection_branch = p.at("selection_branch").get<std::string>();
    rec.status = Status::kProposed;
    rec.added_seq = event.seq;
    records_.emplace(rec.id, rec);
    order_.push_back(rec.id);
  } else if (event.kind == "VerificationRecorded") {
    const auto& p = event.payload;
    DesignRecord& rec = records_.at(p.at("design_id").get<std::string>());
    const std::string scale = p.at("scale").get<std::string>();
    TaskScores scores;
    for (const auto& [task, score] : p.at("scores").items()) {
      scores.emplace(task, score.get<double>());
    }
    rec.results.emplace(scale, std::move(scores));
    if (rec.first_verified_seq == 0) rec.first_verified_seq = event.seq;
    if (rec.status != Status::kErroneous) rec.status = Status::kVerified;
  } else if (event.kind == "StatusChanged") {
    const auto& p = event.payload;
    DesignRecord& rec = records_.at(p.at("design_id").get<std::string>());
    rec.status = status_from_name(p.at("status").get<std::string>());
    rec.error_count = p.at("error_count").get<int>();
  } else {
    throw StoreError("CorruptLog", "unknown event kind '" + event.kind + "'");
  }
}

std::string EvoStore::add_design(const DesignInput& input) {
  std::lock_guard lock(mutex_);
  if (input.id.empty()) throw StoreError("DuplicateId", "design id must be non-empty");
  if (records_.count(input.id)) {
    throw StoreError("DuplicateId", "design '" + input.id + "' already exists");
  }
  for (const auto& parent : input.parents) {
    if (!records_.count(parent)) {
      throw StoreError("BrokenLineage", "parent '" + parent + "' does not exist");
    }
  }
  append_event("DesignAdded", record_payload(input));
  return input.id;
}

void EvoStore::record_verification(const std::string& id, const std::string& scale,
                                   const TaskScores& scores,
                                   const std::string& selection_branch) {
  std::lock_guard lock(mutex_);
  const DesignRecord& rec = record_ref(id);
  if (rec.results.count(scale)) {
    throw StoreError("ScaleAlreadyVerified",
                     "design '" + id + "' already verified at scale '" + scale + "'");
  }
  for (const auto& [task, score] : scores) {
    if (!(score >= 0.0 && score <= 1.0)) {
      throw StoreError("InvalidScore", "score for task '" + task + "' outside [0, 1]");
    }
  }
  ordered_json p;
  p["design_id"] = id;
  p["scale"] = scale;
  ordered_json s;
  for (const auto& [task, score] : scores) s[task] = score;
  p["scores"] = std::move(s);
  p["selection_branch"] = selection_branch;
  append_event("VerificationRecorded", std::move(p));
}

void EvoStore::set_status(const std::string& id, Status status) {
  std::lock_guard lock(mutex_);
  const DesignRecord& rec = record_ref(id);
  ordered_json p;
  p["design_id"] = id;
  p["status"] = status_name(status);
  p["error_count"] = rec.error_count;
  append_event("StatusChanged", std::move(p));
}

void EvoStore::record_verification_error(const std::string& id, int threshold) {
  std::lock_guard lock(mutex_);
  const DesignRecord& rec = record_ref(id);
  const int count = rec.error_count + 1;
  ordered_json p;
  p["design_id"] = id;
  p["status"] = status_name(count >= threshold ? Status::kErroneous : rec.status);
  p["error_count"] = count;
  append_event("StatusChanged", std::move(p));
}

const DesignRecord& EvoStore::record_ref(const std::string& id) const {
  auto it = records_.find(id);
  if (it == records_.end()) throw StoreError("UnknownDesign", "no design '" + id + "'");
  return it->second;
}

double EvoStore::fitness(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const DesignRecord& rec = record_ref(id);
  double sum = 0.0;
  int n = 0;
  for (const auto& [scale, tasks] : rec.results) {
    for (const auto& [task, score] : tasks) {
      sum += score;
      ++n;
    }
  }
  if (n == 0) throw StoreError("Unverified", "design '" + id + "' has no verifications");
  return sum / static_cast<double>(n);
}

int EvoStore::confidence(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return static_cast<int>(record_ref(id).results.size());
}

DesignRecord EvoStore::record(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return record_ref(id);
}

bool EvoStore::contains(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return records_.count(id) > 0;
}

std::vector<std::string> EvoStore::design_ids() const {
  std::lock_guard lock(mutex_);
  return order_;
}

std::vector<DesignRecord> EvoStore::all_records() const {
  std::lock_guard lock(mutex_);
  std::vector<DesignRecord> out;
  out.reserve(order_.size());
  for (const auto& id : order_) out.push_back(records_.at(id));
  return out;
}

std::map<std::string, int> EvoStore::used_per_scale() const {
  std::lock_guard lock(mutex_);
  std::map<std::string, int> used;
  for (const auto& [id, rec] : records_) {
    for (const auto& [scale, tasks] : rec.results) ++used[scale];
  }
  return used;
}

uint64_t EvoStore::event_count() const {
  std::lock_guard lock(mutex_);
  return events_.size();
}

std::vector<EvoEvent> EvoStore::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

std::string EvoStore::state_digest() const {
  std::lock_guard lock(mutex_);
  std::ostringstream out;
  for (const auto& id : order_) {
    const DesignRecord& rec = records_.at(id);
    out << rec.id << '|' << tree::canonical_hash(rec.design) << '|' << rec.program.size() << '|'
        << rec.op << '|' << rec.quality << '|' << rec.round << '|' << rec.is_seed << '|'
        << rec.selection_branch << '|' << status_name(rec.status) << '|' << rec.error_count << '|'
        << rec.added_seq << '|' << rec.first_verified_seq << '|';
    for (const auto& parent : rec.parents) out << parent << ',';
    out << '|';
    for (const auto& [scale, tasks] : rec.results) {
      out << scale << '{';
      for (const auto& [task, score] : tasks) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", score);
        out << task << ':' << buf << ',';
      }
      out << '}';
    }
    out << '\n';
  }
  return sha256_hex(out.str());
}

EvoStore& replay_into(EvoStore& store, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  bool saw_header = false;
  uint64_t expected_seq = 1;
  size_t consumed = 0;
  while (std::getline(in, line)) {
    const bool terminated = consumed + line.size() < text.size();  // had a trailing newline
    consumed += line.size() + 1;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception&) {
      if (!terminated) break;  // crash remnant: unterminated final line
      throw StoreError("CorruptLog", "malformed line");
    }
    if (!saw_header) {
      if (j.value("schema_version", -1) != kSchemaVersion) {
        throw StoreError("CorruptLog", "missing or unsupported schema_version header");
      }
      saw_header = true;
      continue;
    }
    if (!j.contains("crc")) throw StoreError("CorruptLog", "event line without checksum");
    const std::string crc = j.at("crc").get<std::string>();
    j.erase("crc");
    if (crc_hex(j.dump()) != crc) throw StoreError("CorruptLog", "checksum mismatch");
    EvoEvent event;
    event.seq = j.at("seq").get<uint64_t>();
    event.kind = j.at("kind").get<std::string>();
    event.payload = j.at("payload");
    if (event.seq != expected_seq) {
      throw StoreError("CorruptLog", "sequence gap: expected " + std::to_string(expected_seq) +
                                         ", found " + std::to_string(event.seq));
    }
    ++expected_seq;
    try {
      store.apply_event(event);
    } catch (const nlohmann::json::exception&) {
      throw StoreError("CorruptLog", "event payload malformed");
    }
    store.events_.push_back(std::move(event));
    store.next_seq_ = expected_seq;
  }
  if (!saw_header) throw StoreError("CorruptLog", "empty log: missing schema header");
  return store;
}

std::unique_ptr<EvoStore> replay_text(const std::string& text) {
  auto store = std::make_unique<EvoStore>();
  replay_into(*store, text);
  return store;
}

std::unique_ptr<EvoStore> replay(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw StoreError("IoError", "cannot read log file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return replay_text(buf.str());
}

}  // namespace evolab::store
