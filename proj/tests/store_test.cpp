// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "evolab/oracle.hpp"
#include "evolab/store.hpp"
#include "support.hpp"

using namespace evolab;
using store::EvoStore;

namespace {

std::filesystem::path temp_log(const char* tag) {
  return std::filesystem::temp_directory_path() /
         (std::string("evolab_store_test_") + tag + ".jsonl");
}

store::DesignInput make_input(const std::string& id, std::vector<std::string> parents = {},
                              bool is_seed = false) {
  store::DesignInput input;
  input.id = id;
  input.design = test::single_unit_tree("U_" + id, "Y = norm(X)\n");
  input.program = "Y = norm(X)\n";
  input.parents = std::move(parents);
  input.op = parents.empty() ? "seed" : "mutation";
  input.is_seed = is_seed;
  input.selection_branch = "exploit";
  return input;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_SUITE("store") {

TEST_CASE("adding designs follows the documented contract") {
  EvoStore st;
  st.add_design(make_input("a", {}, true));
  CHECK(st.record("a").status == store::Status::kProposed);
  CHECK(st.confidence("a") == 0);
  CHECK_THROWS_AS(st.fitness("a"), store::StoreError);  // Unverified

  CHECK_THROWS_AS(st.add_design(make_input("a")), store::StoreError);          // DuplicateId
  CHECK_THROWS_AS(st.add_design(make_input("b", {"ghost"})), store::StoreError);  // BrokenLineage

  for (int i = 0; i < 100; ++i) st.add_design(make_input("d" + std::to_string(i), {"a"}));
  const auto events = st.events();
  int adds = 0;
  uint64_t prev_seq = 0;
  for (const auto& e : events) {
    CHECK(e.seq == prev_seq + 1);
    prev_seq = e.seq;
    if (e.kind == "DesignAdded") ++adds;
  }
  CHECK(adds == 101);
  const auto ids = st.design_ids();
  CHECK(ids.front() == "a");
  CHECK(ids.back() == "d99");

  // Lineage acyclicity: parents always precede children in the event order.
  for (const auto& rec : st.all_records()) {
    for (const auto& parent : rec.parents) {
      CHECK(st.record(parent).added_seq < rec.added_seq);
    }
  }
}

TEST_CASE("verification recording updates confidence and fitness") {
  EvoStore st;
  st.add_design(make_input("a"));
  st.record_verification("a", "14M", {{"t0", 0.6}, {"t1", 0.8}});
  CHECK(st.confidence("a") == 1);
  CHECK(st.record("a").status == store::Status::kVerified);
  CHECK(st.record("a").first_verified_seq > 0);

  CHECK_THROWS_AS(st.record_verification("a", "14M", {{"t0", 0.5}}), store::StoreError);
  CHECK_THROWS_AS(st.record_verification("ghost", "14M", {{"t0", 0.5}}), store::StoreError);
  CHECK_THROWS_AS(st.record_verification("a", "31M", {{"t0", 1.5}}), store::StoreError);

  st.record_verification("a", "31M", {{"t0", 0.7}, {"t1", 0.9}});
  CHECK(st.confidence("a") == 2);
  CHECK(st.fitness("a") == doctest::Approx(0.75));  // flat mean over all pairs
}

TEST_CASE("fitness is a flat mean and permutation invariant") {
  EvoStore a, b;
  a.add_design(make_input("x"));
  b.add_design(make_input("x"));
  a.record_verification("x", "14M", {{"t0", 0.2}, {"t1", 0.4}});
  a.record_verification("x", "31M", {{"t0", 0.9}});
  b.record_verification("x", "31M", {{"t0", 0.9}});
  b.record_verification("x", "14M", {{"t1", 0.4}, {"t0", 0.2}});
  CHECK(a.fitness("x") == doctest::Approx(b.fitness("x")));
  CHECK(a.fitness("x") == doctest::Approx(0.5));
  CHECK(a.fitness("x") >= 0.0);
  CHECK(a.fitness("x") <= 1.0);

  // Independent recomputation over a three-scale fixture.
  EvoStore c;
  c.add_design(make_input("y"));
  std::vector<std::pair<std::string, store::TaskScores>> fixture = {
      {"14M", {{"t0", 0.61}, {"t1", 0.47}}},
      {"31M", {{"t0", 0.66}, {"t1", 0.52}}},
      {"70M", {{"t0", 0.71}, {"t1", 0.55}}},
  };
  double sum = 0.0;
  int n = 0;
  for (const auto& [scale, scores] : fixture) {
    c.record_verification("y", scale, scores);
    for (const auto& [task, s] : scores) {
      sum += s;
      ++n;
    }
  }
  CHECK(c.fitness("y") == doctest::Approx(sum / n).epsilon(1e-15));
  CHECK(c.confidence("y") == 3);
}

TEST_CASE("status transitions and error counting") {
  EvoStore st;
  st.add_design(make_input("a"));
  st.set_status("a", store::Status::kImplemented);
  CHECK(st.record("a").status == store::Status::kImplemented);
  st.record_verification_error("a", 2);
  CHECK(st.record("a").status == store::Status::kImplemented);  // below threshold
  CHECK(st.record("a").error_count == 1);
  st.record_verification_error("a", 2);
  CHECK(st.record("a").status == store::Status::kErroneous);
}

TEST_CASE("write-then-replay reproduces the store state exactly") {
  const auto path = temp_log("roundtrip");
  {
    EvoStore st;
    st.open_log(path.string());
    Rng rng(404);
    std::vector<std::string> ids;
    st.add_design(make_input("seed0", {}, true));
    ids.push_back("seed0");
    const std::vector<std::string> scales = {"14M", "31M", "70M", "125M"};
    for (int i = 0; i < 1000; ++i) {
      const double dice = rng.uniform01();
      if (dice < 0.4) {
        const std::string id = "d" + std::to_string(i);
        st.add_design(make_input(id, {ids[rng.below(ids.size())]}));
        ids.push_back(id);
      } else if (dice < 0.85) {
        const std::string& id = ids[rng.below(ids.size())];
        const std::string& scale = scales[rng.below(scales.size())];
        if (!st.record(id).results.count(scale)) {
          st.record_verification(id, scale,
                                 {{"t0", rng.uniform01()}, {"t1", rng.uniform01()}});
        }
      } else if (dice < 0.95) {
        st.set_status(ids[rng.below(ids.size())], store::Status::kImplemented);
      } else {
        st.record_verification_error(ids[rng.below(ids.size())], 3);
      }
    }
    const auto replayed = store::replay(path.string());
    CHECK(replayed->state_digest() == st.state_digest());
    CHECK(replayed->event_count() == st.event_count());
  }
  std::filesystem::remove(path);
}

TEST_CASE("an empty log replays to an empty store") {
  const auto path = temp_log("empty");
  {
    EvoStore st;
    st.open_log(path.string());
  }
  const auto replayed = store::replay(path.string());
  CHECK(replayed->design_ids().empty());
  CHECK(replayed->event_count() == 0);
  std::filesystem::remove(path);
}

TEST_CASE("corruption is detected: deleted line, bad checksum, bad header") {
  const auto path = temp_log("corrupt");
  {
    EvoStore st;
    st.open_log(path.string());
    st.add_design(make_input("a"));
    st.add_design(make_input("b", {"a"}));
    st.record_verification("b", "14M", {{"t0", 0.5}});
  }
  const std::string text = slurp(path);
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 4);  // header + 3 events

  // Deleting an interior event leaves a sequence gap.
  CHECK_THROWS_AS(store::replay_text(lines[0] + "\n" + lines[2] + "\n" + lines[3] + "\n"),
                  store::StoreError);
  // Flipping payload bytes breaks the checksum.
  std::string tampered = lines[3];  // the VerificationRecorded event
  const auto pos = tampered.find("\"14M\"");
  REQUIRE(pos != std::string::npos);
  tampered.replace(pos, 5, "\"31M\"");
  CHECK_THROWS_AS(
      store::replay_text(lines[0] + "\n" + lines[1] + "\n" + lines[2] + "\n" + tampered + "\n"),
      store::StoreError);
  // Missing header.
  CHECK_THROWS_AS(store::replay_text(lines[1] + "\n"), store::StoreError);

  // Truncation at an event boundary replays the prefix.
  const auto prefix = store::replay_text(lines[0] + "\n" + lines[1] + "\n");
  CHECK(prefix->design_ids() == std::vector<std::string>{"a"});
  // A half-written final line is dropped as a crash remnant.
  const auto remnant = store::replay_text(lines[0] + "\n" + lines[1] + "\n" +
                                          lines[2].substr(0, lines[2].size() / 2));
  CHECK(remnant->design_ids() == std::vector<std::string>{"a"});
  std::filesystem::remove(path);
}

TEST_CASE("concurrent writers interleave without losing events") {
  EvoStore st;
  st.add_design(make_input("root", {}, true));
  constexpr int kThreads = 4, kPerThread = 50;
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < kPerThread; ++i) {
        st.add_design(make_input("t" + std::to_string(t) + "_" + std::to_string(i), {"root"}));
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(st.design_ids().size() == 1 + kThreads * kPerThread);
  uint64_t prev = 0;
  for (const auto& e : st.events()) {
    CHECK(e.seq == prev + 1);  // gap-free under concurrency
    prev = e.seq;
  }
}

}  // TEST_SUITE
