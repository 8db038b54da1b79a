#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "seer/knowstore.hpp"

using namespace seer;

namespace {

std::string ap(int i) { return "ap" + std::to_string(i); }

MarkovModel random_model(std::mt19937& rng, int max_order) {
  MarkovModel m(max_order);
  std::uniform_int_distribution<int> pick(0, 5);
  std::uniform_int_distribution<uint64_t> cnt(1, 9);
  for (int k = 1; k <= max_order; ++k) {
    int states = 4 + pick(rng);
    for (int s = 0; s < states; ++s) {
      StateKey state;
      for (int i = 0; i < k; ++i) state.push_back(ap(pick(rng)));
      int dests = 1 + pick(rng) % 3;
      for (int d = 0; d < dests; ++d) m.table(k)[state][ap(pick(rng))] += cnt(rng);
    }
  }
  return m;
}

} // namespace

TEST_CASE("transition_distribution turns counts into ranked probabilities") {
  MarkovModel m(1);
  m.table(1)[{"A"}] = {{"B", 2}, {"C", 1}};

  Distribution d = transition_distribution(m, 1, {"A"});
  REQUIRE(d.entries.size() == 2);
  CHECK(d.entries[0].to == "B");
  CHECK(d.entries[0].probability == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(d.entries[0].count == 2);
  CHECK(d.entries[1].to == "C");
  CHECK(d.entries[1].probability == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(d.support_count == 3);
}

TEST_CASE("unseen state yields an empty distribution, no smoothing") {
  MarkovModel m(1);
  m.table(1)[{"A"}] = {{"B", 2}};
  Distribution d = transition_distribution(m, 1, {"Z"});
  CHECK(d.entries.empty());
  CHECK(d.support_count == 0);
}

TEST_CASE("equal probabilities tie-break by bssid ascending") {
  MarkovModel m(1);
  m.table(1)[{"A"}] = {{"C", 1}, {"B", 1}};
  Distribution d = transition_distribution(m, 1, {"A"});
  REQUIRE(d.entries.size() == 2);
  CHECK(d.entries[0].to == "B");
  CHECK(d.entries[0].probability == Catch::Approx(0.5));
  CHECK(d.entries[1].to == "C");
}

TEST_CASE("transition_distribution validates order and arity") {
  MarkovModel m(3);
  m.table(1)[{"A"}] = {{"B", 1}};
  CHECK_THROWS_AS(transition_distribution(m, 0, {}), OrderOutOfRange);
  CHECK_THROWS_AS(transition_distribution(m, 4, {"A", "B", "C", "D"}),
                  OrderOutOfRange);
  CHECK_THROWS_AS(transition_distribution(m, 2, {"A"}), StateArityMismatch);
}

TEST_CASE("distributions are scale-equivariant in counts") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    MarkovModel m = random_model(rng, 2);
    MarkovModel scaled = m;
    uint64_t c = 1 + rng() % 11;
    for (int k = 1; k <= 2; ++k)
      for (auto& [state, dests] : scaled.table(k))
        for (auto& [to, n] : dests) n *= c;
    for (int k = 1; k <= 2; ++k)
      for (const auto& [state, dests] : m.table(k)) {
        Distribution a = transition_distribution(m, k, state);
        Distribution b = transition_distribution(scaled, k, state);
        REQUIRE(a.entries.size() == b.entries.size());
        for (size_t i = 0; i < a.entries.size(); ++i) {
          CHECK(a.entries[i].to == b.entries[i].to);
          CHECK(a.entries[i].probability ==
                Catch::Approx(b.entries[i].probability).epsilon(1e-12));
        }
      }
  }
}

TEST_CASE("non-empty distributions sum to 1 within 1e-9") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    MarkovModel m = random_model(rng, 3);
    for (int k = 1; k <= 3; ++k)
      for (const auto& [state, dests] : m.table(k)) {
        Distribution d = transition_distribution(m, k, state);
        REQUIRE_FALSE(d.entries.empty());
        double sum = 0;
        for (const auto& e : d.entries) {
          sum += e.probability;
          CHECK(e.probability > 0.0);
          CHECK(e.probability <= 1.0);
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
      }
  }
}

TEST_CASE("merge with the empty model is the identity") {
  std::mt19937 rng(3);
  MarkovModel m = random_model(rng, 3);
  MarkovModel empty(3);
  CHECK(merge(m, empty) == m);
  CHECK(merge(empty, m) == m);
}

TEST_CASE("merge adds counts elementwise") {
  MarkovModel a(1), b(1);
  a.table(1)[{"A"}] = {{"B", 1}};
  b.table(1)[{"A"}] = {{"B", 2}, {"C", 1}};
  MarkovModel c = merge(a, b);
  CHECK(c.table(1).at({"A"}).at("B") == 3);
  CHECK(c.table(1).at({"A"}).at("C") == 1);
}

TEST_CASE("merge rejects mismatched max_order") {
  CHECK_THROWS_AS(merge(MarkovModel(2), MarkovModel(3)), OrderMismatch);
}

TEST_CASE("merge is commutative and associative") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    MarkovModel a = random_model(rng, 2);
    MarkovModel b = random_model(rng, 2);
    MarkovModel c = random_model(rng, 2);
    CHECK(merge(a, b) == merge(b, a));
    CHECK(merge(merge(a, b), c) == merge(a, merge(b, c)));
  }
}

TEST_CASE("three arbitrary shards merge to the single-pass model") {
  std::mt19937 rng(23);
  using Record = std::pair<StateKey, std::string>;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<int, Record>> records;
    std::uniform_int_distribution<int> pick(0, 4);
    for (int i = 0; i < 200; ++i) {
      int k = 1 + pick(rng) % 3;
      StateKey state;
      for (int j = 0; j < k; ++j) state.push_back(ap(pick(rng)));
      records.push_back({k, {state, ap(pick(rng))}});
    }

    MarkovModel whole(3);
    std::vector<MarkovModel> shards(3, MarkovModel(3));
    for (const auto& [k, rec] : records) {
      whole.table(k)[rec.first][rec.second] += 1;
      shards[rng() % 3].table(k)[rec.first][rec.second] += 1;
    }
    CHECK(merge(merge(shards[0], shards[1]), shards[2]) == whole);
    CHECK(merge(shards[2], merge(shards[1], shards[0])) == whole);
  }
}

TEST_CASE("total_records sums the order-1 table") {
  MarkovModel m(2);
  m.table(1)[{"A"}] = {{"B", 2}, {"C", 1}};
  m.table(1)[{"B"}] = {{"C", 4}};
  m.table(2)[{"^", "A"}] = {{"B", 99}}; // higher orders not counted
  CHECK(m.total_records() == 7);
}

TEST_CASE("snapshot round-trips the empty model") {
  testutil::TempDir tmp;
  MarkovModel m(3);
  persist(m, tmp.file("empty.snapshot"));
  CHECK(restore(tmp.file("empty.snapshot")) == m);
}

TEST_CASE("snapshot round-trips populated models exactly") {
  testutil::TempDir tmp;
  std::mt19937 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    MarkovModel m = random_model(rng, 1 + trial % 4);
    auto path = tmp.file("model.snapshot");
    persist(m, path);
    CHECK(restore(path) == m);
  }
}

TEST_CASE("serialization is deterministic") {
  std::mt19937 rng(37);
  MarkovModel m = random_model(rng, 3);
  CHECK(serialize(m) == serialize(m));
  MarkovModel copy = deserialize(serialize(m));
  CHECK(serialize(copy) == serialize(m));
}

TEST_CASE("truncated or corrupted snapshots are rejected") {
  testutil::TempDir tmp;
  std::mt19937 rng(41);
  MarkovModel m = random_model(rng, 2);
  std::string buf = serialize(m);

  CHECK_THROWS_AS(deserialize(buf.substr(0, buf.size() / 2)), CorruptSnapshot);
  CHECK_THROWS_AS(deserialize(buf.substr(0, 3)), CorruptSnapshot);
  CHECK_THROWS_AS(deserialize(""), CorruptSnapshot);

  std::string flipped = buf;
  flipped[buf.size() / 3] ^= 0x40;
  CHECK_THROWS_AS(deserialize(flipped), CorruptSnapshot);

  std::string trailing = buf + "x";
  CHECK_THROWS_AS(deserialize(trailing), CorruptSnapshot);

  std::string bad_magic = buf;
  bad_magic[0] = 'X'; // checksum still catches it first
  CHECK_THROWS_AS(deserialize(bad_magic), CorruptSnapshot);

  auto path = tmp.file("truncated.snapshot");
  std::ofstream out(path, std::ios::binary);
  out.write(buf.data(), static_cast<long>(buf.size() - 5));
  out.close();
  CHECK_THROWS_AS(restore(path), CorruptSnapshot);
}

TEST_CASE("restore reports missing files as IoError") {
  CHECK_THROWS_AS(restore("/nonexistent/model.snapshot"), IoError);
}
