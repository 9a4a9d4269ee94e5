#include <map>

#include "doctest.h"
#include "upstream/replay.hpp"

using namespace upstream;

namespace {

Transition make_transition(int tag) {
  Transition t;
  t.state = {static_cast<double>(tag)};
  t.action = tag % 4;
  t.reward = tag;
  t.next_state = {static_cast<double>(tag + 1)};
  t.terminal = false;
  return t;
}

}  // namespace

TEST_CASE("fifo eviction drops exactly the oldest entries in order") {
  const std::size_t capacity = 50;
  const int extra = 17;
  ReplayBuffer buffer(capacity);
  for (int i = 0; i < static_cast<int>(capacity) + extra; ++i)
    buffer.push(make_transition(i));

  CHECK(buffer.size() == capacity);
  CHECK(buffer.total_inserted() == capacity + extra);
  // First `extra` are gone; survivors keep insertion order.
  for (std::size_t k = 0; k < capacity; ++k)
    CHECK(buffer.oldest(k).reward == static_cast<double>(extra + static_cast<int>(k)));
}

TEST_CASE("sampling is uniform by chi-square over a 100-item buffer") {
  ReplayBuffer buffer(100);
  for (int i = 0; i < 100; ++i) buffer.push(make_transition(i));

  RngStream rng(31);
  std::map<int, long> counts;
  const long n = 100000;
  for (long i = 0; i < n; ++i)
    ++counts[static_cast<int>(buffer.sample_one(rng).reward)];

  const double expected = static_cast<double>(n) / 100.0;
  double chi2 = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double diff = static_cast<double>(counts[i]) - expected;
    chi2 += diff * diff / expected;
  }
  // dof = 99, upper 1% critical value.
  CHECK(chi2 < 134.642);
}

TEST_CASE("batch sampling draws with replacement and stays in range") {
  ReplayBuffer buffer(8);
  for (int i = 0; i < 8; ++i) buffer.push(make_transition(i));
  RngStream rng(5);
  const auto batch = buffer.sample(64, rng);
  CHECK(batch.size() == 64);
  for (const Transition* t : batch) {
    CHECK(t->reward >= 0.0);
    CHECK(t->reward < 8.0);
  }
}

TEST_CASE("sync counter fires at exact multiples of the period") {
  TargetSyncCounter counter(1000);
  std::vector<long> fired;
  for (long step = 1; step <= 3500; ++step)
    if (counter.tick()) fired.push_back(step);
  CHECK(fired == std::vector<long>{1000, 2000, 3000});
}

TEST_CASE("counter restore resumes the cadence") {
  TargetSyncCounter counter(10);
  counter.restore(25);
  std::vector<long> fired;
  for (long i = 0; i < 10; ++i)
    if (counter.tick()) fired.push_back(counter.count());
  CHECK(fired == std::vector<long>{30});
}

TEST_CASE("invalid constructions are rejected") {
  CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);
  CHECK_THROWS_AS(TargetSyncCounter(0), std::invalid_argument);
}
