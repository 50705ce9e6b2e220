#include <doctest.h>

#include <atomic>
#include <stdexcept>
#include <thread>
#include <vector>

#include "affect/parallel.hpp"

using namespace affect;

TEST_CASE("every index runs exactly once") {
  for (std::size_t jobs : {1u, 2u, 8u, 64u}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("zero work is fine") {
  parallel_for(0, 4, [](std::size_t) { FAIL("called"); });
}

TEST_CASE("resolve_jobs") {
  CHECK(resolve_jobs(3) == 3);
  CHECK(resolve_jobs(0) >= 1);
}

TEST_CASE("exceptions propagate after join") {
  std::atomic<int> done{0};
  CHECK_THROWS_AS(parallel_for(100, 4,
                               [&](std::size_t i) {
                                 if (i == 13) throw std::runtime_error("boom");
                                 done++;
                               }),
                  std::runtime_error);
}
