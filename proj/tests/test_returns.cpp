#include <doctest.h>

#include <cmath>
#include <numeric>

#include "drl/error.hpp"
#include "drl/returns.hpp"
#include "drl/rng.hpp"
#include "oracles.hpp"

using namespace drl;

namespace {

Trajectory random_traj(Rng& rng, int len, bool terminal) {
  Trajectory t;
  for (int i = 0; i < len; ++i) t.rewards.push_back(uniform(rng, -2, 2));
  for (int i = 0; i <= len; ++i) t.values.push_back(uniform(rng, -5, 5));
  t.terminal = terminal;
  t.truncated = !terminal;
  return t;
}

std::vector<bool> flags(std::initializer_list<int> ended) {
  std::vector<bool> v;
  for (int e : ended) v.push_back(e != 0);
  return v;
}

PlanDecision step(BootstrapPlan& p, const std::vector<bool>& ended) {
  std::unique_ptr<bool[]> b(new bool[ended.size()]);
  for (std::size_t i = 0; i < ended.size(); ++i) b[i] = ended[i];
  return p.step(std::span<const bool>(b.get(), ended.size()));
}

}  // namespace

TEST_CASE("discounted returns hand examples") {
  Trajectory t{{1, 1, 1}, {0, 0, 0, 99}, true, false};
  const auto g = discounted_returns(t, 0.5);
  CHECK(g == std::vector<double>{1.75, 1.5, 1.0});
  Trajectory u{{1}, {0, 2}, false, true};
  CHECK(discounted_returns(u, 0.9)[0] == doctest::Approx(2.8));
  Trajectory z{{3, -1}, {0, 0, 5}, false, true};
  CHECK(discounted_returns(z, 0.0) == std::vector<double>{3, -1});
}

TEST_CASE("trajectory invariants are enforced") {
  Trajectory both{{1}, {0, 0}, true, true};
  CHECK_THROWS_AS(discounted_returns(both, 0.9), ShapeError);
  Trajectory shape{{1, 2}, {0, 0}, true, false};
  CHECK_THROWS_AS(gae(shape, 0.9, 0.9), ShapeError);
  Trajectory ok{{1}, {0, 0}, true, false};
  CHECK_THROWS_AS(discounted_returns(ok, 1.5), ShapeError);
}

TEST_CASE("gae with lambda 0 is the TD residual") {
  Rng rng(1);
  const Trajectory t = random_traj(rng, 20, false);
  const auto a = gae(t, 0.95, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a[i] == doctest::Approx(t.rewards[i] + 0.95 * t.values[i + 1] - t.values[i]).epsilon(1e-14));
}

TEST_CASE("gae with lambda 1 on a terminal episode is return minus value") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Trajectory t = random_traj(rng, uniform_int(rng, 1, 40), true);
    const auto a = gae(t, 0.97, 1.0);
    const auto g = discounted_returns(t, 0.97);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - (g[i] - t.values[i])) < 1e-10);
  }
}

TEST_CASE("gae matches the brute-force double sum") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Trajectory t = random_traj(rng, uniform_int(rng, 1, 50), trial % 2 == 0);
    const double gamma = uniform(rng, 0.0, 1.0), lam = uniform(rng, 0.0, 1.0);
    const auto a = gae(t, gamma, lam);
    const auto b = oracle::brute_force_gae(t, gamma, lam);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
  }
}

TEST_CASE("terminal tails ignore the final value") {
  Rng rng(4);
  Trajectory t = random_traj(rng, 10, true);
  const auto g1 = discounted_returns(t, 0.9);
  const auto a1 = gae(t, 0.9, 0.8);
  t.values.back() = 1e6;
  CHECK(discounted_returns(t, 0.9) == g1);
  CHECK(gae(t, 0.9, 0.8) == a1);
}

TEST_CASE("td targets") {
  CHECK(td_target(1.0, false, 0.0, 10.0) == 1.0);
  CHECK(td_target(1.0, true, 0.99, 10.0) == 1.0);
  CHECK(td_target(1.0, false, 0.99, 10.0) == doctest::Approx(10.9));
}

TEST_CASE("advantage normalisation") {
  Rng rng(5);
  std::vector<double> v(257);
  for (double& x : v) x = uniform(rng, -10, 30);
  normalize(v);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(std::sqrt(var / v.size()) - 1.0) < 1e-9);
}

TEST_CASE("plan: n = m = 4 with simultaneous ends triggers identically in both modes") {
  for (bool boot : {true, false}) {
    BootstrapPlan p(4, 4, 5, boot);
    for (int s = 0; s < 4; ++s) CHECK_FALSE(step(p, flags({0, 0, 0, 0})).update);
    const PlanDecision d = step(p, flags({1, 1, 1, 1}));
    CHECK(d.update);
    CHECK(d.truncate == std::vector<bool>(4, false));
    CHECK(d.consume == std::vector<int>(4, 5));
  }
}

TEST_CASE("plan: n = 16, m = 4, L = 100, bootstrap on") {
  BootstrapPlan p(4, 16, 100, true);
  const std::vector<bool> none(16, false);
  for (int s = 1; s < 25; ++s) CHECK_FALSE(step(p, none).update);
  const PlanDecision d = step(p, none);
  CHECK(d.update);
  CHECK(d.truncate == std::vector<bool>(16, true));
  CHECK(d.consume == std::vector<int>(16, 25));
  CHECK(std::accumulate(d.consume.begin(), d.consume.end(), 0) == 400);
}

TEST_CASE("plan: bootstrap on consumes m*L rows per update when n divides m*L") {
  Rng rng(6);
  for (int n : {1, 2, 4, 8, 16}) {
    BootstrapPlan p(4, n, 50, true);
    long staged = 0;
    for (int s = 0; s < 2000; ++s) {
      std::vector<bool> ended(n);
      for (int e = 0; e < n; ++e) ended[e] = uniform(rng, 0, 1) < 0.005;
      const PlanDecision d = step(p, ended);
      staged += n;
      if (d.update) {
        const long consumed = std::accumulate(d.consume.begin(), d.consume.end(), 0L);
        CHECK(consumed == staged);
        CHECK(consumed <= 4 * 50 + n - 1);
        staged = 0;
      }
    }
  }
}

TEST_CASE("plan: bootstrap off waits for m episodes and keeps partial ones") {
  BootstrapPlan p(2, 3, 10, false);
  CHECK_FALSE(step(p, flags({0, 0, 0})).update);
  CHECK_FALSE(step(p, flags({1, 0, 0})).update);
  const PlanDecision d = step(p, flags({0, 0, 1}));
  CHECK(d.update);
  CHECK(d.consume == std::vector<int>{2, 0, 3});
  CHECK(d.truncate == std::vector<bool>(3, false));
  CHECK(p.staged_rows(0) == 1);
  CHECK(p.staged_rows(1) == 3);
  CHECK(p.staged_rows(2) == 0);
}

TEST_CASE("plan: a single env gives identical decisions in both modes") {
  Rng rng(7);
  for (int m : {1, 3}) {
    BootstrapPlan on(m, 1, 20, true), off(m, 1, 20, false);
    int since_end = 0;
    for (int s = 0; s < 3000; ++s) {
      ++since_end;
      const bool end = since_end == 20 || uniform(rng, 0, 1) < 0.05;
      if (end) since_end = 0;
      const PlanDecision a = step(on, {end});
      const PlanDecision b = step(off, {end});
      CHECK(a.update == b.update);
      CHECK(a.consume == b.consume);
      CHECK(a.truncate == b.truncate);
    }
  }
}

TEST_CASE("plan rejects bad arguments") {
  CHECK_THROWS_AS(BootstrapPlan(0, 1, 1, true), ShapeError);
  BootstrapPlan p(1, 2, 1, true);
  CHECK_THROWS_AS(step(p, flags({1})), ShapeError);
}
