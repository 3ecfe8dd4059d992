// Independent reference implementations used by the unit and acceptance tests.
#ifndef DRL_TESTS_ORACLES_HPP_
#define DRL_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <utility>
#include <vector>

#include "drl/buffer.hpp"
#include "drl/nn.hpp"
#include "drl/returns.hpp"
#include "drl/rng.hpp"

namespace oracle {

// A_t = sum_k (gamma lambda)^k delta_{t+k}, computed term by term.
inline std::vector<double> brute_force_gae(const drl::Trajectory& t, double gamma, double lam) {
  const std::size_t n = t.rewards.size();
  std::vector<double> delta(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool last = i + 1 == n;
    const double next = last && t.terminal ? 0.0 : t.values[i + 1];
    delta[i] = t.rewards[i] + gamma * next - t.values[i];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    for (std::size_t k = i; k < n; ++k) {
      adv[i] += w * delta[k];
      w *= gamma * lam;
    }
  }
  return adv;
}

// Classical Jacobi: always annihilate the largest off-diagonal entry.
struct EigenPairs {
  std::vector<double> values;
  drl::Matrix vectors;  // columns
};

inline EigenPairs max_pivot_jacobi(drl::Matrix a) {
  const Eigen::Index n = a.rows();
  drl::Matrix v = drl::Matrix::Identity(n, n);
  for (int iter = 0; iter < 100000; ++iter) {
    Eigen::Index p = 0, q = 1;
    double best = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        if (std::abs(a(i, j)) > best) {
          best = std::abs(a(i, j));
          p = i;
          q = j;
        }
    if (n < 2 || best < 1e-15 * std::max(1.0, a.diagonal().cwiseAbs().maxCoeff())) break;
    const double theta = 0.5 * std::atan2(2 * a(p, q), a(q, q) - a(p, p));
    const double c = std::cos(theta), s = std::sin(theta);
    drl::Matrix g = drl::Matrix::Identity(n, n);
    g(p, p) = c;
    g(q, q) = c;
    g(p, q) = s;
    g(q, p) = -s;
    a = g.transpose() * a * g;
    v = v * g;
  }
  std::vector<std::pair<double, Eigen::Index>> order;
  for (Eigen::Index i = 0; i < n; ++i) order.emplace_back(a(i, i), i);
  std::sort(order.begin(), order.end(), [](auto x, auto y) { return x.first > y.first; });
  EigenPairs out;
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values.push_back(order[i].first);
    out.vectors.col(i) = v.col(order[i].second);
  }
  return out;
}

// Largest principal angle (radians) between the row spaces of two k x d
// matrices with orthonormal rows.
inline double max_principal_angle(const drl::Matrix& a, const drl::Matrix& b) {
  const drl::Matrix m = a * b.transpose();
  Eigen::JacobiSVD<drl::Matrix> svd(m);
  const double smallest = svd.singularValues().minCoeff();
  return std::acos(std::clamp(smallest, -1.0, 1.0));
}

// Bounded deque with the ring-buffer contract: one scalar row id per row.
class DequeRing {
 public:
  explicit DequeRing(std::size_t capacity) : capacity_(capacity) {}

  void insert(double id) {
    rows_.push_back(id);
    if (rows_.size() > capacity_) rows_.pop_front();
  }
  std::vector<double> drain() {
    std::vector<double> out(rows_.begin(), rows_.end());
    rows_.clear();
    return out;
  }
  std::vector<double> contents() const { return {rows_.begin(), rows_.end()}; }
  std::vector<double> sample(int batch, drl::Rng& rng) const {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(rows_.size()) - 1);
    std::vector<double> out;
    for (int i = 0; i < batch; ++i) out.push_back(rows_[pick(rng)]);
    return out;
  }
  std::size_t size() const { return rows_.size(); }

 private:
  std::size_t capacity_;
  std::deque<double> rows_;
};

// Runs one random operation script against a RingBuffer and the deque
// oracle. Rows carry an id plus derived columns so that misalignment shows.
// Returns false on the first disagreement.
inline bool run_ring_script(std::uint64_t seed, int n_ops) {
  drl::Rng script(seed);
  const int capacity = drl::uniform_int(script, 1, 40);
  const std::vector<drl::FieldSpec> fields{{"id", 1}, {"pair", 2}};
  drl::RingBuffer ring(capacity, fields);
  DequeRing deq(capacity);
  drl::Rng rng_a(seed ^ 0x9e37), rng_b(seed ^ 0x9e37);
  double next_id = 0.0;
  auto check_batch = [](const drl::Batch& b, const std::vector<double>& ids) {
    if (b.size() != static_cast<Eigen::Index>(ids.size())) return false;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double id = ids[i];
      if (b["id"](i, 0) != id || b["pair"](i, 0) != id * 2.0 || b["pair"](i, 1) != -id) return false;
    }
    return true;
  };
  for (int op = 0; op < n_ops; ++op) {
    const int kind = drl::uniform_int(script, 0, 9);
    if (kind < 6) {
      const int rows = drl::uniform_int(script, 1, 2 * capacity);
      drl::Batch b(fields, rows);
      for (int r = 0; r < rows; ++r) {
        b["id"](r, 0) = next_id;
        b["pair"](r, 0) = next_id * 2.0;
        b["pair"](r, 1) = -next_id;
        deq.insert(next_id);
        next_id += 1.0;
      }
      ring.insert(b);
    } else if (kind < 8) {
      if (deq.size() == 0) continue;
      const int batch = drl::uniform_int(script, 1, static_cast<int>(deq.size()));
      if (!check_batch(ring.sample(batch, rng_a), deq.sample(batch, rng_b))) return false;
    } else if (kind == 8) {
      if (!check_batch(ring.drain_all(), deq.drain())) return false;
    } else {
      if (!check_batch(ring.contents(), deq.contents())) return false;
    }
    if (ring.size() != static_cast<int>(deq.size()) || ring.size() > capacity) return false;
  }
  return check_batch(ring.contents(), deq.contents());
}

}  // namespace oracle

#endif  // DRL_TESTS_ORACLES_HPP_
