#include "drl/returns.hpp"

#include <cmath>
#include <numeric>

#include "drl/error.hpp"

namespace drl {

void Trajectory::validate() const {
  if (terminal && truncated) throw ShapeError("trajectory cannot be both terminal and truncated");
  if (values.size() != rewards.size() + 1)
    throw ShapeError("trajectory needs len(values) == len(rewards) + 1");
}

std::vector<double> discounted_returns(const Trajectory& traj, double gamma) {
  traj.validate();
  if (gamma < 0.0 || gamma > 1.0) throw ShapeError("gamma must lie in [0, 1]");
  const std::size_t T = traj.rewards.size();
  std::vector<double> out(T);
  double g = traj.terminal ? 0.0 : traj.values[T];
  for (std::size_t t = T; t-- > 0;) {
    g = traj.rewards[t] + gamma * g;
    out[t] = g;
  }
  return out;
}

std::vector<double> gae(const Trajectory& traj, double gamma, double lam) {
  traj.validate();
  const std::size_t T = traj.rewards.size();
  std::vector<double> adv(T);
  double running = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const bool cut = traj.terminal && t + 1 == T;
    const double next = cut ? 0.0 : traj.values[t + 1];
    const double delta = traj.rewards[t] + gamma * next - traj.values[t];
    running = delta + gamma * lam * running;
    adv[t] = running;
  }
  return adv;
}

double td_target(double reward, bool terminal, double gamma, double next_value) {
  return terminal ? reward : reward + gamma * next_value;
}

void normalize(std::span<double> values) {
  if (values.empty()) return;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double std = std::sqrt(var / n);
  for (double& v : values) v = (v - mean) / (std + 1e-12);
}

BootstrapPlan::BootstrapPlan(int required_trajectories, int n_envs, int nominal_length, bool bootstrap)
    : m_(required_trajectories), n_(n_envs), length_(nominal_length), bootstrap_(bootstrap),
      staged_(n_envs, 0), completed_(n_envs, 0) {
  if (m_ < 1 || n_ < 1 || length_ < 1) throw ShapeError("bootstrap plan needs m, n, L >= 1");
}

PlanDecision BootstrapPlan::step(std::span<const bool> ended) {
  if (static_cast<int>(ended.size()) != n_) throw ShapeError("bootstrap plan: one flag per env expected");
  for (int e = 0; e < n_; ++e) {
    staged_[e] += 1;
    transitions_ += 1;
    if (ended[e]) {
      completed_[e] = staged_[e];
      episodes_ += 1;
    }
  }

  PlanDecision d;
  d.truncate.assign(n_, false);
  d.consume.assign(n_, 0);
  const long budget = static_cast<long>(m_) * length_;
  if (bootstrap_) {
    if (episodes_ < m_ && transitions_ < budget) return d;
    d.update = true;
    for (int e = 0; e < n_; ++e) {
      d.truncate[e] = staged_[e] > completed_[e];
      d.consume[e] = staged_[e];
      staged_[e] = 0;
      completed_[e] = 0;
    }
    transitions_ = 0;
  } else {
    if (episodes_ < m_) return d;
    d.update = true;
    for (int e = 0; e < n_; ++e) {
      d.consume[e] = completed_[e];
      staged_[e] -= completed_[e];
      completed_[e] = 0;
    }
    transitions_ = 0;
    for (int e = 0; e < n_; ++e) transitions_ += staged_[e];
  }
  episodes_ = 0;
  return d;
}

}  // namespace drl
