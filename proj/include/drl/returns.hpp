#ifndef DRL_RETURNS_HPP_
#define DRL_RETURNS_HPP_

#include <span>
#include <vector>

namespace drl {

// One episode segment. values holds V(s_0..s_T); the last entry is only used
// to bootstrap a non-terminal tail.
struct Trajectory {
  std::vector<double> rewards;
  std::vector<double> values;
  bool terminal = false;
  bool truncated = false;

  void validate() const;
};

std::vector<double> discounted_returns(const Trajectory& traj, double gamma);

// Generalized advantage estimation. A terminal end zeroes the bootstrap,
// a truncated (or open) end keeps V(s_T).
std::vector<double> gae(const Trajectory& traj, double gamma, double lam);

double td_target(double reward, bool terminal, double gamma, double next_value);

// In-place shift/scale to mean 0 and unit (population) std.
void normalize(std::span<double> values);

struct PlanDecision {
  bool update = false;
  std::vector<bool> truncate;  // env's unfinished episode is cut and bootstrapped
  std::vector<int> consume;    // staged rows per env that feed the update
};

// Decides when parallel on-policy rollouts trigger an update.
//
// Bootstrap ON: update once m*L transitions were collected or m episodes
// ended, whichever comes first; every staged row is consumed and unfinished
// episodes are truncated. Bootstrap OFF: update once m episodes ended; only
// rows of ended episodes are consumed, partial episodes stay staged.
class BootstrapPlan {
 public:
  BootstrapPlan(int required_trajectories, int n_envs, int nominal_length, bool bootstrap);

  // ended[e] is true when env e's episode finished (terminal or timeout) on this step.
  PlanDecision step(std::span<const bool> ended);

  int required_trajectories() const { return m_; }
  int n_envs() const { return n_; }
  int nominal_length() const { return length_; }
  bool bootstrap() const { return bootstrap_; }
  int staged_rows(int env) const { return staged_[env]; }

 private:
  int m_;
  int n_;
  int length_;
  bool bootstrap_;
  std::vector<int> staged_;     // rows staged per env
  std::vector<int> completed_;  // staged rows belonging to ended episodes
  int episodes_ = 0;            // ended episodes not yet consumed
  long transitions_ = 0;        // rows staged since the last update
};

}  // namespace drl

#endif  // DRL_RETURNS_HPP_
