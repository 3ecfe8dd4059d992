#ifndef DRL_BUILTIN_ENVS_HPP_
#define DRL_BUILTIN_ENVS_HPP_

#include <array>

#include "drl/envs.hpp"

namespace drl {

// Pole balanced on a cart; push left (0) or right (1).
class CartPole : public Env {
 public:
  CartPole();

  std::string_view name() const override { return "cartpole"; }
  const Spaces& spaces() const override { return spaces_; }
  int max_episode_steps() const override { return 500; }

  // (x, x_dot, theta, theta_dot)
  void set_state(const std::array<double, 4>& s) { state_ = s; }
  const std::array<double, 4>& state() const { return state_; }

 protected:
  Vector do_reset(Rng& rng) override;
  StepResult do_step(const Vector& action, Rng& rng) override;

 private:
  Vector observe() const;

  Spaces spaces_;
  std::array<double, 4> state_{};
};

// Torque-limited pendulum swing-up; theta = 0 is upright.
class Pendulum : public Env {
 public:
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kDt = 0.05;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;

  Pendulum();

  std::string_view name() const override { return "pendulum"; }
  const Spaces& spaces() const override { return spaces_; }
  int max_episode_steps() const override { return 200; }

  void set_state(double theta, double theta_dot) {
    theta_ = theta;
    theta_dot_ = theta_dot;
  }
  double theta() const { return theta_; }
  double theta_dot() const { return theta_dot_; }

 protected:
  Vector do_reset(Rng& rng) override;
  StepResult do_step(const Vector& action, Rng& rng) override;

 private:
  Vector observe() const;

  Spaces spaces_;
  double theta_ = 0.0;
  double theta_dot_ = 0.0;
};

// Controlled Lorenz system; the control is added to dy/dt. Reward +1 while
// x < 0, -1 otherwise.
class Lorenz : public Env {
 public:
  static constexpr double kSigma = 10.0;
  static constexpr double kRho = 28.0;
  static constexpr double kBeta = 8.0 / 3.0;
  static constexpr double kDt = 0.01;
  static constexpr int kSubsteps = 5;

  Lorenz();

  std::string_view name() const override { return "lorenz"; }
  const Spaces& spaces() const override { return spaces_; }
  int max_episode_steps() const override { return 400; }

  void set_state(const std::array<double, 3>& s) { state_ = s; }
  const std::array<double, 3>& state() const { return state_; }

  static std::array<double, 3> rk4(const std::array<double, 3>& s, double u, double dt);

 protected:
  Vector do_reset(Rng& rng) override;
  StepResult do_step(const Vector& action, Rng& rng) override;

 private:
  Vector observe() const;

  Spaces spaces_;
  std::array<double, 3> state_{};
};

// Ring of n_act leaky coupled channels driven by periodic disturbances.
// Each actuator acts on its own channel and sees a window of neighbouring
// states; the global observation is the concatenation of all windows.
class Chain : public Env {
 public:
  static constexpr double kDt = 0.1;
  static constexpr double kCoupling = 0.25;

  explicit Chain(const ParamTree& extra);

  std::string_view name() const override { return "chain"; }
  const Spaces& spaces() const override { return spaces_; }
  int max_episode_steps() const override { return max_steps_; }

  int n_actuators() const override { return n_act_; }
  int local_obs_dim() const override { return window_; }
  Vector local_observation(int actuator) const override;

  const Vector& state() const { return x_; }
  void set_state(const Vector& x) { x_ = x; }
  double disturbance(int i) const;

 protected:
  Vector do_reset(Rng& rng) override;
  StepResult do_step(const Vector& action, Rng& rng) override;

 private:
  Vector observe() const;

  int n_act_ = 0;
  int window_ = 0;
  double amplitude_ = 0.0;
  double omega_ = 0.0;
  int max_steps_ = 0;
  Spaces spaces_;
  Vector x_;
  Vector phase_;
  double time_ = 0.0;
};

}  // namespace drl

#endif  // DRL_BUILTIN_ENVS_HPP_
