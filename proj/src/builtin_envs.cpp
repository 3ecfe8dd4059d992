#include "drl/builtin_envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "drl/error.hpp"

namespace drl {
namespace {

constexpr double kPi = std::numbers::pi;

double angle_normalize(double x) {
  double r = std::fmod(x + kPi, 2.0 * kPi);
  if (r < 0) r += 2.0 * kPi;
  return r - kPi;
}

}  // namespace

// --- cartpole ---------------------------------------------------------------

CartPole::CartPole() : spaces_(Spaces::discrete(4, 2)) {}

Vector CartPole::observe() const { return Vector::Map(state_.data(), 4); }

Vector CartPole::do_reset(Rng& rng) {
  for (double& s : state_) s = uniform(rng, -0.05, 0.05);
  return observe();
}

StepResult CartPole::do_step(const Vector& action, Rng&) {
  constexpr double gravity = 9.8, mass_cart = 1.0, mass_pole = 0.1, total_mass = mass_cart + mass_pole;
  constexpr double half_length = 0.5, pole_mass_length = mass_pole * half_length, force_mag = 10.0, tau = 0.02;
  constexpr double theta_limit = 12.0 * 2.0 * kPi / 360.0, x_limit = 2.4;

  auto [x, x_dot, theta, theta_dot] = state_;
  const double force = action[0] > 0.5 ? force_mag : -force_mag;
  const double c = std::cos(theta), s = std::sin(theta);
  const double temp = (force + pole_mass_length * theta_dot * theta_dot * s) / total_mass;
  const double theta_acc =
      (gravity * s - c * temp) / (half_length * (4.0 / 3.0 - mass_pole * c * c / total_mass));
  const double x_acc = temp - pole_mass_length * theta_acc * c / total_mass;

  x += tau * x_dot;
  x_dot += tau * x_acc;
  theta += tau * theta_dot;
  theta_dot += tau * theta_acc;
  state_ = {x, x_dot, theta, theta_dot};

  StepResult r;
  r.obs = observe();
  r.reward = 1.0;
  r.terminal = std::abs(x) > x_limit || std::abs(theta) > theta_limit;
  return r;
}

// --- pendulum ---------------------------------------------------------------

Pendulum::Pendulum() : spaces_(Spaces::continuous(3, Vector::Constant(1, -kMaxTorque), Vector::Constant(1, kMaxTorque))) {}

Vector Pendulum::observe() const {
  Vector o(3);
  o << std::cos(theta_), std::sin(theta_), theta_dot_;
  return o;
}

Vector Pendulum::do_reset(Rng& rng) {
  theta_ = uniform(rng, -kPi, kPi);
  theta_dot_ = uniform(rng, -1.0, 1.0);
  return observe();
}

StepResult Pendulum::do_step(const Vector& action, Rng&) {
  const double u = std::clamp(action[0], -kMaxTorque, kMaxTorque);
  const double th = angle_normalize(theta_);
  const double cost = th * th + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u;

  double new_dot = theta_dot_ + (3.0 * kGravity / (2.0 * kLength) * std::sin(theta_) +
                                 3.0 / (kMass * kLength * kLength) * u) * kDt;
  new_dot = std::clamp(new_dot, -kMaxSpeed, kMaxSpeed);
  theta_ = theta_ + new_dot * kDt;
  theta_dot_ = new_dot;

  StepResult r;
  r.obs = observe();
  r.reward = -cost;
  return r;
}

// --- lorenz -----------------------------------------------------------------

Lorenz::Lorenz() : spaces_(Spaces::continuous(3, Vector::Constant(1, -5.0), Vector::Constant(1, 5.0))) {}

Vector Lorenz::observe() const { return Vector::Map(state_.data(), 3); }

std::array<double, 3> Lorenz::rk4(const std::array<double, 3>& s, double u, double dt) {
  auto f = [u](const std::array<double, 3>& p) {
    return std::array<double, 3>{kSigma * (p[1] - p[0]), p[0] * (kRho - p[2]) - p[1] + u,
                                 p[0] * p[1] - kBeta * p[2]};
  };
  auto axpy = [](const std::array<double, 3>& a, double h, const std::array<double, 3>& k) {
    return std::array<double, 3>{a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2]};
  };
  const auto k1 = f(s);
  const auto k2 = f(axpy(s, 0.5 * dt, k1));
  const auto k3 = f(axpy(s, 0.5 * dt, k2));
  const auto k4 = f(axpy(s, dt, k3));
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i) out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

Vector Lorenz::do_reset(Rng& rng) {
  state_ = {uniform(rng, -10.0, 10.0), uniform(rng, -10.0, 10.0), uniform(rng, 10.0, 40.0)};
  // Settle onto the attractor.
  for (int i = 0; i < 500; ++i) state_ = rk4(state_, 0.0, kDt);
  return observe();
}

StepResult Lorenz::do_step(const Vector& action, Rng&) {
  for (int i = 0; i < kSubsteps; ++i) state_ = rk4(state_, action[0], kDt);
  StepResult r;
  r.obs = observe();
  r.reward = state_[0] < 0.0 ? 1.0 : -1.0;
  return r;
}

// --- chain ------------------------------------------------------------------

namespace {

ParamTree chain_params(const ParamTree& extra) {
  return ParamTree(deep_merge(default_table()["environment_types"]["chain"]["extra"], extra.json()));
}

}  // namespace

Chain::Chain(const ParamTree& extra_in) {
  const ParamTree extra = chain_params(extra_in);
  n_act_ = extra.get<int>("n_act");
  window_ = extra.get<int>("window");
  amplitude_ = extra.get<double>("amplitude");
  omega_ = extra.get<double>("omega");
  max_steps_ = extra.get<int>("max_steps");
  if (n_act_ < 1) throw SchemaError("chain: n_act must be >= 1");
  if (window_ < 1 || window_ % 2 == 0) throw SchemaError("chain: window must be a positive odd number");
  if (max_steps_ < 1) throw SchemaError("chain: max_steps must be >= 1");
  spaces_ = Spaces::continuous(n_act_ * window_, Vector::Constant(n_act_, -1.0), Vector::Constant(n_act_, 1.0));
  x_ = Vector::Zero(n_act_);
  phase_ = Vector::Zero(n_act_);
}

double Chain::disturbance(int i) const { return amplitude_ * std::sin(omega_ * time_ + phase_[i]); }

Vector Chain::local_observation(int actuator) const {
  if (actuator < 0 || actuator >= n_act_) throw ShapeError("chain: actuator index out of range");
  const auto w = local_window(x_, actuator, window_);
  return Vector::Map(w.data(), static_cast<Eigen::Index>(w.size()));
}

Vector Chain::observe() const {
  Vector o(n_act_ * window_);
  for (int i = 0; i < n_act_; ++i) o.segment(i * window_, window_) = local_observation(i);
  return o;
}

Vector Chain::do_reset(Rng& rng) {
  time_ = 0.0;
  for (int i = 0; i < n_act_; ++i) {
    x_[i] = uniform(rng, -1.0, 1.0);
    phase_[i] = uniform(rng, 0.0, 2.0 * kPi);
  }
  return observe();
}

StepResult Chain::do_step(const Vector& action, Rng&) {
  Vector dx(n_act_);
  for (int i = 0; i < n_act_; ++i) {
    const double left = x_[(i + n_act_ - 1) % n_act_];
    const double right = x_[(i + 1) % n_act_];
    dx[i] = -x_[i] + kCoupling * (left + right) + action[i] + disturbance(i);
  }
  x_ += kDt * dx;
  time_ += kDt;
  StepResult r;
  r.obs = observe();
  r.reward = -x_.cwiseAbs().mean();
  return r;
}

}  // namespace drl
