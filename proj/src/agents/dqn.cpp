#include <algorithm>
#include <cmath>

#include "drl/agents.hpp"
#include "drl/dist.hpp"
#include "drl/error.hpp"

namespace drl {

DqnAgent::DqnAgent(const ParamTree& params, const AgentContext& context)
    : OffPolicyAgent(params, context),
      loss_(loss_factory().create(params.get<std::string>("loss"), ParamTree(), {})),
      hard_sync_(params.get<std::string>("target_update") == "hard"),
      target_every_(params.get<int>("target_every")),
      tau_(params.get<double>("tau")),
      double_q_(params.get<bool>("double")),
      lr_(params.get<double>("lr.value")),
      eps_start_(params.get<double>("eps_start")),
      eps_end_(params.get<double>("eps_end")),
      eps_fraction_(params.get<double>("eps_fraction")) {
  if (!spaces_.is_discrete()) throw SchemaError("agent 'dqn' requires a discrete action space");
  q_ = build_network("value", spaces_.obs_dim, spaces_.n_actions, Activation::kLinear);
  q_target_ = q_;
  q_target_.touch();
  opt_ = AdamState::for_network(q_);
}

std::map<std::string, const Mlp*> DqnAgent::networks() const { return {{"q", &q_}, {"q_target", &q_target_}}; }

double DqnAgent::epsilon() const {
  if (eps_override_ >= 0.0) return eps_override_;
  const double horizon = eps_fraction_ * static_cast<double>(budget_);
  if (horizon <= 0.0) return eps_end_;
  const double frac = std::min(1.0, static_cast<double>(act_steps_) / horizon);
  return eps_start_ + frac * (eps_end_ - eps_start_);
}

Vector DqnAgent::q_values(const Vector& obs) const {
  Matrix m = obs.transpose();
  check_obs(m);
  return q_.forward(m).row(0).transpose();
}

ActBatch DqnAgent::act(const Matrix& obs, ActMode mode) {
  check_obs(obs);
  const Matrix q = q_.forward(obs);
  ActBatch b;
  b.actions.resize(obs.rows(), 1);
  for (Eigen::Index i = 0; i < obs.rows(); ++i) {
    const Vector qi = q.row(i).transpose();
    if (mode == ActMode::kExplore) {
      b.actions(i, 0) = epsilon_greedy(qi, epsilon(), rng_);
      ++act_steps_;
    } else {
      b.actions(i, 0) = argmax(qi);
    }
  }
  b.env_actions = b.actions;
  b.logp = Vector::Zero(obs.rows());
  b.values = q.rowwise().maxCoeff();
  return b;
}

UpdateReport DqnAgent::update(const Batch& batch) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw ShapeError("dqn update on an empty batch");
  const Matrix& obs = batch["obs"];
  const Matrix& action = batch["action"];
  const Matrix& reward = batch["reward"];
  const Matrix& next_obs = batch["next_obs"];
  const Matrix& terminal = batch["terminal"];

  const Matrix q_next_target = q_target_.forward(next_obs);
  Matrix q_next_online;
  if (double_q_) q_next_online = q_.forward(next_obs);

  ForwardCache cache;
  const Matrix q = q_.forward(obs, cache);
  Matrix dq = Matrix::Zero(q.rows(), q.cols());
  double loss = 0.0, q_mean = 0.0;
  const double inv_b = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double next;
    if (double_q_) {
      next = q_next_target(i, argmax(q_next_online.row(i).transpose()));
    } else {
      next = q_next_target.row(i).maxCoeff();
    }
    const double y = reward(i, 0) + gamma_ * (1.0 - terminal(i, 0)) * next;
    const auto a = static_cast<Eigen::Index>(action(i, 0));
    const double residual = q(i, a) - y;
    loss += loss_value(loss_, residual) * inv_b;
    dq(i, a) = loss_grad(loss_, residual) * inv_b;
    q_mean += q(i, a) * inv_b;
  }
  Grads g = q_.backward(cache, dq);
  Grads* gs[] = {&g};
  const double factor = clip_global_norm(gs, grad_clip_);
  adam_step(opt_, q_, g, lr_);
  ++updates_;
  if (hard_sync_) {
    if (updates_ % target_every_ == 0) {
      q_target_ = q_;
      q_target_.touch();
    }
  } else {
    polyak_update(q_target_, q_, tau_);
  }
  return {{"q_loss", loss}, {"q_mean", q_mean}, {"epsilon", epsilon()}, {"clip_factor", factor}};
}

}  // namespace drl
