#include <algorithm>
#include <cmath>

#include "drl/agents.hpp"
#include "drl/error.hpp"

namespace drl {
namespace {

Mlp copy_of(const Mlp& net) {
  Mlp out = net;
  out.touch();
  return out;
}

}  // namespace

Td3Agent::Td3Agent(const ParamTree& params, const AgentContext& context)
    : OffPolicyAgent(params, context),
      explore_noise_(params.get<double>("exploration_noise")),
      smoothing_noise_(params.get<double>("smoothing_noise")),
      smoothing_clip_(params.get<double>("smoothing_clip")),
      tau_(params.get<double>("tau")),
      policy_delay_(params.get<int>("policy_delay")),
      lr_policy_(params.get<double>("lr.policy")),
      lr_value_(params.get<double>("lr.value")) {
  if (spaces_.is_discrete()) throw SchemaError("agent 'td3' requires a continuous action space");
  const int d = spaces_.action_dim();
  actor_ = build_network("policy", spaces_.obs_dim, d, Activation::kTanh);
  q1_ = build_network("value", spaces_.obs_dim + d, 1, Activation::kLinear);
  q2_ = build_network("value", spaces_.obs_dim + d, 1, Activation::kLinear);
  actor_target_ = copy_of(actor_);
  q1_target_ = copy_of(q1_);
  q2_target_ = copy_of(q2_);
  actor_opt_ = AdamState::for_network(actor_);
  q1_opt_ = AdamState::for_network(q1_);
  q2_opt_ = AdamState::for_network(q2_);
}

std::map<std::string, const Mlp*> Td3Agent::networks() const {
  return {{"actor", &actor_},   {"actor_target", &actor_target_}, {"q1", &q1_},
          {"q2", &q2_},         {"q1_target", &q1_target_},       {"q2_target", &q2_target_}};
}

ActBatch Td3Agent::act(const Matrix& obs, ActMode mode) {
  check_obs(obs);
  ActBatch b;
  b.actions = actor_.forward(obs);
  if (mode == ActMode::kExplore) {
    for (Eigen::Index i = 0; i < b.actions.rows(); ++i)
      for (Eigen::Index j = 0; j < b.actions.cols(); ++j)
        b.actions(i, j) = std::clamp(b.actions(i, j) + explore_noise_ * standard_normal(rng_), -1.0, 1.0);
  }
  b.env_actions = to_env_units(b.actions);
  b.logp = Vector::Zero(obs.rows());
  b.values = Vector::Zero(obs.rows());
  return b;
}

Matrix Td3Agent::target_actions(const Matrix& next_obs) {
  Matrix a = actor_target_.forward(next_obs);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double noise = std::clamp(smoothing_noise_ * standard_normal(rng_), -smoothing_clip_, smoothing_clip_);
      a(i, j) = std::clamp(a(i, j) + noise, -1.0, 1.0);
    }
  return a;
}

Vector Td3Agent::critic_targets(const Batch& batch, const Matrix& next_actions) const {
  const Matrix x = concat_columns(batch["next_obs"], next_actions);
  const Vector q1 = q1_target_.forward(x).col(0);
  const Vector q2 = q2_target_.forward(x).col(0);
  const Vector r = batch["reward"].col(0);
  const Vector not_done = (1.0 - batch["terminal"].col(0).array()).matrix();
  return r + gamma_ * not_done.cwiseProduct(q1.cwiseMin(q2));
}

UpdateReport Td3Agent::update(const Batch& batch) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw ShapeError("td3 update on an empty batch");
  const double inv_b = 1.0 / static_cast<double>(n);
  const Matrix& obs = batch["obs"];
  const Vector y = critic_targets(batch, target_actions(batch["next_obs"]));
  const Matrix x = concat_columns(obs, batch["action"]);

  UpdateReport report;
  double critic_loss = 0.0;
  for (int i = 0; i < 2; ++i) {
    Mlp& q = i == 0 ? q1_ : q2_;
    AdamState& opt = i == 0 ? q1_opt_ : q2_opt_;
    ForwardCache cache;
    const Vector err = q.forward(x, cache).col(0) - y;
    critic_loss += 0.5 * err.squaredNorm() * inv_b;
    Grads g = q.backward(cache, err * inv_b);
    Grads* gs[] = {&g};
    clip_global_norm(gs, grad_clip_);
    adam_step(opt, q, g, lr_value_);
  }
  report["q_loss"] = critic_loss;
  ++critic_updates_;

  if (critic_updates_ % policy_delay_ == 0) {
    ForwardCache acache, qcache;
    const Matrix a = actor_.forward(obs, acache);
    const Matrix q = q1_.forward(concat_columns(obs, a), qcache);
    Matrix dx;
    q1_.backward(qcache, Matrix::Constant(n, 1, -inv_b), &dx);
    Grads g = actor_.backward(acache, dx.rightCols(a.cols()));
    Grads* gs[] = {&g};
    clip_global_norm(gs, grad_clip_);
    adam_step(actor_opt_, actor_, g, lr_policy_);
    polyak_update(actor_target_, actor_, tau_);
    polyak_update(q1_target_, q1_, tau_);
    polyak_update(q2_target_, q2_, tau_);
    report["policy_loss"] = -q.mean();
  }
  ++updates_;
  return report;
}

}  // namespace drl
