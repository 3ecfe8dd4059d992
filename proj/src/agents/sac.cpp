#include <cmath>
#include <numbers>

#include "drl/agents.hpp"
#include "drl/dist.hpp"
#include "drl/error.hpp"

namespace drl {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

Mlp copy_of(const Mlp& net) {
  Mlp out = net;
  out.touch();
  return out;
}

}  // namespace

SacAgent::SacAgent(const ParamTree& params, const AgentContext& context)
    : OffPolicyAgent(params, context),
      auto_alpha_(params.get<bool>("auto_alpha")),
      tau_(params.get<double>("tau")),
      lr_policy_(params.get<double>("lr.policy")),
      lr_value_(params.get<double>("lr.value")),
      lr_alpha_(params.get<double>("lr.alpha")) {
  if (spaces_.is_discrete()) throw SchemaError("agent 'sac' requires a continuous action space");
  const int d = spaces_.action_dim();
  actor_ = build_network("policy", spaces_.obs_dim, 2 * d, Activation::kLinear);
  q1_ = build_network("value", spaces_.obs_dim + d, 1, Activation::kLinear);
  q2_ = build_network("value", spaces_.obs_dim + d, 1, Activation::kLinear);
  q1_target_ = copy_of(q1_);
  q2_target_ = copy_of(q2_);
  actor_opt_ = AdamState::for_network(actor_);
  q1_opt_ = AdamState::for_network(q1_);
  q2_opt_ = AdamState::for_network(q2_);
  const double alpha_init = params.get<double>("alpha_init");
  if (!(alpha_init > 0.0)) throw SchemaError("agent.alpha_init must be > 0");
  log_alpha_ = Vector::Constant(1, std::log(alpha_init));
  alpha_opt_ = VectorAdam(1);
  target_entropy_ = params.has("target_entropy") && !params.at("target_entropy").is_null()
                        ? params.get<double>("target_entropy")
                        : -static_cast<double>(d);
}

std::map<std::string, const Mlp*> SacAgent::networks() const {
  return {{"actor", &actor_}, {"q1", &q1_}, {"q2", &q2_}, {"q1_target", &q1_target_}, {"q2_target", &q2_target_}};
}

double SacAgent::alpha() const { return std::exp(log_alpha_[0]); }

SacAgent::PolicySample SacAgent::sample_policy(const Matrix& obs, ForwardCache* cache) {
  const Matrix out = cache ? actor_.forward(obs, *cache) : actor_.forward(obs);
  const Eigen::Index d = spaces_.action_dim();
  const Eigen::Index n = obs.rows();
  PolicySample s;
  s.mean = out.leftCols(d);
  const Matrix raw = out.rightCols(d);
  s.log_std = raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  s.clamp_mask = ((raw.array() >= kLogStdMin) && (raw.array() <= kLogStdMax)).cast<double>().matrix();
  s.eps.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) s.eps(i, j) = standard_normal(rng_);
  s.u = s.mean + (s.log_std.array().exp() * s.eps.array()).matrix();
  s.action = s.u.array().tanh().matrix();
  s.logp.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double lp = 0.0;
    for (Eigen::Index j = 0; j < d; ++j)
      lp += -0.5 * s.eps(i, j) * s.eps(i, j) - s.log_std(i, j) - kHalfLog2Pi - log1m_tanh_sq(s.u(i, j));
    s.logp[i] = lp;
  }
  return s;
}

ActBatch SacAgent::act(const Matrix& obs, ActMode mode) {
  check_obs(obs);
  ActBatch b;
  if (mode == ActMode::kExplore) {
    PolicySample s = sample_policy(obs, nullptr);
    b.actions = std::move(s.action);
    b.logp = std::move(s.logp);
  } else {
    b.actions = actor_.forward(obs).leftCols(spaces_.action_dim()).array().tanh().matrix();
    b.logp = Vector::Zero(obs.rows());
  }
  b.env_actions = to_env_units(b.actions);
  b.values = Vector::Zero(obs.rows());
  return b;
}

Vector SacAgent::critic_targets(const Batch& batch, const Matrix& next_actions, const Vector& next_logp) const {
  const Matrix x = concat_columns(batch["next_obs"], next_actions);
  const Vector q = q1_target_.forward(x).col(0).cwiseMin(q2_target_.forward(x).col(0));
  const Vector soft = q - alpha() * next_logp;
  const Vector not_done = (1.0 - batch["terminal"].col(0).array()).matrix();
  return batch["reward"].col(0) + gamma_ * not_done.cwiseProduct(soft);
}

double SacAgent::alpha_gradient(const Vector& logp) const {
  return -alpha() * (logp.array() + target_entropy_).mean();
}

UpdateReport SacAgent::update(const Batch& batch) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw ShapeError("sac update on an empty batch");
  const double inv_b = 1.0 / static_cast<double>(n);
  const Matrix& obs = batch["obs"];
  const Eigen::Index d = spaces_.action_dim();

  const PolicySample next = sample_policy(batch["next_obs"], nullptr);
  const Vector y = critic_targets(batch, next.action, next.logp);
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

  // Actor: minimise E[alpha logp - min(Q1, Q2)] through the reparameterised sample.
  ForwardCache acache, c1, c2;
  const PolicySample s = sample_policy(obs, &acache);
  const Matrix xa = concat_columns(obs, s.action);
  const Vector v1 = q1_.forward(xa, c1).col(0);
  const Vector v2 = q2_.forward(xa, c2).col(0);
  Matrix d1 = Matrix::Zero(n, 1), d2 = Matrix::Zero(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) (v1[i] <= v2[i] ? d1 : d2)(i, 0) = -inv_b;
  Matrix dx1, dx2;
  q1_.backward(c1, d1, &dx1);
  q2_.backward(c2, d2, &dx2);
  const Matrix g_a = dx1.rightCols(d) + dx2.rightCols(d);
  const double a = alpha();
  const Eigen::ArrayXXd th = s.u.array().tanh();
  const Eigen::ArrayXXd dmu = a * 2.0 * th * inv_b + g_a.array() * (1.0 - th.square());
  const Eigen::ArrayXXd sigma = s.log_std.array().exp();
  const Eigen::ArrayXXd dlog_std = (-a * inv_b + dmu * sigma * s.eps.array()) * s.clamp_mask.array();
  Matrix dout(n, 2 * d);
  dout << dmu.matrix(), dlog_std.matrix();
  Grads g = actor_.backward(acache, dout);
  Grads* gs[] = {&g};
  clip_global_norm(gs, grad_clip_);
  adam_step(actor_opt_, actor_, g, lr_policy_);
  report["policy_loss"] = (a * s.logp - v1.cwiseMin(v2)).mean();
  report["entropy"] = -s.logp.mean();

  if (auto_alpha_) {
    Vector grad(1);
    grad[0] = alpha_gradient(s.logp);
    alpha_opt_.step(log_alpha_, grad, lr_alpha_);
  }
  report["alpha"] = alpha();

  polyak_update(q1_target_, q1_, tau_);
  polyak_update(q2_target_, q2_, tau_);
  ++updates_;
  return report;
}

}  // namespace drl
