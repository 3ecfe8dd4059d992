#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "drl/agents.hpp"
#include "drl/dist.hpp"
#include "drl/error.hpp"
#include "drl/returns.hpp"

namespace drl {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

Vector clamped(const Vector& log_std) { return log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax); }

// Row-wise log-softmax.
Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

}  // namespace

PpoAgent::PpoAgent(const ParamTree& params, const AgentContext& context)
    : Agent(params, context),
      clip_(params.get<double>("clip")),
      lambda_(params.get<double>("gae_lambda")),
      entropy_coef_(params.get<double>("entropy_coef")),
      reward_scale_(params.get<double>("reward_scale")),
      normalize_advantages_(params.get<bool>("normalize_advantages")),
      lr_policy_(params.get<double>("lr.policy")),
      lr_value_(params.get<double>("lr.value")) {
  const bool discrete = spaces_.is_discrete();
  const int out = discrete ? spaces_.n_actions : spaces_.action_dim();
  policy_ = build_network("policy", spaces_.obs_dim, out, Activation::kLinear);
  value_ = build_network("value", spaces_.obs_dim, 1, Activation::kLinear);
  const double out_scale = params.get<double>("policy_output_scale");
  policy_.mutable_layer(policy_.num_layers() - 1).weights *= out_scale;
  log_std_ = Vector::Constant(discrete ? 0 : out, params.get<double>("log_std_init"));
  policy_opt_ = AdamState::for_network(policy_);
  value_opt_ = AdamState::for_network(value_);
  log_std_opt_ = VectorAdam(log_std_.size());
}

std::vector<FieldSpec> PpoAgent::buffer_fields() const {
  return {{"obs", spaces_.obs_dim}, {"action", spaces_.action_dim()}, {"reward", 1}, {"terminal", 1},
          {"truncated", 1},         {"value", 1},                      {"logp", 1},   {"boot_value", 1}};
}

std::map<std::string, const Mlp*> PpoAgent::networks() const { return {{"policy", &policy_}, {"value", &value_}}; }

Vector PpoAgent::value(const Matrix& obs) const {
  check_obs(obs);
  return value_.forward(obs).col(0);
}

ActBatch PpoAgent::act(const Matrix& obs, ActMode mode) {
  check_obs(obs);
  const Matrix out = policy_.forward(obs);
  const Eigen::Index n = obs.rows();
  ActBatch b;
  b.actions.resize(n, spaces_.action_dim());
  b.logp.resize(n);
  b.values = value(obs);
  if (spaces_.is_discrete()) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Categorical c{out.row(i).transpose()};
      int a;
      if (mode == ActMode::kExplore) {
        const DiscreteSample s = categorical_sample_logprob_entropy(c, rng_);
        a = s.action;
        b.logp[i] = s.logp;
      } else {
        a = argmax(c.logits);
        b.logp[i] = c.log_prob(a);
      }
      b.actions(i, 0) = a;
    }
    b.env_actions = b.actions;
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      DiagGaussian g(out.row(i).transpose(), log_std_);
      if (mode == ActMode::kExplore) {
        const Sample s = gaussian_sample_logprob(g, rng_);
        b.actions.row(i) = s.action.transpose();
        b.logp[i] = s.logp;
      } else {
        b.actions.row(i) = g.mean.transpose();
        b.logp[i] = g.log_prob(g.mean);
      }
    }
    b.env_actions = to_env_units(b.actions);
  }
  return b;
}

Vector PpoAgent::log_prob(const Matrix& obs, const Matrix& actions) const {
  check_obs(obs);
  const Matrix out = policy_.forward(obs);
  Vector lp(obs.rows());
  if (spaces_.is_discrete()) {
    const Matrix ls = log_softmax(out);
    for (Eigen::Index i = 0; i < obs.rows(); ++i) lp[i] = ls(i, static_cast<Eigen::Index>(actions(i, 0)));
  } else {
    const Vector ls = clamped(log_std_);
    const Eigen::ArrayXd inv_std = (-ls).array().exp();
    for (Eigen::Index i = 0; i < obs.rows(); ++i) {
      const Eigen::ArrayXd z = (actions.row(i) - out.row(i)).transpose().array() * inv_std;
      lp[i] = (-0.5 * z.square() - ls.array() - kHalfLog2Pi).sum();
    }
  }
  return lp;
}

void PpoAgent::compute_advantages(Batch& rollout) const {
  const Eigen::Index n = rollout.size();
  const Matrix& reward = rollout["reward"];
  const Matrix& terminal = rollout["terminal"];
  const Matrix& truncated = rollout["truncated"];
  const Matrix& value = rollout["value"];
  const Matrix& boot = rollout["boot_value"];
  Matrix adv(n, 1), ret(n, 1);
  Eigen::Index start = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool term = terminal(i, 0) != 0.0;
    const bool trunc = truncated(i, 0) != 0.0;
    if (!term && !trunc) {
      if (i + 1 == n) throw ShapeError("rollout must end on an episode boundary (terminal or truncated row)");
      continue;
    }
    Trajectory t;
    t.terminal = term;
    t.truncated = trunc && !term;
    for (Eigen::Index j = start; j <= i; ++j) {
      t.rewards.push_back(reward(j, 0) * reward_scale_);
      t.values.push_back(value(j, 0));
    }
    t.values.push_back(term ? 0.0 : boot(i, 0));
    const std::vector<double> a = gae(t, gamma_, lambda_);
    for (Eigen::Index j = start; j <= i; ++j) {
      adv(j, 0) = a[j - start];
      ret(j, 0) = a[j - start] + value(j, 0);
    }
    start = i + 1;
  }
  rollout.set("adv", std::move(adv));
  rollout.set("ret", std::move(ret));
}

UpdateReport PpoAgent::update(const Batch& rollout, int n_epochs, int batch_size) {
  const Eigen::Index n = rollout.size();
  UpdateReport report;
  if (n == 0) return report;
  if (n_epochs < 1 || batch_size < 1) throw ShapeError("ppo_update needs n_epochs >= 1 and batch_size >= 1");

  const Matrix& obs = rollout["obs"];
  const Matrix& actions = rollout["action"];
  const Matrix& old_logp = rollout["logp"];
  const Matrix& ret = rollout["ret"];
  std::vector<double> adv(rollout["adv"].data(), rollout["adv"].data() + n);
  if (normalize_advantages_ && n > 1) normalize(adv);

  const bool discrete = spaces_.is_discrete();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);

  double policy_loss_sum = 0, value_loss_sum = 0, entropy_sum = 0, kl_sum = 0, clipped = 0;
  double first_ratio_dev = 0.0;
  int minibatches = 0;
  bool first = true;

  for (int epoch = 0; epoch < n_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_);
    for (Eigen::Index start = 0; start < n; start += batch_size) {
      const Eigen::Index bsz = std::min<Eigen::Index>(batch_size, n - start);
      const double inv_b = 1.0 / static_cast<double>(bsz);
      Matrix x(bsz, obs.cols()), a(bsz, actions.cols());
      Vector olp(bsz), av(bsz), rt(bsz);
      for (Eigen::Index r = 0; r < bsz; ++r) {
        const Eigen::Index idx = order[start + r];
        x.row(r) = obs.row(idx);
        a.row(r) = actions.row(idx);
        olp[r] = old_logp(idx, 0);
        av[r] = adv[idx];
        rt[r] = ret(idx, 0);
      }

      // Policy.
      ForwardCache pcache;
      const Matrix out = policy_.forward(x, pcache);
      Vector logp(bsz);
      Matrix dout = Matrix::Zero(out.rows(), out.cols());
      Vector dlog_std = Vector::Zero(log_std_.size());
      double entropy = 0.0;
      Matrix lsm;
      Vector ls, inv_var;
      if (discrete) {
        lsm = log_softmax(out);
        for (Eigen::Index r = 0; r < bsz; ++r) logp[r] = lsm(r, static_cast<Eigen::Index>(a(r, 0)));
      } else {
        ls = clamped(log_std_);
        inv_var = (-2.0 * ls).array().exp();
        const Eigen::ArrayXd inv_std = (-ls).array().exp();
        for (Eigen::Index r = 0; r < bsz; ++r) {
          const Eigen::ArrayXd z = (a.row(r) - out.row(r)).transpose().array() * inv_std;
          logp[r] = (-0.5 * z.square() - ls.array() - kHalfLog2Pi).sum();
        }
      }

      double surrogate = 0.0;
      Vector dlogp(bsz);
      for (Eigen::Index r = 0; r < bsz; ++r) {
        const double ratio = std::exp(logp[r] - olp[r]);
        if (first) first_ratio_dev = std::max(first_ratio_dev, std::abs(ratio - 1.0));
        const double unclipped = ratio * av[r];
        const double clipped_term = std::clamp(ratio, 1.0 - clip_, 1.0 + clip_) * av[r];
        if (unclipped <= clipped_term) {
          surrogate += unclipped;
          dlogp[r] = -inv_b * unclipped;  // d(-ratio*A)/dlogp
        } else {
          surrogate += clipped_term;
          dlogp[r] = 0.0;
          clipped += 1.0;
        }
        kl_sum += (olp[r] - logp[r]) * inv_b;
      }
      first = false;

      if (discrete) {
        for (Eigen::Index r = 0; r < bsz; ++r) {
          const Eigen::ArrayXd lp = lsm.row(r).transpose().array();
          const Eigen::ArrayXd p = lp.exp();
          const double h = -(p * lp).sum();
          entropy += h * inv_b;
          Eigen::ArrayXd g = -p * dlogp[r];
          g[static_cast<Eigen::Index>(a(r, 0))] += dlogp[r];
          // -coef * dH/dlogits with dH/dlogit_j = -p_j (log p_j + H)
          g += entropy_coef_ * inv_b * p * (lp + h);
          dout.row(r) = g.matrix().transpose();
        }
      } else {
        const Eigen::ArrayXd in_range =
            ((log_std_.array() >= kLogStdMin) && (log_std_.array() <= kLogStdMax)).cast<double>();
        entropy = (ls.array() + 0.5 + kHalfLog2Pi).sum();
        for (Eigen::Index r = 0; r < bsz; ++r) {
          const Eigen::ArrayXd diff = (a.row(r) - out.row(r)).transpose().array();
          dout.row(r) = (dlogp[r] * diff * inv_var.array()).matrix().transpose();
          dlog_std += (dlogp[r] * (diff.square() * inv_var.array() - 1.0)).matrix();
        }
        dlog_std.array() -= entropy_coef_;
        dlog_std.array() *= in_range;
      }

      Grads pgrads = policy_.backward(pcache, dout);
      Grads* pg[] = {&pgrads};
      clip_global_norm(pg, grad_clip_, discrete ? nullptr : &dlog_std);
      adam_step(policy_opt_, policy_, pgrads, lr_policy_);
      if (!discrete) log_std_opt_.step(log_std_, dlog_std, lr_policy_);

      // Value.
      ForwardCache vcache;
      const Matrix v = value_.forward(x, vcache);
      const Matrix verr = v.col(0) - rt;
      const double vloss = 0.5 * verr.squaredNorm() * inv_b;
      Grads vgrads = value_.backward(vcache, verr * inv_b);
      Grads* vg[] = {&vgrads};
      clip_global_norm(vg, grad_clip_);
      adam_step(value_opt_, value_, vgrads, lr_value_);

      const double ploss = -surrogate * inv_b - entropy_coef_ * entropy;
      if (!std::isfinite(ploss) || !std::isfinite(vloss))
        throw NumericError("ppo_update: non-finite loss (policy " + std::to_string(ploss) + ", value " +
                           std::to_string(vloss) + ")");
      policy_loss_sum += ploss;
      value_loss_sum += vloss;
      entropy_sum += entropy;
      ++minibatches;
    }
  }
  ++updates_;
  report["policy_loss"] = policy_loss_sum / minibatches;
  report["value_loss"] = value_loss_sum / minibatches;
  report["entropy"] = entropy_sum / minibatches;
  report["approx_kl"] = kl_sum / minibatches;
  report["clip_fraction"] = clipped / static_cast<double>(n * n_epochs);
  report["first_ratio_dev"] = first_ratio_dev;
  return report;
}

}  // namespace drl
