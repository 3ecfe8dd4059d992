#ifndef DRL_AGENTS_HPP_
#define DRL_AGENTS_HPP_

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "drl/buffer.hpp"
#include "drl/config.hpp"
#include "drl/envs.hpp"
#include "drl/nn.hpp"
#include "drl/registry.hpp"
#include "drl/rng.hpp"

namespace drl {

enum class ActMode { kExplore, kDeterministic };

struct ActBatch {
  Matrix actions;      // agent space, stored in buffers (discrete: index)
  Matrix env_actions;  // environment units
  Vector logp;         // ppo, sac
  Vector values;       // ppo
};

using UpdateReport = std::map<std::string, double>;

struct AgentContext {
  Spaces spaces;
  int n_envs = 1;
  long budget = 0;  // transition budget, drives schedules
  std::uint64_t seed = 0;
};

// Uniform random actions over the space (warmup phases).
ActBatch random_actions(const Spaces& spaces, int n, Rng& rng);

class Agent {
 public:
  Agent(const ParamTree& params, const AgentContext& context);
  virtual ~Agent() = default;

  virtual std::string_view type() const = 0;
  virtual bool on_policy() const = 0;
  virtual std::vector<FieldSpec> buffer_fields() const = 0;
  virtual std::map<std::string, const Mlp*> networks() const = 0;

  // One row per observation.
  virtual ActBatch act(const Matrix& obs, ActMode mode) = 0;
  ActBatch act_one(const Vector& obs, ActMode mode);

  const Spaces& spaces() const { return spaces_; }
  double gamma() const { return gamma_; }
  long updates() const { return updates_; }

  // One DKNN file per named network: <dir>/<prefix>_<name>.dknn
  void save(const std::filesystem::path& dir, const std::string& prefix) const;

 protected:
  Mlp build_network(const std::string& section, int in, int out, Activation output);
  Matrix to_env_units(const Matrix& normalized) const;
  void check_obs(const Matrix& obs) const;

  ParamTree params_;
  Spaces spaces_;
  double gamma_;
  double grad_clip_;
  long budget_;
  Rng rng_;
  long updates_ = 0;
};

// Clipped-surrogate policy gradient with a Gaussian (continuous) or
// categorical (discrete) head and a separate value network.
class PpoAgent : public Agent {
 public:
  PpoAgent(const ParamTree& params, const AgentContext& context);

  std::string_view type() const override { return "ppo"; }
  bool on_policy() const override { return true; }
  std::vector<FieldSpec> buffer_fields() const override;
  std::map<std::string, const Mlp*> networks() const override;
  ActBatch act(const Matrix& obs, ActMode mode) override;

  Vector value(const Matrix& obs) const;
  Vector log_prob(const Matrix& obs, const Matrix& actions) const;

  // Adds "adv" and "ret" columns. Trajectories are delimited by the
  // terminal/truncated flags; truncated tails bootstrap from "boot_value".
  void compute_advantages(Batch& rollout) const;

  UpdateReport update(const Batch& rollout, int n_epochs, int batch_size);

  const Mlp& policy() const { return policy_; }
  Mlp& mutable_policy() { return policy_; }
  const Vector& log_std() const { return log_std_; }
  double gae_lambda() const { return lambda_; }

 private:
  Mlp policy_;
  Mlp value_;
  Vector log_std_;
  AdamState policy_opt_;
  AdamState value_opt_;
  VectorAdam log_std_opt_;
  double clip_;
  double lambda_;
  double entropy_coef_;
  double reward_scale_;
  bool normalize_advantages_;
  double lr_policy_;
  double lr_value_;
};

class OffPolicyAgent : public Agent {
 public:
  using Agent::Agent;
  bool on_policy() const override { return false; }
  std::vector<FieldSpec> buffer_fields() const override;
  virtual UpdateReport update(const Batch& batch) = 0;
  int buffer_size() const { return params_.get<int>("buffer_size"); }
};

class DqnAgent : public OffPolicyAgent {
 public:
  DqnAgent(const ParamTree& params, const AgentContext& context);

  std::string_view type() const override { return "dqn"; }
  std::map<std::string, const Mlp*> networks() const override;
  ActBatch act(const Matrix& obs, ActMode mode) override;
  UpdateReport update(const Batch& batch) override;

  double epsilon() const;
  void set_epsilon_override(double eps) { eps_override_ = eps; }
  Vector q_values(const Vector& obs) const;
  const Mlp& online() const { return q_; }
  Mlp& mutable_online() { return q_; }
  const Mlp& target() const { return q_target_; }

 private:
  Mlp q_;
  Mlp q_target_;
  AdamState opt_;
  LossKind loss_;
  bool hard_sync_;
  int target_every_;
  double tau_;
  bool double_q_;
  double lr_;
  double eps_start_, eps_end_, eps_fraction_;
  double eps_override_ = -1.0;
  long act_steps_ = 0;
};

class Td3Agent : public OffPolicyAgent {
 public:
  Td3Agent(const ParamTree& params, const AgentContext& context);

  std::string_view type() const override { return "td3"; }
  std::map<std::string, const Mlp*> networks() const override;
  ActBatch act(const Matrix& obs, ActMode mode) override;
  UpdateReport update(const Batch& batch) override;

  // Smoothed target-policy actions a' = clip(pi'(s') + clip(noise, +-c), -1, 1).
  Matrix target_actions(const Matrix& next_obs);
  Vector critic_targets(const Batch& batch, const Matrix& next_actions) const;

  const Mlp& actor() const { return actor_; }
  const Mlp& critic(int i) const { return i == 0 ? q1_ : q2_; }
  const Mlp& critic_target(int i) const { return i == 0 ? q1_target_ : q2_target_; }
  long critic_updates() const { return critic_updates_; }

 private:
  Mlp actor_, actor_target_;
  Mlp q1_, q2_, q1_target_, q2_target_;
  AdamState actor_opt_, q1_opt_, q2_opt_;
  double explore_noise_, smoothing_noise_, smoothing_clip_, tau_;
  int policy_delay_;
  double lr_policy_, lr_value_;
  long critic_updates_ = 0;
};

class SacAgent : public OffPolicyAgent {
 public:
  SacAgent(const ParamTree& params, const AgentContext& context);

  std::string_view type() const override { return "sac"; }
  std::map<std::string, const Mlp*> networks() const override;
  ActBatch act(const Matrix& obs, ActMode mode) override;
  UpdateReport update(const Batch& batch) override;

  double alpha() const;
  double target_entropy() const { return target_entropy_; }
  Vector critic_targets(const Batch& batch, const Matrix& next_actions, const Vector& next_logp) const;
  // d/d(log alpha) of E[-alpha (logp + target_entropy)].
  double alpha_gradient(const Vector& logp) const;

  const Mlp& actor() const { return actor_; }

 private:
  struct PolicySample {
    Matrix u, action, eps;
    Vector logp;
    Matrix mean, log_std;
    Matrix clamp_mask;  // 1 where the raw log-std lies inside the clamp range
  };
  PolicySample sample_policy(const Matrix& obs, ForwardCache* cache);

  Mlp actor_;
  Mlp q1_, q2_, q1_target_, q2_target_;
  AdamState actor_opt_, q1_opt_, q2_opt_;
  Vector log_alpha_;
  VectorAdam alpha_opt_;
  bool auto_alpha_;
  double target_entropy_;
  double tau_;
  double lr_policy_, lr_value_, lr_alpha_;
};

Factory<std::unique_ptr<Agent>, AgentContext>& agent_factory();

Matrix concat_columns(const Matrix& a, const Matrix& b);

}  // namespace drl

#endif  // DRL_AGENTS_HPP_
