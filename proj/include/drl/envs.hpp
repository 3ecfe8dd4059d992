#ifndef DRL_ENVS_HPP_
#define DRL_ENVS_HPP_

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drl/config.hpp"
#include "drl/nn.hpp"
#include "drl/rng.hpp"

namespace drl {

class Executor;

// Action and observation shapes. Discrete actions are stored as a single
// column holding the index.
struct Spaces {
  enum class Kind { kDiscrete, kContinuous };

  int obs_dim = 0;
  Kind kind = Kind::kDiscrete;
  int n_actions = 0;  // discrete
  Vector lo, hi;      // continuous bounds

  static Spaces discrete(int obs_dim, int k);
  static Spaces continuous(int obs_dim, Vector lo, Vector hi);

  bool is_discrete() const { return kind == Kind::kDiscrete; }
  int action_dim() const { return is_discrete() ? 1 : static_cast<int>(lo.size()); }
  bool contains(const Vector& action) const;
};

struct StepResult {
  Vector obs;
  double reward = 0.0;
  bool terminal = false;
  bool truncated = false;
};

// Base environment. step() validates the action, delegates to the concrete
// dynamics and converts an episode timeout into truncation.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::string_view name() const = 0;
  virtual const Spaces& spaces() const = 0;
  virtual int max_episode_steps() const = 0;

  Vector reset(Rng& rng);
  StepResult step(const Vector& action, Rng& rng);
  int elapsed_steps() const { return elapsed_; }

  // Number of actuators exposing a local observation; 0 when the
  // environment is not separable.
  virtual int n_actuators() const { return 0; }
  virtual Vector local_observation(int actuator) const;
  virtual int local_obs_dim() const { return 0; }

 protected:
  virtual Vector do_reset(Rng& rng) = 0;
  virtual StepResult do_step(const Vector& action, Rng& rng) = 0;

 private:
  int elapsed_ = 0;
};

struct ObsTransform {
  enum class Kind { kNone, kScale, kClip };
  Kind kind = Kind::kNone;
  Vector lo, hi;

  static ObsTransform from_params(const ParamTree& env_params);
};

Vector transform_obs(const Vector& obs, const ObsTransform& spec);

// Affine map of [-1, 1]^d onto [lo, hi], clipped.
Vector rescale_action(const Vector& a_norm, const Spaces& spaces);

// Fixed random linear embedding of the observation into `dim` channels plus
// `noise_dim` channels of Gaussian noise.
struct ObsLift {
  Matrix map;  // dim x obs_dim
  int noise_dim = 0;
  double noise_std = 0.0;

  static std::optional<ObsLift> from_params(const ParamTree& env_params, int obs_dim);
  int out_dim() const { return static_cast<int>(map.rows()) + noise_dim; }
  Vector apply(const Vector& obs, Rng& rng) const;
};

// `params` is the environment section (type, obs_transform, lift, extra).
std::unique_ptr<Env> make_env(std::string_view name, const ParamTree& params);

std::vector<double> local_window(const Vector& x, int center, int window);

struct EnvContext {};

// Built-in environments by name; creators receive the `extra` subtree.
Factory<std::unique_ptr<Env>, EnvContext>& environment_factory();

// Result of one synchronous step of all workers.
struct PoolStep {
  std::vector<StepResult> results;           // true post-step observation
  Matrix next_obs;                           // observation to act on next (post-reset where ended)
  std::vector<std::optional<double>> scores;  // completed-episode returns to report
};

// A set of workers stepped in lockstep.
class VecEnv {
 public:
  virtual ~VecEnv() = default;
  virtual int size() const = 0;
  virtual const Spaces& spaces() const = 0;
  virtual int max_episode_steps() const = 0;
  virtual Matrix reset() = 0;
  // actions: one row per worker, in environment units.
  virtual PoolStep step(const Matrix& actions) = 0;
};

// Independent environment copies, each with its own rng stream. Steps may
// run on several threads; results are always in worker order.
class WorkerPool : public VecEnv {
 public:
  WorkerPool(std::vector<std::unique_ptr<Env>> envs, std::uint64_t seed, int threads = 1);
  ~WorkerPool() override;

  int size() const override { return static_cast<int>(envs_.size()); }
  const Spaces& spaces() const override { return envs_.front()->spaces(); }
  int max_episode_steps() const override { return envs_.front()->max_episode_steps(); }
  Matrix reset() override;
  PoolStep step(const Matrix& actions) override;

  Env& env(int i) { return *envs_[i]; }

 private:
  std::vector<std::unique_ptr<Env>> envs_;
  std::vector<Rng> rngs_;
  std::vector<double> episode_return_;
  std::unique_ptr<Executor> executor_;
};

// Presents one separable environment with n_act actuators as n_act workers
// with a 1-D action each. All workers share the physical step, its reward
// and its flags; one score is reported per physical episode.
class SeparablePool : public VecEnv {
 public:
  SeparablePool(std::unique_ptr<Env> env, std::uint64_t seed);

  int size() const override { return env_->n_actuators(); }
  const Spaces& spaces() const override { return local_spaces_; }
  int max_episode_steps() const override { return env_->max_episode_steps(); }
  Matrix reset() override;
  PoolStep step(const Matrix& actions) override;

 private:
  Matrix local_obs() const;

  std::unique_ptr<Env> env_;
  Rng rng_;
  Spaces local_spaces_;
  double episode_return_ = 0.0;
};

std::uint64_t worker_stream(int worker);

// Builds the worker pool described by the environment section.
std::unique_ptr<WorkerPool> make_pool(const ParamTree& env_params, std::uint64_t seed);

}  // namespace drl

#endif  // DRL_ENVS_HPP_
