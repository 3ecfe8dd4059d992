#include "drl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "drl/builtin_envs.hpp"
#include "drl/error.hpp"
#include "executor.hpp"

namespace drl {

Spaces Spaces::discrete(int obs_dim, int k) {
  if (obs_dim < 1 || k < 1) throw ShapeError("discrete space needs obs_dim >= 1 and k >= 1");
  Spaces s;
  s.obs_dim = obs_dim;
  s.kind = Kind::kDiscrete;
  s.n_actions = k;
  return s;
}

Spaces Spaces::continuous(int obs_dim, Vector lo, Vector hi) {
  if (obs_dim < 1 || lo.size() < 1 || lo.size() != hi.size())
    throw ShapeError("continuous space needs obs_dim >= 1 and matching non-empty bounds");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i])) throw ShapeError("continuous space requires lo < hi");
  Spaces s;
  s.obs_dim = obs_dim;
  s.kind = Kind::kContinuous;
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  return s;
}

bool Spaces::contains(const Vector& action) const {
  if (action.size() != action_dim() || !action.allFinite()) return false;
  if (is_discrete()) {
    const double a = action[0];
    return a == std::floor(a) && a >= 0 && a < n_actions;
  }
  for (Eigen::Index i = 0; i < action.size(); ++i)
    if (action[i] < lo[i] - 1e-12 || action[i] > hi[i] + 1e-12) return false;
  return true;
}

Vector Env::reset(Rng& rng) {
  elapsed_ = 0;
  return do_reset(rng);
}

StepResult Env::step(const Vector& action, Rng& rng) {
  if (!spaces().contains(action)) throw ShapeError(std::string(name()) + ": action outside the declared space");
  StepResult r = do_step(action, rng);
  ++elapsed_;
  if (!r.terminal && elapsed_ >= max_episode_steps()) r.truncated = true;
  return r;
}

Vector Env::local_observation(int) const {
  throw SchemaError(std::string(name()) + " does not provide local observations");
}

ObsTransform ObsTransform::from_params(const ParamTree& env_params) {
  ObsTransform t;
  const auto kind = env_params.get<std::string>("obs_transform.kind", "none");
  if (kind == "none") return t;
  const auto lo = env_params.get<std::vector<double>>("obs_transform.lo");
  const auto hi = env_params.get<std::vector<double>>("obs_transform.hi");
  if (lo.size() != hi.size()) throw SchemaError("obs_transform lo/hi size mismatch");
  t.kind = kind == "scale" ? Kind::kScale : kind == "clip" ? Kind::kClip : throw SchemaError("unsupported obs_transform.kind '" + kind + "'");
  t.lo = Vector::Map(lo.data(), static_cast<Eigen::Index>(lo.size()));
  t.hi = Vector::Map(hi.data(), static_cast<Eigen::Index>(hi.size()));
  return t;
}

Vector transform_obs(const Vector& obs, const ObsTransform& spec) {
  if (spec.kind == ObsTransform::Kind::kNone) return obs;
  if (obs.size() != spec.lo.size()) throw ShapeError("transform_obs: observation/spec dim mismatch");
  if (spec.kind == ObsTransform::Kind::kClip) return obs.cwiseMax(spec.lo).cwiseMin(spec.hi);
  return (2.0 * (obs - spec.lo).array() / (spec.hi - spec.lo).array() - 1.0).matrix();
}

Vector rescale_action(const Vector& a_norm, const Spaces& spaces) {
  if (spaces.is_discrete()) throw ShapeError("rescale_action needs a continuous space");
  if (a_norm.size() != spaces.lo.size()) throw ShapeError("rescale_action: dim mismatch");
  const Vector clipped = a_norm.cwiseMax(-1.0).cwiseMin(1.0);
  return (spaces.lo.array() + 0.5 * (clipped.array() + 1.0) * (spaces.hi - spaces.lo).array()).matrix();
}

std::optional<ObsLift> ObsLift::from_params(const ParamTree& env_params, int obs_dim) {
  if (!env_params.has("lift")) return std::nullopt;
  ObsLift lift;
  const int dim = env_params.get<int>("lift.dim");
  lift.noise_dim = env_params.get<int>("lift.noise_dim", 0);
  lift.noise_std = env_params.get<double>("lift.noise_std", 0.01);
  if (dim < 1 || lift.noise_dim < 0) throw SchemaError("lift.dim must be >= 1 and lift.noise_dim >= 0");
  Rng rng = make_stream(env_params.get<std::uint64_t>("lift.seed", 0), 0x11f7);
  lift.map.resize(dim, obs_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < obs_dim; ++c) lift.map(r, c) = scale * standard_normal(rng);
  return lift;
}

Vector ObsLift::apply(const Vector& obs, Rng& rng) const {
  Vector out(out_dim());
  out.head(map.rows()) = map * obs;
  for (int i = 0; i < noise_dim; ++i) out[map.rows() + i] = noise_std * standard_normal(rng);
  return out;
}

std::vector<double> local_window(const Vector& x, int center, int window) {
  const int n = static_cast<int>(x.size());
  const int half = window / 2;
  std::vector<double> out;
  out.reserve(window);
  for (int k = -half; k <= half; ++k) out.push_back(x[((center + k) % n + n) % n]);
  return out;
}

namespace {

// Applies the configured observation transform and lift on top of a base env.
class TransformedEnv : public Env {
 public:
  TransformedEnv(std::unique_ptr<Env> inner, ObsTransform transform, std::optional<ObsLift> lift)
      : inner_(std::move(inner)), transform_(std::move(transform)), lift_(std::move(lift)) {
    spaces_ = inner_->spaces();
    if (transform_.kind != ObsTransform::Kind::kNone && transform_.lo.size() != spaces_.obs_dim)
      throw SchemaError("obs_transform bounds must have one entry per observation dim (" +
                        std::to_string(spaces_.obs_dim) + ")");
    if (lift_) spaces_.obs_dim = lift_->out_dim();
  }

  std::string_view name() const override { return inner_->name(); }
  const Spaces& spaces() const override { return spaces_; }
  int max_episode_steps() const override { return inner_->max_episode_steps(); }

 protected:
  Vector do_reset(Rng& rng) override { return apply(inner_->reset(rng), rng); }

  StepResult do_step(const Vector& action, Rng& rng) override {
    StepResult r = inner_->step(action, rng);
    r.obs = apply(r.obs, rng);
    return r;
  }

 private:
  Vector apply(const Vector& obs, Rng& rng) const {
    Vector o = transform_obs(obs, transform_);
    return lift_ ? lift_->apply(o, rng) : o;
  }

  std::unique_ptr<Env> inner_;
  ObsTransform transform_;
  std::optional<ObsLift> lift_;
  Spaces spaces_;
};

}  // namespace

Factory<std::unique_ptr<Env>, EnvContext>& environment_factory() {
  static Factory<std::unique_ptr<Env>, EnvContext> factory = [] {
    Factory<std::unique_ptr<Env>, EnvContext> f;
    f.register_key("cartpole", [](const ParamTree&, const EnvContext&) -> std::unique_ptr<Env> {
      return std::make_unique<CartPole>();
    });
    f.register_key("pendulum", [](const ParamTree&, const EnvContext&) -> std::unique_ptr<Env> {
      return std::make_unique<Pendulum>();
    });
    f.register_key("lorenz", [](const ParamTree&, const EnvContext&) -> std::unique_ptr<Env> {
      return std::make_unique<Lorenz>();
    });
    f.register_key("chain", [](const ParamTree& extra, const EnvContext&) -> std::unique_ptr<Env> {
      return std::make_unique<Chain>(extra);
    });
    return f;
  }();
  return factory;
}

std::unique_ptr<Env> make_env(std::string_view name, const ParamTree& params) {
  auto env = environment_factory().create(name, params.subtree("extra"), EnvContext{});
  ObsTransform transform = ObsTransform::from_params(params);
  auto lift = ObsLift::from_params(params, env->spaces().obs_dim);
  if (transform.kind == ObsTransform::Kind::kNone && !lift) return env;
  return std::make_unique<TransformedEnv>(std::move(env), std::move(transform), std::move(lift));
}

std::uint64_t worker_stream(int worker) { return 1000 + static_cast<std::uint64_t>(worker); }

WorkerPool::WorkerPool(std::vector<std::unique_ptr<Env>> envs, std::uint64_t seed, int threads)
    : envs_(std::move(envs)) {
  if (envs_.empty()) throw ShapeError("worker pool needs at least one environment");
  for (int i = 0; i < size(); ++i) rngs_.push_back(make_stream(seed, worker_stream(i)));
  episode_return_.assign(envs_.size(), 0.0);
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  executor_ = std::make_unique<Executor>(std::clamp(threads, 1, size()));
}

WorkerPool::~WorkerPool() = default;

Matrix WorkerPool::reset() {
  Matrix obs(size(), spaces().obs_dim);
  executor_->run(size(), [&](int i) {
    obs.row(i) = envs_[i]->reset(rngs_[i]).transpose();
    episode_return_[i] = 0.0;
  });
  return obs;
}

PoolStep WorkerPool::step(const Matrix& actions) {
  if (actions.rows() != size() || actions.cols() != spaces().action_dim())
    throw ShapeError("pool_step: expected " + std::to_string(size()) + " action rows of dim " +
                     std::to_string(spaces().action_dim()));
  PoolStep out;
  out.results.resize(size());
  out.scores.resize(size());
  out.next_obs.resize(size(), spaces().obs_dim);
  executor_->run(size(), [&](int i) {
    StepResult r = envs_[i]->step(actions.row(i).transpose(), rngs_[i]);
    episode_return_[i] += r.reward;
    if (r.terminal || r.truncated) {
      out.scores[i] = episode_return_[i];
      episode_return_[i] = 0.0;
      out.next_obs.row(i) = envs_[i]->reset(rngs_[i]).transpose();
    } else {
      out.next_obs.row(i) = r.obs.transpose();
    }
    out.results[i] = std::move(r);
  });
  return out;
}

SeparablePool::SeparablePool(std::unique_ptr<Env> env, std::uint64_t seed)
    : env_(std::move(env)), rng_(make_stream(seed, worker_stream(0))) {
  if (env_->n_actuators() < 1)
    throw SchemaError("environment '" + std::string(env_->name()) + "' does not support separable training");
  const Spaces& global = env_->spaces();
  if (global.is_discrete()) throw SchemaError("separable training needs a continuous action space");
  local_spaces_ = Spaces::continuous(env_->local_obs_dim(), Vector::Constant(1, global.lo[0]),
                                     Vector::Constant(1, global.hi[0]));
}

Matrix SeparablePool::local_obs() const {
  Matrix obs(size(), local_spaces_.obs_dim);
  for (int i = 0; i < size(); ++i) obs.row(i) = env_->local_observation(i).transpose();
  return obs;
}

Matrix SeparablePool::reset() {
  env_->reset(rng_);
  episode_return_ = 0.0;
  return local_obs();
}

PoolStep SeparablePool::step(const Matrix& actions) {
  if (actions.rows() != size() || actions.cols() != 1)
    throw ShapeError("separable pool: expected one 1-D action per actuator");
  const StepResult r = env_->step(actions.col(0), rng_);
  episode_return_ += r.reward;
  PoolStep out;
  out.results.resize(size());
  out.scores.resize(size());
  const Matrix post = local_obs();
  for (int i = 0; i < size(); ++i) {
    out.results[i].obs = post.row(i).transpose();
    out.results[i].reward = r.reward;
    out.results[i].terminal = r.terminal;
    out.results[i].truncated = r.truncated;
  }
  if (r.terminal || r.truncated) {
    out.scores[size() - 1] = episode_return_;
    out.next_obs = reset();
  } else {
    out.next_obs = post;
  }
  return out;
}

std::unique_ptr<WorkerPool> make_pool(const ParamTree& env_params, std::uint64_t seed) {
  const auto type = env_params.get<std::string>("type");
  const int n = env_params.get<int>("n_envs", 1);
  std::vector<std::unique_ptr<Env>> envs;
  for (int i = 0; i < n; ++i) envs.push_back(make_env(type, env_params));
  return std::make_unique<WorkerPool>(std::move(envs), seed, env_params.get<int>("threads", 0));
}

}  // namespace drl
