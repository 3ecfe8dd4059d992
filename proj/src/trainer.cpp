#include "drl/trainer.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>

#include "drl/error.hpp"
#include "drl/returns.hpp"
#include "drl/srl.hpp"

namespace drl {
namespace {

constexpr std::uint64_t kTrainerStream = 0x7a1e;

// Presents the latent representation of a fitted SRL module to the agent.
class EncodedPool : public VecEnv {
 public:
  EncodedPool(std::unique_ptr<VecEnv> inner, std::unique_ptr<SrlModule> module)
      : inner_(std::move(inner)), module_(std::move(module)) {
    spaces_ = inner_->spaces();
    spaces_.obs_dim = module_->latent_dim();
  }

  int size() const override { return inner_->size(); }
  const Spaces& spaces() const override { return spaces_; }
  int max_episode_steps() const override { return inner_->max_episode_steps(); }
  Matrix reset() override { return module_->transform(inner_->reset()); }

  PoolStep step(const Matrix& actions) override {
    PoolStep s = inner_->step(actions);
    s.next_obs = encode(s.next_obs);
    for (auto& r : s.results) r.obs = encode(Matrix(r.obs.transpose())).row(0).transpose();
    return s;
  }

  Matrix encode(const Matrix& rows) const { return module_->transform(rows); }
  const SrlModule& module() const { return *module_; }

 private:
  std::unique_ptr<VecEnv> inner_;
  std::unique_ptr<SrlModule> module_;
  Spaces spaces_;
};

Row make_row(std::initializer_list<std::pair<const char*, Vector>> items) {
  Row row;
  for (const auto& [k, v] : items) row.emplace(k, v);
  return row;
}

Vector scalar(double v) { return Vector::Constant(1, v); }

}  // namespace

Session::Session(const RunConfig& config, std::uint64_t seed)
    : config_(config),
      seed_(seed),
      rng_(make_stream(seed, kTrainerStream)),
      walltime_(config.run.get<bool>("walltime")),
      start_(std::chrono::steady_clock::now()) {
  counter_.budget = config.run.get<long>("n_transitions");
}

void Session::account(const PoolStep& step) {
  for (std::size_t i = 0; i < step.results.size(); ++i) {
    counter_.transitions += 1;
    if (i < step.scores.size() && step.scores[i]) {
      counter_.episodes += 1;
      const double wall =
          walltime_ ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count() : 0.0;
      records_.push_back({counter_.transitions, counter_.episodes, *step.scores[i], wall});
    }
  }
}

OnPolicyTrainer::OnPolicyTrainer(const ParamTree& params)
    : update_size_(params.get<int>("update_size")),
      n_epochs_(params.get<int>("n_epochs")),
      batch_size_(params.get<int>("batch_size")),
      bootstrap_(params.get<bool>("bootstrap")) {}

std::unique_ptr<VecEnv> OnPolicyTrainer::make_pool(const RunConfig& config, std::uint64_t seed) const {
  return drl::make_pool(config.environment, seed);
}

void OnPolicyTrainer::run(Session& session, Agent& agent_base, VecEnv& pool, Matrix obs) {
  auto* agent = dynamic_cast<PpoAgent*>(&agent_base);
  if (agent == nullptr) throw SchemaError("on-policy trainers require the ppo agent");
  const int n = pool.size();
  const int length = pool.max_episode_steps();
  BootstrapPlan plan(update_size_, n, length, bootstrap_);
  const auto fields = agent->buffer_fields();
  StagingBuffer staging(fields, n);
  RingBuffer ring((update_size_ + n) * length, fields);
  Counter& counter = session.counter();
  std::unique_ptr<bool[]> ended(new bool[n]);

  while (!session.done()) {
    const ActBatch b = agent->act(obs, ActMode::kExplore);
    const PoolStep st = pool.step(b.env_actions);

    // Timeouts bootstrap from the value of the true final observation.
    std::vector<int> timeouts;
    for (int e = 0; e < n; ++e)
      if (st.results[e].truncated && !st.results[e].terminal) timeouts.push_back(e);
    Vector boot = Vector::Zero(n);
    if (!timeouts.empty()) {
      Matrix finals(static_cast<Eigen::Index>(timeouts.size()), obs.cols());
      for (std::size_t k = 0; k < timeouts.size(); ++k) finals.row(k) = st.results[timeouts[k]].obs.transpose();
      const Vector v = agent->value(finals);
      for (std::size_t k = 0; k < timeouts.size(); ++k) boot[timeouts[k]] = v[k];
    }

    for (int e = 0; e < n; ++e) {
      const StepResult& r = st.results[e];
      staging.store(e, make_row({{"obs", obs.row(e).transpose()},
                                 {"action", b.actions.row(e).transpose()},
                                 {"reward", scalar(r.reward)},
                                 {"terminal", scalar(r.terminal ? 1.0 : 0.0)},
                                 {"truncated", scalar(r.truncated && !r.terminal ? 1.0 : 0.0)},
                                 {"value", scalar(b.values[e])},
                                 {"logp", scalar(b.logp[e])},
                                 {"boot_value", scalar(boot[e])}}));
      ended[e] = r.terminal || r.truncated;
    }
    session.account(st);
    obs = st.next_obs;

    const PlanDecision d = plan.step(std::span<const bool>(ended.get(), n));
    if (!d.update) continue;

    std::vector<int> cut;
    for (int e = 0; e < n; ++e)
      if (d.truncate[e]) cut.push_back(e);
    if (!cut.empty()) {
      Matrix current(static_cast<Eigen::Index>(cut.size()), obs.cols());
      for (std::size_t k = 0; k < cut.size(); ++k) current.row(k) = obs.row(cut[k]);
      const Vector v = agent->value(current);
      for (std::size_t k = 0; k < cut.size(); ++k) {
        const int last = staging.size(cut[k]) - 1;
        staging.value(cut[k], last, "truncated")[0] = 1.0;
        staging.value(cut[k], last, "boot_value")[0] = v[k];
      }
    }
    if (bootstrap_) {
      staging.collect(ring);
    } else {
      staging.collect_prefix(ring, d.consume);
    }
    Batch batch = ring.drain_all();
    agent->compute_advantages(batch);
    agent->update(batch, n_epochs_, batch_size_);
    counter.updates += 1;
    session.update_sizes().push_back(static_cast<long>(batch.size()));
  }
}

std::unique_ptr<VecEnv> SeparableTrainer::make_pool(const RunConfig& config, std::uint64_t seed) const {
  const auto type = config.environment.get<std::string>("type");
  auto env = make_env(type, config.environment);
  if (env->n_actuators() < 1)
    throw SchemaError("environment '" + type + "' exposes no local observations; the separable trainer needs them");
  return std::make_unique<SeparablePool>(std::move(env), seed);
}

OffPolicyTrainer::OffPolicyTrainer(const ParamTree& params)
    : batch_size_(params.get<int>("batch_size")),
      update_every_(params.get<int>("update_every")),
      warmup_(params.get<long>("warmup")) {
  if (update_every_ < 1) throw SchemaError("trainer.update_every must be >= 1");
  if (warmup_ < 0) throw SchemaError("trainer.warmup must be >= 0");
}

std::unique_ptr<VecEnv> OffPolicyTrainer::make_pool(const RunConfig& config, std::uint64_t seed) const {
  return drl::make_pool(config.environment, seed);
}

void OffPolicyTrainer::run(Session& session, Agent& agent_base, VecEnv& pool, Matrix obs) {
  auto* agent = dynamic_cast<OffPolicyAgent*>(&agent_base);
  if (agent == nullptr) throw SchemaError("the off-policy trainer requires dqn, td3 or sac");
  const int n = pool.size();
  const auto fields = agent->buffer_fields();
  StagingBuffer staging(fields, n);
  RingBuffer ring(agent->buffer_size(), fields);
  Counter& counter = session.counter();
  long due = 0;

  while (!session.done()) {
    const ActBatch b = counter.transitions < warmup_ ? random_actions(pool.spaces(), n, session.rng())
                                                     : agent->act(obs, ActMode::kExplore);
    const PoolStep st = pool.step(b.env_actions);
    for (int e = 0; e < n; ++e) {
      const StepResult& r = st.results[e];
      staging.store(e, make_row({{"obs", obs.row(e).transpose()},
                                 {"action", b.actions.row(e).transpose()},
                                 {"reward", scalar(r.reward)},
                                 {"next_obs", r.obs},
                                 {"terminal", scalar(r.terminal ? 1.0 : 0.0)}}));
    }
    staging.collect(ring);
    session.account(st);
    obs = st.next_obs;

    // Updates that fall due before the ring holds one batch are skipped.
    while (counter.transitions - warmup_ >= (due + 1) * update_every_) {
      ++due;
      if (ring.size() < batch_size_) continue;
      agent->update(ring.sample(batch_size_, session.rng()));
      counter.updates += 1;
    }
  }
}

Factory<std::unique_ptr<Trainer>, TrainerContext>& trainer_factory() {
  static Factory<std::unique_ptr<Trainer>, TrainerContext> factory = [] {
    Factory<std::unique_ptr<Trainer>, TrainerContext> f;
    f.register_key("on_policy", [](const ParamTree& p, const TrainerContext&) -> std::unique_ptr<Trainer> {
      return std::make_unique<OnPolicyTrainer>(p);
    });
    f.register_key("separable", [](const ParamTree& p, const TrainerContext&) -> std::unique_ptr<Trainer> {
      return std::make_unique<SeparableTrainer>(p);
    });
    f.register_key("off_policy", [](const ParamTree& p, const TrainerContext&) -> std::unique_ptr<Trainer> {
      return std::make_unique<OffPolicyTrainer>(p);
    });
    return f;
  }();
  return factory;
}

std::filesystem::path score_path(const RunConfig& config, std::uint64_t seed) {
  return std::filesystem::path(config.run.get<std::string>("output_dir")) /
         (config.name + "_s" + std::to_string(seed) + ".dat");
}

TrainResult train(const RunConfig& config, const TrainOptions& options) {
  const std::uint64_t seed = options.seed.value_or(config.run.get<std::uint64_t>("seed"));
  Session session(config, seed);
  auto trainer = trainer_factory().create(config.trainer.get<std::string>("type"), config.trainer, {});
  std::unique_ptr<VecEnv> pool = trainer->make_pool(config, seed);
  Matrix obs = pool->reset();

  TrainResult result;
  bool ready = true;
  const EncodedPool* encoded = nullptr;
  if (config.srl) {
    const ParamTree& srl = *config.srl;
    SrlState state(srl.get<int>("warmup_samples"), pool->spaces().obs_dim);
    state.observe(obs);
    while (state.phase() == SrlState::Phase::kWarmup && !session.done()) {
      const ActBatch b = random_actions(pool->spaces(), pool->size(), session.rng());
      const PoolStep st = pool->step(b.env_actions);
      session.account(st);
      obs = st.next_obs;
      state.observe(obs);
    }
    result.warmup_transitions = session.counter().transitions;
    result.warmup_updates = session.counter().updates;
    ready = state.phase() == SrlState::Phase::kActive;
    if (ready) {
      auto module = srl_factory().create(srl.get<std::string>("type"), srl, SrlContext{seed});
      module->fit(state.data());
      result.latent_dim = module->latent_dim();
      auto wrapped = std::make_unique<EncodedPool>(std::move(pool), std::move(module));
      obs = wrapped->encode(obs);
      encoded = wrapped.get();
      pool = std::move(wrapped);
    }
  }

  std::unique_ptr<Agent> agent;
  if (ready) {
    AgentContext ctx{pool->spaces(), pool->size(), session.counter().budget, seed};
    agent = agent_factory().create(config.agent.get<std::string>("type"), config.agent, ctx);
    trainer->run(session, *agent, *pool, std::move(obs));
  }

  if (!options.score_path.empty()) {
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016" PRIx64, config.hash());
    report_write(session.records(), options.score_path,
                 "config_hash " + std::string(hash) + " name " + config.name + " seed " + std::to_string(seed));
  }
  if (config.run.get<bool>("checkpoint") && agent) {
    const std::filesystem::path dir = config.run.get<std::string>("output_dir");
    const std::string prefix = config.name + "_s" + std::to_string(seed);
    agent->save(dir, prefix);
    for (const auto& [name, _] : agent->networks()) result.checkpoints.push_back((dir / (prefix + "_" + name + ".dknn")).string());
    if (encoded) {
      const auto path = dir / (prefix + "_srl.bin");
      encoded->module().save(path);
      result.checkpoints.push_back(path.string());
    }
  }

  result.records = std::move(session.records());
  result.counter = session.counter();
  result.update_sizes = std::move(session.update_sizes());
  return result;
}

}  // namespace drl
