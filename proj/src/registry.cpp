#include "drl/registry.hpp"

#include <cmath>

#include "drl/agents.hpp"
#include "drl/error.hpp"
#include "drl/srl.hpp"
#include "drl/trainer.hpp"

namespace drl {
namespace {

constexpr double kHuberDelta = 1.0;

// Smallest valid run file exercising `agent` (and `trainer` when given).
RunConfig probe_config(const std::string& agent, std::string trainer = "") {
  const bool on_policy = agent == "ppo";
  if (trainer.empty()) trainer = on_policy ? "on_policy" : "off_policy";
  const std::string env = trainer == "separable" ? "chain" : agent == "dqn" ? "cartpole" : "pendulum";
  Json user = {{"agent", {{"type", agent}}}, {"trainer", {{"type", trainer}}}, {"environment", {{"type", env}}}};
  return finalize_config(user, "probe");
}

}  // namespace

Factory<Activation, NoContext>& activation_factory() {
  static Factory<Activation, NoContext> factory = [] {
    Factory<Activation, NoContext> f;
    f.register_key("tanh", [](const ParamTree&, const NoContext&) { return Activation::kTanh; });
    f.register_key("relu", [](const ParamTree&, const NoContext&) { return Activation::kRelu; });
    return f;
  }();
  return factory;
}

Factory<LossKind, NoContext>& loss_factory() {
  static Factory<LossKind, NoContext> factory = [] {
    Factory<LossKind, NoContext> f;
    f.register_key("mse", [](const ParamTree&, const NoContext&) { return LossKind::kMse; });
    f.register_key("huber", [](const ParamTree&, const NoContext&) { return LossKind::kHuber; });
    return f;
  }();
  return factory;
}

double loss_value(LossKind kind, double residual) {
  if (kind == LossKind::kMse) return 0.5 * residual * residual;
  const double a = std::abs(residual);
  return a <= kHuberDelta ? 0.5 * residual * residual : kHuberDelta * (a - 0.5 * kHuberDelta);
}

double loss_grad(LossKind kind, double residual) {
  if (kind == LossKind::kMse) return residual;
  return std::clamp(residual, -kHuberDelta, kHuberDelta);
}

std::vector<std::string> registered_keys(const std::string& category) {
  if (category == "agent") return agent_factory().keys();
  if (category == "trainer") return trainer_factory().keys();
  if (category == "environment") return environment_factory().keys();
  if (category == "srl") return srl_factory().keys();
  if (category == "activation") return activation_factory().keys();
  if (category == "loss") return loss_factory().keys();
  throw UnknownKeyError(category);
}

void probe_create(const std::string& category, const std::string& key) {
  if (category == "agent") {
    const RunConfig cfg = probe_config(key);
    auto pool = make_pool(cfg.environment, 0);
    AgentContext ctx{pool->spaces(), pool->size(), 1000, 0};
    agent_factory().create(key, cfg.agent, ctx);
  } else if (category == "trainer") {
    const RunConfig cfg = probe_config(key == "off_policy" ? "dqn" : "ppo", key);
    auto trainer = trainer_factory().create(key, cfg.trainer, {});
    trainer->make_pool(cfg, 0);
  } else if (category == "environment") {
    Json user = {{"agent", {{"type", "ppo"}}}, {"trainer", {{"type", "on_policy"}}}, {"environment", {{"type", key}}}};
    const RunConfig cfg = finalize_config(user, "probe");
    make_env(key, cfg.environment);
  } else if (category == "srl") {
    ParamTree params(deep_merge(default_table()["srl"], Json{{"type", key}}));
    srl_factory().create(key, params, SrlContext{0});
  } else if (category == "activation") {
    activation_factory().create(key, ParamTree(), {});
  } else if (category == "loss") {
    loss_factory().create(key, ParamTree(), {});
  } else {
    throw UnknownKeyError(category);
  }
}

}  // namespace drl
