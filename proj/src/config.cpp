#include "drl/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace drl {
namespace {

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    parts.push_back(path.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts;
}

// Every default lives here. Agent and trainer sections are assembled as
// common <- per-type <- user file.
constexpr const char* kDefaults = R"json({
  "run": {
    "seed": 0, "n_runs": 1, "n_transitions": 100000, "output_dir": "results",
    "eval_every": 0, "walltime": true, "checkpoint": false
  },
  "environment": {
    "n_envs": 1, "threads": 0, "obs_transform": {"kind": "none"}, "extra": {}
  },
  "environment_types": {
    "cartpole": {}, "pendulum": {}, "lorenz": {},
    "chain": {"extra": {"n_act": 10, "window": 3, "amplitude": 0.8, "omega": 0.5, "max_steps": 100}}
  },
  "agent": {
    "gamma": 0.99, "init": "xavier_uniform", "grad_clip": 10.0,
    "networks": {
      "policy": {"layers": [64, 64], "activation": "tanh"},
      "value": {"layers": [64, 64], "activation": "tanh"}
    },
    "lr": {"policy": 3e-4, "value": 3e-4}
  },
  "agent_types": {
    "ppo": {
      "clip": 0.2, "gae_lambda": 0.95, "entropy_coef": 0.01, "log_std_init": 0.0,
      "normalize_advantages": true, "reward_scale": 1.0, "policy_output_scale": 0.01
    },
    "dqn": {
      "lr": {"value": 1e-3}, "eps_start": 1.0, "eps_end": 0.05, "eps_fraction": 0.5,
      "buffer_size": 50000, "target_update": "hard", "target_every": 500, "tau": 0.005,
      "loss": "mse", "double": false
    },
    "td3": {
      "lr": {"policy": 1e-3, "value": 1e-3},
      "networks": {
        "policy": {"layers": [64, 64], "activation": "relu"},
        "value": {"layers": [64, 64], "activation": "relu"}
      },
      "exploration_noise": 0.1, "smoothing_noise": 0.2, "smoothing_clip": 0.5,
      "policy_delay": 2, "tau": 0.005, "buffer_size": 200000
    },
    "sac": {
      "lr": {"policy": 3e-4, "value": 3e-4, "alpha": 3e-4},
      "networks": {
        "policy": {"layers": [64, 64], "activation": "relu"},
        "value": {"layers": [64, 64], "activation": "relu"}
      },
      "tau": 0.005, "alpha_init": 1.0, "auto_alpha": true, "target_entropy": null,
      "buffer_size": 200000
    }
  },
  "trainer": {"update_size": 4, "n_epochs": 4, "batch_size": 64, "bootstrap": true},
  "trainer_types": {
    "on_policy": {}, "separable": {},
    "off_policy": {"batch_size": 128, "update_every": 1, "warmup": 1000}
  },
  "srl": {
    "latent_dim": 0, "variance_threshold": 0.99, "warmup_samples": 2000, "save_path": "",
    "ae": {"hidden": [], "activation": "tanh", "epochs": 50, "batch_size": 64, "lr": 1e-3}
  }
})json";

const std::set<std::string, std::less<>> kTopLevel = {"run", "environment", "agent", "trainer", "srl"};

bool in_enum(std::string_view category, const std::string& value) {
  const auto& values = schema_enums().at(std::string(category));
  return std::find(values.begin(), values.end(), value) != values.end();
}

std::string require_type(const Json& user, const std::string& section) {
  if (!user.contains(section)) throw SchemaError("missing required section '" + section + "'");
  const Json& s = user.at(section);
  if (!s.is_object()) throw SchemaError("section '" + section + "' must be an object");
  if (!s.contains("type") || !s.at("type").is_string())
    throw SchemaError("missing string '" + section + ".type'");
  const auto type = s.at("type").get<std::string>();
  if (!in_enum(section, type)) throw SchemaError("unsupported " + section + ".type '" + type + "'");
  return type;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw SchemaError(message);
}

void validate_network(const ParamTree& agent, const std::string& name) {
  const std::string base = "networks." + name;
  const auto layers = agent.get<std::vector<int>>(base + ".layers");
  for (int width : layers) require(width >= 1, base + ".layers entries must be >= 1");
  const auto act = agent.get<std::string>(base + ".activation");
  require(in_enum("activation", act), "unsupported activation '" + act + "' in " + base);
}

void validate_obs_transform(const ParamTree& env) {
  const auto kind = env.get<std::string>("obs_transform.kind");
  require(kind == "none" || kind == "scale" || kind == "clip", "unsupported obs_transform.kind '" + kind + "'");
  if (kind == "none") return;
  const auto lo = env.get<std::vector<double>>("obs_transform.lo");
  const auto hi = env.get<std::vector<double>>("obs_transform.hi");
  require(lo.size() == hi.size() && !lo.empty(), "obs_transform.lo/hi must be equal-length non-empty lists");
  for (std::size_t i = 0; i < lo.size(); ++i)
    require(kind == "clip" ? lo[i] <= hi[i] : lo[i] < hi[i], "obs_transform requires lo < hi");
}

}  // namespace

ParamTree::ParamTree(Json root) : root_(std::move(root)) {
  if (!root_.is_object()) throw SchemaError("parameter tree root must be a JSON object");
}

ParamTree ParamTree::parse(std::string_view text) {
  try {
    return ParamTree(Json::parse(text));
  } catch (const Json::parse_error& e) {
    throw ParseError(e.what());
  }
}

const Json* ParamTree::find(std::string_view path) const {
  const Json* node = &root_;
  for (std::string_view part : split_path(path)) {
    if (!node->is_object()) return nullptr;
    auto it = node->find(std::string(part));
    if (it == node->end()) return nullptr;
    node = &*it;
  }
  return node;
}

bool ParamTree::has(std::string_view path) const { return find(path) != nullptr; }

const Json& ParamTree::at(std::string_view path) const {
  const Json* node = find(path);
  if (node == nullptr) throw SchemaError("missing parameter '" + std::string(path) + "'");
  return *node;
}

ParamTree ParamTree::subtree(std::string_view path) const {
  const Json* node = find(path);
  if (node == nullptr) return ParamTree();
  if (!node->is_object()) throw SchemaError("parameter '" + std::string(path) + "' is not a subtree");
  return ParamTree(*node);
}

Json deep_merge(Json base, const Json& overlay) {
  if (!base.is_object() || !overlay.is_object()) return overlay;
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    auto existing = base.find(it.key());
    if (existing != base.end() && existing->is_object() && it->is_object())
      *existing = deep_merge(*existing, *it);
    else
      base[it.key()] = *it;
  }
  return base;
}

const std::map<std::string, std::vector<std::string>>& schema_enums() {
  static const std::map<std::string, std::vector<std::string>> enums = {
      {"agent", {"ppo", "dqn", "td3", "sac"}},
      {"trainer", {"on_policy", "off_policy", "separable"}},
      {"environment", {"cartpole", "pendulum", "lorenz", "chain"}},
      {"srl", {"pca", "ae"}},
      {"activation", {"tanh", "relu"}},
      {"loss", {"mse", "huber"}},
  };
  return enums;
}

const Json& default_table() {
  static const Json table = Json::parse(kDefaults);
  return table;
}

Json RunConfig::to_json() const {
  Json j = {{"run", run.json()}, {"environment", environment.json()}, {"agent", agent.json()},
            {"trainer", trainer.json()}};
  if (srl) j["srl"] = srl->json();
  return j;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(to_json().dump()); }

RunConfig finalize_config(const Json& user, std::string name) {
  if (!user.is_object()) throw SchemaError("run file must contain a JSON object");
  for (auto it = user.begin(); it != user.end(); ++it)
    if (!kTopLevel.contains(it.key())) throw SchemaError("unknown top-level key '" + it.key() + "'");

  const Json& d = default_table();
  const std::string agent_type = require_type(user, "agent");
  const std::string trainer_type = require_type(user, "trainer");
  const std::string env_type = require_type(user, "environment");

  RunConfig cfg;
  cfg.name = std::move(name);
  cfg.run = ParamTree(deep_merge(d["run"], user.value("run", Json::object())));
  cfg.environment = ParamTree(deep_merge(deep_merge(d["environment"], d["environment_types"][env_type]),
                                         user["environment"]));
  cfg.agent = ParamTree(deep_merge(deep_merge(d["agent"], d["agent_types"][agent_type]), user["agent"]));
  cfg.trainer = ParamTree(deep_merge(deep_merge(d["trainer"], d["trainer_types"][trainer_type]), user["trainer"]));
  if (user.contains("srl")) {
    const std::string srl_type = require_type(user, "srl");
    cfg.srl = ParamTree(deep_merge(d["srl"], user["srl"]));
  }

  const bool ppo = agent_type == "ppo";
  if (ppo) {
    require(trainer_type == "on_policy" || trainer_type == "separable",
            "agent 'ppo' requires an on_policy or separable trainer, got '" + trainer_type + "'");
  } else {
    require(trainer_type == "off_policy",
            "agent '" + agent_type + "' requires an off_policy trainer, got '" + trainer_type + "'");
  }
  require(!(cfg.srl && trainer_type == "separable"), "srl cannot be combined with the separable trainer");

  require(cfg.run.get<int>("n_runs") >= 1, "run.n_runs must be >= 1");
  require(cfg.run.get<long>("n_transitions") >= 0, "run.n_transitions must be >= 0");
  cfg.run.get<std::uint64_t>("seed");
  cfg.run.get<std::string>("output_dir");
  require(cfg.environment.get<int>("n_envs") >= 1, "environment.n_envs must be >= 1");
  require(cfg.environment.get<int>("threads") >= 0, "environment.threads must be >= 0");
  validate_obs_transform(cfg.environment);
  const double gamma = cfg.agent.get<double>("gamma");
  require(gamma >= 0.0 && gamma <= 1.0, "agent.gamma must lie in [0, 1]");
  validate_network(cfg.agent, "policy");
  validate_network(cfg.agent, "value");
  const auto init = cfg.agent.get<std::string>("init");
  require(init == "xavier_uniform" || init == "orthogonal", "unsupported agent.init '" + init + "'");
  if (agent_type == "dqn") {
    const auto loss = cfg.agent.get<std::string>("loss");
    require(in_enum("loss", loss), "unsupported agent.loss '" + loss + "'");
    const auto sync = cfg.agent.get<std::string>("target_update");
    require(sync == "hard" || sync == "polyak", "agent.target_update must be 'hard' or 'polyak'");
  }
  require(cfg.trainer.get<int>("update_size") >= 1, "trainer.update_size must be >= 1");
  require(cfg.trainer.get<int>("n_epochs") >= 1, "trainer.n_epochs must be >= 1");
  require(cfg.trainer.get<int>("batch_size") >= 1, "trainer.batch_size must be >= 1");
  cfg.trainer.get<bool>("bootstrap");
  if (cfg.srl) {
    require(cfg.srl->get<int>("latent_dim") >= 0, "srl.latent_dim must be >= 0 (0 selects by explained variance)");
    require(cfg.srl->get<int>("warmup_samples") >= 2, "srl.warmup_samples must be >= 2");
    const double thr = cfg.srl->get<double>("variance_threshold");
    require(thr > 0.0 && thr <= 1.0, "srl.variance_threshold must lie in (0, 1]");
  }
  return cfg;
}

RunConfig parse_config(std::string_view text, std::string name) {
  Json user;
  try {
    user = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("malformed run file: ") + e.what());
  }
  try {
    return finalize_config(user, std::move(name));
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("schema error: ") + e.what());
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read run file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.stem().string());
}

}  // namespace drl
