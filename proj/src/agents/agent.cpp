#include <cmath>

#include "drl/agents.hpp"
#include "drl/error.hpp"

namespace drl {

Matrix concat_columns(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("concat_columns: row count mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

ActBatch random_actions(const Spaces& spaces, int n, Rng& rng) {
  ActBatch out;
  const int d = spaces.action_dim();
  out.actions.resize(n, d);
  out.env_actions.resize(n, d);
  for (int i = 0; i < n; ++i) {
    if (spaces.is_discrete()) {
      out.actions(i, 0) = uniform_int(rng, 0, spaces.n_actions - 1);
      out.env_actions(i, 0) = out.actions(i, 0);
    } else {
      for (int j = 0; j < d; ++j) out.actions(i, j) = uniform(rng, -1.0, 1.0);
      out.env_actions.row(i) = rescale_action(out.actions.row(i).transpose(), spaces).transpose();
    }
  }
  out.logp = Vector::Zero(n);
  out.values = Vector::Zero(n);
  return out;
}

Agent::Agent(const ParamTree& params, const AgentContext& context)
    : params_(params),
      spaces_(context.spaces),
      gamma_(params.get<double>("gamma")),
      grad_clip_(params.get<double>("grad_clip")),
      budget_(context.budget),
      rng_(make_stream(context.seed, 0xa6e7)) {}

ActBatch Agent::act_one(const Vector& obs, ActMode mode) {
  Matrix m = obs.transpose();
  return act(m, mode);
}

void Agent::check_obs(const Matrix& obs) const {
  if (obs.cols() != spaces_.obs_dim)
    throw ShapeError("agent expects observations of dim " + std::to_string(spaces_.obs_dim) + ", got " +
                     std::to_string(obs.cols()));
}

Mlp Agent::build_network(const std::string& section, int in, int out, Activation output) {
  const std::string base = "networks." + section;
  const auto layers = params_.get<std::vector<int>>(base + ".layers");
  const Activation hidden = activation_factory().create(params_.get<std::string>(base + ".activation"), ParamTree(), {});
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), layers.begin(), layers.end());
  sizes.push_back(out);
  std::vector<Activation> acts(sizes.size() - 1, hidden);
  acts.back() = output;
  const auto scheme = params_.get<std::string>("init") == "orthogonal" ? InitScheme::kOrthogonal
                                                                        : InitScheme::kXavierUniform;
  return Mlp::create(sizes, acts, scheme, rng_);
}

Matrix Agent::to_env_units(const Matrix& normalized) const {
  Matrix out(normalized.rows(), normalized.cols());
  for (Eigen::Index i = 0; i < normalized.rows(); ++i)
    out.row(i) = rescale_action(normalized.row(i).transpose(), spaces_).transpose();
  return out;
}

void Agent::save(const std::filesystem::path& dir, const std::string& prefix) const {
  std::filesystem::create_directories(dir);
  for (const auto& [name, net] : networks()) save_mlp(dir / (prefix + "_" + name + ".dknn"), *net);
}

std::vector<FieldSpec> OffPolicyAgent::buffer_fields() const {
  return {{"obs", spaces_.obs_dim},
          {"action", spaces_.action_dim()},
          {"reward", 1},
          {"next_obs", spaces_.obs_dim},
          {"terminal", 1}};
}

Factory<std::unique_ptr<Agent>, AgentContext>& agent_factory() {
  static Factory<std::unique_ptr<Agent>, AgentContext> factory = [] {
    Factory<std::unique_ptr<Agent>, AgentContext> f;
    f.register_key("ppo", [](const ParamTree& p, const AgentContext& c) -> std::unique_ptr<Agent> {
      return std::make_unique<PpoAgent>(p, c);
    });
    f.register_key("dqn", [](const ParamTree& p, const AgentContext& c) -> std::unique_ptr<Agent> {
      return std::make_unique<DqnAgent>(p, c);
    });
    f.register_key("td3", [](const ParamTree& p, const AgentContext& c) -> std::unique_ptr<Agent> {
      return std::make_unique<Td3Agent>(p, c);
    });
    f.register_key("sac", [](const ParamTree& p, const AgentContext& c) -> std::unique_ptr<Agent> {
      return std::make_unique<SacAgent>(p, c);
    });
    return f;
  }();
  return factory;
}

}  // namespace drl
