#ifndef DRL_REGISTRY_HPP_
#define DRL_REGISTRY_HPP_

#include <string>
#include <vector>

#include "drl/config.hpp"
#include "drl/nn.hpp"

namespace drl {

struct NoContext {};

enum class LossKind { kMse, kHuber };

Factory<Activation, NoContext>& activation_factory();
Factory<LossKind, NoContext>& loss_factory();

// Keys registered in the factory serving `category` (a key of schema_enums()).
std::vector<std::string> registered_keys(const std::string& category);

// Builds the object named `key` in `category` with default parameters;
// throws on failure. Used to check that every schema name is constructible.
void probe_create(const std::string& category, const std::string& key);

// Loss value and dL/dprediction for one residual (prediction - target).
double loss_value(LossKind kind, double residual);
double loss_grad(LossKind kind, double residual);

}  // namespace drl

#endif  // DRL_REGISTRY_HPP_
