#ifndef DRL_CONFIG_HPP_
#define DRL_CONFIG_HPP_

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drl/error.hpp"

namespace drl {

using Json = nlohmann::json;

// Hierarchical parameters with dotted-path lookup ("networks.policy.layers").
class ParamTree {
 public:
  ParamTree() : root_(Json::object()) {}
  explicit ParamTree(Json root);

  static ParamTree parse(std::string_view text);

  const Json& json() const { return root_; }
  std::string dump() const { return root_.dump(); }

  bool has(std::string_view path) const;
  const Json& at(std::string_view path) const;
  const Json* find(std::string_view path) const;

  template <typename T>
  T get(std::string_view path) const {
    const Json& node = at(path);
    try {
      return node.get<T>();
    } catch (const Json::exception&) {
      throw SchemaError("parameter '" + std::string(path) + "' has the wrong type: " + node.dump());
    }
  }

  template <typename T>
  T get(std::string_view path, T fallback) const {
    return find(path) == nullptr ? fallback : get<T>(path);
  }

  // Subtree at `path`; an empty tree when absent.
  ParamTree subtree(std::string_view path) const;

  bool operator==(const ParamTree& other) const { return root_ == other.root_; }

 private:
  Json root_;
};

// `overlay` wins; objects merge recursively, everything else is replaced.
Json deep_merge(Json base, const Json& overlay);

// String-keyed constructors for one category of objects.
template <typename Product, typename Context>
class Factory {
 public:
  using Creator = std::function<Product(const ParamTree&, const Context&)>;

  void register_key(std::string key, Creator creator) { creators_[std::move(key)] = std::move(creator); }

  bool contains(std::string_view key) const { return creators_.find(std::string(key)) != creators_.end(); }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : creators_) out.push_back(k);
    return out;
  }

  Product create(std::string_view key, const ParamTree& params, const Context& context) const {
    auto it = creators_.find(std::string(key));
    if (it == creators_.end()) throw UnknownKeyError(std::string(key));
    return it->second(params, context);
  }

 private:
  std::map<std::string, Creator> creators_;
};

struct RunConfig {
  ParamTree run;
  ParamTree environment;
  ParamTree agent;
  ParamTree trainer;
  std::optional<ParamTree> srl;
  std::string name = "run";  // file stem, used for output naming

  // Canonical merged tree (defaults applied).
  Json to_json() const;
  std::uint64_t hash() const;

  bool operator==(const RunConfig& other) const { return to_json() == other.to_json() && name == other.name; }
};

// Closed name sets accepted by the schema, by category.
const std::map<std::string, std::vector<std::string>>& schema_enums();

// The defaults table, documented in README.md.
const Json& default_table();

RunConfig parse_config(std::string_view text, std::string name = "run");
RunConfig load_config(const std::filesystem::path& path);

// Re-validates a config assembled in code (tests, bindings).
RunConfig finalize_config(const Json& user, std::string name = "run");

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace drl

#endif  // DRL_CONFIG_HPP_
