#ifndef DRL_TESTS_HELPERS_HPP_
#define DRL_TESTS_HELPERS_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "drl/nn.hpp"
#include "drl/rng.hpp"

namespace drltest {

inline drl::Matrix random_matrix(drl::Rng& rng, int rows, int cols, double scale = 1.0) {
  drl::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * drl::standard_normal(rng);
  return m;
}

// Up to `max_layers` dense layers of at most `max_width` units with random
// hidden activations among tanh/relu/linear.
inline drl::Mlp random_mlp(drl::Rng& rng, int max_layers, int max_width, bool allow_relu = true) {
  const int layers = drl::uniform_int(rng, 1, max_layers);
  std::vector<int> sizes{drl::uniform_int(rng, 1, max_width)};
  std::vector<drl::Activation> acts;
  for (int l = 0; l < layers; ++l) {
    sizes.push_back(drl::uniform_int(rng, 1, max_width));
    const int pick = drl::uniform_int(rng, 0, allow_relu ? 2 : 1);
    acts.push_back(pick == 0 ? drl::Activation::kLinear : pick == 1 ? drl::Activation::kTanh : drl::Activation::kRelu);
  }
  return drl::Mlp::create(sizes, acts, drl::InitScheme::kXavierUniform, rng);
}

// Fresh empty directory below the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("drlkit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace drltest

#endif  // DRL_TESTS_HELPERS_HPP_
