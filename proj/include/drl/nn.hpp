#ifndef DRL_NN_HPP_
#define DRL_NN_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drl/rng.hpp"

namespace drl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint32_t { kLinear = 0, kTanh = 1, kRelu = 2, kSoftmax = 3 };

std::string_view to_string(Activation a);

enum class InitScheme { kXavierUniform, kOrthogonal };

struct DenseLayer {
  Matrix weights;  // out x in
  Vector biases;   // out
  Activation activation = Activation::kLinear;

  int in_dim() const { return static_cast<int>(weights.cols()); }
  int out_dim() const { return static_cast<int>(weights.rows()); }
};

// Per-layer gradients with shapes identical to the owning network.
struct Grads {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  double squared_norm() const;
  bool all_finite() const;
  void scale(double factor);
  Grads& operator+=(const Grads& other);
};

class Mlp;

// Activations recorded by a forward pass. `values[0]` is the input and
// `values[k + 1]` the post-activation output of layer k.
struct ForwardCache {
  std::vector<Matrix> values;
  std::uint64_t version = 0;
};

// Dense feed-forward network in double precision. Inputs and outputs are
// batches stored one sample per row.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  static Mlp create(std::span<const int> sizes, std::span<const Activation> activations,
                    InitScheme scheme, Rng& rng);

  int input_dim() const;
  int output_dim() const;
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_parameters() const;
  std::vector<int> sizes() const;
  bool same_architecture(const Mlp& other) const;

  const DenseLayer& layer(std::size_t i) const { return layers_[i]; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  // Mutable access invalidates every cache recorded before the call.
  DenseLayer& mutable_layer(std::size_t i);

  std::uint64_t version() const { return version_; }
  void touch();

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, ForwardCache& cache) const;

  // Reverse-mode gradients of a loss summed over the batch, given dL/dy.
  // When `dx` is non-null it receives dL/dx.
  Grads backward(const ForwardCache& cache, const Matrix& dy, Matrix* dx = nullptr) const;

  Grads zero_grads() const;

  // Flat parameter vector, layer by layer: weights row-major then biases.
  Vector parameters() const;
  void set_parameters(const Vector& flat);
  static Vector flatten(const Grads& grads);

 private:
  void validate() const;

  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

struct AdamState {
  Grads m;
  Grads v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_network(const Mlp& net);
};

// Bias-corrected Adam step on every parameter of `net`. Throws NumericError
// on a non-finite gradient, leaving net and state untouched.
void adam_step(AdamState& state, Mlp& net, const Grads& grads, double lr);

// Adam for a free parameter vector (log-std vectors, temperatures).
struct VectorAdam {
  Vector m;
  Vector v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit VectorAdam(Eigen::Index n = 0) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}
  void step(Vector& param, const Vector& grad, double lr);
};

// Rescales `grads` so that their joint L2 norm (plus `extra` squared norm)
// is at most max_norm. Returns the factor applied (1 when no clipping).
double clip_global_norm(std::span<Grads* const> grads, double max_norm, Vector* extra = nullptr);

// target <- (1 - tau) target + tau source
void polyak_update(Mlp& target, const Mlp& source, double tau);

enum class CheckLoss { kMse, kSum };

// Largest relative discrepancy between backward() and central finite
// differences (step 1e-6) over every parameter. Relative error is
// |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(const Mlp& net, const Matrix& x, CheckLoss loss);

// Binary weight format: "DKNN", u32 version, u32 layer count, then per layer
// u32 in, u32 out, u32 activation, out*in weights row-major, out biases.
void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);
void save_mlp(const std::filesystem::path& path, const Mlp& net);
Mlp load_mlp(const std::filesystem::path& path);

}  // namespace drl

#endif  // DRL_NN_HPP_
