#ifndef DRL_SRL_HPP_
#define DRL_SRL_HPP_

#include <filesystem>
#include <memory>
#include <vector>

#include "drl/config.hpp"
#include "drl/nn.hpp"
#include "drl/rng.hpp"

namespace drl {

struct SymmetricEigen {
  Vector values;   // descending
  Matrix vectors;  // column i pairs with values[i]
};

// Cyclic Jacobi rotations on a symmetric matrix.
SymmetricEigen jacobi_eigen(const Matrix& symmetric, double tol = 1e-14, int max_sweeps = 100);

struct PcaModel {
  Vector mean;        // d
  Matrix components;  // k x d, orthonormal rows, eigenvalue-descending
  Vector eigvals;     // d, descending, non-negative

  int dim() const { return static_cast<int>(mean.size()); }
  int k() const { return static_cast<int>(components.rows()); }

  Vector transform(const Vector& obs) const;
  Matrix transform(const Matrix& rows) const;  // one observation per row
  Vector reconstruct(const Vector& latent) const;
};

// Top-k principal components of the sample covariance (divisor n - 1).
// Each component is signed so that its largest-magnitude entry is positive.
PcaModel pca_fit(const Matrix& data, int k);

double explained_variance(const PcaModel& model, int k);

// Smallest k whose explained variance reaches `threshold`.
int select_latent_dim(const PcaModel& model, double threshold);

// "DKPC", u32 d, u32 k, mean, eigvals, components row-major.
void save_pca(const std::filesystem::path& path, const PcaModel& model);
PcaModel load_pca(const std::filesystem::path& path);

struct AeOptions {
  std::vector<int> hidden;
  Activation activation = Activation::kTanh;
  int epochs = 50;
  int batch_size = 64;
  double lr = 1e-3;
};

struct AeModel {
  Mlp encoder;  // d -> k
  Mlp decoder;  // k -> d
  double final_loss = 0.0;

  int k() const { return encoder.output_dim(); }
  Matrix encode(const Matrix& rows) const { return encoder.forward(rows); }
  Matrix decode(const Matrix& latent) const { return decoder.forward(latent); }
};

// Mean squared reconstruction error per element, trained with Adam.
AeModel ae_fit(const Matrix& data, int k, const AeOptions& options, Rng& rng);

double reconstruction_mse(const AeModel& model, const Matrix& data);

// Warmup bookkeeping: observations accumulate until the target count is
// reached, then the phase flips to active exactly once.
class SrlState {
 public:
  enum class Phase { kWarmup, kActive };

  SrlState(int warmup_samples, int obs_dim);

  Phase observe(const Matrix& rows);
  Phase phase() const { return phase_; }
  int collected() const { return static_cast<int>(rows_.size()); }
  int target() const { return target_; }
  Matrix data() const;

 private:
  int target_;
  int obs_dim_;
  Phase phase_ = Phase::kWarmup;
  std::vector<Vector> rows_;
};

// A fitted observation projection sitting between the environment and the agent.
class SrlModule {
 public:
  virtual ~SrlModule() = default;
  virtual void fit(const Matrix& data) = 0;
  virtual int latent_dim() const = 0;
  virtual Matrix transform(const Matrix& rows) const = 0;
  virtual void save(const std::filesystem::path& path) const = 0;
};

struct SrlContext {
  std::uint64_t seed = 0;
};

Factory<std::unique_ptr<SrlModule>, SrlContext>& srl_factory();

class PcaModule : public SrlModule {
 public:
  explicit PcaModule(const ParamTree& params);
  void fit(const Matrix& data) override;
  int latent_dim() const override { return model_.k(); }
  Matrix transform(const Matrix& rows) const override { return model_.transform(rows); }
  void save(const std::filesystem::path& path) const override { save_pca(path, model_); }
  const PcaModel& model() const { return model_; }
  double explained() const { return explained_variance(full_, model_.k()); }

 private:
  int requested_dim_;
  double threshold_;
  PcaModel model_;
  PcaModel full_;
};

class AeModule : public SrlModule {
 public:
  AeModule(const ParamTree& params, std::uint64_t seed);
  void fit(const Matrix& data) override;
  int latent_dim() const override { return model_.k(); }
  Matrix transform(const Matrix& rows) const override { return model_.encode(rows); }
  void save(const std::filesystem::path& path) const override;
  const AeModel& model() const { return model_; }

 private:
  int requested_dim_;
  double threshold_;
  AeOptions options_;
  Rng rng_;
  AeModel model_;
};

}  // namespace drl

#endif  // DRL_SRL_HPP_
