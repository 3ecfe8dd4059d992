#include "drl/srl.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "drl/error.hpp"
#include "drl/registry.hpp"

namespace drl {

SymmetricEigen jacobi_eigen(const Matrix& symmetric, double tol, int max_sweeps) {
  const Eigen::Index n = symmetric.rows();
  if (symmetric.cols() != n) throw ShapeError("jacobi_eigen needs a square matrix");
  Matrix a = 0.5 * (symmetric + symmetric.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * scale) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J restricted to rows/cols p, q.
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = a(order[i], order[i]);
    out.vectors.col(i) = v.col(order[i]);
  }
  return out;
}

Vector PcaModel::transform(const Vector& obs) const {
  if (obs.size() != dim()) throw ShapeError("pca_transform: observation dim mismatch");
  return components * (obs - mean);
}

Matrix PcaModel::transform(const Matrix& rows) const {
  if (rows.cols() != dim()) throw ShapeError("pca_transform: observation dim mismatch");
  return (rows.rowwise() - mean.transpose()) * components.transpose();
}

Vector PcaModel::reconstruct(const Vector& latent) const {
  if (latent.size() != k()) throw ShapeError("pca reconstruct: latent dim mismatch");
  return mean + components.transpose() * latent;
}

PcaModel pca_fit(const Matrix& data, int k) {
  const Eigen::Index n = data.rows(), d = data.cols();
  if (n < 2) throw ShapeError("pca_fit needs at least two samples");
  if (k < 1 || k > std::min<Eigen::Index>(n, d))
    throw ShapeError("pca_fit: k must lie in [1, min(n, d)], got " + std::to_string(k));
  PcaModel m;
  m.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - m.mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);
  SymmetricEigen eig = jacobi_eigen(cov);
  m.eigvals = eig.values.cwiseMax(0.0);
  if (m.eigvals.sum() <= 0.0) throw NumericError("pca_fit: data has zero variance");
  m.components.resize(k, d);
  for (int i = 0; i < k; ++i) {
    Vector c = eig.vectors.col(i);
    Eigen::Index big = 0;
    c.cwiseAbs().maxCoeff(&big);
    if (c[big] < 0) c = -c;
    m.components.row(i) = c.transpose();
  }
  return m;
}

double explained_variance(const PcaModel& model, int k) {
  if (k < 0 || k > model.eigvals.size()) throw ShapeError("explained_variance: k out of range");
  const double total = model.eigvals.sum();
  if (total <= 0.0) throw NumericError("explained_variance: zero total variance");
  if (k == model.eigvals.size()) return 1.0;
  return std::min(1.0, model.eigvals.head(k).sum() / total);
}

int select_latent_dim(const PcaModel& model, double threshold) {
  for (int k = 1; k <= model.eigvals.size(); ++k)
    if (explained_variance(model, k) >= threshold) return k;
  return static_cast<int>(model.eigvals.size());
}

namespace {

constexpr char kPcaMagic[4] = {'D', 'K', 'P', 'C'};

void write_doubles(std::ostream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& in, double* p, std::size_t n) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("truncated PCA model file");
}

}  // namespace

void save_pca(const std::filesystem::path& path, const PcaModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kPcaMagic, 4);
  const std::uint32_t d = model.dim(), k = model.k();
  out.write(reinterpret_cast<const char*>(&d), sizeof d);
  out.write(reinterpret_cast<const char*>(&k), sizeof k);
  write_doubles(out, model.mean.data(), d);
  write_doubles(out, model.eigvals.data(), d);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = model.components;
  write_doubles(out, rm.data(), static_cast<std::size_t>(k) * d);
  if (!out) throw IoError("failed to write " + path.string());
}

PcaModel load_pca(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kPcaMagic, 4) != 0) throw IoError("not a DKPC model file");
  std::uint32_t d = 0, k = 0;
  in.read(reinterpret_cast<char*>(&d), sizeof d);
  in.read(reinterpret_cast<char*>(&k), sizeof k);
  if (!in || k > d) throw IoError("corrupt PCA model header");
  PcaModel m;
  m.mean.resize(d);
  m.eigvals.resize(d);
  read_doubles(in, m.mean.data(), d);
  read_doubles(in, m.eigvals.data(), d);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(k, d);
  read_doubles(in, rm.data(), static_cast<std::size_t>(k) * d);
  m.components = rm;
  return m;
}

namespace {

Mlp make_stack(int in, const std::vector<int>& hidden, int out, Activation act, Rng& rng) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  std::vector<Activation> acts(sizes.size() - 1, act);
  acts.back() = Activation::kLinear;
  return Mlp::create(sizes, acts, InitScheme::kXavierUniform, rng);
}

}  // namespace

double reconstruction_mse(const AeModel& model, const Matrix& data) {
  const Matrix rec = model.decode(model.encode(data));
  return (rec - data).squaredNorm() / static_cast<double>(data.size());
}

AeModel ae_fit(const Matrix& data, int k, const AeOptions& options, Rng& rng) {
  const int n = static_cast<int>(data.rows()), d = static_cast<int>(data.cols());
  if (k < 1) throw ShapeError("ae_fit: latent dim must be >= 1");
  if (options.batch_size < 1 || n < options.batch_size) throw ShapeError("ae_fit needs n >= batch_size >= 1");
  AeModel model;
  model.encoder = make_stack(d, options.hidden, k, options.activation, rng);
  std::vector<int> rev(options.hidden.rbegin(), options.hidden.rend());
  model.decoder = make_stack(k, rev, d, options.activation, rng);
  AdamState enc_opt = AdamState::for_network(model.encoder);
  AdamState dec_opt = AdamState::for_network(model.decoder);

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start + options.batch_size <= n; start += options.batch_size) {
      Matrix x(options.batch_size, d);
      for (int r = 0; r < options.batch_size; ++r) x.row(r) = data.row(order[start + r]);
      ForwardCache enc_cache, dec_cache;
      const Matrix z = model.encoder.forward(x, enc_cache);
      const Matrix rec = model.decoder.forward(z, dec_cache);
      const Matrix dy = 2.0 * (rec - x) / static_cast<double>(x.size());
      Matrix dz;
      const Grads dec_grads = model.decoder.backward(dec_cache, dy, &dz);
      const Grads enc_grads = model.encoder.backward(enc_cache, dz);
      adam_step(dec_opt, model.decoder, dec_grads, options.lr);
      adam_step(enc_opt, model.encoder, enc_grads, options.lr);
    }
  }
  model.final_loss = reconstruction_mse(model, data);
  if (!std::isfinite(model.final_loss)) throw NumericError("ae_fit: non-finite reconstruction loss");
  return model;
}

SrlState::SrlState(int warmup_samples, int obs_dim) : target_(warmup_samples), obs_dim_(obs_dim) {
  if (warmup_samples < 1 || obs_dim < 1) throw ShapeError("SrlState needs warmup_samples >= 1 and obs_dim >= 1");
}

SrlState::Phase SrlState::observe(const Matrix& rows) {
  if (phase_ == Phase::kActive) throw Error("srl_observe called after the warmup phase ended");
  if (rows.rows() > 0 && rows.cols() != obs_dim_) throw ShapeError("srl_observe: observation dim mismatch");
  for (Eigen::Index r = 0; r < rows.rows(); ++r) rows_.push_back(rows.row(r).transpose());
  if (collected() >= target_) phase_ = Phase::kActive;
  return phase_;
}

Matrix SrlState::data() const {
  Matrix m(collected(), obs_dim_);
  for (int r = 0; r < collected(); ++r) m.row(r) = rows_[r].transpose();
  return m;
}

PcaModule::PcaModule(const ParamTree& params)
    : requested_dim_(params.get<int>("latent_dim")), threshold_(params.get<double>("variance_threshold")) {}

void PcaModule::fit(const Matrix& data) {
  const int max_k = static_cast<int>(std::min(data.rows(), data.cols()));
  full_ = pca_fit(data, max_k);
  const int k = requested_dim_ > 0 ? requested_dim_ : select_latent_dim(full_, threshold_);
  model_ = full_;
  model_.components = full_.components.topRows(std::min(k, max_k));
}

AeModule::AeModule(const ParamTree& params, std::uint64_t seed)
    : requested_dim_(params.get<int>("latent_dim")),
      threshold_(params.get<double>("variance_threshold")),
      rng_(make_stream(seed, 0xae)) {
  options_.hidden = params.get<std::vector<int>>("ae.hidden");
  options_.activation = activation_factory().create(params.get<std::string>("ae.activation"), ParamTree(), {});
  options_.epochs = params.get<int>("ae.epochs");
  options_.batch_size = params.get<int>("ae.batch_size");
  options_.lr = params.get<double>("ae.lr");
}

void AeModule::fit(const Matrix& data) {
  int k = requested_dim_;
  if (k == 0) {
    const PcaModel probe = pca_fit(data, static_cast<int>(std::min(data.rows(), data.cols())));
    k = select_latent_dim(probe, threshold_);
  }
  model_ = ae_fit(data, k, options_, rng_);
}

void AeModule::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_mlp(out, model_.encoder);
  write_mlp(out, model_.decoder);
}

Factory<std::unique_ptr<SrlModule>, SrlContext>& srl_factory() {
  static Factory<std::unique_ptr<SrlModule>, SrlContext> factory = [] {
    Factory<std::unique_ptr<SrlModule>, SrlContext> f;
    f.register_key("pca", [](const ParamTree& p, const SrlContext&) -> std::unique_ptr<SrlModule> {
      return std::make_unique<PcaModule>(p);
    });
    f.register_key("ae", [](const ParamTree& p, const SrlContext& ctx) -> std::unique_ptr<SrlModule> {
      return std::make_unique<AeModule>(p, ctx.seed);
    });
    return f;
  }();
  return factory;
}

}  // namespace drl
