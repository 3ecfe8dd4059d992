#include "drl/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "drl/error.hpp"

namespace drl {
namespace {

std::uint64_t next_version() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

void activate(Matrix& z, Activation a) {
  switch (a) {
    case Activation::kLinear:
      break;
    case Activation::kTanh:
      // Eigen's exp is vectorised for double while tanh is not; absolute error stays near 1e-16.
      {
        const auto a = z.array().abs().min(20.0);
        const Eigen::ArrayXXd e = (-2.0 * a).exp();
        z = (z.array().sign() * (1.0 - e) / (1.0 + e)).matrix();
      }
      break;
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kSoftmax:
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double mx = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - mx).exp().matrix();
        z.row(r) /= z.row(r).sum();
      }
      break;
  }
}

// dL/dz from dL/dy and the post-activation output y.
Matrix activation_backward(const Matrix& y, const Matrix& dy, Activation a) {
  switch (a) {
    case Activation::kLinear:
      return dy;
    case Activation::kTanh:
      return (dy.array() * (1.0 - y.array().square())).matrix();
    case Activation::kRelu:
      return (dy.array() * (y.array() > 0.0).cast<double>()).matrix();
    case Activation::kSoftmax: {
      const Vector inner = (dy.array() * y.array()).rowwise().sum();
      return (y.array() * (dy.colwise() - inner).array()).matrix();
    }
  }
  return dy;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated network file");
  return v;
}

constexpr char kMagic[4] = {'D', 'K', 'N', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSoftmax: return "softmax";
  }
  return "?";
}

double Grads::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += w.squaredNorm();
  for (const auto& b : biases) s += b.squaredNorm();
  return s;
}

bool Grads::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

void Grads::scale(double factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
}

Grads& Grads::operator+=(const Grads& other) {
  if (other.weights.size() != weights.size()) throw ShapeError("gradient layer count mismatch");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] += other.weights[i];
    biases[i] += other.biases[i];
  }
  return *this;
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)), version_(next_version()) {
  validate();
}

void Mlp::validate() const {
  if (layers_.empty()) throw ShapeError("network needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.biases.size() != l.weights.rows()) throw ShapeError("bias size does not match layer output");
    if (k > 0 && l.in_dim() != layers_[k - 1].out_dim())
      throw ShapeError("layer " + std::to_string(k) + " input does not chain with previous output");
    if (l.activation == Activation::kSoftmax && k + 1 != layers_.size())
      throw ShapeError("softmax is only allowed on the final layer");
  }
}

Mlp Mlp::create(std::span<const int> sizes, std::span<const Activation> activations,
                InitScheme scheme, Rng& rng) {
  if (sizes.size() < 2 || activations.size() + 1 != sizes.size())
    throw ShapeError("need one activation per layer (sizes.size() - 1)");
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    const int in = sizes[k];
    const int out = sizes[k + 1];
    if (in < 1 || out < 1) throw ShapeError("layer sizes must be positive");
    DenseLayer l;
    l.activation = activations[k];
    l.biases = Vector::Zero(out);
    if (scheme == InitScheme::kXavierUniform) {
      const double bound = std::sqrt(6.0 / (in + out));
      l.weights.resize(out, in);
      for (Eigen::Index r = 0; r < out; ++r)
        for (Eigen::Index c = 0; c < in; ++c) l.weights(r, c) = uniform(rng, -bound, bound);
    } else {
      const int big = std::max(in, out), small = std::min(in, out);
      Matrix g(big, small);
      for (Eigen::Index r = 0; r < big; ++r)
        for (Eigen::Index c = 0; c < small; ++c) g(r, c) = standard_normal(rng);
      Eigen::HouseholderQR<Matrix> qr(g);
      Matrix q = qr.householderQ() * Matrix::Identity(big, small);
      const Matrix rr = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
      for (int c = 0; c < small; ++c)
        if (rr(c, c) < 0) q.col(c) *= -1.0;
      l.weights = (out >= in) ? q : Matrix(q.transpose());
    }
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

int Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
int Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.biases.size();
  return n;
}

std::vector<int> Mlp::sizes() const {
  std::vector<int> s;
  if (layers_.empty()) return s;
  s.push_back(input_dim());
  for (const auto& l : layers_) s.push_back(l.out_dim());
  return s;
}

bool Mlp::same_architecture(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (layers_[k].in_dim() != other.layers_[k].in_dim() ||
        layers_[k].out_dim() != other.layers_[k].out_dim() ||
        layers_[k].activation != other.layers_[k].activation)
      return false;
  }
  return true;
}

DenseLayer& Mlp::mutable_layer(std::size_t i) {
  touch();
  return layers_.at(i);
}

void Mlp::touch() { version_ = next_version(); }

Matrix Mlp::forward(const Matrix& x) const {
  if (x.cols() != input_dim())
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                     std::to_string(input_dim()));
  Matrix h = x;
  for (const auto& l : layers_) {
    Matrix z = (h * l.weights.transpose()).rowwise() + l.biases.transpose();
    activate(z, l.activation);
    h = std::move(z);
  }
  return h;
}

Matrix Mlp::forward(const Matrix& x, ForwardCache& cache) const {
  if (x.cols() != input_dim())
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                     std::to_string(input_dim()));
  cache.values.resize(layers_.size() + 1);
  cache.values[0] = x;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    Matrix z = (cache.values[k] * l.weights.transpose()).rowwise() + l.biases.transpose();
    activate(z, l.activation);
    cache.values[k + 1] = std::move(z);
  }
  cache.version = version_;
  return cache.values.back();
}

Grads Mlp::backward(const ForwardCache& cache, const Matrix& dy, Matrix* dx) const {
  if (cache.version != version_ || cache.values.size() != layers_.size() + 1)
    throw ShapeError("backward: cache is stale or from another network");
  const Matrix& y = cache.values.back();
  if (dy.rows() != y.rows() || dy.cols() != y.cols()) throw ShapeError("backward: dL/dy shape mismatch");
  Grads g;
  g.weights.resize(layers_.size());
  g.biases.resize(layers_.size());
  Matrix upstream = dy;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    const Matrix dz = activation_backward(cache.values[k + 1], upstream, l.activation);
    g.weights[k].noalias() = dz.transpose() * cache.values[k];
    g.biases[k] = dz.colwise().sum().transpose();
    if (k > 0 || dx != nullptr) upstream.noalias() = dz * l.weights;
  }
  if (dx != nullptr) *dx = std::move(upstream);
  return g;
}

Grads Mlp::zero_grads() const {
  Grads g;
  for (const auto& l : layers_) {
    g.weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    g.biases.push_back(Vector::Zero(l.biases.size()));
  }
  return g;
}

Vector Mlp::parameters() const {
  Vector flat(static_cast<Eigen::Index>(num_parameters()));
  Eigen::Index off = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) flat[off++] = l.weights(r, c);
    flat.segment(off, l.biases.size()) = l.biases;
    off += l.biases.size();
  }
  return flat;
}

void Mlp::set_parameters(const Vector& flat) {
  if (flat.size() != static_cast<Eigen::Index>(num_parameters()))
    throw ShapeError("set_parameters: wrong parameter count");
  Eigen::Index off = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = flat[off++];
    l.biases = flat.segment(off, l.biases.size());
    off += l.biases.size();
  }
  touch();
}

Vector Mlp::flatten(const Grads& grads) {
  Eigen::Index n = 0;
  for (std::size_t k = 0; k < grads.weights.size(); ++k) n += grads.weights[k].size() + grads.biases[k].size();
  Vector flat(n);
  Eigen::Index off = 0;
  for (std::size_t k = 0; k < grads.weights.size(); ++k) {
    const auto& w = grads.weights[k];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat[off++] = w(r, c);
    flat.segment(off, grads.biases[k].size()) = grads.biases[k];
    off += grads.biases[k].size();
  }
  return flat;
}

AdamState AdamState::for_network(const Mlp& net) {
  AdamState s;
  s.m = net.zero_grads();
  s.v = net.zero_grads();
  return s;
}

void adam_step(AdamState& state, Mlp& net, const Grads& grads, double lr) {
  if (grads.weights.size() != net.num_layers() || state.m.weights.size() != net.num_layers())
    throw ShapeError("adam_step: gradient/state shapes do not match the network");
  if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient");
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  const double step = lr * std::sqrt(c2) / c1;
  const double eps_hat = state.eps * std::sqrt(c2);
  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    p.array() -= step * m.array() / (v.array().sqrt() + eps_hat);
  };
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    DenseLayer& l = net.mutable_layer(k);
    update(l.weights, state.m.weights[k], state.v.weights[k], grads.weights[k]);
    update(l.biases, state.m.biases[k], state.v.biases[k], grads.biases[k]);
  }
}

void VectorAdam::step(Vector& param, const Vector& grad, double lr) {
  if (grad.size() != param.size() || m.size() != param.size()) throw ShapeError("VectorAdam: size mismatch");
  if (!grad.allFinite()) throw NumericError("VectorAdam: non-finite gradient");
  t += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  param.array() -= lr * std::sqrt(c2) / c1 * m.array() / (v.array().sqrt() + eps * std::sqrt(c2));
}

double clip_global_norm(std::span<Grads* const> grads, double max_norm, Vector* extra) {
  double sq = extra != nullptr ? extra->squaredNorm() : 0.0;
  for (const Grads* g : grads) sq += g->squared_norm();
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm) || max_norm <= 0.0) return 1.0;
  const double factor = max_norm / (norm + 1e-12);
  for (Grads* g : grads) g->scale(factor);
  if (extra != nullptr) *extra *= factor;
  return factor;
}

void polyak_update(Mlp& target, const Mlp& source, double tau) {
  if (!target.same_architecture(source)) throw ShapeError("polyak_update: architecture mismatch");
  if (tau < 0.0 || tau > 1.0) throw ShapeError("polyak_update: tau outside [0, 1]");
  for (std::size_t k = 0; k < target.num_layers(); ++k) {
    DenseLayer& t = target.mutable_layer(k);
    const DenseLayer& s = source.layer(k);
    if (tau == 1.0) {
      t.weights = s.weights;
      t.biases = s.biases;
    } else {
      t.weights = (1.0 - tau) * t.weights + tau * s.weights;
      t.biases = (1.0 - tau) * t.biases + tau * s.biases;
    }
  }
}

double grad_check(const Mlp& net, const Matrix& x, CheckLoss loss) {
  auto loss_of = [&](const Matrix& y) {
    return loss == CheckLoss::kSum ? y.sum() : 0.5 * y.squaredNorm() / static_cast<double>(y.rows());
  };
  ForwardCache cache;
  const Matrix y = net.forward(x, cache);
  const Matrix dy = loss == CheckLoss::kSum ? Matrix::Ones(y.rows(), y.cols())
                                            : Matrix(y / static_cast<double>(y.rows()));
  const Vector analytic = Mlp::flatten(net.backward(cache, dy));

  Mlp probe = net;
  const Vector base = net.parameters();
  constexpr double h = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    Vector p = base;
    p[i] = base[i] + h;
    probe.set_parameters(p);
    const double up = loss_of(probe.forward(x));
    p[i] = base[i] - h;
    probe.set_parameters(p);
    const double down = loss_of(probe.forward(x));
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

void write_mlp(std::ostream& out, const Mlp& net) {
  out.write(kMagic, 4);
  write_pod(out, kFormatVersion);
  write_pod(out, static_cast<std::uint32_t>(net.num_layers()));
  for (const auto& l : net.layers()) {
    write_pod(out, static_cast<std::uint32_t>(l.in_dim()));
    write_pod(out, static_cast<std::uint32_t>(l.out_dim()));
    write_pod(out, static_cast<std::uint32_t>(l.activation));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) write_pod(out, l.weights(r, c));
    for (Eigen::Index r = 0; r < l.biases.size(); ++r) write_pod(out, l.biases[r]);
  }
  if (!out) throw IoError("failed to write network");
}

Mlp read_mlp(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw IoError("not a DKNN network file");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kFormatVersion) throw IoError("unsupported network file version " + std::to_string(version));
  const auto n_layers = read_pod<std::uint32_t>(in);
  std::vector<DenseLayer> layers(n_layers);
  for (auto& l : layers) {
    const auto in_dim = read_pod<std::uint32_t>(in);
    const auto out_dim = read_pod<std::uint32_t>(in);
    const auto act = read_pod<std::uint32_t>(in);
    if (act > static_cast<std::uint32_t>(Activation::kSoftmax)) throw IoError("bad activation code");
    l.activation = static_cast<Activation>(act);
    l.weights.resize(out_dim, in_dim);
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = read_pod<double>(in);
    l.biases.resize(out_dim);
    for (Eigen::Index r = 0; r < l.biases.size(); ++r) l.biases[r] = read_pod<double>(in);
  }
  return Mlp(std::move(layers));
}

void save_mlp(const std::filesystem::path& path, const Mlp& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_mlp(out, net);
}

Mlp load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_mlp(in);
}

}  // namespace drl
