#include "drl/dist.hpp"

#include <cmath>
#include <numbers>

#include "drl/error.hpp"

namespace drl {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

DiagGaussian::DiagGaussian(Vector m, Vector ls) : mean(std::move(m)), log_std(std::move(ls)) {
  if (mean.size() != log_std.size()) throw ShapeError("DiagGaussian: mean/log_std size mismatch");
  log_std = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

double DiagGaussian::log_prob(const Vector& x) const {
  if (x.size() != mean.size()) throw ShapeError("DiagGaussian::log_prob: size mismatch");
  const auto z = (x - mean).array() / log_std.array().exp();
  return (-0.5 * z.square() - log_std.array() - kHalfLog2Pi).sum();
}

double DiagGaussian::entropy() const {
  return (log_std.array() + 0.5 + kHalfLog2Pi).sum();
}

Vector Categorical::log_probs() const {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return (logits.array() - lse).matrix();
}

Vector Categorical::probs() const { return log_probs().array().exp().matrix(); }

double Categorical::log_prob(int action) const {
  if (action < 0 || action >= logits.size()) throw ShapeError("Categorical::log_prob: action out of range");
  return log_probs()[action];
}

double Categorical::entropy() const {
  const Vector lp = log_probs();
  double h = 0.0;
  for (Eigen::Index i = 0; i < lp.size(); ++i) {
    const double p = std::exp(lp[i]);
    if (p > 0.0) h -= p * lp[i];
  }
  return h;
}

Sample gaussian_sample_logprob(const DiagGaussian& d, Rng& rng) {
  Sample s;
  s.action.resize(d.mean.size());
  for (Eigen::Index i = 0; i < d.mean.size(); ++i)
    s.action[i] = d.mean[i] + std::exp(d.log_std[i]) * standard_normal(rng);
  s.logp = d.log_prob(s.action);
  return s;
}

double log1m_tanh_sq(double u) {
  // 1 - tanh(u)^2 = 4 / (e^u + e^-u)^2  =>  2 (ln 2 - u - softplus(-2u))
  const double x = -2.0 * u;
  const double softplus = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return 2.0 * (std::numbers::ln2 - u - softplus);
}

double tanh_gaussian_log_prob(const DiagGaussian& d, const Vector& u) {
  double logp = d.log_prob(u);
  const double floor = std::log1p(-kTanhClamp * kTanhClamp);
  for (Eigen::Index i = 0; i < u.size(); ++i) logp -= std::max(log1m_tanh_sq(u[i]), floor);
  return logp;
}

Sample tanh_gaussian_sample_logprob(const DiagGaussian& d, Rng& rng) {
  Sample raw = gaussian_sample_logprob(d, rng);
  Sample s;
  s.logp = tanh_gaussian_log_prob(d, raw.action);
  s.action = raw.action.array().tanh().cwiseMax(-kTanhClamp).cwiseMin(kTanhClamp).matrix();
  return s;
}

DiscreteSample categorical_sample_logprob_entropy(const Categorical& c, Rng& rng) {
  if (c.logits.size() < 1) throw ShapeError("Categorical needs at least one logit");
  const Vector lp = c.log_probs();
  const double u = uniform(rng, 0.0, 1.0);
  double cum = 0.0;
  int chosen = static_cast<int>(lp.size()) - 1;
  for (Eigen::Index i = 0; i < lp.size(); ++i) {
    cum += std::exp(lp[i]);
    if (u < cum) {
      chosen = static_cast<int>(i);
      break;
    }
  }
  DiscreteSample s;
  s.action = chosen;
  s.logp = lp[chosen];
  s.entropy = c.entropy();
  return s;
}

int argmax(const Vector& q) {
  if (q.size() < 1) throw ShapeError("argmax of an empty vector");
  int best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = static_cast<int>(i);
  return best;
}

int epsilon_greedy(const Vector& q, double eps, Rng& rng) {
  if (q.size() < 1) throw ShapeError("epsilon_greedy needs k >= 1");
  // Always consume the same number of draws so the stream stays aligned.
  const double u = uniform(rng, 0.0, 1.0);
  const int random_action = uniform_int(rng, 0, static_cast<int>(q.size()) - 1);
  return u < eps ? random_action : argmax(q);
}

}  // namespace drl
