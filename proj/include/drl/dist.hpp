#ifndef DRL_DIST_HPP_
#define DRL_DIST_HPP_

#include "drl/nn.hpp"
#include "drl/rng.hpp"

namespace drl {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kTanhClamp = 1.0 - 1e-7;

// Diagonal Gaussian. log_std is clamped to [kLogStdMin, kLogStdMax] on construction.
struct DiagGaussian {
  Vector mean;
  Vector log_std;

  DiagGaussian(Vector mean, Vector log_std);
  Vector std() const { return log_std.array().exp().matrix(); }
  double log_prob(const Vector& x) const;
  double entropy() const;
};

struct Categorical {
  Vector logits;

  Vector probs() const;
  Vector log_probs() const;
  double log_prob(int action) const;
  double entropy() const;
};

struct Sample {
  Vector action;
  double logp = 0.0;
};

Sample gaussian_sample_logprob(const DiagGaussian& d, Rng& rng);

// a = tanh(u), u ~ d. logp includes the change of variables.
Sample tanh_gaussian_sample_logprob(const DiagGaussian& d, Rng& rng);

// Density of a squashed action given its pre-squash value u.
double tanh_gaussian_log_prob(const DiagGaussian& d, const Vector& u);

// log(1 - tanh(u)^2) evaluated without cancellation.
double log1m_tanh_sq(double u);

struct DiscreteSample {
  int action = 0;
  double logp = 0.0;
  double entropy = 0.0;
};

DiscreteSample categorical_sample_logprob_entropy(const Categorical& c, Rng& rng);

// Lowest index among maximal entries.
int argmax(const Vector& q);

int epsilon_greedy(const Vector& q, double eps, Rng& rng);

}  // namespace drl

#endif  // DRL_DIST_HPP_
