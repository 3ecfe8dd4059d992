#ifndef DRL_TRAINER_HPP_
#define DRL_TRAINER_HPP_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "drl/agents.hpp"
#include "drl/config.hpp"
#include "drl/envs.hpp"

namespace drl {

struct Counter {
  long transitions = 0;
  long episodes = 0;
  long updates = 0;
  long budget = 0;
};

struct ScoreRecord {
  long transitions = 0;  // transitions counted when the episode ended
  long episode = 0;
  double score = 0.0;
  double walltime = 0.0;

  bool operator==(const ScoreRecord&) const = default;
};

struct TrainOptions {
  std::optional<std::uint64_t> seed;  // overrides run.seed
  std::filesystem::path score_path;   // empty: no score file
};

struct TrainResult {
  std::vector<ScoreRecord> records;
  Counter counter;
  std::vector<long> update_sizes;  // rows consumed by each agent update (on-policy)
  int latent_dim = 0;              // srl only
  long warmup_transitions = 0;     // srl only
  long warmup_updates = 0;         // agent updates performed during the srl warmup
  std::vector<std::string> checkpoints;
};

// Mutable state shared by the training loops of one run.
class Session {
 public:
  Session(const RunConfig& config, std::uint64_t seed);

  const RunConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  Counter& counter() { return counter_; }
  std::vector<ScoreRecord>& records() { return records_; }
  std::vector<long>& update_sizes() { return update_sizes_; }
  Rng& rng() { return rng_; }
  bool done() const { return counter_.transitions >= counter_.budget; }

  // Advances the counter by one transition per worker, in worker order,
  // recording every completed episode.
  void account(const PoolStep& step);

 private:
  RunConfig config_;
  std::uint64_t seed_;
  Counter counter_;
  std::vector<ScoreRecord> records_;
  std::vector<long> update_sizes_;
  Rng rng_;
  bool walltime_;
  std::chrono::steady_clock::time_point start_;
};

class Trainer {
 public:
  virtual ~Trainer() = default;
  virtual std::unique_ptr<VecEnv> make_pool(const RunConfig& config, std::uint64_t seed) const = 0;
  // Runs until the budget is spent, starting from observation `obs`.
  virtual void run(Session& session, Agent& agent, VecEnv& pool, Matrix obs) = 0;
};

struct TrainerContext {};

Factory<std::unique_ptr<Trainer>, TrainerContext>& trainer_factory();

// Parallel on-policy rollouts driven by the bootstrap plan.
class OnPolicyTrainer : public Trainer {
 public:
  explicit OnPolicyTrainer(const ParamTree& params);
  std::unique_ptr<VecEnv> make_pool(const RunConfig& config, std::uint64_t seed) const override;
  void run(Session& session, Agent& agent, VecEnv& pool, Matrix obs) override;

 private:
  int update_size_;
  int n_epochs_;
  int batch_size_;
  bool bootstrap_;
};

// The on-policy loop over the actuators of one separable environment.
class SeparableTrainer : public OnPolicyTrainer {
 public:
  using OnPolicyTrainer::OnPolicyTrainer;
  std::unique_ptr<VecEnv> make_pool(const RunConfig& config, std::uint64_t seed) const override;
};

class OffPolicyTrainer : public Trainer {
 public:
  explicit OffPolicyTrainer(const ParamTree& params);
  std::unique_ptr<VecEnv> make_pool(const RunConfig& config, std::uint64_t seed) const override;
  void run(Session& session, Agent& agent, VecEnv& pool, Matrix obs) override;

 private:
  int batch_size_;
  int update_every_;
  long warmup_;
};

TrainResult train(const RunConfig& config, const TrainOptions& options = {});

// Score files: '#' header lines, then "transitions episode score walltime" rows.
void report_write(const std::vector<ScoreRecord>& records, const std::filesystem::path& path,
                  const std::string& header = "");
std::vector<ScoreRecord> report_read(const std::filesystem::path& path);

struct AveragedCurve {
  std::vector<long> grid;
  std::vector<int> n_runs;
  std::vector<double> min, max, median, mean, lower, upper;

  std::size_t size() const { return grid.size(); }
};

// Interpolates every run onto a common grid over the overlapping transition
// range, smooths each run with a trailing moving average of `window` grid
// points and aggregates across runs (population std).
AveragedCurve average_runs(const std::vector<std::vector<ScoreRecord>>& runs, int grid_points = 200,
                           int window = 20);
AveragedCurve average_files(const std::vector<std::filesystem::path>& files, int grid_points = 200,
                            int window = 20);
void write_averaged(const AveragedCurve& curve, const std::filesystem::path& path);
AveragedCurve read_averaged(const std::filesystem::path& path);

// Mean score of the last `n` records (all records when fewer).
double final_score(const std::vector<ScoreRecord>& records, int n = 20);

// <output_dir>/<name>_s<seed>.dat
std::filesystem::path score_path(const RunConfig& config, std::uint64_t seed);

}  // namespace drl

#endif  // DRL_TRAINER_HPP_
