#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "drl/error.hpp"
#include "drl/trainer.hpp"

namespace drl {
namespace {

std::FILE* open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw IoError("cannot write " + path.string());
  return f;
}

void close_checked(std::FILE* f, const std::filesystem::path& path) {
  if (std::ferror(f) != 0 || std::fclose(f) != 0) throw IoError("error while writing " + path.string());
}

// Numeric rows of a '#'-commented whitespace table.
std::vector<std::vector<double>> read_table(const std::filesystem::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> row;
    std::string token;
    while (ss >> token) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + token + "'");
      }
    }
    if (row.size() != columns)
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                       " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

double interpolate(const std::vector<ScoreRecord>& run, double x) {
  auto it = std::lower_bound(run.begin(), run.end(), x,
                             [](const ScoreRecord& r, double v) { return static_cast<double>(r.transitions) < v; });
  if (it == run.begin()) return it->score;
  if (it == run.end()) return run.back().score;
  const auto prev = std::prev(it);
  const double x0 = static_cast<double>(prev->transitions), x1 = static_cast<double>(it->transitions);
  const double t = (x - x0) / (x1 - x0);
  return prev->score + t * (it->score - prev->score);
}

}  // namespace

void report_write(const std::vector<ScoreRecord>& records, const std::filesystem::path& path,
                  const std::string& header) {
  std::FILE* f = open_for_write(path);
  if (!header.empty()) std::fprintf(f, "# %s\n", header.c_str());
  std::fprintf(f, "# transitions episode score walltime\n");
  for (const auto& r : records) std::fprintf(f, "%ld %ld %.6e %.3f\n", r.transitions, r.episode, r.score, r.walltime);
  close_checked(f, path);
}

std::vector<ScoreRecord> report_read(const std::filesystem::path& path) {
  std::vector<ScoreRecord> out;
  for (const auto& row : read_table(path, 4))
    out.push_back({static_cast<long>(row[0]), static_cast<long>(row[1]), row[2], row[3]});
  return out;
}

AveragedCurve average_runs(const std::vector<std::vector<ScoreRecord>>& runs, int grid_points, int window) {
  if (runs.empty()) throw ShapeError("average_runs needs at least one run");
  if (grid_points < 1 || window < 1) throw ShapeError("average_runs needs grid_points >= 1 and window >= 1");
  long lo = 0, hi = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].empty()) throw ShapeError("average_runs: run " + std::to_string(i) + " has no episodes");
    lo = i == 0 ? runs[i].front().transitions : std::max(lo, runs[i].front().transitions);
    hi = i == 0 ? runs[i].back().transitions : std::min(hi, runs[i].back().transitions);
  }
  if (hi < lo) throw ShapeError("average_runs: runs do not overlap in transitions");

  AveragedCurve c;
  const int points = hi == lo ? 1 : grid_points;
  for (int g = 0; g < points; ++g) {
    const double x = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(g) / (points - 1);
    c.grid.push_back(std::lround(x));
  }

  // smoothed[r][g]
  std::vector<std::vector<double>> smoothed(runs.size(), std::vector<double>(c.grid.size()));
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::vector<double> raw(c.grid.size());
    for (std::size_t g = 0; g < c.grid.size(); ++g) raw[g] = interpolate(runs[r], static_cast<double>(c.grid[g]));
    double sum = 0.0;
    for (std::size_t g = 0; g < raw.size(); ++g) {
      sum += raw[g];
      if (g >= static_cast<std::size_t>(window)) sum -= raw[g - window];
      const std::size_t width = std::min<std::size_t>(g + 1, window);
      smoothed[r][g] = sum / static_cast<double>(width);
    }
  }

  const double n = static_cast<double>(runs.size());
  for (std::size_t g = 0; g < c.grid.size(); ++g) {
    std::vector<double> v(runs.size());
    for (std::size_t r = 0; r < runs.size(); ++r) v[r] = smoothed[r][g];
    std::sort(v.begin(), v.end());
    double mean = 0.0;
    for (double s : v) mean += s;
    mean /= n;
    double var = 0.0;
    for (double s : v) var += (s - mean) * (s - mean);
    const double sd = std::sqrt(var / n);
    const std::size_t mid = v.size() / 2;
    c.n_runs.push_back(static_cast<int>(runs.size()));
    c.min.push_back(v.front());
    c.max.push_back(v.back());
    c.median.push_back(v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]));
    c.mean.push_back(mean);
    c.lower.push_back(mean - sd);
    c.upper.push_back(mean + sd);
  }
  return c;
}

AveragedCurve average_files(const std::vector<std::filesystem::path>& files, int grid_points, int window) {
  std::vector<std::vector<ScoreRecord>> runs;
  for (const auto& f : files) runs.push_back(report_read(f));
  return average_runs(runs, grid_points, window);
}

void write_averaged(const AveragedCurve& curve, const std::filesystem::path& path) {
  std::FILE* f = open_for_write(path);
  std::fprintf(f, "# transitions n_runs min max median mean lower upper\n");
  for (std::size_t g = 0; g < curve.size(); ++g)
    std::fprintf(f, "%ld %d %.6e %.6e %.6e %.6e %.6e %.6e\n", curve.grid[g], curve.n_runs[g], curve.min[g],
                 curve.max[g], curve.median[g], curve.mean[g], curve.lower[g], curve.upper[g]);
  close_checked(f, path);
}

AveragedCurve read_averaged(const std::filesystem::path& path) {
  AveragedCurve c;
  for (const auto& row : read_table(path, 8)) {
    c.grid.push_back(static_cast<long>(row[0]));
    c.n_runs.push_back(static_cast<int>(row[1]));
    c.min.push_back(row[2]);
    c.max.push_back(row[3]);
    c.median.push_back(row[4]);
    c.mean.push_back(row[5]);
    c.lower.push_back(row[6]);
    c.upper.push_back(row[7]);
  }
  return c;
}

double final_score(const std::vector<ScoreRecord>& records, int n) {
  if (records.empty()) throw ShapeError("final_score of an empty run");
  const std::size_t k = std::min<std::size_t>(records.size(), static_cast<std::size_t>(std::max(n, 1)));
  double sum = 0.0;
  for (std::size_t i = records.size() - k; i < records.size(); ++i) sum += records[i].score;
  return sum / static_cast<double>(k);
}

}  // namespace drl
