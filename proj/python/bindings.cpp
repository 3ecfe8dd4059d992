// Python extension: configs cross the boundary as JSON text, arrays as numpy
// via pybind11/eigen.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>

#include "drl/config.hpp"
#include "drl/envs.hpp"
#include "drl/error.hpp"
#include "drl/returns.hpp"
#include "drl/rng.hpp"
#include "drl/srl.hpp"
#include "drl/trainer.hpp"

namespace py = pybind11;
using namespace drl;

namespace {

Matrix records_matrix(const std::vector<ScoreRecord>& records) {
  Matrix m(static_cast<Eigen::Index>(records.size()), 4);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    m(r, 0) = static_cast<double>(records[i].transitions);
    m(r, 1) = static_cast<double>(records[i].episode);
    m(r, 2) = records[i].score;
    m(r, 3) = records[i].walltime;
  }
  return m;
}

Matrix curve_matrix(const AveragedCurve& c) {
  Matrix m(static_cast<Eigen::Index>(c.size()), 8);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    m.row(r) << static_cast<double>(c.grid[i]), c.n_runs[i], c.min[i], c.max[i], c.median[i], c.mean[i], c.lower[i],
        c.upper[i];
  }
  return m;
}

py::dict train_json(const std::string& config, const std::string& name, std::optional<std::uint64_t> seed,
                    const std::string& score_path) {
  const RunConfig cfg = finalize_config(Json::parse(config), name);
  TrainOptions o;
  o.seed = seed;
  o.score_path = score_path;
  TrainResult r;
  {
    py::gil_scoped_release release;
    r = train(cfg, o);
  }
  py::dict out;
  out["records"] = records_matrix(r.records);
  out["transitions"] = r.counter.transitions;
  out["episodes"] = r.counter.episodes;
  out["updates"] = r.counter.updates;
  out["update_sizes"] = r.update_sizes;
  out["latent_dim"] = r.latent_dim;
  out["warmup_transitions"] = r.warmup_transitions;
  out["warmup_updates"] = r.warmup_updates;
  out["checkpoints"] = r.checkpoints;
  return out;
}

// One environment with its own random stream.
class PyEnv {
 public:
  PyEnv(const std::string& type, const std::string& params, std::uint64_t seed) : rng_(make_stream(seed, 0)) {
    Json user = {{"agent", {{"type", "ppo"}}}, {"trainer", {{"type", "on_policy"}}}, {"environment", Json::parse(params)}};
    user["environment"]["type"] = type;
    env_ = make_env(type, finalize_config(user).environment);
  }

  Vector reset() { return env_->reset(rng_); }

  py::tuple step(const Vector& action) {
    const StepResult r = env_->step(action, rng_);
    return py::make_tuple(r.obs, r.reward, r.terminal, r.truncated);
  }

  int obs_dim() const { return env_->spaces().obs_dim; }
  bool discrete() const { return env_->spaces().is_discrete(); }
  int n_actions() const { return env_->spaces().n_actions; }
  Vector action_low() const { return env_->spaces().lo; }
  Vector action_high() const { return env_->spaces().hi; }
  int max_episode_steps() const { return env_->max_episode_steps(); }

 private:
  Rng rng_;
  std::unique_ptr<Env> env_;
};

Trajectory make_traj(const std::vector<double>& rewards, const std::vector<double>& values, bool terminal) {
  Trajectory t;
  t.rewards = rewards;
  t.values = values;
  t.terminal = terminal;
  t.truncated = !terminal;
  return t;
}

}  // namespace

PYBIND11_MODULE(_drlkit, m) {
  m.doc() = "drlkit core";

  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("default_config", [] { return default_table().dump(); });
  m.def("finalize_config", [](const std::string& config) { return finalize_config(Json::parse(config)).to_json().dump(); });
  m.def("config_hash", [](const std::string& config) { return finalize_config(Json::parse(config)).hash(); });
  m.def("train", &train_json, py::arg("config"), py::arg("name") = "run", py::arg("seed") = std::nullopt,
        py::arg("score_path") = "");

  m.def("read_scores", [](const std::filesystem::path& p) { return records_matrix(report_read(p)); });
  m.def(
      "average_files",
      [](const std::vector<std::filesystem::path>& files, int grid_points, int window) {
        return curve_matrix(average_files(files, grid_points, window));
      },
      py::arg("files"), py::arg("grid_points") = 200, py::arg("window") = 20);

  m.def(
      "gae",
      [](const std::vector<double>& r, const std::vector<double>& v, double gamma, double lam, bool terminal) {
        return gae(make_traj(r, v, terminal), gamma, lam);
      },
      py::arg("rewards"), py::arg("values"), py::arg("gamma"), py::arg("lam"), py::arg("terminal"));
  m.def(
      "discounted_returns",
      [](const std::vector<double>& r, const std::vector<double>& v, double gamma, bool terminal) {
        return discounted_returns(make_traj(r, v, terminal), gamma);
      },
      py::arg("rewards"), py::arg("values"), py::arg("gamma"), py::arg("terminal"));

  py::class_<PcaModel>(m, "PcaModel")
      .def_readonly("mean", &PcaModel::mean)
      .def_readonly("components", &PcaModel::components)
      .def_readonly("eigvals", &PcaModel::eigvals)
      .def_property_readonly("k", &PcaModel::k)
      .def("transform", py::overload_cast<const Matrix&>(&PcaModel::transform, py::const_))
      .def("reconstruct", &PcaModel::reconstruct)
      .def("explained_variance", [](const PcaModel& p, int k) { return explained_variance(p, k); });
  m.def("pca_fit", &pca_fit, py::arg("data"), py::arg("k"));
  m.def("select_latent_dim", &select_latent_dim, py::arg("model"), py::arg("threshold"));
  m.def("load_pca", &load_pca);

  py::class_<PyEnv>(m, "Env")
      .def(py::init<const std::string&, const std::string&, std::uint64_t>(), py::arg("type"),
           py::arg("params") = "{}", py::arg("seed") = 0)
      .def("reset", &PyEnv::reset)
      .def("step", &PyEnv::step)
      .def_property_readonly("obs_dim", &PyEnv::obs_dim)
      .def_property_readonly("discrete", &PyEnv::discrete)
      .def_property_readonly("n_actions", &PyEnv::n_actions)
      .def_property_readonly("action_low", &PyEnv::action_low)
      .def_property_readonly("action_high", &PyEnv::action_high)
      .def_property_readonly("max_episode_steps", &PyEnv::max_episode_steps);
}
