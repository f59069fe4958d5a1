#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kamtori/resonance.hpp"
#include "kamtori/util.hpp"
#include "kamtori/verify.hpp"

using nlohmann::json;
using namespace kamtori;
namespace fs = std::filesystem;

namespace {

json default_config() {
  return json{
      {"preset", "twist-1-1"},
      {"eps", 1e-6},
      {"t", 0.1},
      {"seed", 42},
      {"schedule",
       {{"gamma", 0.05},
        {"tau", 8.0},
        {"nbar", 1},
        {"L", 2},
        {"s0", 0.4},
        {"r0", 0.05},
        {"stop_eps", 1e-13},
        {"max_steps", 12},
        {"min_steps", 0},
        {"k_cap", 24},
        {"nx", 64},
        {"eta_min", 1e-3},
        {"eta_max", 0.95},
        {"sample_amp", 0.08}}},
      {"iterate", {{"steps", 2000}, {"x0", json::array()}, {"u0", json::array()},
                   {"y0", json::array()}, {"v0", json::array()}}},
      {"measure",
       {{"gamma_lo", 1e-2},
        {"gamma_hi", 1e-1},
        {"points", 6},
        {"grid_res", 2048},
        {"k_max", 6},
        {"v_max", 4},
        {"mc_samples", 4096}}},
      {"verify", {{"n_phi", 64}, {"orbit_len", 4096}}},
      {"scheme", {{"t_ladder", {0.1, 0.05, 0.025}}}},
      {"survival",
       {{"eps_grid", {0.0, 1e-7, 1e-6}},
        {"t_grid", {0.1}},
        {"n_xi", 8},
        {"gamma", 0.05},
        {"residual_tol", 1e-8},
        {"k_max", 8}}}};
}

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = "runs";
  int threads = 0;
  std::uint64_t seed = 42;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--set", o.sets, "override key=value, dot-separated path");
  cmd->add_option("--out", o.out_dir, "output root directory");
  cmd->add_option("--threads", o.threads, "OpenMP thread count");
  cmd->add_option("--seed", o.seed, "random seed");
}

// Applies "a.b.c=value" to the config; value parsed as JSON when possible.
void apply_override(json& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override missing '=': " + kv);
  std::string path = kv.substr(0, eq), value = kv.substr(eq + 1);
  json* node = &cfg;
  size_t pos = 0;
  while (true) {
    const auto dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (key.empty()) throw std::invalid_argument("override has empty key: " + kv);
    if (dot == std::string::npos) {
      try {
        (*node)[key] = json::parse(value);
      } catch (const json::parse_error&) {
        (*node)[key] = value;
      }
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

json resolve_config(const CommonOpts& o) {
  json cfg = default_config();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw std::invalid_argument("cannot open config: " + o.config_path);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("config parse error: " + std::string(e.what()));
    }
    cfg.update(file, true);
  }
  for (const auto& kv : o.sets) apply_override(cfg, kv);
  cfg["seed"] = o.seed;
  return cfg;
}

KamSchedule schedule_from(const json& cfg) {
  const json& s = cfg.at("schedule");
  KamSchedule sched;
  sched.gamma = s.at("gamma");
  sched.tau = s.at("tau");
  sched.nbar = s.at("nbar");
  sched.L = s.at("L");
  sched.s0 = s.at("s0");
  sched.r0 = s.at("r0");
  sched.stop_eps = s.at("stop_eps");
  sched.max_steps = s.at("max_steps");
  sched.min_steps = s.at("min_steps");
  sched.k_cap = s.at("k_cap");
  sched.nx = s.at("nx");
  sched.eta_min = s.at("eta_min");
  sched.eta_max = s.at("eta_max");
  sched.sample_amp = s.at("sample_amp");
  return sched;
}

fs::path make_run_dir(const json& cfg, const std::string& command, const std::string& out_root) {
  json tagged = cfg;
  tagged["command"] = command;
  const fs::path dir = fs::path(out_root) / hex64(fnv1a64(tagged.dump()));
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << tagged.dump(2) << "\n";
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

void write_diagnostic(const fs::path& dir, const std::string& kind, const std::string& what) {
  json d{{"error", kind}, {"message", what}};
  write_file(dir / "diagnostics.json", d.dump(2) + "\n");
  std::cerr << d.dump() << "\n";
}

VectorXd vector_from(const json& arr, int n, double fill) {
  VectorXd v = VectorXd::Constant(n, fill);
  for (int i = 0; i < std::min<int>(n, int(arr.size())); ++i) v[i] = arr[i].get<double>();
  return v;
}

int cmd_iterate_map(const json& cfg, const fs::path& dir) {
  ModelPreset model = standard_test_model(cfg.at("preset"), cfg.at("eps"), cfg.at("t"));
  const int n = model.freq.n, m = int(model.scheme.B.size());
  const json& it = cfg.at("iterate");
  PhasePoint z0;
  z0.x = vector_from(it.at("x0"), n, 0.3);
  z0.u = vector_from(it.at("u0"), m, 0.0);
  z0.y = vector_from(it.at("y0"), n, 0.0);
  z0.v = vector_from(it.at("v0"), m, 0.0);
  Orbit orbit = iterate_twist_map(model.ham, z0, cfg.at("iterate").at("steps"));
  write_file(dir / "orbit.csv", orbit.to_csv());
  return 0;
}

int cmd_kam_run(const json& cfg, const fs::path& dir) {
  ModelPreset model = standard_test_model(cfg.at("preset"), cfg.at("eps"), cfg.at("t"));
  KamState st = run_iteration(model.ham, schedule_from(cfg));
  write_file(dir / "manifest.json", manifest_json(st) + "\n");
  return st.converged ? 0 : 2;
}

int cmd_measure_sweep(const json& cfg, const fs::path& dir) {
  ModelPreset model = standard_test_model(cfg.at("preset"), cfg.at("eps"), cfg.at("t"));
  const json& mc = cfg.at("measure");
  MeasureParams p;
  p.t = cfg.at("t");
  p.tau = cfg.at("schedule").at("tau");
  p.k_max = mc.at("k_max");
  p.v_max = mc.at("v_max");
  p.grid_res = mc.at("grid_res");
  p.mc_samples = mc.at("mc_samples");
  p.seed = cfg.at("seed");

  const int points = mc.at("points");
  const double lo = mc.at("gamma_lo"), hi = mc.at("gamma_hi");
  std::vector<double> lx, ly;
  std::string csv = "gamma,excluded_measure,ci_low,ci_high,slope_running\n";
  char buf[256];
  for (int i = 0; i < points; ++i) {
    p.gamma = lo * std::pow(hi / lo, points == 1 ? 0.0 : double(i) / (points - 1));
    MeasureEstimate est = excluded_measure(model.freq, model.scheme.B, p);
    double slope = 0.0;
    if (est.measure_estimate > 0.0) {
      lx.push_back(std::log(p.gamma));
      ly.push_back(std::log(est.measure_estimate));
      if (lx.size() >= 2) slope = fit_slope(lx, ly);
    }
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", p.gamma,
                  est.measure_estimate, est.ci_low * est.volume, est.ci_high * est.volume, slope);
    csv += buf;
  }
  write_file(dir / "measure.csv", csv);
  return 0;
}

int cmd_verify_torus(const json& cfg, const fs::path& dir) {
  ModelPreset model = standard_test_model(cfg.at("preset"), cfg.at("eps"), cfg.at("t"));
  KamState st = run_iteration(model.ham, schedule_from(cfg));
  const int n_phi = cfg.at("verify").at("n_phi");
  const double residual = invariance_residual(st, model.ham, n_phi);

  Orbit orbit;
  orbit.n = model.freq.n;
  orbit.m = int(model.scheme.B.size());
  PhasePoint z = evaluate_conjugacy(st, VectorXd::Zero(model.freq.n));
  const int len = cfg.at("verify").at("orbit_len");
  orbit.points.push_back(z);
  for (int k = 1; k <= len; ++k) {
    z = apply_twist_map(model.ham, z);
    orbit.points.push_back(z);
  }
  RotationEstimate rot = rotation_vector(orbit);

  const VectorXd tw = st.limit_t_omega();
  json outj{{"converged", st.converged},
            {"invariance_residual", residual},
            {"t_omega_limit", std::vector<double>(tw.data(), tw.data() + tw.size())},
            {"rotation_measured",
             std::vector<double>(rot.rotation.data(), rot.rotation.data() + rot.rotation.size())},
            {"rotation_error_estimate", rot.error_estimate}};
  write_file(dir / "verify.json", outj.dump(2) + "\n");
  return st.converged && residual <= 1e-8 ? 0 : 2;
}

int cmd_scheme_compare(const json& cfg, const fs::path& dir) {
  ModelPreset model = standard_test_model(cfg.at("preset"), cfg.at("eps"), cfg.at("t"));
  std::vector<double> ladder;
  for (const auto& v : cfg.at("scheme").at("t_ladder")) ladder.push_back(v.get<double>());
  TwoStepComparison cmp =
      scheme_two_step_compare(model.scheme, model.ham.xi_center, ladder, schedule_from(cfg));
  std::string csv = "t1,t2,omega_diff,step_gap,ratio\n";
  char buf[256];
  for (size_t i = 0; i < cmp.ratio.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", cmp.t[i], cmp.t[i + 1],
                  cmp.omega_diff[i], cmp.step_gap[i], cmp.ratio[i]);
    csv += buf;
  }
  write_file(dir / "scheme_compare.csv", csv);
  return 0;
}

int cmd_survival_sweep(const json& cfg, const fs::path& dir) {
  const json& sv = cfg.at("survival");
  SurvivalParams params;
  params.n_xi = sv.at("n_xi");
  params.gamma = sv.at("gamma");
  params.residual_tol = sv.at("residual_tol");
  params.k_max = sv.at("k_max");
  std::vector<double> eps_grid, t_grid;
  for (const auto& v : sv.at("eps_grid")) eps_grid.push_back(v.get<double>());
  for (const auto& v : sv.at("t_grid")) t_grid.push_back(v.get<double>());
  std::vector<SurvivalRow> rows =
      survival_sweep(cfg.at("preset"), eps_grid, t_grid, params, schedule_from(cfg));
  write_file(dir / "survival.csv", survival_csv(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"elliptic invariant torus toolkit"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, int (*)(const json&, const fs::path&)>> commands{
      {"iterate-map", cmd_iterate_map},   {"kam-run", cmd_kam_run},
      {"measure-sweep", cmd_measure_sweep}, {"verify-torus", cmd_verify_torus},
      {"scheme-compare", cmd_scheme_compare}, {"survival-sweep", cmd_survival_sweep}};

  std::vector<CommonOpts> opts(commands.size());
  for (size_t i = 0; i < commands.size(); ++i)
    add_common(app.add_subcommand(commands[i].first), opts[i]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  for (size_t i = 0; i < commands.size(); ++i) {
    CLI::App* sub = app.get_subcommand(commands[i].first);
    if (!sub->parsed()) continue;
    const CommonOpts& o = opts[i];
#ifdef _OPENMP
    if (o.threads > 0) omp_set_num_threads(o.threads);
#endif
    json cfg;
    try {
      cfg = resolve_config(o);
    } catch (const std::exception& e) {
      std::cerr << json{{"error", "config"}, {"message", e.what()}}.dump() << "\n";
      return 1;
    }
    fs::path dir;
    try {
      dir = make_run_dir(cfg, commands[i].first, o.out_dir);
      std::cout << dir.string() << "\n";
      return commands[i].second(cfg, dir);
    } catch (const ScreenFailure& e) {
      write_diagnostic(dir, "screen", e.what());
      return 2;
    } catch (const ConvergenceFailure& e) {
      write_diagnostic(dir, "convergence", e.what());
      return 2;
    } catch (const json::exception& e) {
      write_diagnostic(dir, "config", e.what());
      return 1;
    } catch (const std::invalid_argument& e) {
      write_diagnostic(dir, "usage", e.what());
      return 1;
    } catch (const std::exception& e) {
      write_diagnostic(dir, "internal", e.what());
      return 1;
    }
  }
  return 1;
}
