// shlab command-line driver.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error,
// 3 acceptance threshold or replay mismatch.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shlab/shlab.hpp"

namespace fs = std::filesystem;
using namespace shlab;

namespace {

std::atomic<bool> g_cancel{false};

void on_signal(int) { g_cancel = true; }

struct Common {
  std::string config;
  std::string study;
  std::string eps, nu, nu2, nu3, delta, dt, t_end, threads;
  std::string seeds;
  std::string out;
};

void add_overrides(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value config file");
  app->add_option("--eps", c.eps, "eps value(s), comma separated");
  app->add_option("--nu", c.nu, "quadratic coefficient(s) of the cubic model");
  app->add_option("--nu2", c.nu2, "quadratic coefficient(s) of the quintic model");
  app->add_option("--nu3", c.nu3, "cubic coefficient(s) of the quintic model");
  app->add_option("--seeds", c.seeds, "number of seeds");
  app->add_option("--delta", c.delta, "band half-width parameter");
  app->add_option("--dt", c.dt, "time step (rescaled time)");
  app->add_option("--t-end", c.t_end, "horizon (rescaled time)");
  app->add_option("--threads", c.threads, "worker threads");
}

std::vector<std::pair<std::string, std::string>> overrides_of(const Common& c) {
  std::vector<std::pair<std::string, std::string>> kv;
  const auto put = [&](const char* k, const std::string& v) {
    if (!v.empty()) kv.emplace_back(k, v);
  };
  put("study", c.study);
  put("eps", c.eps);
  put("nu", c.nu);
  put("nu2", c.nu2);
  put("nu3", c.nu3);
  put("seeds", c.seeds);
  put("delta", c.delta);
  put("dt", c.dt);
  put("t_end", c.t_end);
  put("threads", c.threads);
  return kv;
}

double first(const std::string& text, double fallback) {
  if (text.empty()) return fallback;
  return detail::parse_list("value", text).front();
}

fs::path output_dir(const std::string& flag, const std::string& leaf) {
  if (!flag.empty()) return flag;
  return fs::path(default_output_root()) / leaf;
}

void print_summary(const StudySummary& s) {
  std::cout << "study " << study_name(s.study) << ": " << s.records.size() << " records";
  if (s.skipped) std::cout << " (" << s.skipped << " resumed)";
  std::cout << '\n';
  for (const auto& f : s.fits) {
    std::cout << "  " << f.name << ":";
    for (std::size_t i = 0; i < f.eps.size(); ++i)
      std::cout << " eps=" << f.eps_eff[i] << " median=" << f.median[i];
    if (f.fitted) std::cout << "  slope(median)=" << f.slope_median << " slope(q90)=" << f.slope_q90;
    std::cout << '\n';
  }
  for (const auto& c : s.coefficients) std::cout << "  " << c.dump() << '\n';
  for (const auto& c : s.checks)
    std::cout << (c.pass ? "  [PASS] " : "  [FAIL] ") << c.name << ": " << c.detail << '\n';
}

int cmd_study(const Common& c) {
  StudyConfig cfg = c.config.empty() ? StudyConfig{} : load_config(c.config);
  for (const auto& [k, v] : overrides_of(c)) cfg.set(k, v);
  cfg.finalize();
  if (!c.out.empty()) cfg.out = c.out;
  if (cfg.out.empty()) cfg.out = (fs::path(default_output_root()) / study_name(cfg.study)).string();
  std::signal(SIGINT, on_signal);
  RunOptions opts;
  opts.log = &std::cerr;
  opts.cancel = &g_cancel;
  const auto summary = run_study(cfg, opts);
  print_summary(summary);
  std::cout << "output: " << cfg.out << '\n';
  if (g_cancel) {
    std::cerr << "interrupted; re-run the same command to resume\n";
    return 1;
  }
  return summary.passed() ? 0 : 3;
}

int cmd_simulate_sh(const Common& c, const std::string& variant, std::uint64_t seed,
                    std::size_t stride, double amplitude, double intensity) {
  ModelParams p;
  if (variant == "cubic") p.variant = Variant::cubic;
  else if (variant == "quintic") p.variant = Variant::quintic;
  else throw ConfigError("variant must be cubic or quintic");
  StudyGrid sg;
  const auto cg = sg.make(first(c.eps, 0.1));
  p.eps = cg.eps;
  p.nu = first(c.nu, 0.0);
  p.nu2 = first(c.nu2, 0.0);
  p.nu3 = first(c.nu3, 0.0);
  p.dt = first(c.dt, 1e-3);
  p.t_end = first(c.t_end, 1.0);
  const double delta = first(c.delta, default_delta);
  if (!(intensity >= 0.0)) throw ConfigError("intensity must be >= 0");
  try {
    p.validate();
    make_kernel(Band::P1, delta, cg.eps, cg.grid);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const fs::path dir = output_dir(c.out, "simulate-sh");
  fs::create_directories(dir);

  auto init_rng = aux_stream(seed, 0, 1);
  const auto v0 = modulated_initial_data(cg, 0.5, amplitude, init_rng);
  std::ofstream diag(dir / "diagnostics.csv");
  diag << "T,sup,l2,concentration\n" << std::setprecision(17);
  SimulateOptions opts;
  opts.snapshot_stride = stride;
  opts.observer = [&](double T, const RealField& v) {
    diag << T << ',' << sup_norm(v) << ',' << l2_norm(v) << ','
         << mode_concentration(v, cg.eps, delta).value << '\n';
  };
  const auto traj = simulate(v0, p, NoiseConfig{seed, intensity, 0}, opts);
  nlohmann::json snaps = nlohmann::json::array();
  for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%05zu.shm", i);
    write_field((dir / name).string(), traj.snapshots[i]);
    snaps.push_back({{"index", i}, {"time", traj.times[i]}, {"file", name}});
  }
  const auto gl = p.variant == Variant::cubic ? gl_coefficients(p.nu) : gl5_coefficients(p.nu2, p.nu3);
  nlohmann::json manifest = {
      {"params", {{"variant", variant_name(p.variant)}, {"eps", p.eps}, {"nu", p.nu}, {"nu2", p.nu2},
                  {"nu3", p.nu3}, {"dt", p.dt}, {"t_end", p.t_end}, {"delta", delta},
                  {"blowup_threshold", p.blowup_threshold}, {"intensity", intensity},
                  {"n_points", cg.grid.size()}, {"length", cg.grid.length()}}},
      {"gl_coefficients", {{"diffusion", gl.diffusion}, {"cubic", gl.cubic}, {"quintic", gl.quintic},
                           {"noise_intensity", gl.noise_intensity}}},
      {"seed", seed},
      {"stream_id", 0},
      {"status", status_name(traj.status)},
      {"stop_time", traj.stop_time},
      {"version", library_version},
      {"snapshots", snaps}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  std::cout << "status " << status_name(traj.status) << " at T=" << traj.stop_time << ", "
            << traj.snapshots.size() << " snapshots in " << dir.string() << '\n';
  return 0;
}

int cmd_simulate_gl(const Common& c, const std::string& variant, std::uint64_t seed,
                    std::size_t stride, double amplitude, double intensity) {
  GLCoefficients gl;
  if (variant == "cubic") gl = gl_coefficients(first(c.nu, 0.0));
  else if (variant == "quintic") gl = gl5_coefficients(first(c.nu2, 0.0), first(c.nu3, 0.0));
  else throw ConfigError("variant must be cubic or quintic");
  if (!(intensity >= 0.0)) throw ConfigError("intensity must be >= 0");
  gl.noise_intensity = intensity;
  const double dt = first(c.dt, 1e-3), t_end = first(c.t_end, 1.0);
  if (!(dt > 0.0) || !(t_end > 0.0)) throw ConfigError("dt and t_end must be positive");
  StudyGrid sg;
  const auto cg = sg.make(first(c.eps, 0.1));
  const Grid g(cg.grid.size(), cg.grid.length());
  const fs::path dir = output_dir(c.out, "simulate-gl");
  fs::create_directories(dir);

  auto init_rng = aux_stream(seed, 0, 1);
  const auto A0 = random_amplitude(g, 0.5, amplitude, init_rng);
  GlStepper st(g, gl, dt);
  st.set_state(A0);
  auto rng = NoiseConfig{seed, 1.0, 0}.stream();
  std::ofstream diag(dir / "diagnostics.csv");
  diag << "T,sup,l2\n" << std::setprecision(17) << 0.0 << ',' << sup_norm(A0) << ',' << l2_norm(A0) << '\n';
  nlohmann::json snaps = nlohmann::json::array();
  const auto snapshot = [&](std::size_t i, double T, const ComplexField& A) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%05zu.shm", i);
    write_field((dir / name).string(), A);
    snaps.push_back({{"index", i}, {"time", T}, {"file", name}});
  };
  snapshot(0, 0.0, A0);
  RunStatus status = RunStatus::completed;
  double stop = 0.0;
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  for (std::size_t s = 1; s <= steps; ++s) {
    const double sup = intensity == 0.0 ? st.step_deterministic() : st.step(rng);
    stop = static_cast<double>(s) * dt;
    if (!(sup < st.blowup_threshold())) {
      status = RunStatus::blowup_stopped;
      break;
    }
    diag << stop << ',' << sup << ',' << l2_norm(st.field()) << '\n';
    if (stride > 0 && (s % stride == 0 || s == steps)) snapshot(snaps.size(), stop, st.field());
  }
  nlohmann::json manifest = {
      {"params", {{"variant", variant}, {"dt", dt}, {"t_end", t_end}, {"n_points", g.size()},
                  {"length", g.length()}}},
      {"gl_coefficients", {{"diffusion", gl.diffusion}, {"cubic", gl.cubic}, {"quintic", gl.quintic},
                           {"noise_intensity", gl.noise_intensity}}},
      {"seed", seed},
      {"status", status_name(status)},
      {"stop_time", stop},
      {"version", library_version},
      {"snapshots", snaps}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  std::cout << "status " << status_name(status) << " at T=" << stop << " in " << dir.string() << '\n';
  return 0;
}

int cmd_spectrum(const Common& c, const std::string& input, std::uint64_t seed, double amplitude) {
  RealField f;
  if (!input.empty()) {
    auto any = read_field(input);
    if (std::holds_alternative<ComplexField>(any))
      throw ConfigError("spectrum expects a real field snapshot");
    f = std::get<RealField>(any);
  } else {
    StudyGrid sg;
    const auto cg = sg.make(first(c.eps, 0.1));
    auto rng = aux_stream(seed, 0, 1);
    f = modulated_initial_data(cg, 0.5, amplitude, rng);
  }
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!c.out.empty()) {
    if (fs::path(c.out).has_parent_path()) fs::create_directories(fs::path(c.out).parent_path());
    file.open(c.out);
    if (!file) throw ConfigError("cannot write " + c.out);
    os = &file;
  }
  *os << "k,abs\n" << std::setprecision(17);
  for (const auto& [k, a] : amplitude_spectrum(f)) *os << k << ',' << a << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Swift-Hohenberg pseudospectral lab"};
  app.require_subcommand(1);
  Common common;
  std::string variant = "cubic", input, dir, key;
  std::uint64_t seed = 1;
  std::size_t stride = 100;
  double amplitude = 1.0, intensity = 1.0;
  std::optional<std::uint64_t> replay_seed;

  auto* study = app.add_subcommand("study", "run a named ensemble study");
  add_overrides(study, common);
  study->add_option("--study", common.study, "attractivity | averaging | theorem2 | gl-limit | landau-sweep | quintic-suite");
  study->add_option("--out", common.out, "output directory");

  auto* sim_sh = app.add_subcommand("simulate-sh", "integrate one Swift-Hohenberg trajectory");
  auto* sim_gl = app.add_subcommand("simulate-gl", "integrate one Ginzburg-Landau trajectory");
  for (auto* sub : {sim_sh, sim_gl}) {
    add_overrides(sub, common);
    sub->add_option("--out", common.out, "output directory");
    sub->add_option("--variant", variant, "cubic | quintic");
    sub->add_option("--seed", seed, "noise seed");
    sub->add_option("--stride", stride, "steps between stored snapshots");
    sub->add_option("--amplitude", amplitude, "rms of the initial amplitude");
    sub->add_option("--intensity", intensity, "noise intensity (0 = deterministic)");
  }

  auto* replay_cmd = app.add_subcommand("replay", "recompute one study record and compare bit-exactly");
  add_overrides(replay_cmd, common);
  replay_cmd->add_option("--dir", dir, "study output directory")->required();
  replay_cmd->add_option("--key", key, "record key (default: first record)");
  replay_cmd->add_option("--seed", replay_seed, "replay with a different seed");

  auto* spectrum = app.add_subcommand("spectrum", "amplitude spectrum |F u|(k) of a snapshot");
  spectrum->add_option("--input", input, "SHM1 snapshot (default: generated modulated carrier)");
  spectrum->add_option("--eps", common.eps, "eps of the generated field");
  spectrum->add_option("--seed", seed, "seed of the generated field");
  spectrum->add_option("--amplitude", amplitude, "rms amplitude of the generated field");
  spectrum->add_option("--out", common.out, "CSV path (default: stdout)");

  auto* plot = app.add_subcommand("plotdata", "write tidy CSVs from a finished study");
  plot->add_option("--dir", dir, "study output directory")->required();
  plot->add_option("--out", common.out, "destination directory (default: <dir>/plotdata)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (study->parsed()) return cmd_study(common);
    if (sim_sh->parsed()) return cmd_simulate_sh(common, variant, seed, stride, amplitude, intensity);
    if (sim_gl->parsed()) return cmd_simulate_gl(common, variant, seed, stride, amplitude, intensity);
    if (spectrum->parsed()) return cmd_spectrum(common, input, seed, amplitude);
    if (plot->parsed()) {
      const auto out = common.out.empty() ? (fs::path(dir) / "plotdata").string() : common.out;
      for (const auto& f : emit_plotdata(dir, out)) std::cout << f << '\n';
      return 0;
    }
    if (replay_cmd->parsed()) {
      if (key.empty()) {
        std::ifstream is(fs::path(dir) / "records.jsonl");
        std::string line;
        if (!std::getline(is, line)) throw ConfigError("no records in " + dir);
        key = nlohmann::json::parse(line).at("key").get<std::string>();
      }
      auto kv = overrides_of(common);
      const auto res = replay(dir, key, kv, replay_seed);
      std::cout << "replay " << key << ": " << (res.identical ? "identical" : "MISMATCH") << '\n';
      for (const auto& m : res.mismatches) std::cout << "  " << m << '\n';
      return res.identical ? 0 : 3;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
