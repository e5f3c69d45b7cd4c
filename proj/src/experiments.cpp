#include "dbd/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace dbd {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Demo: return "demo";
    case Mode::Sweep: return "sweep";
    case Mode::Certify: return "certify";
  }
  return "unknown";
}

void ExperimentConfig::validate() const {
  scene.validate();
  if (trials < 1) throw DomainError("trials must be >= 1");
  if (workers < 0) throw DomainError("workers must be >= 0");
  if (!(success_threshold > 0.0)) throw DomainError("success_threshold must be > 0");
  if (!(certificate_tol > 0.0)) throw DomainError("certificate_tol must be > 0");
  if (!(grid_step > 0.0 && grid_step <= 0.1)) throw DomainError("grid_step must lie in (0, 0.1]");
  if (!(tol_peak > 0.0 && tol_peak < 0.1)) throw DomainError("tol_peak must lie in (0, 0.1)");
  if (min_separation < 0.0 || noise_std < 0.0) throw DomainError("min_separation and noise_std must be >= 0");
  if (!(solver.tol > 0.0) || solver.max_iter < 1 || !(solver.rho > 0.0)) throw DomainError("invalid solver options");
  if (mode == Mode::Sweep && (sweep_L.empty() || sweep_J.empty())) throw DomainError("sweep lists must be non-empty");
  for (int v : sweep_L)
    if (v < 1) throw DomainError("sweep L values must be >= 1");
  for (int v : sweep_J)
    if (v < 1) throw DomainError("sweep J values must be >= 1");
}

LocalizationOptions ExperimentConfig::localization_options() const {
  LocalizationOptions o;
  o.peaks.grid_step = grid_step;
  o.peaks.tol_peak = tol_peak;
  o.success_threshold = success_threshold;
  return o;
}

namespace {

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the last key in `path`, found by scanning for each quoted key in turn.
int line_of_key(const std::string& text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const std::string& key : path) {
    const std::size_t hit = text.find('"' + key + '"', pos);
    if (hit == std::string::npos) return 0;
    pos = hit + key.size() + 2;
  }
  return line_of_offset(text, pos);
}

class Reader {
 public:
  Reader(const std::string& text, const std::string& origin) : text_(text), origin_(origin) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& what) const {
    std::string name;
    for (const auto& p : path) name += (name.empty() ? "" : ".") + p;
    throw ConfigError(origin_ + ": " + (name.empty() ? what : name + ": " + what), line_of_key(text_, path));
  }

  void check_keys(const json& obj, const std::vector<std::string>& path, const std::set<std::string>& allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.count(key)) {
        auto p = path;
        p.push_back(key);
        fail(p, "unknown key");
      }
    }
  }

  template <typename T>
  void read(const json& obj, std::vector<std::string> path, const std::string& key, T& out) const {
    if (!obj.contains(key)) return;
    path.push_back(key);
    try {
      const json& v = obj.at(key);
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail(path, "expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) fail(path, "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
            fail(path, "expected a non-negative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) fail(path, "expected a number");
      }
      out = v.get<T>();
    } catch (const json::exception& e) {
      fail(path, e.what());
    }
  }

 private:
  const std::string& text_;
  std::string origin_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what(), line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  const Reader r(text, origin);
  r.check_keys(root, {}, {"mode", "scene", "paper_scene", "sweep", "trials", "workers", "grid_step", "tol_peak",
                          "success_threshold", "certificate_tol", "solver", "output_dir"});
  ExperimentConfig cfg;

  std::string mode = "demo";
  r.read(root, {}, "mode", mode);
  if (mode == "demo") cfg.mode = Mode::Demo;
  else if (mode == "sweep") cfg.mode = Mode::Sweep;
  else if (mode == "certify") cfg.mode = Mode::Certify;
  else r.fail({"mode"}, "expected demo, sweep or certify");

  if (root.contains("scene")) {
    const json& s = root["scene"];
    r.check_keys(s, {"scene"}, {"M", "P", "J", "L", "Q", "seed", "pri_T", "delta_f", "min_separation", "noise_std"});
    SceneConfig& sc = cfg.scene;
    r.read(s, {"scene"}, "M", sc.M);
    r.read(s, {"scene"}, "P", sc.P);
    r.read(s, {"scene"}, "J", sc.J);
    r.read(s, {"scene"}, "L", sc.L);
    r.read(s, {"scene"}, "Q", sc.Q);
    r.read(s, {"scene"}, "seed", sc.seed);
    double t = 0.0;
    if (s.contains("pri_T")) r.read(s, {"scene"}, "pri_T", t), sc.pri_T = t;
    if (s.contains("delta_f")) r.read(s, {"scene"}, "delta_f", t), sc.delta_f = t;
    r.read(s, {"scene"}, "min_separation", cfg.min_separation);
    r.read(s, {"scene"}, "noise_std", cfg.noise_std);
    if (sc.M < 1 || sc.M % 2 == 0) r.fail({"scene", "M"}, "M must be a positive odd integer");
    sc.N = (sc.M - 1) / 2;
  }
  r.read(root, {}, "paper_scene", cfg.paper_scene);

  if (root.contains("sweep")) {
    const json& s = root["sweep"];
    r.check_keys(s, {"sweep"}, {"L", "J"});
    for (const char* key : {"L", "J"}) {
      if (!s.contains(key)) continue;
      const json& list = s[key];
      if (!list.is_array() || !std::all_of(list.begin(), list.end(), [](const json& v) { return v.is_number_integer(); }))
        r.fail({"sweep", key}, "expected a list of integers");
      (std::string(key) == "L" ? cfg.sweep_L : cfg.sweep_J) = list.get<std::vector<int>>();
    }
  }
  r.read(root, {}, "trials", cfg.trials);
  r.read(root, {}, "workers", cfg.workers);
  r.read(root, {}, "grid_step", cfg.grid_step);
  r.read(root, {}, "tol_peak", cfg.tol_peak);
  r.read(root, {}, "success_threshold", cfg.success_threshold);
  r.read(root, {}, "certificate_tol", cfg.certificate_tol);

  if (root.contains("solver")) {
    const json& s = root["solver"];
    r.check_keys(s, {"solver"}, {"tol", "max_iter", "rho", "relaxation", "adapt_every", "time_limit_seconds",
                                 "gram_coupling", "verbose"});
    r.read(s, {"solver"}, "tol", cfg.solver.tol);
    r.read(s, {"solver"}, "max_iter", cfg.solver.max_iter);
    r.read(s, {"solver"}, "rho", cfg.solver.rho);
    r.read(s, {"solver"}, "relaxation", cfg.solver.relaxation);
    r.read(s, {"solver"}, "adapt_every", cfg.solver.adapt_every);
    r.read(s, {"solver"}, "time_limit_seconds", cfg.solver.time_limit_seconds);
    r.read(s, {"solver"}, "verbose", cfg.solver.verbose);
    std::string coupling = "shared";
    r.read(s, {"solver"}, "gram_coupling", coupling);
    if (coupling == "shared") cfg.coupling = GramCoupling::Shared;
    else if (coupling == "separate") cfg.coupling = GramCoupling::Separate;
    else r.fail({"solver", "gram_coupling"}, "expected shared or separate");
  }
  std::string out = cfg.output_dir.string();
  r.read(root, {}, "output_dir", out);
  cfg.output_dir = out;

  auto require = [&](bool ok, const std::vector<std::string>& path, const char* what) {
    if (!ok) r.fail(path, what);
  };
  const SceneConfig& sc = cfg.scene;
  require(sc.P >= 1, {"scene", "P"}, "must be >= 1");
  require(sc.J >= 1, {"scene", "J"}, "must be >= 1");
  require(sc.L >= 1, {"scene", "L"}, "must be >= 1");
  require(sc.Q >= 1, {"scene", "Q"}, "must be >= 1");
  require(cfg.min_separation >= 0.0, {"scene", "min_separation"}, "must be >= 0");
  require(cfg.noise_std >= 0.0, {"scene", "noise_std"}, "must be >= 0");
  require(cfg.trials >= 1, {"trials"}, "must be >= 1");
  require(cfg.workers >= 0, {"workers"}, "must be >= 0");
  require(cfg.grid_step > 0.0 && cfg.grid_step <= 0.1, {"grid_step"}, "must lie in (0, 0.1]");
  require(cfg.tol_peak > 0.0 && cfg.tol_peak < 0.1, {"tol_peak"}, "must lie in (0, 0.1)");
  require(cfg.success_threshold > 0.0, {"success_threshold"}, "must be > 0");
  require(cfg.certificate_tol > 0.0, {"certificate_tol"}, "must be > 0");
  require(cfg.solver.tol > 0.0, {"solver", "tol"}, "must be > 0");
  require(cfg.solver.max_iter >= 1, {"solver", "max_iter"}, "must be >= 1");
  require(cfg.solver.rho > 0.0, {"solver", "rho"}, "must be > 0");
  for (int v : cfg.sweep_L) require(v >= 1, {"sweep", "L"}, "values must be >= 1");
  for (int v : cfg.sweep_J) require(v >= 1, {"sweep", "J"}, "values must be >= 1");

  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(origin + ": " + e.what(), 0);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

namespace {

double sum_abs(const DelayDopplerChannel& ch) { return ch.l1_norm(); }

SynthesisOptions synthesis_options(const ExperimentConfig& config, std::uint64_t seed) {
  SynthesisOptions o;
  o.noise_std = config.noise_std;
  o.noise_seed = derive_seed(seed, {static_cast<std::uint64_t>(StreamRole::Noise)});
  return o;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

}  // namespace

LiftedProblem make_scene(const ExperimentConfig& config) {
  SceneConfig sc = config.scene;
  if (config.paper_scene) sc.L = sc.Q = 3;
  sc.validate();
  const SubspaceBases bases = generate_bases(sc);
  const auto [radar, comm] = config.paper_scene ? reference_scene_channels(sc)
                                                : generate_channels(sc, ChannelOptions{config.min_separation});
  return synthesize(sc, radar, comm, bases, synthesis_options(config, sc.seed));
}

SceneOutcome run_scene(const LiftedProblem& problem, const ExperimentConfig& config, bool with_certificate) {
  SceneOutcome out;
  out.problem = problem;
  out.solution = solve_dual(problem, config.solver, config.coupling);
  out.localization = localize(problem, out.solution.q, config.localization_options());
  if (problem.ground_truth) {
    out.expected_objective = sum_abs(problem.ground_truth->first) + sum_abs(problem.ground_truth->second);
    if (with_certificate) {
      const DualSdpSpec spec = make_dual_spec(problem);
      CertificateReport rep;
      rep.tol = config.certificate_tol;
      rep.exclusion_radius = 2.0 * config.grid_step;
      const DualPolynomial pr = make_dual_polynomial(spec, out.solution.q, Side::Radar);
      const DualPolynomial pc = make_dual_polynomial(spec, out.solution.q, Side::Comm);
      rep.radar = verify_side(pr, out.localization.radar_grid, problem.ground_truth->first.points(), rep.tol,
                              rep.exclusion_radius, &problem.bases.u);
      rep.comm = verify_side(pc, out.localization.comm_grid, problem.ground_truth->second.points(), rep.tol,
                             rep.exclusion_radius, &problem.bases.v);
      out.certificate = rep;
    }
  }
  return out;
}

json estimates_payload(const SceneOutcome& outcome, const ExperimentConfig& config) {
  const LocalizationResult& loc = outcome.localization;
  json j;
  j["scene"] = scene_document(outcome.problem);
  j["gram_coupling"] = config.coupling == GramCoupling::Shared ? "shared" : "separate";
  j["solver"] = {{"status", to_string(outcome.solution.report.status)},
                 {"iterations", outcome.solution.report.iterations},
                 {"objective", outcome.solution.objective},
                 {"expected_objective", outcome.expected_objective}};
  j["grid_step"] = loc.grid_step;
  j["success_threshold"] = config.success_threshold;
  j["radar"] = to_json(loc.radar);
  j["comm"] = to_json(loc.comm);
  j["amplitude_residual"] = loc.amplitude_residual;
  if (!loc.amplitude_note.empty()) j["amplitude_note"] = loc.amplitude_note;
  if (outcome.certificate) j["certificate"] = to_json(*outcome.certificate);
  return j;
}

DemoArtifacts run_demo(const ExperimentConfig& config) {
  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  DemoArtifacts art;
  art.outcome = run_scene(make_scene(config), config, true);
  const SceneOutcome& o = art.outcome;
  {
    std::ofstream f(dir / "dual_radar_grid.csv");
    write_grid_csv(o.localization.radar_grid, f);
  }
  {
    std::ofstream f(dir / "dual_comm_grid.csv");
    write_grid_csv(o.localization.comm_grid, f);
  }
  {
    std::ofstream f(dir / "measurements.csv");
    write_measurements_csv(o.problem.y, f);
  }
  write_json(dir / "estimates.json", estimates_payload(o, config));
  if (o.certificate) write_json(dir / "certificate.json", to_json(*o.certificate));
  write_json(dir / "solve_report.json", to_json(o.solution.report, true));
  write_json(dir / "dual_solution.json", to_json(o.solution, false));
  write_json(dir / "scene.json", scene_document(o.problem));
  art.exit_code = o.solution.report.status == SolveStatus::Optimal ? kExitOk : kExitSolverFailure;
  return art;
}

DemoArtifacts run_certify(const ExperimentConfig& config) {
  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  DemoArtifacts art;
  art.outcome = run_scene(make_scene(config), config, true);
  const SceneOutcome& o = art.outcome;
  write_json(dir / "certificate.json", to_json(*o.certificate));
  write_json(dir / "solve_report.json", to_json(o.solution.report, true));
  if (o.solution.report.status != SolveStatus::Optimal) art.exit_code = kExitSolverFailure;
  else art.exit_code = o.certificate->passed() ? kExitOk : kExitCertificateFailed;
  return art;
}

std::string TrialSpec::id() const {
  return "L" + std::to_string(L) + "-J" + std::to_string(J) + "-t" + std::to_string(trial);
}

TrialSpec make_trial(int L, int J, int trial, std::uint64_t base_seed) {
  return {L, J, trial,
          derive_seed(base_seed, {static_cast<std::uint64_t>(L), static_cast<std::uint64_t>(J),
                                  static_cast<std::uint64_t>(trial)})};
}

TrialSpec parse_trial_id(const std::string& id, std::uint64_t base_seed) {
  static const std::regex pattern(R"(L(\d+)-J(\d+)-t(\d+))");
  std::smatch m;
  if (!std::regex_match(id, m, pattern)) throw ConfigError("malformed trial id '" + id + "', expected L<l>-J<j>-t<k>", 0);
  return make_trial(std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3]), base_seed);
}

json to_json(const TrialRecord& r) {
  json j{{"trial_id", r.spec.id()},
         {"L", r.spec.L},
         {"J", r.spec.J},
         {"trial", r.spec.trial},
         {"seed", r.spec.seed},
         {"M", r.M},
         {"P", r.P},
         {"status", r.status}};
  if (!r.error.empty()) j["error"] = r.error;
  j["iterations"] = r.iterations;
  j["objective"] = r.objective;
  j["expected_objective"] = r.expected_objective;
  j["radar_peaks"] = r.radar_peaks;
  j["comm_peaks"] = r.comm_peaks;
  j["radar_errors"] = r.radar_errors;
  j["comm_errors"] = r.comm_errors;
  j["radar_success"] = r.radar_success;
  j["comm_success"] = r.comm_success;
  return j;
}

const CellResult* SweepResult::cell(int L, int J) const {
  for (const CellResult& c : cells)
    if (c.L == L && c.J == J) return &c;
  return nullptr;
}

LiftedProblem make_trial_scene(const ExperimentConfig& config, const TrialSpec& spec) {
  SceneConfig sc = SceneConfig::with_samples(config.scene.M, config.scene.P, spec.J, spec.L, spec.L, spec.seed);
  const SubspaceBases bases = generate_bases(sc);
  const auto [radar, comm] = generate_channels(sc, ChannelOptions{config.min_separation});
  return synthesize(sc, radar, comm, bases, synthesis_options(config, spec.seed));
}

TrialRecord run_trial(const ExperimentConfig& config, const TrialSpec& spec) {
  TrialRecord rec;
  rec.spec = spec;
  rec.M = config.scene.M;
  rec.P = config.scene.P;
  const auto start = std::chrono::steady_clock::now();
  try {
    const SceneOutcome o = run_scene(make_trial_scene(config, spec), config, false);
    rec.status = to_string(o.solution.report.status);
    rec.iterations = o.solution.report.iterations;
    rec.objective = o.solution.objective;
    rec.expected_objective = o.expected_objective;
    rec.radar_peaks = static_cast<int>(o.localization.radar.peaks.size());
    rec.comm_peaks = static_cast<int>(o.localization.comm.peaks.size());
    rec.radar_errors = o.localization.radar.match->errors;
    rec.comm_errors = o.localization.comm.match->errors;
    rec.radar_success = o.localization.radar.success;
    rec.comm_success = o.localization.comm.success;
  } catch (const std::exception& e) {
    rec.status = "error";
    rec.error = e.what();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<TrialSpec> plan_sweep(const ExperimentConfig& config) {
  std::vector<TrialSpec> plan;
  for (int L : config.sweep_L)
    for (int J : config.sweep_J)
      for (int t = 0; t < config.trials; ++t) plan.push_back(make_trial(L, J, t, config.scene.seed));
  return plan;
}

SweepResult run_sweep(const ExperimentConfig& config) {
  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  const std::vector<TrialSpec> plan = plan_sweep(config);
  const std::size_t total = plan.size();

  std::vector<std::optional<TrialRecord>> slots(total);
  std::mutex mtx;
  std::condition_variable ready;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      TrialRecord rec = run_trial(config, plan[i]);
      {
        std::lock_guard lock(mtx);
        slots[i] = std::move(rec);
      }
      ready.notify_all();
    }
  };
  int n_workers = config.workers > 0 ? config.workers : static_cast<int>(std::thread::hardware_concurrency());
  n_workers = std::clamp<int>(n_workers, 1, static_cast<int>(std::max<std::size_t>(total, 1)));
  std::vector<std::jthread> pool;
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);

  // collector: records leave in plan order
  SweepResult result;
  std::ofstream jsonl(dir / "trials.jsonl");
  for (std::size_t i = 0; i < total; ++i) {
    std::unique_lock lock(mtx);
    ready.wait(lock, [&] { return slots[i].has_value(); });
    TrialRecord rec = std::move(*slots[i]);
    lock.unlock();
    jsonl << to_json(rec).dump() << '\n' << std::flush;
    result.records.push_back(std::move(rec));
  }
  pool.clear();

  for (int L : config.sweep_L)
    for (int J : config.sweep_J) {
      CellResult cell{L, J, 0, 0.0, 0.0};
      for (const TrialRecord& r : result.records) {
        if (r.spec.L != L || r.spec.J != J) continue;
        ++cell.trials;
        cell.p_success_radar += r.radar_success ? 1.0 : 0.0;
        cell.p_success_comm += r.comm_success ? 1.0 : 0.0;
      }
      if (cell.trials > 0) {
        cell.p_success_radar /= cell.trials;
        cell.p_success_comm /= cell.trials;
      }
      result.cells.push_back(cell);
    }

  std::ofstream csv(dir / "sweep.csv");
  csv << "L,J,p_success_radar,p_success_comm,trials\n";
  for (const CellResult& c : result.cells)
    csv << c.L << ',' << c.J << ',' << format_double(c.p_success_radar) << ',' << format_double(c.p_success_comm)
        << ',' << c.trials << '\n';
  std::ofstream timing(dir / "timings.csv");
  timing << "trial_id,seconds\n";
  for (const TrialRecord& r : result.records) timing << r.spec.id() << ',' << format_double(r.seconds) << '\n';
  return result;
}

TrialRecord replay_trial(const ExperimentConfig& config, const std::string& trial_id) {
  const TrialSpec spec = parse_trial_id(trial_id, config.scene.seed);
  TrialRecord rec = run_trial(config, spec);
  std::filesystem::create_directories(config.output_dir);
  write_json(config.output_dir / ("replay_" + spec.id() + ".json"), to_json(rec));
  return rec;
}

}  // namespace dbd
