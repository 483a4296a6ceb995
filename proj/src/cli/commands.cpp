#include "balrd/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "balrd/metrics.hpp"
#include "balrd/toy_codec.hpp"

#ifndef BALRD_VERSION
#define BALRD_VERSION "0.0.0"
#endif

namespace balrd::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunOutcome {
  std::string name;
  fs::path dir;
  Mode mode = Mode::kStandard;
  std::uint64_t seed = 0;
  std::optional<double> lambda;
  std::string fingerprint;
  std::optional<std::string> parent_fingerprint;
  TrainResult result;
  bool started = false;
  std::string error;  // set when the run could not be executed at all

  bool succeeded() const { return started && result.status == RunStatus::kCompleted; }
};

ExperimentConfig load(const CommonOptions& opts) {
  auto sets = opts.sets;
  if (opts.seed) sets.push_back("train.seed=" + std::to_string(*opts.seed));
  if (opts.mode) sets.push_back("train.mode=\"" + *opts.mode + "\"");
  return load_experiment(opts.config, sets);
}

fs::path output_root(const CommonOptions& opts, const ExperimentConfig& cfg) {
  if (opts.out) return *opts.out;
  if (const char* env = std::getenv(kOutputRootEnv); env != nullptr && *env != '\0') return env;
  return cfg.output.directory;
}

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path create_unique_dir(const fs::path& root, const std::string& stem) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create output root " + root.string() + ": " + ec.message());
  for (int i = 0; i < 10000; ++i) {
    const fs::path candidate = root / (i == 0 ? stem : stem + "-" + std::to_string(i));
    if (fs::create_directory(candidate, ec)) return candidate;
    if (ec) throw IoError("cannot create " + candidate.string() + ": " + ec.message());
  }
  throw IoError("too many run directories named " + stem);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::optional<RDPoint> rd_point(const Problem& problem, const LossPair& eval) {
  const auto* codec = dynamic_cast<const ToyCodecProblem*>(&problem);
  if (codec == nullptr) return std::nullopt;
  return RDPoint{eval.rate, psnr(codec->mse_from_distortion(eval.distortion), 1.0)};
}

json counters_json(const OverheadCounters& c) {
  json j = {{"iterations", c.iterations},       {"loss_evals", c.loss_evals},
            {"grad_evals", c.grad_evals},       {"balance_calls", c.balance_calls},
            {"gram_builds", c.gram_builds},     {"logit_updates", c.logit_updates},
            {"singular_fallbacks", c.singular_fallbacks}};
  if (c.iterations > 0) {
    const auto per = [&](std::uint64_t v) {
      return static_cast<double>(v) / static_cast<double>(c.iterations);
    };
    j["per_iteration"] = {{"loss_evals", per(c.loss_evals)},
                          {"grad_evals", per(c.grad_evals)},
                          {"gram_builds", per(c.gram_builds)},
                          {"balance_calls", per(c.balance_calls)}};
  }
  return j;
}

json loss_json(const LossPair& l) {
  return {{"rate", l.rate}, {"distortion", l.distortion}, {"total", l.total()}};
}

void write_speed_exports(const ExperimentConfig& cfg, const std::vector<TraceRecord>& trace,
                         const fs::path& dir) {
  const auto speeds = speed_trace(trace);
  const auto smooth = ema_smooth(speeds, cfg.output.smoothing);
  if (cfg.output.csv) {
    std::string text = "iteration,s_R,s_D,s_R_ema,s_D_ema\n";
    for (std::size_t i = 0; i < speeds.size(); ++i) {
      text += std::to_string(trace[i + 1].iteration) + ',' + format_number(speeds[i].rate) +
              ',' + format_number(speeds[i].distortion) + ',' + format_number(smooth[i].rate) +
              ',' + format_number(smooth[i].distortion) + '\n';
    }
    write_text(dir / "speeds_smoothed.csv", text);
  }
  if (cfg.output.json) {
    json j = {{"smoothing", cfg.output.smoothing}, {"iteration", json::array()},
              {"s_R_ema", json::array()},          {"s_D_ema", json::array()}};
    for (std::size_t i = 0; i < smooth.size(); ++i) {
      j["iteration"].push_back(trace[i + 1].iteration);
      j["s_R_ema"].push_back(smooth[i].rate);
      j["s_D_ema"].push_back(smooth[i].distortion);
    }
    write_text(dir / "speeds_smoothed.json", j.dump() + "\n");
  }
}

void write_run_artifacts(const ExperimentConfig& cfg, const Problem& problem,
                         const RunOutcome& run, double seconds) {
  const TrainResult& r = run.result;
  write_text(run.dir / "config.json", to_json(cfg).dump(2) + "\n");
  save_checkpoint(r.checkpoint, run.dir / "checkpoint.json");
  write_trace_csv(r.trace, run.dir / "trace.csv");
  write_diagnostics_csv(r.trace, run.dir / "diagnostics.csv");
  write_speed_exports(cfg, r.trace, run.dir);

  json m;
  m["tool"] = "balrd";
  m["version"] = BALRD_VERSION;
  m["trace_csv_version"] = kTraceCsvVersion;
  m["run"] = run.name;
  m["mode"] = to_string(run.mode);
  m["seed"] = run.seed;
  m["lambda_rd"] = run.lambda ? json(*run.lambda) : json(nullptr);
  m["config_fingerprint"] = run.fingerprint;
  m["problem_fingerprint"] = problem_fingerprint(problem);
  m["parent_fingerprint"] = run.parent_fingerprint ? json(*run.parent_fingerprint) : json(nullptr);
  m["config"] = to_json(cfg);
  m["wall_clock_seconds"] = seconds;
  m["status"] = r.status == RunStatus::kCompleted ? "completed" : "diverged";
  m["failed_iteration"] = r.failed_iteration ? json(*r.failed_iteration) : json(nullptr);
  m["failure"] = r.failure;
  m["counters"] = counters_json(r.counters);
  m["renormalize"] = cfg.train.balance.renormalize;
  m["renorm_constant"] = cfg.train.balance.renormalize ? json("c_t") : json(1.0);
  m["epoch_losses"] = r.epoch_losses;
  m["checkpoint_epoch"] = r.checkpoint.epoch;
  m["final_step_size"] = r.trace.empty() ? json(nullptr) : json(r.trace.back().step_size);
  if (r.final_eval) {
    json e = loss_json(*r.final_eval);
    if (const auto p = rd_point(problem, *r.final_eval)) e["psnr"] = p->quality;
    m["final_eval"] = e;
  } else {
    m["final_eval"] = nullptr;
  }
  write_text(run.dir / "manifest.json", m.dump(2) + "\n");
}

/// Runs one configuration into `run.dir` (already created). The parent
/// checkpoint, when given, seeds theta.
void execute_run(const ExperimentConfig& cfg, const Checkpoint* parent, RunOutcome& run) {
  const auto problem = make_problem(cfg.problem);
  run.fingerprint = config_fingerprint(cfg);
  run.mode = cfg.train.mode;
  run.seed = cfg.train.seed;
  const auto start = std::chrono::steady_clock::now();
  if (parent != nullptr) {
    run.result = fine_tune(*parent, *problem, cfg.train);
  } else if (cfg.train.fine_tune_from) {
    run.result = fine_tune(load_checkpoint(*cfg.train.fine_tune_from), *problem, cfg.train);
  } else {
    run.result = train(*problem, cfg.train);
  }
  run.started = true;
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_run_artifacts(cfg, *problem, run, seconds);
}

void run_pool(std::vector<std::function<void()>>& jobs, int workers) {
  if (jobs.empty()) return;
  unsigned n = workers > 0 ? static_cast<unsigned>(workers) : std::thread::hardware_concurrency();
  n = std::clamp<unsigned>(n, 1, static_cast<unsigned>(jobs.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) jobs[i]();
    });
  }
}  // join barrier

std::string lambda_tag(std::size_t index) { return "lam" + std::to_string(index); }

json outcome_json(const RunOutcome& run, const fs::path& base) {
  json j = {{"name", run.name},
            {"dir", fs::relative(run.dir, base).string()},
            {"mode", to_string(run.mode)},
            {"seed", run.seed},
            {"lambda_rd", run.lambda ? json(*run.lambda) : json(nullptr)},
            {"fingerprint", run.fingerprint},
            {"parent_fingerprint",
             run.parent_fingerprint ? json(*run.parent_fingerprint) : json(nullptr)}};
  if (!run.started) {
    j["status"] = "failed";
    j["error"] = run.error;
    return j;
  }
  j["status"] = run.result.status == RunStatus::kCompleted ? "completed" : "diverged";
  if (!run.result.failure.empty()) j["error"] = run.result.failure;
  j["final_eval"] = run.result.final_eval ? loss_json(*run.result.final_eval) : json(nullptr);
  j["final_epoch_loss"] =
      run.result.epoch_losses.empty() ? json(nullptr) : json(run.result.epoch_losses.back());
  return j;
}

int report_error(std::ostream& err, const std::exception& e, int code) {
  err << "error: " << e.what() << '\n';
  return code;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_trace_csv(const std::vector<TraceRecord>& trace, const fs::path& path) {
  std::string text = "# balrd-trace v" + std::to_string(kTraceCsvVersion) + "\n";
  text += kTraceCsvHeader;
  text += '\n';
  for (const auto& r : trace) {
    text += std::to_string(r.iteration);
    for (double v : {r.losses.rate, r.losses.distortion, r.weights.rate(), r.weights.distortion(),
                     r.speeds.rate, r.speeds.distortion, r.direction_norm, r.step_size}) {
      text += ',';
      text += format_number(v);
    }
    text += '\n';
  }
  write_text(path, text);
}

void write_diagnostics_csv(const std::vector<TraceRecord>& trace, const fs::path& path) {
  std::string text = "iteration,c_t,raw_w_R,raw_w_D,kkt_lambda,singular_fallback\n";
  for (const auto& r : trace) {
    text += std::to_string(r.iteration) + ',' + format_number(r.renorm) + ',';
    text += r.raw_weights ? format_number(r.raw_weights->first) + ',' +
                                format_number(r.raw_weights->second)
                          : std::string(",");
    text += ',';
    if (r.kkt_lambda) text += format_number(*r.kkt_lambda);
    text += r.singular_fallback ? ",1\n" : ",0\n";
  }
  write_text(path, text);
}

bool is_divergent(const TrainResult& result, double threshold) {
  if (result.status == RunStatus::kDiverged) return true;
  if (result.epoch_losses.empty()) return false;
  // Compare window means so a single lucky epoch does not count as the best.
  const auto& e = result.epoch_losses;
  const std::size_t w = std::max<std::size_t>(1, e.size() / 10);
  double sum = std::accumulate(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(w), 0.0);
  double best = sum;
  for (std::size_t i = w; i < e.size(); ++i) {
    sum += e[i] - e[i - w];
    best = std::min(best, sum);
  }
  if (!std::isfinite(sum)) return true;
  return sum > best * (1.0 + threshold);
}

int cmd_validate_config(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const ExperimentConfig cfg = load(opts);
    out << to_json(cfg).dump(2) << '\n';
    out << "fingerprint " << config_fingerprint(cfg) << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    return report_error(err, e, kExitConfigError);
  } catch (const IoError& e) {
    return report_error(err, e, kExitIoError);
  }
}

int cmd_train(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load(opts);
    if (cfg.train.fine_tune_from) {
      // Fail on an incompatible checkpoint before anything is written.
      const auto problem = make_problem(cfg.problem);
      const Checkpoint ckpt = load_checkpoint(*cfg.train.fine_tune_from);
      if (ckpt.fingerprint != problem_fingerprint(*problem)) {
        throw ConfigError("checkpoint " + *cfg.train.fine_tune_from +
                          " does not match the configured problem");
      }
    }
  } catch (const ConfigError& e) {
    return report_error(err, e, kExitConfigError);
  } catch (const IoError& e) {
    return report_error(err, e, kExitIoError);
  }

  try {
    RunOutcome run;
    run.name = "train";
    if (cfg.problem.contains("lambda_rd")) run.lambda = cfg.problem.at("lambda_rd").get<double>();
    const std::string fp = config_fingerprint(cfg);
    run.dir = create_unique_dir(output_root(opts, cfg), fp.substr(0, 8) + "-" + timestamp());
    execute_run(cfg, nullptr, run);
    out << run.dir.string() << '\n';
    if (run.result.status == RunStatus::kDiverged) {
      err << "run diverged at iteration "
          << (run.result.failed_iteration ? std::to_string(*run.result.failed_iteration) : "?")
          << ": " << run.result.failure << '\n';
      return kExitDiverged;
    }
    return kExitOk;
  } catch (const IoError& e) {
    return report_error(err, e, kExitIoError);
  } catch (const ConfigError& e) {
    return report_error(err, e, kExitConfigError);
  } catch (const fs::filesystem_error& e) {
    return report_error(err, e, kExitIoError);
  }
}

int cmd_sweep(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load(opts);
    if (!cfg.sweep) throw ConfigError("sweep requires a 'sweep' section");
    const auto& modes = cfg.sweep->modes;
    if (cfg.sweep->solution2_fine_tune &&
        std::find(modes.begin(), modes.end(), Mode::kStandard) == modes.end()) {
      throw ConfigError("sweep.solution2_fine_tune needs 'standard' among sweep.modes");
    }
    for (double l : cfg.sweep->lambdas) make_problem(cfg.problem, l);
  } catch (const ConfigError& e) {
    return report_error(err, e, kExitConfigError);
  } catch (const IoError& e) {
    return report_error(err, e, kExitIoError);
  }

  const SweepConfig& sweep = *cfg.sweep;
  std::vector<std::optional<double>> lambdas;
  for (double l : sweep.lambdas) lambdas.emplace_back(l);
  if (lambdas.empty()) lambdas.emplace_back(std::nullopt);

  fs::path sweep_dir;
  try {
    sweep_dir = create_unique_dir(output_root(opts, cfg),
                                  "sweep-" + config_fingerprint(cfg).substr(0, 8) + "-" +
                                      timestamp());
  } catch (const IoError& e) {
    return report_error(err, e, kExitIoError);
  }

  // Outcome storage is allocated up front; each slot is written by exactly
  // one job and read by dependents only after a join barrier or within the
  // same job.
  std::map<std::tuple<Mode, std::uint64_t, std::size_t>, RunOutcome> runs;
  for (Mode m : sweep.modes) {
    for (auto s : sweep.seeds) {
      for (std::size_t i = 0; i < lambdas.size(); ++i) runs[{m, s, i}];
    }
  }

  auto configure = [&](Mode mode, std::uint64_t seed, std::size_t i) {
    ExperimentConfig c = cfg;
    c.sweep.reset();
    c.train.mode = mode;
    c.train.seed = seed;
    c.train.fine_tune_from.reset();
    if (lambdas[i]) c.problem["lambda_rd"] = *lambdas[i];
    return c;
  };

  auto run_one = [&](ExperimentConfig c, RunOutcome& run, const RunOutcome* parent,
                     std::size_t i) {
    run.mode = c.train.mode;
    run.seed = c.train.seed;
    run.lambda = lambdas[i];
    run.name = std::string(to_string(run.mode)) + "-" + lambda_tag(i) + "-seed" +
               std::to_string(run.seed);
    run.dir = sweep_dir / run.name;
    try {
      fs::create_directory(run.dir);
      if (parent != nullptr) {
        if (!parent->succeeded()) throw Error("parent run " + parent->name + " did not complete");
        run.parent_fingerprint = parent->fingerprint;
        execute_run(c, &parent->result.checkpoint, run);
      } else {
        execute_run(c, nullptr, run);
      }
    } catch (const std::exception& e) {
      run.error = e.what();
    }
  };

  const bool s2_from_standard = sweep.solution2_fine_tune;
  std::vector<std::function<void()>> phase1, phase2;
  for (Mode m : sweep.modes) {
    if (m == Mode::kSolution2 && s2_from_standard) continue;
    for (auto s : sweep.seeds) {
      phase1.emplace_back([&, m, s] {
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
          ExperimentConfig c = configure(m, s, i);
          const RunOutcome* parent = nullptr;
          if (i > 0 && sweep.chain == ChainMode::kFromFirst) parent = &runs.at({m, s, 0});
          if (i > 0 && sweep.chain == ChainMode::kSequential) parent = &runs.at({m, s, i - 1});
          if (parent != nullptr) c.train.epochs = sweep.chain_epochs.value_or(c.train.epochs);
          run_one(std::move(c), runs.at({m, s, i}), parent, i);
        }
      });
    }
  }
  if (s2_from_standard &&
      std::find(sweep.modes.begin(), sweep.modes.end(), Mode::kSolution2) != sweep.modes.end()) {
    for (auto s : sweep.seeds) {
      phase2.emplace_back([&, s] {
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
          ExperimentConfig c = configure(Mode::kSolution2, s, i);
          c.train = fine_tune_preset(c.train);
          run_one(std::move(c), runs.at({Mode::kSolution2, s, i}),
                  &runs.at({Mode::kStandard, s, i}), i);
        }
      });
    }
  }
  run_pool(phase1, sweep.workers);
  run_pool(phase2, sweep.workers);

  json summary;
  summary["config_fingerprint"] = config_fingerprint(cfg);
  summary["config"] = to_json(cfg);
  summary["runs"] = json::array();
  int failed = 0;
  for (const auto& [key, run] : runs) {
    summary["runs"].push_back(outcome_json(run, sweep_dir));
    if (!run.succeeded()) ++failed;
  }
  summary["failed_runs"] = failed;

  // One R-D curve per mode: seed-averaged rate and PSNR at each trade-off.
  std::unique_ptr<Problem> probe;
  try {
    probe = make_problem(cfg.problem);
  } catch (const std::exception&) {
  }
  std::map<Mode, RDCurve> curves;
  summary["curves"] = json::object();
  if (probe && dynamic_cast<const ToyCodecProblem*>(probe.get()) != nullptr && lambdas[0]) {
    for (Mode m : sweep.modes) {
      json cj = {{"points", json::array()}};
      std::vector<RDPoint> points;
      for (std::size_t i = 0; i < lambdas.size(); ++i) {
        double rate = 0.0, quality = 0.0;
        int n = 0;
        const auto p = make_problem(cfg.problem, lambdas[i]);
        for (auto s : sweep.seeds) {
          const RunOutcome& run = runs.at({m, s, i});
          if (!run.succeeded() || !run.result.final_eval) continue;
          const auto pt = rd_point(*p, *run.result.final_eval);
          rate += pt->rate;
          quality += pt->quality;
          ++n;
        }
        if (n == 0) continue;
        points.push_back({rate / n, quality / n});
        cj["points"].push_back(
            {{"lambda_rd", *lambdas[i]}, {"rate", rate / n}, {"quality", quality / n}});
      }
      try {
        RDCurve curve(points, std::string(to_string(m)));
        const std::string file = "curve_" + std::string(to_string(m)) + ".csv";
        write_curve_csv(curve, sweep_dir / file);
        cj["file"] = file;
        curves.emplace(m, std::move(curve));
      } catch (const CurveError& e) {
        cj["error"] = e.what();
      }
      summary["curves"][std::string(to_string(m))] = cj;
    }
    if (curves.contains(Mode::kStandard)) {
      summary["bd_rate_vs_standard"] = json::object();
      for (const auto& [m, curve] : curves) {
        try {
          summary["bd_rate_vs_standard"][std::string(to_string(m))] =
              bd_rate(curves.at(Mode::kStandard), curve);
        } catch (const CurveError& e) {
          summary["bd_rate_vs_standard"][std::string(to_string(m))] = {{"error", e.what()}};
        }
      }
    }
  }

  try {
    write_text(sweep_dir / "summary.json", summary.dump(2) + "\n");
  } catch (const IoError& e) {
    return report_error(err, e, kExitIoError);
  }
  out << sweep_dir.string() << '\n';
  if (failed > 0) {
    err << failed << " run(s) failed; see summary.json\n";
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_bdrate(const fs::path& anchor_path, const fs::path& test_path, std::ostream& out,
               std::ostream& err) {
  try {
    const RDCurve anchor = read_curve(anchor_path);
    const RDCurve test = read_curve(test_path);
    const BdRateReport r = bd_rate_report(anchor, test);
    auto fit_json = [](const CubicFit& f) {
      return json{{"coeffs", f.coeffs},
                  {"center", f.center},
                  {"scale", f.scale},
                  {"rms_residual", f.rms_residual}};
    };
    const json j = {{"anchor", anchor.label()},
                    {"test", test.label()},
                    {"bd_rate_percent", r.percent},
                    {"overlap", {r.overlap_low, r.overlap_high}},
                    {"mean_log_rate_diff", r.mean_log_rate_diff},
                    {"intervals", r.intervals},
                    {"fit", "cubic ln(rate) over PSNR, trapezoid 1e-4 dB"},
                    {"anchor_fit", fit_json(r.anchor_fit)},
                    {"test_fit", fit_json(r.test_fit)}};
    out << j.dump(2) << '\n';
    return kExitOk;
  } catch (const CurveError& e) {
    return report_error(err, e, kExitConfigError);
  } catch (const IoError& e) {
    return report_error(err, e, kExitIoError);
  }
}

int cmd_ablate(const std::string& preset, const CommonOptions& opts, std::ostream& out,
               std::ostream& err) {
  if (preset != "renorm_off" && preset != "gamma_sweep" && preset != "cross_validation") {
    err << "error: unknown ablation preset '" << preset
        << "' (expected renorm_off, gamma_sweep or cross_validation)\n";
    return kExitConfigError;
  }
  ExperimentConfig cfg;
  try {
    cfg = load(opts);
  } catch (const ConfigError& e) {
    return report_error(err, e, kExitConfigError);
  } catch (const IoError& e) {
    return report_error(err, e, kExitIoError);
  }
  cfg.sweep.reset();
  cfg.train.fine_tune_from.reset();

  struct Plan {
    std::string name;
    std::string role;
    ExperimentConfig config;
    std::string parent;  // name of the run whose checkpoint seeds this one
    bool expected_divergent = false;
  };
  std::vector<Plan> plans;
  auto with_mode = [&](Mode m) {
    ExperimentConfig c = cfg;
    c.train.mode = m;
    return c;
  };

  if (preset == "renorm_off") {
    for (Mode m : {Mode::kSolution1, Mode::kSolution2}) {
      for (bool renorm : {true, false}) {
        ExperimentConfig c = with_mode(m);
        c.train.balance.renormalize = renorm;
        plans.push_back({std::string(to_string(m)) + (renorm ? "-renorm" : "-no-renorm"),
                         renorm ? "baseline" : "w/o renormalization", std::move(c), "", false});
      }
    }
  } else if (preset == "gamma_sweep") {
    for (double g : kGammaSweep) {
      ExperimentConfig c = with_mode(Mode::kSolution1);
      c.train.solution1.gamma = g;
      plans.push_back({"gamma-" + format_number(g), "logit decay", std::move(c), "", g == 0.0});
    }
  } else {
    const TrainConfig ft = fine_tune_preset(cfg.train);
    plans.push_back({"standard-base", "pre-trained model", with_mode(Mode::kStandard), "", false});
    plans.push_back(
        {"solution1-scratch", "from scratch (intended)", with_mode(Mode::kSolution1), "", false});
    ExperimentConfig s2ft = cfg;
    s2ft.train = ft;
    plans.push_back(
        {"solution2-finetune", "fine-tune (intended)", s2ft, "standard-base", false});
    ExperimentConfig s1ft = cfg;
    s1ft.train = ft;
    s1ft.train.mode = Mode::kSolution1;
    plans.push_back(
        {"solution1-finetune", "fine-tune (reversed)", s1ft, "standard-base", false});
    plans.push_back(
        {"solution2-scratch", "from scratch (reversed)", with_mode(Mode::kSolution2), "", false});
  }

  fs::path dir;
  try {
    dir = create_unique_dir(output_root(opts, cfg), "ablate-" + preset + "-" +
                                                        config_fingerprint(cfg).substr(0, 8) +
                                                        "-" + timestamp());
  } catch (const IoError& e) {
    return report_error(err, e, kExitIoError);
  }

  std::map<std::string, RunOutcome> done;
  json summary;
  summary["preset"] = preset;
  summary["config_fingerprint"] = config_fingerprint(cfg);
  summary["divergence_threshold"] = cfg.ablate.divergence_threshold;
  if (preset == "gamma_sweep") summary["gammas"] = kGammaSweep;
  summary["runs"] = json::array();
  for (auto& plan : plans) {
    RunOutcome run;
    run.name = plan.name;
    run.dir = dir / plan.name;
    if (plan.config.problem.contains("lambda_rd")) {
      run.lambda = plan.config.problem.at("lambda_rd").get<double>();
    }
    try {
      fs::create_directory(run.dir);
      const RunOutcome* parent = plan.parent.empty() ? nullptr : &done.at(plan.parent);
      if (parent != nullptr) {
        if (!parent->succeeded()) throw Error("parent run " + plan.parent + " did not complete");
        run.parent_fingerprint = parent->fingerprint;
        execute_run(plan.config, &parent->result.checkpoint, run);
      } else {
        execute_run(plan.config, nullptr, run);
      }
    } catch (const std::exception& e) {
      run.error = e.what();
    }
    json j = outcome_json(run, dir);
    j["role"] = plan.role;
    j["renormalize"] = plan.config.train.balance.renormalize;
    j["renorm_constant"] = plan.config.train.balance.renormalize ? json("c_t") : json(1.0);
    j["gamma"] = plan.config.train.solution1.gamma;
    j["expected_divergent"] = plan.expected_divergent;
    j["diverged"] = !run.started || is_divergent(run.result, cfg.ablate.divergence_threshold);
    if (run.started && !run.result.epoch_losses.empty()) {
      j["best_epoch_loss"] =
          *std::min_element(run.result.epoch_losses.begin(), run.result.epoch_losses.end());
    }
    summary["runs"].push_back(j);
    done.emplace(plan.name, std::move(run));
  }
  try {
    write_text(dir / "summary.json", summary.dump(2) + "\n");
  } catch (const IoError& e) {
    return report_error(err, e, kExitIoError);
  }
  out << dir.string() << '\n';
  return kExitOk;
}

}  // namespace balrd::cli
