#include "balrd/trainer.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include "json.hpp"

#include "balrd/optimizers.hpp"
#include "balrd/solution2.hpp"

namespace balrd {

namespace {

constexpr std::uint64_t kEvalCounterBit = 1ULL << 63;

std::uint64_t train_counter(std::uint64_t seed, std::uint64_t iteration) {
  return ((seed & 0x7fffffULL) << 40) + iteration + 1;
}

std::unique_ptr<UpdateRule> make_rule(const TrainConfig& config) {
  if (config.base_rule == BaseRule::kPlainDescent) {
    return std::make_unique<PlainDescent>(config.step_size);
  }
  return std::make_unique<AdaptiveMoments>(config.step_size, config.beta1, config.beta2,
                                           config.epsilon);
}

void require_finite(const Evaluation& ev) {
  if (!std::isfinite(ev.losses.rate) || !std::isfinite(ev.losses.distortion)) {
    throw NumericError("nonfinite loss");
  }
  require_consistent(ev.grads);
}

TrainResult run(const Problem& problem, const TrainConfig& config, ParamVector theta,
                TrajectoryState trajectory, int start_epoch) {
  config.validate();
  TrainResult result;
  auto rule = make_rule(config);
  std::optional<PlateauScheduler> scheduler;
  if (config.scheduler.enabled) {
    scheduler.emplace(config.scheduler.patience, config.scheduler.factor,
                      config.scheduler.threshold);
  }

  const auto bpe = static_cast<std::size_t>(config.batches_per_epoch);
  const std::vector<DataBatch> batches = problem.training_batches(bpe, config.seed);
  result.trace.reserve(static_cast<std::size_t>(config.epochs) * bpe);

  std::uint64_t t = 0;
  int epochs_done = 0;
  try {
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      double epoch_total = 0.0;
      for (std::size_t b = 0; b < bpe; ++b, ++t) {
        const EvalContext ctx{&batches[b], train_counter(config.seed, t)};
        TraceRecord rec;
        switch (config.mode) {
          case Mode::kStandard: {
            const Evaluation ev = problem.evaluate(theta, ctx);
            require_finite(ev);
            std::vector<double> d(ev.grads.dim());
            for (std::size_t i = 0; i < d.size(); ++i) {
              d[i] = ev.grads.rate[i] + ev.grads.distortion[i];
            }
            theta = rule->apply(theta, d);
            rec.losses = ev.losses;
            rec.weights = SimplexWeights::uniform();
            rec.direction_norm = norm(d);
            rec.step_size = rule->step_size();
            result.counters.loss_evals += 1;
            result.counters.grad_evals += 1;
            break;
          }
          case Mode::kSolution1: {
            auto step = solution1_step(problem, theta, trajectory, ctx, *rule, config.balance,
                                       &result.counters);
            theta = std::move(step.theta);
            trajectory = step.state;
            rec = step.record;
            break;
          }
          case Mode::kSolution2: {
            auto step = solution2_step(problem, theta, ctx, *rule, config.balance,
                                       &result.counters);
            theta = std::move(step.theta);
            rec = step.record;
            break;
          }
        }
        if (!theta.all_finite()) throw NumericError("nonfinite parameters after step");
        rec.iteration = t;
        if (!result.trace.empty()) rec.speeds = improvement_speed(result.trace.back().losses, rec.losses);
        result.counters.iterations += 1;
        epoch_total += rec.losses.total();
        result.trace.push_back(rec);
      }
      const double epoch_mean = epoch_total / static_cast<double>(bpe);
      if (!std::isfinite(epoch_mean)) throw NumericError("nonfinite epoch loss");
      result.epoch_losses.push_back(epoch_mean);
      if (scheduler) rule->set_step_size(scheduler->step(epoch_mean, rule->step_size()));
      ++epochs_done;
    }
  } catch (const NumericError& e) {
    result.status = RunStatus::kDiverged;
    result.failed_iteration = t;
    result.failure = e.what();
  }

  result.checkpoint.theta = std::move(theta);
  if (config.mode == Mode::kSolution1) result.checkpoint.trajectory = trajectory;
  result.checkpoint.epoch = start_epoch + epochs_done;
  result.checkpoint.fingerprint = problem_fingerprint(problem);

  if (result.status == RunStatus::kCompleted) {
    try {
      result.final_eval = evaluate_holdout(problem, result.checkpoint.theta, config.seed,
                                           config.eval_draws);
    } catch (const NumericError& e) {
      result.status = RunStatus::kDiverged;
      result.failure = e.what();
    }
  }
  return result;
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kStandard: return "standard";
    case Mode::kSolution1: return "solution1";
    case Mode::kSolution2: return "solution2";
  }
  return "?";
}

std::string_view to_string(BaseRule rule) {
  return rule == BaseRule::kPlainDescent ? "plain_descent" : "adaptive_moments";
}

Mode parse_mode(std::string_view name) {
  if (name == "standard") return Mode::kStandard;
  if (name == "solution1") return Mode::kSolution1;
  if (name == "solution2") return Mode::kSolution2;
  throw ConfigError("unknown mode '" + std::string(name) + "'");
}

BaseRule parse_base_rule(std::string_view name) {
  if (name == "plain_descent") return BaseRule::kPlainDescent;
  if (name == "adaptive_moments") return BaseRule::kAdaptiveMoments;
  throw ConfigError("unknown base_rule '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw ConfigError("train.step_size must be positive");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("train.beta1 and train.beta2 must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("train.epsilon must be positive");
  if (epochs < 0) throw ConfigError("train.epochs must be nonnegative");
  if (batches_per_epoch < 1) throw ConfigError("train.batches_per_epoch must be >= 1");
  if (scheduler.patience < 1) throw ConfigError("train.scheduler.patience must be >= 1");
  if (!(scheduler.factor > 0.0 && scheduler.factor < 1.0)) {
    throw ConfigError("train.scheduler.factor must lie in (0, 1)");
  }
  if (!(scheduler.threshold >= 0.0)) throw ConfigError("train.scheduler.threshold must be >= 0");
  if (eval_draws < 1) throw ConfigError("train.eval_draws must be >= 1");
  try {
    solution1.validate();
  } catch (const NumericError& e) {
    throw ConfigError(std::string("train.solution1: ") + e.what());
  }
}

TrainConfig fine_tune_preset(const TrainConfig& base) {
  TrainConfig cfg = base;
  cfg.mode = Mode::kSolution2;
  cfg.step_size = base.step_size * 0.5;
  cfg.epochs = std::max(1, base.epochs / 4);
  return cfg;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "balrd-checkpoint";
  j["version"] = Checkpoint::kFormatVersion;
  j["dim"] = ckpt.theta.size();
  j["theta"] = ckpt.theta.values();
  j["epoch"] = ckpt.epoch;
  j["fingerprint"] = ckpt.fingerprint;
  if (ckpt.trajectory) {
    j["trajectory"] = {{"xi", ckpt.trajectory->xi},
                       {"beta", ckpt.trajectory->beta},
                       {"gamma", ckpt.trajectory->gamma}};
  } else {
    j["trajectory"] = nullptr;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format") != "balrd-checkpoint") throw IoError("not a checkpoint: " + path.string());
    if (j.at("version").get<int>() != Checkpoint::kFormatVersion) {
      throw IoError("unsupported checkpoint version in " + path.string());
    }
    Checkpoint c;
    c.theta = ParamVector(j.at("theta").get<std::vector<double>>());
    if (c.theta.size() != j.at("dim").get<std::size_t>()) {
      throw IoError("checkpoint dim does not match theta length");
    }
    c.epoch = j.at("epoch").get<int>();
    c.fingerprint = j.at("fingerprint").get<std::string>();
    if (!j.at("trajectory").is_null()) {
      TrajectoryState s;
      s.xi = j["trajectory"].at("xi").get<std::array<double, 2>>();
      s.beta = j["trajectory"].at("beta").get<double>();
      s.gamma = j["trajectory"].at("gamma").get<double>();
      c.trajectory = s;
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

LossPair evaluate_holdout(const Problem& problem, const ParamVector& theta, std::uint64_t seed,
                          int draws) {
  const DataBatch batch = problem.evaluation_batch(seed);
  LossPair sum{0.0, 0.0};
  for (int k = 0; k < draws; ++k) {
    const EvalContext ctx{&batch, kEvalCounterBit | static_cast<std::uint64_t>(k)};
    const LossPair l = problem.losses(theta, ctx);
    sum.rate += l.rate;
    sum.distortion += l.distortion;
  }
  const LossPair mean{sum.rate / draws, sum.distortion / draws};
  if (!std::isfinite(mean.rate) || !std::isfinite(mean.distortion)) {
    throw NumericError("nonfinite held-out loss");
  }
  return mean;
}

TrainResult train(const Problem& problem, const TrainConfig& config) {
  config.validate();
  return run(problem, config, problem.initial_point(config.seed), config.solution1, 0);
}

TrainResult fine_tune(const Checkpoint& checkpoint, const Problem& problem,
                      const TrainConfig& config) {
  config.validate();
  if (checkpoint.fingerprint != problem_fingerprint(problem) ||
      checkpoint.theta.size() != problem.dim()) {
    throw ConfigError("checkpoint fingerprint " + checkpoint.fingerprint +
                      " does not match problem " + problem.name());
  }
  if (config.epochs == 0) {
    TrainResult r;
    r.checkpoint = checkpoint;
    return r;
  }
  TrajectoryState traj = config.solution1;
  if (config.mode == Mode::kSolution1 && checkpoint.trajectory) {
    traj.xi = checkpoint.trajectory->xi;
  }
  return run(problem, config, checkpoint.theta, traj, checkpoint.epoch);
}

}  // namespace balrd
