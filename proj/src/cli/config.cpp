#include "balrd/cli/config.hpp"

#include <fstream>
#include <set>

#include "balrd/toy_codec.hpp"

namespace balrd::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& known) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
T get_or(const json& obj, const std::string& where, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("wrong type for '" + where + "." + key + "'");
  }
}

double positive(const json& obj, const std::string& where, const char* key, double fallback) {
  const double v = get_or<double>(obj, where, key, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError("'" + where + "." + key + "' must be positive");
  }
  return v;
}

std::size_t positive_count(const json& obj, const std::string& where, const char* key,
                           std::int64_t fallback) {
  const auto v = get_or<std::int64_t>(obj, where, key, fallback);
  if (v < 1) throw ConfigError("'" + where + "." + key + "' must be >= 1");
  return static_cast<std::size_t>(v);
}

ParamVector vector_at(const json& obj, const std::string& where, const char* key) {
  try {
    return ParamVector(obj.at(key).get<std::vector<double>>());
  } catch (const json::exception&) {
    throw ConfigError("'" + where + "." + key + "' must be an array of numbers");
  }
}

const std::set<std::string> kQuadraticKeys{"name",      "scale_rate", "scale_distortion",
                                           "floor",     "target_rate", "target_distortion",
                                           "init",      "dim",         "scale_ratio",
                                           "instance_seed"};
const std::set<std::string> kCodecKeys{"name",       "patch_size",   "latent_dim", "lambda_rd",
                                       "noise_seed", "data_seed",    "batch_size", "eval_patches",
                                       "use_bias",   "init_scale",   "rate_floor"};

std::unique_ptr<Problem> build_quadratic(const json& p) {
  const std::string where = "problem";
  reject_unknown(p, where, kQuadraticKeys);
  const double floor = positive(p, where, "floor", 1.0);
  if (p.contains("target_rate") || p.contains("target_distortion")) {
    if (p.contains("dim") || p.contains("scale_ratio") || p.contains("instance_seed")) {
      throw ConfigError("problem: explicit targets exclude dim/scale_ratio/instance_seed");
    }
    ImbalancedQuadratic::Params params;
    params.scale_rate = positive(p, where, "scale_rate", 1.0);
    params.scale_distortion = positive(p, where, "scale_distortion", 1.0);
    params.floor = floor;
    params.target_rate = vector_at(p, where, "target_rate");
    params.target_distortion = vector_at(p, where, "target_distortion");
    if (p.contains("init")) params.init = vector_at(p, where, "init");
    try {
      return std::make_unique<ImbalancedQuadratic>(std::move(params));
    } catch (const ShapeError& e) {
      throw ConfigError(e.what());
    }
  }
  if (p.contains("scale_rate") || p.contains("scale_distortion") || p.contains("init")) {
    throw ConfigError("problem: random instances take dim/scale_ratio/instance_seed only");
  }
  const std::size_t dim = positive_count(p, where, "dim", 8);
  const double ratio = positive(p, where, "scale_ratio", 10.0);
  const auto seed = get_or<std::uint64_t>(p, where, "instance_seed", 0);
  return std::make_unique<ImbalancedQuadratic>(ImbalancedQuadratic::random(dim, ratio, seed, floor));
}

std::unique_ptr<Problem> build_codec(const json& p, std::optional<double> lambda_rd) {
  const std::string where = "problem";
  reject_unknown(p, where, kCodecKeys);
  ToyCodecProblem::Config c;
  c.patch_size = positive_count(p, where, "patch_size", 8);
  c.latent_dim = positive_count(p, where, "latent_dim", 3);
  c.lambda_rd = lambda_rd ? *lambda_rd : positive(p, where, "lambda_rd", 0.0018);
  if (!(c.lambda_rd > 0.0)) throw ConfigError("lambda_rd must be positive");
  c.noise_seed = get_or<std::uint64_t>(p, where, "noise_seed", 0);
  c.data_seed = get_or<std::uint64_t>(p, where, "data_seed", 0);
  c.batch_size = positive_count(p, where, "batch_size", 32);
  c.eval_patches = positive_count(p, where, "eval_patches", 256);
  c.use_bias = get_or<bool>(p, where, "use_bias", true);
  c.init_scale = positive(p, where, "init_scale", 1.0);
  c.rate_floor = positive(p, where, "rate_floor", 1e-6);
  return std::make_unique<ToyCodecProblem>(c);
}

TrainConfig parse_train(const json& t) {
  const std::string where = "train";
  reject_unknown(t, where,
                 {"mode", "base_rule", "step_size", "beta1", "beta2", "epsilon", "epochs",
                  "batches_per_epoch", "scheduler", "seed", "solution1", "renormalize",
                  "fine_tune_from", "eval_draws"});
  TrainConfig c;
  c.mode = parse_mode(get_or<std::string>(t, where, "mode", "standard"));
  c.base_rule = parse_base_rule(get_or<std::string>(t, where, "base_rule", "adaptive_moments"));
  c.step_size = get_or<double>(t, where, "step_size", c.step_size);
  c.beta1 = get_or<double>(t, where, "beta1", c.beta1);
  c.beta2 = get_or<double>(t, where, "beta2", c.beta2);
  c.epsilon = get_or<double>(t, where, "epsilon", c.epsilon);
  c.epochs = get_or<int>(t, where, "epochs", c.epochs);
  c.batches_per_epoch = get_or<int>(t, where, "batches_per_epoch", c.batches_per_epoch);
  c.seed = get_or<std::uint64_t>(t, where, "seed", c.seed);
  c.eval_draws = get_or<int>(t, where, "eval_draws", c.eval_draws);
  c.balance.renormalize = get_or<bool>(t, where, "renormalize", true);
  if (t.contains("fine_tune_from") && !t.at("fine_tune_from").is_null()) {
    c.fine_tune_from = get_or<std::string>(t, where, "fine_tune_from", "");
  }
  if (t.contains("scheduler")) {
    const json& s = t.at("scheduler");
    const std::string sw = "train.scheduler";
    reject_unknown(s, sw, {"type", "patience", "factor", "threshold"});
    const auto type = get_or<std::string>(s, sw, "type", "reduce_on_plateau");
    if (type == "none") {
      c.scheduler.enabled = false;
    } else if (type == "reduce_on_plateau") {
      c.scheduler.enabled = true;
    } else {
      throw ConfigError("unknown scheduler type '" + type + "'");
    }
    c.scheduler.patience = get_or<int>(s, sw, "patience", c.scheduler.patience);
    c.scheduler.factor = get_or<double>(s, sw, "factor", c.scheduler.factor);
    c.scheduler.threshold = get_or<double>(s, sw, "threshold", c.scheduler.threshold);
  }
  if (t.contains("solution1")) {
    const json& s = t.at("solution1");
    const std::string sw = "train.solution1";
    reject_unknown(s, sw, {"beta", "gamma", "xi0"});
    c.solution1.beta = get_or<double>(s, sw, "beta", c.solution1.beta);
    c.solution1.gamma = get_or<double>(s, sw, "gamma", c.solution1.gamma);
    if (s.contains("xi0")) {
      try {
        c.solution1.xi = s.at("xi0").get<std::array<double, 2>>();
      } catch (const json::exception&) {
        throw ConfigError("'train.solution1.xi0' must be a pair of numbers");
      }
    }
  }
  c.validate();
  return c;
}

OutputConfig parse_output(const json& o) {
  const std::string where = "output";
  reject_unknown(o, where, {"directory", "formats", "smoothing"});
  OutputConfig c;
  c.directory = get_or<std::string>(o, where, "directory", c.directory.string());
  if (o.contains("formats")) {
    const auto formats = get_or<std::vector<std::string>>(o, where, "formats", {});
    c.csv = c.json = false;
    for (const auto& f : formats) {
      if (f == "csv") {
        c.csv = true;
      } else if (f == "json") {
        c.json = true;
      } else {
        throw ConfigError("unknown output format '" + f + "'");
      }
    }
  }
  c.smoothing = get_or<double>(o, where, "smoothing", c.smoothing);
  if (!(c.smoothing >= 0.0 && c.smoothing < 1.0)) {
    throw ConfigError("output.smoothing must lie in [0, 1)");
  }
  return c;
}

SweepConfig parse_sweep(const json& s) {
  const std::string where = "sweep";
  reject_unknown(s, where,
                 {"lambdas", "seeds", "modes", "chain", "chain_epochs", "solution2_fine_tune",
                  "workers"});
  SweepConfig c;
  c.lambdas = get_or<std::vector<double>>(s, where, "lambdas", {});
  for (double l : c.lambdas) {
    if (!(l > 0.0)) throw ConfigError("sweep.lambdas must be positive");
  }
  c.seeds = get_or<std::vector<std::uint64_t>>(s, where, "seeds", c.seeds);
  if (c.seeds.empty()) throw ConfigError("sweep.seeds must not be empty");
  if (s.contains("modes")) {
    c.modes.clear();
    for (const auto& m : get_or<std::vector<std::string>>(s, where, "modes", {})) {
      c.modes.push_back(parse_mode(m));
    }
    if (c.modes.empty()) throw ConfigError("sweep.modes must not be empty");
  }
  const auto chain = get_or<std::string>(s, where, "chain", "none");
  if (chain == "none") {
    c.chain = ChainMode::kNone;
  } else if (chain == "from_first") {
    c.chain = ChainMode::kFromFirst;
  } else if (chain == "sequential") {
    c.chain = ChainMode::kSequential;
  } else {
    throw ConfigError("unknown sweep.chain '" + chain + "'");
  }
  if (s.contains("chain_epochs") && !s.at("chain_epochs").is_null()) {
    c.chain_epochs = get_or<int>(s, where, "chain_epochs", 0);
    if (*c.chain_epochs < 0) throw ConfigError("sweep.chain_epochs must be >= 0");
  }
  c.solution2_fine_tune = get_or<bool>(s, where, "solution2_fine_tune", false);
  c.workers = get_or<int>(s, where, "workers", 0);
  if (c.workers < 0) throw ConfigError("sweep.workers must be >= 0");
  return c;
}

}  // namespace

std::unique_ptr<Problem> make_problem(const json& p, std::optional<double> lambda_rd) {
  if (!p.is_object()) throw ConfigError("problem must be an object");
  const auto name = get_or<std::string>(p, "problem", "name", "");
  try {
    if (name == "imbalanced_quadratic") {
      if (lambda_rd) throw ConfigError("imbalanced_quadratic has no trade-off to sweep");
      return build_quadratic(p);
    }
    if (name == "toy_codec") return build_codec(p, lambda_rd);
  } catch (const ShapeError& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown problem name '" + name + "'");
}

ExperimentConfig parse_experiment(const json& doc) {
  reject_unknown(doc, "config", {"problem", "train", "output", "sweep", "ablate"});
  if (!doc.contains("problem")) throw ConfigError("missing 'problem' section");
  ExperimentConfig c;
  c.problem = doc.at("problem");
  make_problem(c.problem);  // validates
  c.train = parse_train(doc.value("train", json::object()));
  c.output = parse_output(doc.value("output", json::object()));
  if (doc.contains("sweep") && !doc.at("sweep").is_null()) c.sweep = parse_sweep(doc.at("sweep"));
  if (doc.contains("ablate")) {
    const json& a = doc.at("ablate");
    reject_unknown(a, "ablate", {"divergence_threshold"});
    c.ablate.divergence_threshold = get_or<double>(a, "ablate", "divergence_threshold", 0.05);
    if (!(c.ablate.divergence_threshold >= 0.0)) {
      throw ConfigError("ablate.divergence_threshold must be >= 0");
    }
  }
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos
                                                                        : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty segment");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override '" + key + "' descends into a non-object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

ExperimentConfig load_experiment(const std::filesystem::path& path,
                                 const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_experiment(doc);
}

std::string_view to_string(ChainMode mode) {
  switch (mode) {
    case ChainMode::kNone: return "none";
    case ChainMode::kFromFirst: return "from_first";
    case ChainMode::kSequential: return "sequential";
  }
  return "?";
}

json to_json(const ExperimentConfig& c) {
  json doc;
  doc["problem"] = c.problem;
  const TrainConfig& t = c.train;
  doc["train"] = {
      {"mode", to_string(t.mode)},
      {"base_rule", to_string(t.base_rule)},
      {"step_size", t.step_size},
      {"beta1", t.beta1},
      {"beta2", t.beta2},
      {"epsilon", t.epsilon},
      {"epochs", t.epochs},
      {"batches_per_epoch", t.batches_per_epoch},
      {"seed", t.seed},
      {"eval_draws", t.eval_draws},
      {"renormalize", t.balance.renormalize},
      {"scheduler",
       {{"type", t.scheduler.enabled ? "reduce_on_plateau" : "none"},
        {"patience", t.scheduler.patience},
        {"factor", t.scheduler.factor},
        {"threshold", t.scheduler.threshold}}},
      {"solution1",
       {{"beta", t.solution1.beta}, {"gamma", t.solution1.gamma}, {"xi0", t.solution1.xi}}},
      {"fine_tune_from", t.fine_tune_from ? json(*t.fine_tune_from) : json(nullptr)},
  };
  json formats = json::array();
  if (c.output.csv) formats.push_back("csv");
  if (c.output.json) formats.push_back("json");
  doc["output"] = {{"directory", c.output.directory.string()},
                   {"formats", formats},
                   {"smoothing", c.output.smoothing}};
  if (c.sweep) {
    json modes = json::array();
    for (Mode m : c.sweep->modes) modes.push_back(to_string(m));
    doc["sweep"] = {{"lambdas", c.sweep->lambdas},
                    {"seeds", c.sweep->seeds},
                    {"modes", modes},
                    {"chain", to_string(c.sweep->chain)},
                    {"chain_epochs", c.sweep->chain_epochs ? json(*c.sweep->chain_epochs)
                                                           : json(nullptr)},
                    {"solution2_fine_tune", c.sweep->solution2_fine_tune},
                    {"workers", c.sweep->workers}};
  }
  doc["ablate"] = {{"divergence_threshold", c.ablate.divergence_threshold}};
  return doc;
}

std::string config_fingerprint(const ExperimentConfig& config) {
  json doc = to_json(config);
  // Where results are written does not change what they are.
  doc["output"].erase("directory");
  if (doc.contains("sweep")) doc["sweep"].erase("workers");
  return fingerprint_hex(doc.dump());
}

}  // namespace balrd::cli
