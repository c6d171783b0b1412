#include "tgb/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tgb/errors.hpp"
#include "tgb/serialize.hpp"

namespace tgb {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& block,
                const std::set<std::string>& allowed) {
  if (!obj.is_object())
    throw ConfigError("config: '" + block + "' must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + key + "' in " + block);
}

template <typename T>
void get(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

double epsilon_field(const json& v) {
  if (v.is_string()) return parse_epsilon(v.get<std::string>());
  return v.get<double>();
}

CorpusConfig parse_corpus(const json& j) {
  check_keys(j, "corpus",
             {"n_colors", "n_shapes", "color_block", "shape_block", "n_fillers",
              "n_train", "n_validation", "noise_sigma", "trigger_frequency",
              "color_weights", "trigger_filler", "max_extra_fillers"});
  CorpusConfig c;
  get(j, "n_colors", c.n_colors);
  get(j, "n_shapes", c.n_shapes);
  get(j, "color_block", c.color_block);
  get(j, "shape_block", c.shape_block);
  get(j, "n_fillers", c.n_fillers);
  get(j, "n_train", c.n_train);
  get(j, "n_validation", c.n_validation);
  get(j, "noise_sigma", c.noise_sigma);
  get(j, "trigger_frequency", c.trigger_frequency);
  get(j, "color_weights", c.color_weights);
  get(j, "trigger_filler", c.trigger_filler);
  get(j, "max_extra_fillers", c.max_extra_fillers);
  return c;
}

ModelConfig parse_model(const json& j) {
  check_keys(j, "model", {"hidden", "embed", "token_dim", "tau", "init_seed"});
  ModelConfig m;
  get(j, "hidden", m.hidden);
  get(j, "embed", m.embed);
  get(j, "token_dim", m.token_dim);
  get(j, "tau", m.tau);
  get(j, "init_seed", m.init_seed);
  return m;
}

PoisonConfig parse_poison(const json& j) {
  check_keys(j, "poison",
             {"strategy", "trigger_token", "target_id", "ratio", "count",
              "injection_mode", "shift", "blend_beta", "patch_offset",
              "patch_width"});
  PoisonConfig p;
  if (j.contains("strategy"))
    p.strategy = strategy_from_name(j.at("strategy").get<std::string>());
  get(j, "trigger_token", p.trigger_token);
  get(j, "target_id", p.target_id);
  get(j, "ratio", p.ratio);
  get(j, "count", p.count);
  if (j.contains("injection_mode")) {
    const std::string mode = j.at("injection_mode").get<std::string>();
    if (mode == "insert") p.injection_mode = InjectionMode::kInsert;
    else if (mode == "replace") p.injection_mode = InjectionMode::kReplace;
    else throw ConfigError("config: injection_mode must be insert or replace");
  }
  get(j, "shift", p.shift);
  get(j, "blend_beta", p.blend_beta);
  get(j, "patch_offset", p.patch.offset);
  get(j, "patch_width", p.patch.width);
  return p;
}

PerturbConfig parse_perturb(const json& j) {
  check_keys(j, "perturb",
             {"lambda", "epsilon", "alpha", "steps", "regen", "mode"});
  PerturbConfig p;
  get(j, "lambda", p.lambda);
  if (j.contains("mode")) {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "pgd") p.random_noise = false;
    else if (mode == "random") p.random_noise = true;
    else throw ConfigError("config: perturb mode must be pgd or random");
  }
  if (j.contains("epsilon")) p.epsilon = epsilon_field(j.at("epsilon"));
  get(j, "alpha", p.alpha);
  get(j, "steps", p.steps);
  if (j.contains("regen")) {
    const std::string regen = j.at("regen").get<std::string>();
    if (regen == "step") p.regen = RegenPolicy::kStep;
    else if (regen == "epoch") p.regen = RegenPolicy::kEpoch;
    else throw ConfigError("config: regen must be step or epoch");
  }
  return p;
}

TrainConfig parse_train(const json& j) {
  check_keys(j, "train",
             {"epochs", "batch_size", "lr", "beta1", "beta2", "eps_adam",
              "grad_clip", "history_probe_limit"});
  TrainConfig t;
  get(j, "epochs", t.epochs);
  get(j, "batch_size", t.batch_size);
  get(j, "lr", t.adam.lr);
  get(j, "beta1", t.adam.beta1);
  get(j, "beta2", t.adam.beta2);
  get(j, "eps_adam", t.adam.eps);
  get(j, "grad_clip", t.grad_clip);
  get(j, "history_probe_limit", t.history_probe_limit);
  return t;
}

EvalConfig parse_eval(const json& j) {
  check_keys(j, "eval", {"ks", "poisoned_fraction", "poisoned_mode"});
  EvalConfig e;
  get(j, "ks", e.ks);
  get(j, "poisoned_fraction", e.poisoned_fraction);
  if (j.contains("poisoned_mode")) {
    const std::string mode = j.at("poisoned_mode").get<std::string>();
    if (mode == "insert") e.poisoned_mode = InjectionMode::kInsert;
    else if (mode == "replace") e.poisoned_mode = InjectionMode::kReplace;
    else throw ConfigError("config: poisoned_mode must be insert or replace");
  }
  return e;
}

DefenseConfig parse_defense(const json& j) {
  check_keys(j, "defense",
             {"threshold", "finetune_epochs", "reference_seed",
              "reference_epochs"});
  DefenseConfig d;
  get(j, "threshold", d.threshold);
  get(j, "finetune_epochs", d.finetune_epochs);
  get(j, "reference_seed", d.reference_seed);
  get(j, "reference_epochs", d.reference_epochs);
  return d;
}

SweepConfig parse_sweep(const json& j) {
  check_keys(j, "sweep", {"epsilon", "lambda", "rho", "count", "seeds"});
  SweepConfig s;
  if (j.contains("epsilon"))
    for (const json& v : j.at("epsilon")) s.epsilons.push_back(epsilon_field(v));
  get(j, "lambda", s.lambdas);
  get(j, "rho", s.rhos);
  get(j, "count", s.counts);
  get(j, "seeds", s.seeds);
  return s;
}

}  // namespace

double parse_epsilon(const std::string& text) {
  const size_t slash = text.find('/');
  try {
    if (slash == std::string::npos) return std::stod(text);
    const double num = std::stod(text.substr(0, slash));
    const double den = std::stod(text.substr(slash + 1));
    if (den == 0) throw ConfigError("epsilon fraction with zero denominator");
    return num / den;
  } catch (const std::invalid_argument&) {
    throw ConfigError("cannot parse epsilon value '" + text + "'");
  }
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  check_keys(j, "config root",
             {"schema_version", "seed", "out_dir", "corpus", "model", "poison",
              "perturb", "train", "eval", "defense", "sweep"});
  if (!j.contains("schema_version"))
    throw ConfigError("config: missing schema_version");

  ExperimentConfig cfg;
  cfg.schema_version = j.at("schema_version").get<int>();
  if (cfg.schema_version != 1)
    throw ConfigError("config: unsupported schema_version " +
                      std::to_string(cfg.schema_version));
  get(j, "seed", cfg.seed);
  get(j, "out_dir", cfg.out_dir);
  if (j.contains("corpus")) cfg.corpus = parse_corpus(j.at("corpus"));
  if (j.contains("model")) cfg.model = parse_model(j.at("model"));
  if (j.contains("poison")) cfg.poison = parse_poison(j.at("poison"));
  if (j.contains("perturb")) cfg.perturb = parse_perturb(j.at("perturb"));
  if (j.contains("train")) cfg.train = parse_train(j.at("train"));
  if (j.contains("eval")) cfg.eval = parse_eval(j.at("eval"));
  if (j.contains("defense")) cfg.defense = parse_defense(j.at("defense"));
  if (j.contains("sweep")) cfg.sweep = parse_sweep(j.at("sweep"));

  if (cfg.poison.target_id < 0 ||
      cfg.poison.target_id >= cfg.corpus.n_colors * cfg.corpus.n_shapes)
    throw ConfigError("config: poison.target_id out of gallery range");
  if (cfg.perturb) cfg.perturb->validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["schema_version"] = schema_version;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  j["corpus"] = {{"n_colors", corpus.n_colors},
                 {"n_shapes", corpus.n_shapes},
                 {"color_block", corpus.color_block},
                 {"shape_block", corpus.shape_block},
                 {"n_fillers", corpus.n_fillers},
                 {"n_train", corpus.n_train},
                 {"n_validation", corpus.n_validation},
                 {"noise_sigma", corpus.noise_sigma},
                 {"trigger_frequency", corpus.trigger_frequency},
                 {"color_weights", corpus.color_weights},
                 {"trigger_filler", corpus.trigger_filler},
                 {"max_extra_fillers", corpus.max_extra_fillers}};
  j["model"] = {{"hidden", model.hidden},
                {"embed", model.embed},
                {"token_dim", model.token_dim},
                {"tau", model.tau},
                {"init_seed", model.init_seed}};
  j["poison"] = {{"strategy", strategy_name(poison.strategy)},
                 {"trigger_token", poison.trigger_token},
                 {"target_id", poison.target_id},
                 {"ratio", poison.ratio},
                 {"count", poison.count},
                 {"injection_mode",
                  poison.injection_mode == InjectionMode::kInsert ? "insert"
                                                                  : "replace"},
                 {"shift", poison.shift},
                 {"blend_beta", poison.blend_beta},
                 {"patch_offset", poison.patch.offset},
                 {"patch_width", poison.patch.width}};
  if (perturb)
    j["perturb"] = {{"lambda", perturb->lambda},
                    {"epsilon", perturb->epsilon},
                    {"alpha", perturb->alpha},
                    {"steps", perturb->steps},
                    {"regen",
                     perturb->regen == RegenPolicy::kStep ? "step" : "epoch"},
                    {"mode", perturb->random_noise ? "random" : "pgd"}};
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"lr", train.adam.lr},
                {"beta1", train.adam.beta1},
                {"beta2", train.adam.beta2},
                {"eps_adam", train.adam.eps},
                {"grad_clip", train.grad_clip},
                {"history_probe_limit", train.history_probe_limit}};
  j["eval"] = {{"ks", eval.ks},
               {"poisoned_fraction", eval.poisoned_fraction},
               {"poisoned_mode",
                eval.poisoned_mode == InjectionMode::kInsert ? "insert"
                                                             : "replace"}};
  if (defense)
    j["defense"] = {{"threshold", defense->threshold},
                    {"finetune_epochs", defense->finetune_epochs},
                    {"reference_seed", defense->reference_seed},
                    {"reference_epochs", defense->reference_epochs}};
  if (sweep)
    j["sweep"] = {{"epsilon", sweep->epsilons},
                  {"lambda", sweep->lambdas},
                  {"rho", sweep->rhos},
                  {"count", sweep->counts},
                  {"seeds", sweep->seeds}};
  return j.dump(2);
}

std::string ExperimentConfig::fingerprint() const {
  const std::string text = to_json();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tgb
