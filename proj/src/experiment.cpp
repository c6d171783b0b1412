#include "tgb/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "tgb/errors.hpp"
#include "tgb/svg.hpp"

namespace tgb {

TriggerSpec resolve_trigger(const PoisonConfig& poison,
                            const Vocabulary& vocab) {
  TriggerSpec spec;
  spec.target_id = poison.target_id;
  for (int i = 0; i < vocab.size(); ++i) {
    if (vocab.tokens[i] == poison.trigger_token) {
      spec.trigger_token = i;
      return spec;
    }
  }
  throw ConfigError("trigger token '" + poison.trigger_token +
                    "' not in vocabulary");
}

PoisonPlan make_plan(const PoisonConfig& poison, const TriggerSpec& trigger,
                     std::uint64_t seed) {
  PoisonPlan plan;
  plan.strategy = poison.strategy;
  plan.trigger = trigger;
  plan.ratio = poison.ratio;
  plan.count = poison.count;
  plan.injection_mode = poison.injection_mode;
  plan.generator.shift = poison.shift;
  plan.blend_beta = poison.blend_beta;
  plan.patch = poison.patch;
  plan.seed = seed;
  return plan;
}

EvalSplits build_eval_splits(const Dataset& base, const ExperimentConfig& cfg,
                             const TriggerSpec& trigger) {
  EvalSplits splits;
  splits.original = base.validation;
  splits.clean = build_clean_valset(base, trigger).validation;

  const int count = std::max(
      1, static_cast<int>(std::lround(cfg.eval.poisoned_fraction *
                                      static_cast<double>(base.validation.size()))));
  switch (cfg.poison.strategy) {
    case AttackStrategy::kPatch:
      splits.poisoned =
          build_patched_valset(base, trigger.target_id, count, cfg.poison.patch,
                               cfg.seed)
              .validation;
      break;
    case AttackStrategy::kBlend: {
      Vector pattern = Vector::Ones(base.image_dim());
      splits.poisoned =
          build_blended_valset(base, trigger.target_id, count,
                               cfg.poison.blend_beta, pattern, cfg.seed)
              .validation;
      break;
    }
    default:
      splits.poisoned = build_poisoned_valset(base, trigger,
                                              cfg.eval.poisoned_mode, count,
                                              cfg.seed)
                            .validation;
  }
  return splits;
}

ModelParams init_params(const ExperimentConfig& cfg) {
  ModelDims dims;
  dims.image_dim = cfg.corpus.image_dim();
  dims.hidden = cfg.model.hidden;
  dims.embed = cfg.model.embed;
  dims.token_dim = cfg.model.token_dim;
  dims.vocab = 2 + cfg.corpus.n_colors + cfg.corpus.n_shapes +
               cfg.corpus.n_fillers;
  return ModelParams::init(dims, cfg.model.init_seed, cfg.model.tau);
}

TrainResult train_on(const Dataset& poisoned, const ExperimentConfig& cfg,
                     const EvalProbes* probes) {
  std::vector<Sample> clean;
  for (const Sample& s : poisoned.train)
    if (s.provenance == Provenance::kClean) clean.push_back(s);
  std::vector<Sample> poison = poisoned_subset(poisoned);

  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.perturb = cfg.perturb;
  return train(init_params(cfg), clean, poison, poisoned.gallery_pixels(), tc,
               probes);
}

CellOutcome run_cell(const ExperimentConfig& cfg) {
  Dataset base = gen_dataset(cfg.corpus, cfg.seed);
  TriggerSpec trigger = resolve_trigger(cfg.poison, base.vocab);
  auto [poisoned, report] = apply_plan(base, make_plan(cfg.poison, trigger,
                                                       cfg.seed),
                                       cfg.corpus);
  EvalSplits splits = build_eval_splits(base, cfg, trigger);

  EvalProbes probes{splits.clean, splits.poisoned};
  TrainResult trained = train_on(poisoned, cfg, &probes);

  CellOutcome out;
  out.report = evaluate(trained.params, splits.original, splits.clean,
                        splits.poisoned, base.gallery_pixels(), cfg.eval.ks);
  out.report.fingerprint = cfg.fingerprint();
  out.report.seed = cfg.seed;
  out.history = std::move(trained.history);
  out.poison_report = std::move(report);
  out.params = std::move(trained.params);
  return out;
}

std::string sweep_csv_header(const std::vector<int>& ks) {
  std::ostringstream os;
  os << "fingerprint,seed,strategy,rho,count,lambda,epsilon";
  for (int k : ks) os << ",clean_r" << k;
  for (int k : ks) os << ",asr_r" << k;
  return os.str();
}

std::string sweep_csv_row(const SweepRow& row) {
  std::ostringstream os;
  os << row.fingerprint << ',' << row.seed << ',' << row.strategy << ','
     << format_double(row.rho) << ',' << row.count << ',' << row.lambda << ','
     << format_double(row.epsilon);
  for (double v : row.clean_recall) os << ',' << format_double(v);
  for (double v : row.asr) os << ',' << format_double(v);
  return os.str();
}

SweepRow parse_sweep_row(const std::string& line, int line_no) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) f.push_back(field);
  if (f.size() < 9 || (f.size() - 7) % 2 != 0)
    throw IoError("sweep csv line " + std::to_string(line_no) +
                  ": unexpected field count " + std::to_string(f.size()));
  SweepRow row;
  row.fingerprint = f[0];
  row.seed = std::stoull(f[1]);
  row.strategy = f[2];
  row.rho = parse_double(f[3], line_no);
  row.count = std::stoi(f[4]);
  row.lambda = std::stoi(f[5]);
  row.epsilon = parse_double(f[6], line_no);
  const size_t n_ks = (f.size() - 7) / 2;
  for (size_t i = 0; i < n_ks; ++i)
    row.clean_recall.push_back(parse_double(f[7 + i], line_no));
  for (size_t i = 0; i < n_ks; ++i)
    row.asr.push_back(parse_double(f[7 + n_ks + i], line_no));
  return row;
}

std::vector<SweepRow> run_sweep(
    const ExperimentConfig& base, int jobs,
    const std::function<void(const SweepRow&)>& on_row) {
  if (!base.sweep)
    throw ConfigError("run_sweep: config has no sweep block");
  SweepConfig sw = *base.sweep;
  if (sw.epsilons.empty())
    sw.epsilons = {base.perturb ? base.perturb->epsilon : 0.0};
  if (sw.lambdas.empty()) sw.lambdas = {base.perturb ? base.perturb->lambda : 1};
  if (sw.rhos.empty()) sw.rhos = {base.poison.ratio};
  if (sw.counts.empty()) sw.counts = {base.poison.count};
  if (sw.seeds.empty()) sw.seeds = {base.seed};

  struct Cell {
    ExperimentConfig cfg;
  };
  std::vector<Cell> cells;
  for (double eps : sw.epsilons)
    for (int lambda : sw.lambdas)
      for (double rho : sw.rhos)
        for (int count : sw.counts)
          for (std::uint64_t seed : sw.seeds) {
            ExperimentConfig cfg = base;
            cfg.seed = seed;
            cfg.poison.ratio = rho;
            cfg.poison.count = count;
            if (eps > 0) {
              PerturbConfig p = base.perturb.value_or(PerturbConfig{});
              p.epsilon = eps;
              p.lambda = lambda;
              cfg.perturb = p;
            } else {
              cfg.perturb.reset();
            }
            cells.push_back({std::move(cfg)});
          }

  std::vector<SweepRow> rows(cells.size());
  std::mutex mu;
  size_t next = 0;

  const auto worker = [&] {
    for (;;) {
      size_t idx;
      {
        std::lock_guard lock(mu);
        if (next >= cells.size()) return;
        idx = next++;
      }
      const ExperimentConfig& cfg = cells[idx].cfg;
      CellOutcome outcome = run_cell(cfg);
      SweepRow row;
      row.fingerprint = cfg.fingerprint();
      row.seed = cfg.seed;
      row.strategy = strategy_name(cfg.poison.strategy);
      row.rho = cfg.poison.ratio;
      row.count = cfg.poison.count;
      row.lambda = cfg.perturb ? cfg.perturb->lambda : 0;
      row.epsilon = cfg.perturb ? cfg.perturb->epsilon : 0.0;
      row.ks = cfg.eval.ks;
      for (int k : cfg.eval.ks) {
        row.clean_recall.push_back(outcome.report.clean.recall_at.at(k));
        row.asr.push_back(outcome.report.poisoned.recall_at.at(k));
      }
      {
        std::lock_guard lock(mu);
        rows[idx] = row;
        if (on_row) on_row(row);
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(jobs, cells.size()));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return rows;
}

void write_report(const std::vector<SweepRow>& rows,
                  const std::string& out_dir) {
  if (rows.empty()) throw ConfigError("report: no sweep rows");
  std::filesystem::create_directories(out_dir);

  // Seed-averaged summary keyed by every axis except the seed.
  struct Key {
    std::string strategy;
    double rho;
    int count;
    int lambda;
    double epsilon;
    bool operator<(const Key& o) const {
      return std::tie(strategy, rho, count, lambda, epsilon) <
             std::tie(o.strategy, o.rho, o.count, o.lambda, o.epsilon);
    }
  };
  std::map<Key, std::vector<const SweepRow*>> groups;
  for (const SweepRow& r : rows)
    groups[{r.strategy, r.rho, r.count, r.lambda, r.epsilon}].push_back(&r);

  std::ofstream summary(out_dir + "/summary.csv");
  if (!summary) throw IoError("cannot open for writing: " + out_dir +
                              "/summary.csv");
  summary << "strategy,rho,count,lambda,epsilon,seeds,mean_clean_r1,mean_asr_r1\n";
  for (const auto& [key, members] : groups) {
    double clean = 0, asr = 0;
    for (const SweepRow* r : members) {
      clean += r->clean_recall.empty() ? 0.0 : r->clean_recall[0];
      asr += r->asr.empty() ? 0.0 : r->asr[0];
    }
    clean /= members.size();
    asr /= members.size();
    summary << key.strategy << ',' << format_double(key.rho) << ','
            << key.count << ',' << key.lambda << ','
            << format_double(key.epsilon) << ',' << members.size() << ','
            << format_double(clean) << ',' << format_double(asr) << '\n';
  }

  // ASR vs epsilon, one series per lambda.
  std::map<int, std::map<double, std::pair<double, int>>> by_lambda;
  for (const SweepRow& r : rows) {
    auto& cell = by_lambda[r.lambda][r.epsilon];
    cell.first += r.asr.empty() ? 0.0 : r.asr[0];
    cell.second += 1;
  }
  LinePlot plot;
  plot.title = "ASR@1 vs perturbation budget";
  plot.x_label = "epsilon";
  plot.y_label = "ASR@1";
  for (const auto& [lambda, pts] : by_lambda) {
    LinePlot::Series series;
    series.label = "lambda=" + std::to_string(lambda);
    for (const auto& [eps, acc] : pts)
      series.points.emplace_back(eps, acc.first / acc.second);
    plot.series.push_back(std::move(series));
  }
  write_svg(plot, out_dir + "/asr_vs_epsilon.svg");

  // ASR vs poisoning scale when the sweep varied rho or count.
  std::map<double, std::pair<double, int>> by_rho;
  std::map<int, std::pair<double, int>> by_count;
  for (const SweepRow& r : rows) {
    auto& c1 = by_rho[r.rho];
    c1.first += r.asr.empty() ? 0.0 : r.asr[0];
    c1.second += 1;
    auto& c2 = by_count[r.count];
    c2.first += r.asr.empty() ? 0.0 : r.asr[0];
    c2.second += 1;
  }
  if (by_rho.size() > 1) {
    LinePlot p2;
    p2.title = "ASR@1 vs trigger-conditioned poisoning ratio";
    p2.x_label = "rho";
    p2.y_label = "ASR@1";
    LinePlot::Series s;
    s.label = "ASR@1";
    for (const auto& [rho, acc] : by_rho)
      s.points.emplace_back(rho, acc.first / acc.second);
    p2.series.push_back(std::move(s));
    write_svg(p2, out_dir + "/asr_vs_rho.svg");
  }
  if (by_count.size() > 1) {
    LinePlot p3;
    p3.title = "ASR@1 vs injected poison count";
    p3.x_label = "m";
    p3.y_label = "ASR@1";
    LinePlot::Series s;
    s.label = "ASR@1";
    for (const auto& [count, acc] : by_count)
      s.points.emplace_back(count, acc.first / acc.second);
    p3.series.push_back(std::move(s));
    write_svg(p3, out_dir + "/asr_vs_count.svg");
  }
}

}  // namespace tgb
