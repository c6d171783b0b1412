// tgb_lab: experiment runner for the text-trigger retrieval-poisoning lab.
//
// Subcommands cover the full pipeline: gen-data, poison, train, eval,
// defend-filter, defend-finetune, sweep, report. Every command is
// deterministic given --config and --seed; artifacts land under --out.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tgb/config.hpp"
#include "tgb/errors.hpp"
#include "tgb/experiment.hpp"
#include "tgb/serialize.hpp"
#include "tgb/svg.hpp"

namespace {

int log_level() {
  const char* env = std::getenv("TGB_LAB_LOG");
  if (!env) return 1;
  try {
    return std::stoi(env);
  } catch (...) {
    return 1;
  }
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "tgb_lab: " << msg << '\n';
}

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> epsilon;
  std::optional<int> lambda;
  std::optional<double> rho;
  std::optional<int> inject_count;
  std::optional<int> pgd_steps;
  std::optional<double> threshold;
  int jobs = 1;
  std::string epsilon_text;  // raw, to accept "8/255"
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "Experiment config (JSON)")
      ->required();
  cmd->add_option("--seed", f.seed, "Override the master seed");
  cmd->add_option("--out", f.out, "Override the output directory");
  cmd->add_option("--epsilon", f.epsilon_text,
                  "Perturbation budget (number or a/b fraction)");
  cmd->add_option("--lambda", f.lambda, "Perturbation direction (+1 or -1)");
  cmd->add_option("--rho", f.rho, "Attack II poison ratio");
  cmd->add_option("--inject-count", f.inject_count,
                  "Attack III/IV injection count");
  cmd->add_option("--pgd-steps", f.pgd_steps, "PGD iteration count");
  cmd->add_option("--threshold", f.threshold, "Defense filter threshold");
  cmd->add_option("--jobs", f.jobs, "Parallel sweep cells")
      ->check(CLI::PositiveNumber);
}

tgb::ExperimentConfig load_config(const CommonFlags& f) {
  tgb::ExperimentConfig cfg = tgb::ExperimentConfig::from_file(f.config_path);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out_dir = *f.out;
  if (!f.epsilon_text.empty()) {
    if (!cfg.perturb) cfg.perturb = tgb::PerturbConfig{};
    cfg.perturb->epsilon = tgb::parse_epsilon(f.epsilon_text);
  }
  if (f.lambda) {
    if (!cfg.perturb) cfg.perturb = tgb::PerturbConfig{};
    cfg.perturb->lambda = *f.lambda;
  }
  if (f.pgd_steps) {
    if (!cfg.perturb) cfg.perturb = tgb::PerturbConfig{};
    cfg.perturb->steps = *f.pgd_steps;
  }
  if (f.rho) cfg.poison.ratio = *f.rho;
  if (f.inject_count) cfg.poison.count = *f.inject_count;
  if (f.threshold) {
    if (!cfg.defense) cfg.defense = tgb::DefenseConfig{};
    cfg.defense->threshold = *f.threshold;
  }
  if (cfg.perturb) cfg.perturb->validate();
  return cfg;
}

std::filesystem::path ensure_out(const tgb::ExperimentConfig& cfg) {
  std::filesystem::path dir(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw tgb::IoError("cannot create output directory " + cfg.out_dir + ": " +
                       ec.message());
  return dir;
}

std::ofstream open_out_file(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw tgb::IoError("cannot open for writing: " + path.string());
  return out;
}

void write_metrics_csv(const tgb::MetricsReport& report,
                       const std::vector<int>& ks,
                       const std::filesystem::path& path) {
  std::ofstream out = open_out_file(path);
  out << "fingerprint,seed,split,samples";
  for (int k : ks) out << ",recall_at_" << k;
  out << '\n';
  auto row = [&](const char* split, const tgb::SplitMetrics& m) {
    out << report.fingerprint << ',' << report.seed << ',' << split << ','
        << m.sample_count;
    for (int k : ks) out << ',' << tgb::format_double(m.recall_at.at(k));
    out << '\n';
  };
  row("original", report.original);
  row("clean", report.clean);
  row("poisoned", report.poisoned);
  if (!out) throw tgb::IoError("write failure: " + path.string());
}

void print_metrics_table(const tgb::MetricsReport& report,
                         const std::vector<int>& ks) {
  std::cout << "split      samples";
  for (int k : ks) std::cout << "     R@" << k;
  std::cout << '\n';
  auto row = [&](const char* split, const tgb::SplitMetrics& m) {
    std::printf("%-10s %7zu", split, m.sample_count);
    for (int k : ks) std::printf("  %6.4f", m.recall_at.at(k));
    std::printf("\n");
  };
  row("original", report.original);
  row("clean", report.clean);
  row("poisoned", report.poisoned);
}

void write_history_csv(const tgb::TrainHistory& history,
                       const std::filesystem::path& path) {
  std::ofstream out = open_out_file(path);
  out << "epoch,clean_loss,poison_loss,clean_r1,asr_r1,asr_r5\n";
  for (const auto& r : history.rows)
    out << r.epoch << ',' << tgb::format_double(r.clean_loss) << ','
        << tgb::format_double(r.poison_loss) << ','
        << tgb::format_double(r.clean_r1) << ','
        << tgb::format_double(r.asr_r1) << ',' << tgb::format_double(r.asr_r5)
        << '\n';
  if (!out) throw tgb::IoError("write failure: " + path.string());
}

int cmd_gen_data(const CommonFlags& f) {
  tgb::ExperimentConfig cfg = load_config(f);
  auto dir = ensure_out(cfg);
  tgb::Dataset ds = tgb::gen_dataset(cfg.corpus, cfg.seed);
  tgb::save_dataset(ds, (dir / "dataset.tsv").string());
  log_info("wrote " + (dir / "dataset.tsv").string() + " (" +
           std::to_string(ds.train.size()) + " train, " +
           std::to_string(ds.validation.size()) + " val)");
  return 0;
}

int cmd_poison(const CommonFlags& f) {
  tgb::ExperimentConfig cfg = load_config(f);
  auto dir = ensure_out(cfg);
  tgb::Dataset base = tgb::gen_dataset(cfg.corpus, cfg.seed);
  tgb::TriggerSpec trigger = tgb::resolve_trigger(cfg.poison, base.vocab);
  tgb::PoisonPlan plan = tgb::make_plan(cfg.poison, trigger, cfg.seed);
  auto [poisoned, report] = tgb::apply_plan(base, plan, cfg.corpus);
  tgb::save_dataset(poisoned, (dir / "poisoned.tsv").string());

  std::ofstream out = open_out_file(dir / "poison_report.csv");
  out << "fingerprint,seed,strategy,poison_count,trigger_before,trigger_after,"
         "no_op\n"
      << cfg.fingerprint() << ',' << cfg.seed << ','
      << tgb::strategy_name(plan.strategy) << ',' << report.poison_count << ','
      << report.trigger_before << ',' << report.trigger_after << ','
      << (report.no_op ? 1 : 0) << '\n';
  if (report.no_op)
    std::cerr << "warning: poison plan modified no samples (trigger absent)\n";
  log_info("poisoned " + std::to_string(report.poison_count) + " samples");
  return 0;
}

int cmd_train(const CommonFlags& f, const std::string& resume_path) {
  tgb::ExperimentConfig cfg = load_config(f);
  auto dir = ensure_out(cfg);

  tgb::Dataset base = tgb::gen_dataset(cfg.corpus, cfg.seed);
  tgb::TriggerSpec trigger = tgb::resolve_trigger(cfg.poison, base.vocab);
  tgb::PoisonPlan plan = tgb::make_plan(cfg.poison, trigger, cfg.seed);
  auto [poisoned, poison_report] = tgb::apply_plan(base, plan, cfg.corpus);

  tgb::EvalSplits splits = tgb::build_eval_splits(base, cfg, trigger);
  tgb::EvalProbes probes;
  probes.clean = splits.clean;
  probes.poisoned = splits.poisoned;

  std::vector<tgb::Sample> clean_split, poison_split;
  for (const tgb::Sample& s : poisoned.train)
    (s.provenance == tgb::Provenance::kClean ? clean_split : poison_split)
        .push_back(s);

  tgb::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.perturb = cfg.perturb;

  tgb::TrainLoopState start;
  if (resume_path.empty()) {
    start.params = tgb::init_params(cfg);
    start.adam = tgb::AdamState::zeros(start.params.dims());
  } else {
    tgb::Checkpoint ckpt = tgb::load_checkpoint(resume_path);
    if (ckpt.fingerprint != cfg.fingerprint())
      throw tgb::ConfigError(
          "refusing to resume: checkpoint fingerprint " + ckpt.fingerprint +
          " does not match config fingerprint " + cfg.fingerprint());
    start.params = ckpt.params;
    start.adam = ckpt.has_adam ? ckpt.adam
                               : tgb::AdamState::zeros(ckpt.params.dims());
    start.next_epoch = ckpt.epoch;
    start.shuffle_counter = ckpt.shuffle_counter;
    start.poison_counter = ckpt.poison_counter;
    start.pgd_counter = ckpt.pgd_counter;
    log_info("resuming from epoch " + std::to_string(ckpt.epoch));
  }

  tgb::TrainLoopState final_state;
  tgb::TrainResult result =
      tgb::train_from(start, clean_split, poison_split, base.gallery_pixels(),
                      tc, &probes, &final_state);

  tgb::Checkpoint ckpt;
  ckpt.fingerprint = cfg.fingerprint();
  ckpt.epoch = final_state.next_epoch;
  ckpt.params = result.params;
  ckpt.has_adam = true;
  ckpt.adam = final_state.adam;
  ckpt.shuffle_counter = final_state.shuffle_counter;
  ckpt.poison_counter = final_state.poison_counter;
  ckpt.pgd_counter = final_state.pgd_counter;
  tgb::save_checkpoint(ckpt, (dir / "model.ckpt").string());
  write_history_csv(result.history, dir / "history.csv");
  log_info("trained to epoch " + std::to_string(ckpt.epoch) + ", wrote " +
           (dir / "model.ckpt").string());
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint_path) {
  tgb::ExperimentConfig cfg = load_config(f);
  auto dir = ensure_out(cfg);

  tgb::Dataset base = tgb::gen_dataset(cfg.corpus, cfg.seed);
  tgb::TriggerSpec trigger = tgb::resolve_trigger(cfg.poison, base.vocab);
  tgb::EvalSplits splits = tgb::build_eval_splits(base, cfg, trigger);

  std::string path = checkpoint_path.empty()
                         ? (dir / "model.ckpt").string()
                         : checkpoint_path;
  tgb::Checkpoint ckpt = tgb::load_checkpoint(path);
  tgb::MetricsReport report =
      tgb::evaluate(ckpt.params, splits.original, splits.clean,
                    splits.poisoned, base.gallery_pixels(), cfg.eval.ks);
  report.fingerprint = cfg.fingerprint();
  report.seed = cfg.seed;

  write_metrics_csv(report, cfg.eval.ks, dir / "metrics.csv");
  print_metrics_table(report, cfg.eval.ks);
  return 0;
}

int cmd_defend_filter(const CommonFlags& f) {
  tgb::ExperimentConfig cfg = load_config(f);
  auto dir = ensure_out(cfg);
  tgb::DefenseConfig defense = cfg.defense.value_or(tgb::DefenseConfig{});

  tgb::Dataset base = tgb::gen_dataset(cfg.corpus, cfg.seed);
  tgb::TriggerSpec trigger = tgb::resolve_trigger(cfg.poison, base.vocab);
  tgb::PoisonPlan plan = tgb::make_plan(cfg.poison, trigger, cfg.seed);
  auto [poisoned, poison_report] = tgb::apply_plan(base, plan, cfg.corpus);

  // Reference model: trained on a trusted clean corpus drawn with its own seed.
  tgb::ExperimentConfig ref_cfg = cfg;
  ref_cfg.seed = defense.reference_seed;
  ref_cfg.perturb.reset();
  if (defense.reference_epochs >= 0)
    ref_cfg.train.epochs = defense.reference_epochs;
  tgb::Dataset ref_data = tgb::gen_dataset(ref_cfg.corpus, ref_cfg.seed);
  tgb::TrainConfig ref_tc = ref_cfg.train;
  ref_tc.seed = ref_cfg.seed;
  tgb::TrainResult ref = tgb::train(tgb::init_params(ref_cfg), ref_data.train,
                                    {}, ref_data.gallery_pixels(), ref_tc);

  double threshold = defense.threshold;
  bool degenerate = false;
  if (threshold < 0) {
    // Distances at threshold +inf (keep everything) just to histogram them.
    tgb::FilterResult probe = tgb::filter_pretrain(poisoned, ref.params, 3.0);
    tgb::ThresholdSuggestion s = tgb::suggest_threshold(probe.distances);
    threshold = s.value;
    degenerate = s.degenerate;
    log_info("suggested threshold " + tgb::format_double(threshold) +
             (degenerate ? " (degenerate histogram; median fallback)" : ""));
  }

  tgb::FilterResult result = tgb::filter_pretrain(poisoned, ref.params,
                                                  threshold);
  tgb::Dataset kept = tgb::keep_filtered(poisoned, result);
  tgb::save_dataset(kept, (dir / "filtered.tsv").string());

  std::ofstream out = open_out_file(dir / "filter_report.csv");
  out << "fingerprint,seed,threshold,degenerate,removed,kept,"
         "removal_precision,removal_recall,clean_false_removal\n"
      << cfg.fingerprint() << ',' << cfg.seed << ','
      << tgb::format_double(result.threshold) << ',' << (degenerate ? 1 : 0)
      << ',' << result.removed_ids.size() << ',' << result.kept_ids.size()
      << ',' << tgb::format_double(result.removal_precision) << ','
      << tgb::format_double(result.removal_recall) << ','
      << tgb::format_double(result.clean_false_removal) << '\n';
  std::cout << "threshold " << tgb::format_double(result.threshold)
            << ": removed " << result.removed_ids.size() << "/"
            << poisoned.train.size() << " (poison recall "
            << tgb::format_double(result.removal_recall)
            << ", clean false-removal "
            << tgb::format_double(result.clean_false_removal) << ")\n";
  return 0;
}

int cmd_defend_finetune(const CommonFlags& f,
                        const std::string& checkpoint_path) {
  tgb::ExperimentConfig cfg = load_config(f);
  auto dir = ensure_out(cfg);
  tgb::DefenseConfig defense = cfg.defense.value_or(tgb::DefenseConfig{});
  const int epochs = defense.finetune_epochs >= 0
                         ? defense.finetune_epochs
                         : std::max(1, cfg.train.epochs / 4);

  tgb::Dataset base = tgb::gen_dataset(cfg.corpus, cfg.seed);
  tgb::TriggerSpec trigger = tgb::resolve_trigger(cfg.poison, base.vocab);
  tgb::EvalSplits splits = tgb::build_eval_splits(base, cfg, trigger);
  tgb::EvalProbes probes;
  probes.clean = splits.clean;
  probes.poisoned = splits.poisoned;

  tgb::ModelParams params;
  if (checkpoint_path.empty()) {
    tgb::CellOutcome cell = tgb::run_cell(cfg);
    params = cell.params;
  } else {
    params = tgb::load_checkpoint(checkpoint_path).params;
  }

  tgb::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed + 1;  // fresh stream for the fine-tune phase
  tc.perturb.reset();
  auto [tuned, curve] = tgb::finetune_posttrain(params, base, epochs, probes,
                                                tc);

  std::ofstream out = open_out_file(dir / "finetune_curve.csv");
  out << "fingerprint,seed,epoch,clean_r1,asr_r1,asr_r5\n";
  for (const auto& r : curve.rows)
    out << cfg.fingerprint() << ',' << cfg.seed << ',' << r.epoch << ','
        << tgb::format_double(r.clean_r1) << ',' << tgb::format_double(r.asr_r1)
        << ',' << tgb::format_double(r.asr_r5) << '\n';

  tgb::Checkpoint ckpt;
  ckpt.fingerprint = cfg.fingerprint();
  ckpt.epoch = epochs;
  ckpt.params = tuned;
  tgb::save_checkpoint(ckpt, (dir / "finetuned.ckpt").string());
  for (const auto& r : curve.rows)
    std::cout << "epoch " << r.epoch << ": clean R@1 "
              << tgb::format_double(r.clean_r1) << ", ASR@1 "
              << tgb::format_double(r.asr_r1) << ", ASR@5 "
              << tgb::format_double(r.asr_r5) << '\n';
  return 0;
}

int cmd_sweep(const CommonFlags& f) {
  tgb::ExperimentConfig cfg = load_config(f);
  auto dir = ensure_out(cfg);
  std::ofstream out = open_out_file(dir / "sweep.csv");
  out << tgb::sweep_csv_header(cfg.eval.ks) << '\n';
  std::vector<tgb::SweepRow> rows = tgb::run_sweep(cfg, f.jobs);
  for (const tgb::SweepRow& row : rows) out << tgb::sweep_csv_row(row) << '\n';
  if (!out) throw tgb::IoError("write failure: " + (dir / "sweep.csv").string());
  log_info("wrote " + std::to_string(rows.size()) + " sweep rows");
  return 0;
}

int cmd_report(const CommonFlags& f) {
  tgb::ExperimentConfig cfg = load_config(f);
  auto dir = ensure_out(cfg);
  std::ifstream in(dir / "sweep.csv");
  if (!in)
    throw tgb::IoError("cannot open " + (dir / "sweep.csv").string() +
                       " (run `sweep` first)");
  std::vector<tgb::SweepRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;  // header
    rows.push_back(tgb::parse_sweep_row(line, line_no));
  }
  tgb::write_report(rows, cfg.out_dir);
  log_info("report written to " + cfg.out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-trigger retrieval-poisoning laboratory"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string resume_path;
  std::string checkpoint_path;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate the corpus");
  add_common(gen, flags);
  CLI::App* poison = app.add_subcommand("poison", "Apply the poison plan");
  add_common(poison, flags);
  CLI::App* train = app.add_subcommand("train", "Train on the poisoned corpus");
  add_common(train, flags);
  train->add_option("--resume", resume_path, "Checkpoint to resume from");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, flags);
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint path");
  CLI::App* dfilter =
      app.add_subcommand("defend-filter", "Pre-training similarity filter");
  add_common(dfilter, flags);
  CLI::App* dtune =
      app.add_subcommand("defend-finetune", "Post-training clean fine-tune");
  add_common(dtune, flags);
  dtune->add_option("--checkpoint", checkpoint_path, "Checkpoint path");
  CLI::App* sweep = app.add_subcommand("sweep", "Cartesian sweep grid");
  add_common(sweep, flags);
  CLI::App* report = app.add_subcommand("report", "Summaries and SVG plots");
  add_common(report, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(flags);
    if (poison->parsed()) return cmd_poison(flags);
    if (train->parsed()) return cmd_train(flags, resume_path);
    if (eval->parsed()) return cmd_eval(flags, checkpoint_path);
    if (dfilter->parsed()) return cmd_defend_filter(flags);
    if (dtune->parsed()) return cmd_defend_finetune(flags, checkpoint_path);
    if (sweep->parsed()) return cmd_sweep(flags);
    if (report->parsed()) return cmd_report(flags);
  } catch (const tgb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const tgb::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  } catch (const tgb::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
