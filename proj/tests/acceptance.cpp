// Acceptance gate: ten end-to-end checks of the laboratory, each printed as
// a single PASS/FAIL line. Exits nonzero if any check fails.
//
// All checks run at the default experiment scale (16-dim images, 64-image
// gallery, 2000 training samples) except the determinism check, which uses a
// reduced scale to keep its paired runs cheap. Most cells train for the
// default 200 epochs; attack-effectiveness cells train for 300 to reach the
// saturated regime, and suppression cells use a low-noise corpus so the
// perturbation ball cleanly separates poisoned images from clean ones.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tgb/config.hpp"
#include "tgb/defenses.hpp"
#include "tgb/errors.hpp"
#include "tgb/experiment.hpp"
#include "tgb/numerics.hpp"
#include "tgb/perturb.hpp"
#include "tgb/poisoning.hpp"
#include "tgb/serialize.hpp"
#include "tgb/training.hpp"

using namespace tgb;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void verdict(int criterion, bool pass, const std::string& detail) {
  std::printf("%s criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Experiment grid shared across criteria, with a memoized parallel runner.

ExperimentConfig base_config() {
  ExperimentConfig cfg;  // library defaults = the default experiment scale
  cfg.poison.trigger_token = "flower";
  cfg.poison.target_id = 27;
  // 500 poisoned eval queries keep the ASR standard error near 0.02.
  cfg.eval.poisoned_fraction = 0.5;
  return cfg;
}

ExperimentConfig make_cfg(AttackStrategy strategy, double rho, int count,
                          std::uint64_t seed, int lambda = 0,
                          double epsilon = 0.0, bool random_noise = false) {
  ExperimentConfig cfg = base_config();
  cfg.seed = seed;
  cfg.poison.strategy = strategy;
  cfg.poison.ratio = rho;
  cfg.poison.count = count;
  if (epsilon > 0.0) {
    PerturbConfig p;
    p.lambda = lambda;
    p.epsilon = epsilon;
    p.random_noise = random_noise;
    cfg.perturb = p;
  }
  return cfg;
}

// Attack-I effectiveness cells train past the clean model's 200-epoch budget:
// the full-relabel backdoor is still strengthening there, and the criterion
// compares clean recall against the 200-epoch baseline, not trajectories.
ExperimentConfig long_attack_cfg(std::uint64_t seed) {
  ExperimentConfig cfg = make_cfg(AttackStrategy::kI, 1.0, 0, seed);
  cfg.train.epochs = 300;
  return cfg;
}

// Controllability cells (suppression and the random-noise ablation) use a
// low-noise corpus: with pixel noise at the PGD budget's scale, the
// "adversarially explained" poison images overlap the natural image
// distribution and the suppressed backdoor leaks back at eval time.
ExperimentConfig control_cfg(std::uint64_t seed, double epsilon, int lambda,
                             bool random_noise = false) {
  ExperimentConfig cfg = make_cfg(AttackStrategy::kI, 1.0, 0, seed, lambda,
                                  epsilon, random_noise);
  cfg.corpus.noise_sigma = 0.01;
  return cfg;
}

class CellCache {
 public:
  // Memoized; safe to call from the criteria after prefetch() completes.
  const CellOutcome& get(const ExperimentConfig& cfg) {
    const std::string key = cfg.fingerprint();
    {
      std::lock_guard lock(mu_);
      auto it = cells_.find(key);
      if (it != cells_.end()) return it->second;
    }
    CellOutcome outcome = run_cell(cfg);
    std::lock_guard lock(mu_);
    return cells_.emplace(key, std::move(outcome)).first->second;
  }

  void prefetch(const std::vector<ExperimentConfig>& cfgs, int jobs) {
    std::vector<ExperimentConfig> todo;
    {
      std::lock_guard lock(mu_);
      for (const ExperimentConfig& c : cfgs)
        if (!cells_.count(c.fingerprint())) todo.push_back(c);
    }
    std::mutex qmu;
    size_t next = 0;
    auto worker = [&] {
      for (;;) {
        size_t idx;
        {
          std::lock_guard lock(qmu);
          if (next >= todo.size()) return;
          idx = next++;
        }
        get(todo[idx]);
      }
    };
    std::vector<std::thread> pool;
    const int n = std::max(1, std::min<int>(jobs, todo.size()));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

 private:
  std::mutex mu_;
  std::map<std::string, CellOutcome> cells_;
};

CellCache g_cache;

const std::vector<std::uint64_t> kSeeds = {1, 2, 3};
constexpr double kEps[] = {0.0, 2.0 / 255.0, 4.0 / 255.0, 8.0 / 255.0,
                           16.0 / 255.0};
constexpr double kEnhanceEps = 24.0 / 255.0;

// Trigger-containing training-sample count for a given corpus seed; used to
// match Attack III/IV injection counts to Attack I's poison mass.
int trigger_count(std::uint64_t seed) {
  static std::mutex mu;
  static std::map<std::uint64_t, int> memo;
  std::lock_guard lock(mu);
  auto it = memo.find(seed);
  if (it != memo.end()) return it->second;
  ExperimentConfig cfg = base_config();
  Dataset ds = gen_dataset(cfg.corpus, seed);
  TriggerSpec trigger = resolve_trigger(cfg.poison, ds.vocab);
  int n = 0;
  for (const Sample& s : ds.train)
    if (contains_token(s, trigger.trigger_token)) ++n;
  memo[seed] = n;
  return n;
}

// ---------------------------------------------------------------------------
// Criterion 1: analytic gradients match finite differences.

void criterion_1() {
  const auto t0 = Clock::now();
  ExperimentConfig cfg = base_config();
  Dataset ds = gen_dataset(cfg.corpus, 1);
  Matrix gallery = ds.gallery_pixels();
  std::vector<Sample> batch(ds.train.begin(), ds.train.begin() + 8);
  ModelParams params = init_params(cfg);
  const ModelDims dims = params.dims();
  const double tau = params.tau;

  BatchLossResult res = batch_loss(params, batch, gallery);

  Rng rng = Rng::stream(99, "acceptance/gradcheck");
  const auto param_loss = [&](const Vector& flat) {
    return batch_loss(ModelParams::unflatten(flat, dims, tau), batch, gallery)
        .loss;
  };
  GradCheckReport param_report = grad_check(
      param_loss, params.flatten(), res.grads.flatten(), 100, 1e-4, rng);

  // Input gradients: probe the reference image of one batch sample at a time.
  double worst_input_err = 0.0;
  bool input_ok = true;
  for (int s = 0; s < 4; ++s) {
    std::vector<Sample> probe_batch = batch;
    const auto input_loss = [&](const Vector& x) {
      probe_batch[s].reference = x;
      return batch_loss(params, probe_batch, gallery).loss;
    };
    GradCheckReport r = grad_check(input_loss, batch[s].reference,
                                   res.grad_inputs[s], 25, 1e-4, rng);
    worst_input_err = std::max(worst_input_err, r.max_rel_error);
    input_ok = input_ok && r.passed;
  }

  const double elapsed = seconds_since(t0);
  const bool pass =
      param_report.passed && input_ok && elapsed < 30.0;
  verdict(1, pass,
          "gradient check: param rel err " + fmt(param_report.max_rel_error) +
              ", input rel err " + fmt(worst_input_err) + ", " +
              fmt(elapsed) + "s (tol 1e-4, limit 30s)");
}

// ---------------------------------------------------------------------------
// Criterion 2: clean training calibration.

// Clean baseline = Attack II at rho 0 (an empty poison set).
ExperimentConfig clean_cfg(std::uint64_t seed) {
  return make_cfg(AttackStrategy::kII, 0.0, 0, seed);
}

double g_clean_r1_baseline = 0.0;

void criterion_2() {
  const auto t0 = Clock::now();
  const CellOutcome& cell = g_cache.get(clean_cfg(1));
  const double elapsed = seconds_since(t0);

  const double clean_r1 = cell.report.clean.recall_at.at(1);
  const double asr = cell.report.asr_at(1);
  g_clean_r1_baseline = clean_r1;

  const double chance = 1.0 / 64.0;
  const size_t n = cell.report.poisoned.sample_count;
  const double sigma = std::sqrt(chance * (1.0 - chance) / n);
  const bool asr_ok = std::abs(asr - chance) <= 3.0 * sigma;
  const bool pass = clean_r1 >= 0.95 && asr_ok && elapsed < 300.0;
  verdict(2, pass,
          "clean model: R@1 " + fmt(clean_r1) + " (need >= 0.95), ASR@1 " +
              fmt(asr) + " vs chance " + fmt(chance) + " +/- " +
              fmt(3.0 * sigma) + ", " + fmt(elapsed) + "s (limit 300s)");
}

// ---------------------------------------------------------------------------
// Criterion 3: Attack I effectiveness.

void criterion_3() {
  int passes = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const CellOutcome& cell = g_cache.get(long_attack_cfg(seed));
    const double asr = cell.report.asr_at(1);
    const double clean_r1 = cell.report.clean.recall_at.at(1);
    const bool ok = asr >= 0.90 && clean_r1 >= g_clean_r1_baseline - 0.05;
    if (ok) ++passes;
    detail += " s" + std::to_string(seed) + ": ASR " + fmt(asr) + "/R@1 " +
              fmt(clean_r1);
  }
  verdict(3, passes >= 2,
          "full-relabel attack (need ASR>=0.90, R@1 drop<=0.05, 2/3 seeds):" +
              detail);
}

// ---------------------------------------------------------------------------
// Criterion 4: attack-strategy ordering at matched poison mass.

void criterion_4() {
  int passes = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    // Matched poison mass: III/IV inject as many samples as II relabels.
    const int m = static_cast<int>(0.6 * trigger_count(seed));
    const double a1 =
        g_cache.get(make_cfg(AttackStrategy::kI, 1.0, 0, seed)).report.asr_at(1);
    const double a2 =
        g_cache.get(make_cfg(AttackStrategy::kII, 0.6, 0, seed)).report.asr_at(1);
    const double a3 =
        g_cache.get(make_cfg(AttackStrategy::kIII, 1.0, m, seed)).report.asr_at(1);
    const double a4 =
        g_cache.get(make_cfg(AttackStrategy::kIV, 1.0, m, seed)).report.asr_at(1);
    const bool ok =
        a1 - a2 >= 0.05 && a2 - a3 >= 0.05 && a3 - a4 >= 0.05;
    if (ok) ++passes;
    detail += " s" + std::to_string(seed) + ": " + fmt(a1) + ">" + fmt(a2) +
              ">" + fmt(a3) + ">" + fmt(a4);
  }
  verdict(4, passes >= 2,
          "strategy ordering I>II(0.6)>III>IV, gaps >= 0.05 (2/3 seeds):" +
              detail);
}

// ---------------------------------------------------------------------------
// Criterion 5: lambda = -1 suppresses the backdoor as epsilon grows.

void criterion_5() {
  std::vector<double> asr;
  for (double eps : kEps)
    asr.push_back(g_cache.get(control_cfg(1, eps, -1)).report.asr_at(1));

  int inversions = 0;
  bool big_inversion = false;
  for (size_t i = 1; i < asr.size(); ++i) {
    if (asr[i] > asr[i - 1]) {
      ++inversions;
      if (asr[i] - asr[i - 1] > 0.03) big_inversion = true;
    }
  }
  const bool mono_ok = inversions <= 1 && !big_inversion;
  const bool floor_ok = asr.back() <= 0.25 * asr.front();

  std::string detail = "suppression ASR over eps {0..16/255}:";
  for (double a : asr) detail += " " + fmt(a);
  detail += " (<=1 inversion of <=0.03; final <= 25% of first)";
  verdict(5, mono_ok && floor_ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 6: lambda = +1 amplifies, then saturates.

void criterion_6() {
  std::vector<double> asr;
  for (double eps : kEps)
    asr.push_back(
        g_cache.get(make_cfg(AttackStrategy::kII, 0.6, 0, 1, +1, eps))
            .report.asr_at(1));

  const double best = *std::max_element(asr.begin() + 1, asr.end());
  const double gain = best - asr.front();
  const double marginal = asr[4] - asr[3];
  const bool pass = gain >= 0.10 && marginal <= 0.05;

  std::string detail = "amplification ASR over eps {0..16/255}:";
  for (double a : asr) detail += " " + fmt(a);
  detail += " (gain " + fmt(gain) + " >= 0.10, marginal " + fmt(marginal) +
            " <= 0.05)";
  verdict(6, pass, detail);
}

// ---------------------------------------------------------------------------
// Criterion 7: adversarial direction matters; random noise does not.

void criterion_7() {
  // Compared at the corpus noise scale; far above it, uniform noise itself
  // starts to perturb the backdoor and the ablation stops being a control.
  const double eps = 4.0 / 255.0;
  int passes = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const double base = g_cache.get(control_cfg(seed, 0.0, -1)).report.asr_at(1);
    const double adv =
        g_cache.get(control_cfg(seed, eps, -1)).report.asr_at(1);
    const double rand_asr =
        g_cache.get(control_cfg(seed, eps, -1, true)).report.asr_at(1);
    const bool ok =
        std::abs(rand_asr - base) <= 0.05 && std::abs(adv - base) >= 0.10;
    if (ok) ++passes;
    detail += " s" + std::to_string(seed) + ": base " + fmt(base) + " rand " +
              fmt(rand_asr) + " adv " + fmt(adv);
  }
  verdict(7, passes >= 2,
          "random-vs-adversarial at eps 4/255 (|rand - base| <= 0.05, "
          "|adv - base| >= 0.10, 2/3 seeds):" +
              detail);
}

// ---------------------------------------------------------------------------
// Criterion 8: ASR scales with poison mass.

void criterion_8() {
  std::vector<double> by_rho;
  for (double rho : {0.0, 0.25, 0.5, 0.75, 1.0})
    by_rho.push_back(
        g_cache.get(make_cfg(AttackStrategy::kII, rho, 0, 1)).report.asr_at(1));
  std::vector<double> by_count;
  for (int m : {10, 40, 160})
    by_count.push_back(
        g_cache.get(make_cfg(AttackStrategy::kIII, 1.0, m, 1)).report.asr_at(1));

  auto non_decreasing = [](const std::vector<double>& v) {
    for (size_t i = 1; i < v.size(); ++i)
      if (v[i] < v[i - 1] - 0.03) return false;
    return true;
  };
  const bool pass = non_decreasing(by_rho) && non_decreasing(by_count);

  std::string detail = "scale monotonicity; rho {0,.25,.5,.75,1}:";
  for (double a : by_rho) detail += " " + fmt(a);
  detail += "; m {10,40,160}:";
  for (double a : by_count) detail += " " + fmt(a);
  detail += " (tolerance 0.03)";
  verdict(8, pass, detail);
}

// ---------------------------------------------------------------------------
// Criterion 9a: pre-training filter on the duplicate-injection attack.

void criterion_9a() {
  ExperimentConfig cfg = make_cfg(AttackStrategy::kIII, 1.0, 70, 1);
  Dataset base = gen_dataset(cfg.corpus, cfg.seed);
  TriggerSpec trigger = resolve_trigger(cfg.poison, base.vocab);
  auto [poisoned, report] =
      apply_plan(base, make_plan(cfg.poison, trigger, cfg.seed), cfg.corpus);

  // Reference model trained on its own trusted corpus.
  ExperimentConfig ref_cfg = base_config();
  ref_cfg.seed = 77;
  Dataset ref_data = gen_dataset(ref_cfg.corpus, ref_cfg.seed);
  TrainConfig ref_tc = ref_cfg.train;
  ref_tc.seed = ref_cfg.seed;
  TrainResult ref = train(init_params(ref_cfg), ref_data.train, {},
                          ref_data.gallery_pixels(), ref_tc);

  FilterResult probe = filter_pretrain(poisoned, ref.params, 3.0);
  ThresholdSuggestion suggestion = suggest_threshold(probe.distances);
  FilterResult result =
      filter_pretrain(poisoned, ref.params, suggestion.value);

  const bool pass =
      result.removal_recall >= 0.8 && result.clean_false_removal <= 0.1;
  verdict(9, pass,
          std::string("(a) filter at suggested threshold ") +
              fmt(suggestion.value) + ": poison recall " +
              fmt(result.removal_recall) + " (need >= 0.8), clean "
              "false-removal " +
              fmt(result.clean_false_removal) + " (need <= 0.1)");
}

// ---------------------------------------------------------------------------
// Criterion 9b: clean fine-tuning sterilizes, unless the poison was enhanced.

void criterion_9b() {
  // A gentle defense schedule: with the full training lr, both models
  // sterilize to the same clean equilibrium within a few epochs and the
  // enhanced/plain comparison degenerates into probe noise.
  const int finetune_epochs = 10;
  const double finetune_lr = 1e-4;
  int passes = 0;
  std::string detail;

  struct Curve {
    double before = 0.0;
    std::vector<double> asr5;
  };
  const auto finetune = [&](const ExperimentConfig& cfg) {
    const CellOutcome& cell = g_cache.get(cfg);
    Dataset base = gen_dataset(cfg.corpus, cfg.seed);
    TriggerSpec trigger = resolve_trigger(cfg.poison, base.vocab);
    EvalSplits splits = build_eval_splits(base, cfg, trigger);
    EvalProbes probes{splits.clean, splits.poisoned};
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed + 1000;
    tc.adam.lr = finetune_lr;
    tc.perturb.reset();
    auto [tuned, curve] =
        finetune_posttrain(cell.params, base, finetune_epochs, probes, tc);
    Curve out;
    out.before = cell.report.asr_at(5);
    for (const auto& row : curve.rows) out.asr5.push_back(row.asr_r5);
    return out;
  };

  std::vector<Curve> plain_curves(kSeeds.size()), enhanced_curves(kSeeds.size());
  {
    std::vector<std::thread> pool;
    for (size_t i = 0; i < kSeeds.size(); ++i) {
      pool.emplace_back([&, i] {
        plain_curves[i] =
            finetune(make_cfg(AttackStrategy::kI, 1.0, 0, kSeeds[i]));
      });
      pool.emplace_back([&, i] {
        enhanced_curves[i] = finetune(
            make_cfg(AttackStrategy::kI, 1.0, 0, kSeeds[i], +1, kEnhanceEps));
      });
    }
    for (std::thread& t : pool) t.join();
  }

  for (size_t i = 0; i < kSeeds.size(); ++i) {
    const Curve& plain = plain_curves[i];
    const Curve& enhanced = enhanced_curves[i];
    const double final_plain = plain.asr5.back();
    const bool reduced = final_plain <= 0.5 * plain.before;
    bool dominated = true;
    for (size_t e = 0; e < plain.asr5.size(); ++e)
      if (enhanced.asr5[e] <= plain.asr5[e]) dominated = false;
    if (reduced && dominated) ++passes;
    detail += " s" + std::to_string(kSeeds[i]) + ": ASR@5 " +
              fmt(plain.before) + "->" + fmt(final_plain) + ", enhanced end " +
              fmt(enhanced.asr5.back());
  }
  verdict(9, passes >= 2,
          "(b) fine-tune halves plain ASR@5; enhanced stays strictly higher "
          "each epoch (2/3 seeds):" +
              detail);
}

// ---------------------------------------------------------------------------
// Criterion 10: determinism and persistence, at reduced scale.

ExperimentConfig small_scale_config() {
  ExperimentConfig cfg;
  cfg.corpus.n_colors = 4;
  cfg.corpus.n_shapes = 4;
  cfg.corpus.color_block = 4;
  cfg.corpus.shape_block = 4;
  cfg.corpus.n_fillers = 6;
  cfg.corpus.n_train = 300;
  cfg.corpus.n_validation = 120;
  cfg.corpus.trigger_frequency = 0.12;
  cfg.model.hidden = 16;
  cfg.model.embed = 8;
  cfg.model.token_dim = 8;
  cfg.poison.trigger_token = "flower";
  cfg.poison.target_id = 9;
  cfg.poison.strategy = AttackStrategy::kI;
  cfg.train.epochs = 30;
  cfg.seed = 5;
  return cfg;
}

void criterion_10() {
  bool sweep_ok = false, roundtrip_ok = false, resume_ok = false;
  std::string detail;

  // (a) paired sweeps produce byte-identical rows.
  {
    ExperimentConfig cfg = small_scale_config();
    SweepConfig sw;
    sw.epsilons = {0.0, 8.0 / 255.0};
    sw.lambdas = {-1};
    sw.seeds = {5, 6};
    cfg.sweep = sw;
    std::vector<SweepRow> a = run_sweep(cfg, 4);
    std::vector<SweepRow> b = run_sweep(cfg, 2);
    sweep_ok = a.size() == b.size() && a.size() == 4;
    for (size_t i = 0; i < a.size() && sweep_ok; ++i)
      sweep_ok = sweep_csv_row(a[i]) == sweep_csv_row(b[i]);
  }

  // (b) dataset and checkpoint round-trips are bit-exact.
  {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "tgb-acceptance";
    fs::create_directories(dir);
    ExperimentConfig cfg = small_scale_config();
    Dataset ds = gen_dataset(cfg.corpus, cfg.seed);
    save_dataset(ds, (dir / "ds.tsv").string());
    Dataset ds2 = load_dataset((dir / "ds.tsv").string());
    save_dataset(ds2, (dir / "ds2.tsv").string());
    std::ifstream f1(dir / "ds.tsv"), f2(dir / "ds2.tsv");
    std::string s1((std::istreambuf_iterator<char>(f1)),
                   std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)),
                   std::istreambuf_iterator<char>());
    bool data_ok = !s1.empty() && s1 == s2;

    Checkpoint ckpt;
    ckpt.fingerprint = cfg.fingerprint();
    ckpt.epoch = 7;
    ckpt.params = init_params(cfg);
    ckpt.has_adam = true;
    ckpt.adam = AdamState::zeros(ckpt.params.dims());
    ckpt.shuffle_counter = 11;
    ckpt.poison_counter = 22;
    ckpt.pgd_counter = 33;
    save_checkpoint(ckpt, (dir / "m.ckpt").string());
    Checkpoint back = load_checkpoint((dir / "m.ckpt").string());
    bool ckpt_ok =
        back.fingerprint == ckpt.fingerprint && back.epoch == 7 &&
        (back.params.flatten() - ckpt.params.flatten()).cwiseAbs().maxCoeff() ==
            0.0 &&
        back.shuffle_counter == 11 && back.poison_counter == 22 &&
        back.pgd_counter == 33;
    roundtrip_ok = data_ok && ckpt_ok;
    fs::remove_all(dir);
  }

  // (c) checkpoint resume matches the uninterrupted trajectory.
  {
    ExperimentConfig cfg = small_scale_config();
    PerturbConfig perturb;
    perturb.lambda = -1;
    perturb.epsilon = 8.0 / 255.0;
    cfg.perturb = perturb;

    Dataset base = gen_dataset(cfg.corpus, cfg.seed);
    TriggerSpec trigger = resolve_trigger(cfg.poison, base.vocab);
    auto [poisoned, report] =
        apply_plan(base, make_plan(cfg.poison, trigger, cfg.seed), cfg.corpus);
    std::vector<Sample> clean;
    for (const Sample& s : poisoned.train)
      if (s.provenance == Provenance::kClean) clean.push_back(s);
    std::vector<Sample> poison = poisoned_subset(poisoned);
    Matrix gallery = base.gallery_pixels();

    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.perturb = cfg.perturb;

    TrainResult full = train(init_params(cfg), clean, poison, gallery, tc);

    TrainLoopState start;
    start.params = init_params(cfg);
    start.adam = AdamState::zeros(start.params.dims());
    TrainLoopState mid;
    train_from(start, clean, poison, gallery, tc, nullptr, &mid, 13);
    TrainResult resumed = train_from(mid, clean, poison, gallery, tc);
    resume_ok = (full.params.flatten() - resumed.params.flatten())
                    .cwiseAbs()
                    .maxCoeff() == 0.0;
  }

  detail = std::string("determinism: paired sweeps ") +
           (sweep_ok ? "identical" : "DIFFER") + ", round-trips " +
           (roundtrip_ok ? "bit-exact" : "BROKEN") + ", resume " +
           (resume_ok ? "matches" : "DIVERGES");
  verdict(10, sweep_ok && roundtrip_ok && resume_ok, detail);
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  const unsigned hw = std::thread::hardware_concurrency();
  const int jobs = hw ? static_cast<int>(hw) : 4;

  criterion_1();

  // Everything the later criteria need, computed once, in parallel.
  std::vector<ExperimentConfig> grid;
  grid.push_back(clean_cfg(1));
  for (std::uint64_t s : kSeeds) {
    grid.push_back(make_cfg(AttackStrategy::kI, 1.0, 0, s));
    grid.push_back(long_attack_cfg(s));
    grid.push_back(make_cfg(AttackStrategy::kII, 0.6, 0, s));
    grid.push_back(make_cfg(AttackStrategy::kI, 1.0, 0, s, +1, kEnhanceEps));
    grid.push_back(control_cfg(s, 0.0, -1));
    grid.push_back(control_cfg(s, 4.0 / 255.0, -1));
    grid.push_back(control_cfg(s, 4.0 / 255.0, -1, true));
    const int m = static_cast<int>(0.6 * trigger_count(s));
    grid.push_back(make_cfg(AttackStrategy::kIII, 1.0, m, s));
    grid.push_back(make_cfg(AttackStrategy::kIV, 1.0, m, s));
  }
  for (double eps : kEps)
    if (eps > 0) {
      grid.push_back(control_cfg(1, eps, -1));
      grid.push_back(make_cfg(AttackStrategy::kII, 0.6, 0, 1, +1, eps));
    }
  for (double rho : {0.25, 0.5, 0.75})
    grid.push_back(make_cfg(AttackStrategy::kII, rho, 0, 1));
  for (int m : {10, 40, 160})
    grid.push_back(make_cfg(AttackStrategy::kIII, 1.0, m, 1));
  g_cache.prefetch(grid, jobs);

  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9a();
  criterion_9b();
  criterion_10();

  std::printf("acceptance: %d/11 checks passed in %.0fs\n", 11 - g_failures,
              seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
