// Acceptance gate: ten release criteria, one pass/fail line each. Every
// tolerance and budget is pinned here, next to the check that uses it.
// Exit code 0 iff all criteria pass.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "psim/checkpoint.hpp"
#include "psim/config.hpp"
#include "psim/experiments.hpp"
#include "psim/fd.hpp"
#include "psim/gradcheck.hpp"
#include "psim/graph.hpp"
#include "psim/losses.hpp"
#include "psim/metrics.hpp"
#include "psim/nn.hpp"
#include "psim/optim.hpp"
#include "psim/rng.hpp"
#include "psim/tensor.hpp"

namespace fs = std::filesystem;
using namespace psim;

namespace {

fs::path g_root;  // artifact directory for the training criteria

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel_diff(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-300});
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, format);
  std::vsnprintf(buf, sizeof buf, format, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void criterion(int id, const std::string& name, const std::function<Outcome()>& fn) {
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  if (!o.pass) ++g_failures;
  std::printf("[%2d] %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

ExperimentConfig resolve_text(const std::string& text) {
  return resolve_experiment(Config::parse_string(text, "acceptance"));
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// ---------------------------------------------------------------- criterion 1

Outcome c1_gradient_suite() {
  const double kTimeBudget = 120.0;  // seconds
  const auto t0 = std::chrono::steady_clock::now();
  const GradcheckSummary sum = run_gradcheck_suite(1);
  const double wall = seconds_since(t0);

  bool pass = sum.all_pass && wall < kTimeBudget && sum.entries.size() == 16;
  for (const GradcheckEntry& e : sum.entries) pass = pass && e.shapes >= 5 && e.tolerance == 1e-4;
  return {pass, fmt("%zu ops x 5 shapes, max rel err %.2e (tol 1e-4), %.2fs (budget %.0fs)",
                    sum.entries.size(), sum.max_rel_err, wall, kTimeBudget)};
}

// ---------------------------------------------------------------- criterion 2

using RowShapes = std::vector<std::pair<std::vector<int>, std::vector<int>>>;

// in/out of every row that carries a tabulated size (dropout and softmax rows
// are shape-preserving bookkeeping and are skipped).
RowShapes audited_rows(const NetworkSpec& spec) {
  RowShapes rows;
  const auto shapes = chain_shapes(spec);
  for (size_t i = 0; i < shapes.size(); ++i) {
    const LayerKind k = spec.layers[i].kind;
    if (k == LayerKind::kDropout || k == LayerKind::kSoftmax || k == LayerKind::kActivation)
      continue;
    rows.push_back({shapes[i].in, shapes[i].out});
  }
  return rows;
}

Outcome c2_shape_audit() {
  auto specs = preset_specs();  // scale = 1, 64x64 input

  const RowShapes discr_want = {
      {{3, 64, 64}, {32, 29, 29}},   {{32, 29, 29}, {64, 25, 25}},
      {{64, 25, 25}, {128, 12, 12}}, {{128, 12, 12}, {256, 10, 10}},
      {{256, 10, 10}, {256, 4, 4}},  {{256, 4, 4}, {256, 1, 1}},
      {{256, 1, 1}, {512}},          {{512}, {2}},
  };
  const RowShapes enc_want = {
      {{3, 64, 64}, {32, 32, 32}},  {{32, 32, 32}, {32, 32, 32}},
      {{32, 32, 32}, {64, 16, 16}}, {{64, 16, 16}, {64, 16, 16}},
      {{64, 16, 16}, {128, 8, 8}},  {{128, 8, 8}, {128, 8, 8}},
      {{128, 8, 8}, {64, 8, 8}},    {{64, 8, 8}, {8, 8, 8}},
  };
  const RowShapes dec_want = {
      {{8, 8, 8}, {64, 8, 8}},      {{64, 8, 8}, {128, 8, 8}},
      {{128, 8, 8}, {64, 16, 16}},  {{64, 16, 16}, {64, 16, 16}},
      {{64, 16, 16}, {32, 32, 32}}, {{32, 32, 32}, {32, 32, 32}},
      {{32, 32, 32}, {16, 64, 64}}, {{16, 64, 64}, {3, 64, 64}},
  };
  PresetOptions fc_opt;
  fc_opt.generator_output = 256;
  const RowShapes gen_want = {
      {{4096}, {4096}},                 {{4096}, {4096}},
      {{4096}, {4096}},                 {{4096}, {256, 4, 4}},
      {{256, 4, 4}, {256, 8, 8}},       {{256, 8, 8}, {512, 8, 8}},
      {{512, 8, 8}, {256, 16, 16}},     {{256, 16, 16}, {256, 16, 16}},
      {{256, 16, 16}, {128, 32, 32}},   {{128, 32, 32}, {128, 32, 32}},
      {{128, 32, 32}, {64, 64, 64}},    {{64, 64, 64}, {32, 128, 128}},
      {{32, 128, 128}, {3, 256, 256}},
  };

  int rows = 0;
  bool pass = true;
  auto check = [&](const NetworkSpec& spec, const RowShapes& want) {
    const RowShapes got = audited_rows(spec);
    pass = pass && got == want;
    rows += (int)want.size();
  };
  check(specs.at("discriminator"), discr_want);
  check(specs.at("autoencoder_enc"), enc_want);
  check(specs.at("autoencoder_dec"), dec_want);
  check(preset_specs(fc_opt).at("generator_fc"), gen_want);

  return {pass, fmt("%d reference rows, every in/out size exact at scale 1", rows)};
}

// ---------------------------------------------------------------- criterion 3

Outcome c3_analytic_losses() {
  const double kTol = 1e-9;

  Tensor half = Tensor::full({4}, 0.5);
  const double discr_val = loss_discr(half, half);
  const bool discr_ok = std::fabs(discr_val - 2.0 * std::log(2.0)) <= kTol;

  Tensor ones = Tensor::full({4}, 1.0);
  const double adv_val = loss_adv(ones);
  const bool adv_ok = std::fabs(adv_val) <= kTol;

  Tensor mu = Tensor::full({1, 1}, 1.0);
  Tensor sigma = Tensor::full({1, 1}, 1.0);
  const double kl_val = kl_loss(mu, sigma);
  const bool kl_ok = std::fabs(kl_val - 1.0) <= kTol;

  // identity comparator: the feature loss degenerates to the image loss
  NetworkSpec id_spec;
  id_spec.name = "identity";
  id_spec.input_shape = {3, 8, 8};
  Network identity = build(id_spec, InitScheme::kGlorotUniform, 1);
  identity.trainable = false;
  RngStream rng(42);
  Tensor gen_img = Tensor::gaussian({2, 3, 8, 8}, rng);
  Tensor target = Tensor::gaussian({2, 3, 8, 8}, rng);
  Graph g;
  const double feat_val =
      g.value(loss_feat(g, g.leaf(gen_img), g.leaf(target), identity, "input"))[0];
  const double img_val = g.value(loss_img_se(g, g.leaf(gen_img), g.leaf(target)))[0];
  const bool feat_ok = rel_diff(feat_val, img_val) <= 1e-9;

  return {discr_ok && adv_ok && kl_ok && feat_ok,
          fmt("discr(1/2,1/2)=%.12f (want 2ln2, tol 1e-9); adv(1)=%.1e; kl(1,1)=%.12f; "
              "identity feat vs img rel %.1e (tol 1e-9)",
              discr_val, adv_val, kl_val, rel_diff(feat_val, img_val))};
}

// ---------------------------------------------------------------- criterion 4

Outcome c4_gradient_isolation() {
  NetworkSpec gspec;
  gspec.name = "toy_gen";
  gspec.input_shape = {2, 4, 4};
  gspec.layers = {LayerSpec::conv(8, 3, 1, 4, 4), LayerSpec::conv(3, 3, 1, 4, 4, Act::kLinear)};
  NetworkSpec dspec;
  dspec.name = "toy_discr";
  dspec.input_shape = {3, 4, 4};
  dspec.layers = {LayerSpec::conv(8, 3, 1, 4, 4), LayerSpec::global_pool(),
                  LayerSpec::fc(2, Act::kLinear)};
  Network gen = build(gspec, InitScheme::kGlorotUniform, 101);
  Network discr = build(dspec, InitScheme::kGlorotUniform, 202);
  gen.mode = Network::Mode::kTrain;
  discr.mode = Network::Mode::kTrain;

  RngStream rng(7);
  Tensor code = Tensor::gaussian({4, 2, 4, 4}, rng);
  Tensor real = Tensor::gaussian({4, 3, 4, 4}, rng);

  auto max_abs = [](const std::map<std::string, Tensor>& grads) {
    double m = 0.0;
    for (const auto& [name, t] : grads)
      for (double v : t.data) m = std::max(m, std::fabs(v));
    return m;
  };

  // adversarial pass: the discriminator is frozen, so its parameters receive
  // no gradient while the generator's do
  double adv_discr_grad = 0.0, adv_gen_grad = 0.0;
  {
    Graph g;
    discr.trainable = false;
    auto rg = forward(gen, g, g.leaf(code));
    auto rd = forward(discr, g, rg.out);
    g.backward(loss_adv(g, g.slice_col(g.softmax2(rd.out), 0), LogMode::kTrain));
    adv_discr_grad = max_abs(collect_grads(g, rd.params));
    adv_gen_grad = max_abs(collect_grads(g, rg.params));
    discr.trainable = true;
  }

  // discriminator pass: the generated batch is detached and the generator is
  // frozen, so only discriminator parameters receive gradient
  double discr_gen_grad = 0.0, discr_discr_grad = 0.0;
  {
    Graph g;
    gen.trainable = false;
    auto rg = forward(gen, g, g.leaf(code));
    Value fake = g.detach(rg.out);
    auto rd_real = forward(discr, g, g.leaf(real));
    auto rd_fake = forward(discr, g, fake, nullptr, Value{}, &rd_real.params);
    Value p_real = g.slice_col(g.softmax2(rd_real.out), 0);
    Value p_fake = g.slice_col(g.softmax2(rd_fake.out), 0);
    g.backward(loss_discr(g, p_real, p_fake, LogMode::kTrain));
    discr_gen_grad = max_abs(collect_grads(g, rg.params));
    discr_discr_grad = max_abs(collect_grads(g, rd_real.params));
    gen.trainable = true;
  }

  const bool pass = adv_discr_grad == 0.0 && discr_gen_grad == 0.0 && adv_gen_grad > 0.0 &&
                    discr_discr_grad > 0.0;
  return {pass, fmt("adv loss: |d discr|=%g, |d gen|=%.2e; discr loss: |d gen|=%g, |d discr|=%.2e "
                    "(isolated terms exactly zero)",
                    adv_discr_grad, adv_gen_grad, discr_gen_grad, discr_discr_grad)};
}

// ---------------------------------------------------------------- criterion 5

Outcome c5_gate_schedule() {
  struct Step {
    double discr, adv;
    bool want_update, want_warning;
  };
  // a scripted loss sequence that crosses the 0.1 ratio in both directions,
  // sits exactly on the threshold, and hits the non-positive guard
  const std::vector<Step> script = {
      {0.50, 1.0, true, false},     // comfortable ratio
      {0.101, 1.0, true, false},    // just above
      {0.10, 1.0, true, false},     // exactly threshold: still updates
      {0.0999999, 1.0, false, false},  // just below: paused
      {0.02, 1.0, false, false},    // far below: paused
      {5.0, 10.0, true, false},     // recovers
      {1.0, 0.0, true, true},       // non-positive adv forces the gate open
      {1.0, -2.0, true, true},
      {0.05, 1.0, false, false},
      {0.12, 1.0, true, false},
  };

  int updates = 0, want_updates = 0;
  bool pass = true;
  for (const Step& s : script) {
    const GateDecision d = gate_discriminator(s.discr, s.adv, 0.1);
    pass = pass && d.update == s.want_update && d.warning == s.want_warning;
    updates += d.update ? 1 : 0;
    want_updates += s.want_update ? 1 : 0;
  }
  pass = pass && updates == want_updates;
  return {pass, fmt("%d/%zu scripted steps updated (expected %d), per-step decisions exact",
                    updates, script.size(), want_updates)};
}

// ---------------------------------------------------------------- criterion 6

double brute_force_error(const std::vector<Tensor>& outputs, const std::vector<Tensor>& targets) {
  auto dist = [](const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    return std::sqrt(s);
  };
  double num = 0.0;
  for (size_t i = 0; i < outputs.size(); ++i) num += dist(outputs[i], targets[i]);
  num /= (double)outputs.size();
  double den = 0.0;
  int pairs = 0;
  for (size_t j = 0; j < targets.size(); ++j)
    for (size_t k = j + 1; k < targets.size(); ++k) {
      den += dist(targets[j], targets[k]);
      ++pairs;
    }
  den /= (double)pairs;
  return num / den * 100.0;
}

Outcome c6_metric_oracle() {
  RngStream rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + (int)rng.next_below(6);
    std::vector<int> shape = trial % 2 == 0
                                 ? std::vector<int>{2 + (int)rng.next_below(7)}
                                 : std::vector<int>{3, 2 + (int)rng.next_below(4), 3};
    std::vector<Tensor> outputs, targets;
    for (int i = 0; i < n; ++i) {
      outputs.push_back(Tensor::gaussian(shape, rng));
      targets.push_back(Tensor::gaussian(shape, rng));
    }
    worst = std::max(worst, rel_diff(normalized_error(outputs, targets),
                                     brute_force_error(outputs, targets)));
  }
  const bool oracle_ok = worst <= 1e-12;

  // a random permutation of the targets scores ~100% by construction
  std::vector<Tensor> targets;
  for (int i = 0; i < 64; ++i) targets.push_back(Tensor::gaussian({32}, rng));
  std::vector<int> perm(64);
  for (int i = 0; i < 64; ++i) perm[i] = i;
  for (int i = 63; i > 0; --i) std::swap(perm[i], perm[(int)rng.next_below((uint64_t)i + 1)]);
  std::vector<Tensor> shuffled;
  for (int i = 0; i < 64; ++i) shuffled.push_back(targets[(size_t)perm[i]]);
  const double baseline = normalized_error(shuffled, targets);
  const bool baseline_ok = baseline >= 90.0 && baseline <= 110.0;

  return {oracle_ok && baseline_ok,
          fmt("10 random sets vs brute force, worst rel diff %.2e (tol 1e-12); "
              "64-sample permutation baseline %.1f%% (window [90,110])",
              worst, baseline)};
}

// ---------------------------------------------------------------- criterion 7

const char* kDeskData =
    "model.scale = 0.125\n"
    "model.input_size = 32\n"
    "model.latent_channels = 32\n"
    "data.count = 64\n"
    "data.test_count = 16\n"
    "data.image_size = 40\n"
    "optim.lr = 1e-3\n"
    "run.seed = 11\n"
    "run.log_every = 0\n";

Outcome c7_desk_autoencoder() {
  const double kTimeBudget = 900.0;  // seconds, one core
  const double kImgTarget = 60.0;    // percent
  const int64_t kIters = 6000;       // <= 10000
  const auto t0 = std::chrono::steady_clock::now();

  ExperimentConfig se = resolve_text(std::string("task = autoencoder\nrun.label = se\n") +
                                     kDeskData + "run.iters = " + std::to_string(kIters) +
                                     "\nrun.eval_every = 0\n"
                                     "loss.lambda_feat = 0\nloss.lambda_adv = 0\n"
                                     "loss.lambda_img = 1\n"
                                     "run.out = " + (g_root / "c7_se").string() + "\n");
  const MetricRow se_row = run_experiment(se).rows.back();

  ExperimentConfig composite = resolve_text(
      std::string("task = autoencoder\nrun.label = composite\n") + kDeskData +
      "run.iters = " + std::to_string(kIters) +
      "\nrun.eval_every = 0\n"
      "loss.lambda_feat = 1\nloss.lambda_adv = 0.5\nloss.lambda_img = 0.01\n"
      "run.out = " + (g_root / "c7_composite").string() + "\n");
  const MetricRow comp_row = run_experiment(composite).rows.back();

  const double wall = seconds_since(t0);
  const bool img_ok = se_row.img_err_pct < kImgTarget;
  const bool feat_ok = comp_row.feat_err_pct < se_row.feat_err_pct;  // strict
  const bool time_ok = wall < kTimeBudget;
  return {img_ok && feat_ok && time_ok,
          fmt("pixel-loss run: img %.1f%% (target <%.0f%%), feat %.1f%%; composite run: "
              "img %.1f%%, feat %.1f%% (must be < pixel-loss feat); %.0fs (budget %.0fs)",
              se_row.img_err_pct, kImgTarget, se_row.feat_err_pct, comp_row.img_err_pct,
              comp_row.feat_err_pct, wall, kTimeBudget)};
}

// ---------------------------------------------------------------- criterion 8

Outcome c8_inversion_ablation() {
  // smaller than the autoencoder desk setup: the feature-inversion generator
  // flattens a conv feature map into fc layers, so width grows quadratically
  // with the tap size and this budget already separates the variants cleanly
  ExperimentConfig ec = resolve_text(std::string("task = inversion\nrun.label = inv\n") +
                                     "model.scale = 0.0625\n"
                                     "model.input_size = 16\n"
                                     "data.count = 48\n"
                                     "data.test_count = 16\n"
                                     "data.image_size = 24\n"
                                     "optim.lr = 1e-3\n"
                                     "run.seed = 11\n"
                                     "run.log_every = 0\n"
                                     "run.iters = 600\n"
                                     "run.eval_every = 0\n"
                                     "comparator.kind = random_tiny\n"
                                     "invert.tap = conv2\n"
                                     "loss.lambda_feat = 1\nloss.lambda_adv = 0.5\n"
                                     "loss.lambda_img = 0.01\n"
                                     "run.out = " + (g_root / "c8_ablation").string() + "\n");
  const MetricTable table = ablation_matrix(ec);

  auto row = [&](const std::string& label) -> const MetricRow& {
    for (const MetricRow& r : table.rows)
      if (r.label == label) return r;
    throw std::runtime_error("ablation row missing: " + label);
  };
  const MetricRow& full = row("full");
  const MetricRow& no_feat = row("-L_feat");
  const MetricRow& no_img = row("-L_img");

  const bool feat_ok = full.feat_err_pct <= no_feat.feat_err_pct;
  const bool img_ok = full.img_err_pct <= no_img.img_err_pct * 1.10;  // 10% relative slack
  return {feat_ok && img_ok,
          fmt("feat: full %.1f%% <= no-feature-term %.1f%%; img: full %.1f%% <= "
              "1.1 x no-image-term %.1f%%",
              full.feat_err_pct, no_feat.feat_err_pct, full.img_err_pct, no_img.img_err_pct)};
}

// ---------------------------------------------------------------- criterion 9

const char* kTinyData =
    "run.seed = 5\n"
    "run.iters = 6\n"
    "run.log_every = 1\n"
    "run.eval_every = 0\n"
    "model.scale = 0.125\n"
    "model.input_size = 16\n"
    "data.count = 12\n"
    "data.test_count = 4\n"
    "data.image_size = 20\n"
    "optim.batch = 4\n";

Outcome c9_vae_plumbing() {
  // sampling path: decoded prior draws are finite and non-degenerate
  ExperimentConfig vae = resolve_text(std::string("task = vae\nrun.label = v\n") + kTinyData +
                                      "vae.sample_count = 8\n"
                                      "run.out = " + (g_root / "c9_vae").string() + "\n");
  RunArtifacts vart;
  run_experiment(vae, &vart);
  bool samples_ok = vart.vae_samples.shape == std::vector<int>({8, 3, 16, 16});
  for (double v : vart.vae_samples.data) samples_ok = samples_ok && std::isfinite(v);
  samples_ok = samples_ok && fs::exists(g_root / "c9_vae" / "samples.ppm");

  // kl weight 0 + clamped sigma: the loss trajectory equals the autoencoder's
  ExperimentConfig ae = resolve_text(std::string("task = autoencoder\nrun.label = t\n") + kTinyData);
  ExperimentConfig clamped = resolve_text(std::string("task = vae\nrun.label = t\n") + kTinyData +
                                          "vae.kl_weight = 0\nvae.sigma_clamp_zero = true\n");
  RunArtifacts ra, rc;
  run_experiment(ae, &ra);
  run_experiment(clamped, &rc);
  bool traj_ok = ra.reports.size() == rc.reports.size() && !ra.reports.empty();
  for (size_t i = 0; traj_ok && i < ra.reports.size(); ++i) {
    const LossReport &a = ra.reports[i], &c = rc.reports[i];
    traj_ok = a.total == c.total && a.feat == c.feat && a.adv == c.adv && a.img == c.img &&
              a.kl == c.kl;
  }

  // reparameterization gradients against central differences
  RngStream rng(31);
  Tensor mu = Tensor::gaussian({3, 5}, rng);
  Tensor log_sigma = Tensor::gaussian({3, 5}, rng);
  Tensor eps = Tensor::gaussian({3, 5}, rng);
  Tensor lw = Tensor::gaussian({3, 5}, rng);
  const FdReport fd = fd_check({mu, log_sigma}, [&](Graph& g, const std::vector<Value>& in) {
    Value sigma = g.exp(in[1]);
    Value z = reparameterize(g, in[0], sigma, g.leaf(eps));
    return g.add(g.sum(g.mul(g.square(z), g.leaf(lw))), kl_loss(g, in[0], sigma));
  });
  const bool fd_ok = fd.max_rel_err < 1e-4;

  return {samples_ok && traj_ok && fd_ok,
          fmt("8 prior draws finite; clamped-sigma trajectory == autoencoder over %zu steps; "
              "reparameterization fd rel err %.2e (tol 1e-4)",
              ra.reports.size(), fd.max_rel_err)};
}

// --------------------------------------------------------------- criterion 10

Outcome c10_determinism() {
  const std::string base = std::string("task = autoencoder\nrun.label = d\n") + kTinyData +
                           "run.iters = 8\nrun.eval_every = 4\n";

  auto run_to = [&](const std::string& dir, const std::string& extra) {
    ExperimentConfig ec = resolve_text(base + "run.out = " + (g_root / dir).string() + "\n" + extra);
    run_experiment(ec);
  };

  run_to("c10_a", "");
  run_to("c10_b", "");
  const bool repeat_ok = read_file((g_root / "c10_a" / "metrics.csv").string()) ==
                             read_file((g_root / "c10_b" / "metrics.csv").string() ) &&
                         read_file((g_root / "c10_a" / "losses.csv").string()) ==
                             read_file((g_root / "c10_b" / "losses.csv").string());

  // interrupt at 4, resume to 8: the resumed run's reports must equal the
  // uninterrupted run's tail byte for byte
  {
    ExperimentConfig short_ec =
        resolve_text(base + "run.out = " + (g_root / "c10_short").string() + "\nrun.iters = 4\n");
    run_experiment(short_ec);
  }
  run_to("c10_resumed",
         "run.resume = " + (g_root / "c10_short" / "checkpoint.bin").string() + "\n");

  const auto full_losses = read_lines((g_root / "c10_a" / "losses.csv").string());
  const auto tail_losses = read_lines((g_root / "c10_resumed" / "losses.csv").string());
  bool resume_ok = full_losses.size() == 9 && tail_losses.size() == 5 &&
                   full_losses[0] == tail_losses[0];
  for (size_t i = 1; resume_ok && i < tail_losses.size(); ++i)
    resume_ok = tail_losses[i] == full_losses[i + 4];

  const auto full_metrics = read_lines((g_root / "c10_a" / "metrics.csv").string());
  const auto res_metrics = read_lines((g_root / "c10_resumed" / "metrics.csv").string());
  resume_ok = resume_ok && !full_metrics.empty() && !res_metrics.empty() &&
              res_metrics.back() == full_metrics.back();

  return {repeat_ok && resume_ok,
          fmt("repeated run byte-identical (metrics.csv, losses.csv); resumed run reproduces "
              "steps 5..8 and the final metric row byte for byte")};
}

}  // namespace

int main() {
  g_root = fs::temp_directory_path() / "psim_acceptance";
  std::error_code ec;
  fs::remove_all(g_root, ec);
  fs::create_directories(g_root);
  std::printf("acceptance artifacts: %s\n", g_root.string().c_str());

  criterion(1, "gradient suite", c1_gradient_suite);
  criterion(2, "architecture shape audit", c2_shape_audit);
  criterion(3, "analytic loss values", c3_analytic_losses);
  criterion(4, "adversarial gradient isolation", c4_gradient_isolation);
  criterion(5, "discriminator gate schedule", c5_gate_schedule);
  criterion(6, "normalized-error oracle", c6_metric_oracle);
  criterion(7, "desk-scale autoencoder ordering", c7_desk_autoencoder);
  criterion(8, "desk-scale inversion ablation", c8_inversion_ablation);
  criterion(9, "vae plumbing", c9_vae_plumbing);
  criterion(10, "bitwise determinism", c10_determinism);

  std::printf("ACCEPTANCE: %d/10 criteria passed\n", 10 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
