#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "psim/checkpoint.hpp"
#include "psim/config.hpp"
#include "psim/dataset.hpp"
#include "psim/experiments.hpp"
#include "psim/metrics.hpp"
#include "psim/rng.hpp"

using namespace psim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("psim_exp_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

double l2(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (int64_t i = 0; i < a.numel(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Independent two-loop recomputation of the percentage metric.
double brute_force_error(const std::vector<Tensor>& outs, const std::vector<Tensor>& tgts) {
  double n_sum = 0;
  int pairs = 0;
  for (size_t j = 0; j < tgts.size(); ++j)
    for (size_t k = j + 1; k < tgts.size(); ++k) {
      n_sum += l2(tgts[j], tgts[k]);
      ++pairs;
    }
  const double normalizer = n_sum / pairs;
  double err = 0;
  for (size_t i = 0; i < outs.size(); ++i) err += l2(outs[i], tgts[i]);
  err /= (double)outs.size();
  return err / normalizer * 100.0;
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (int64_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

Config base_config(const std::string& task) {
  Config c;
  c.set("task", task);
  c.set_double("model.scale", 0.125);
  c.set_int("model.input_size", 16);
  c.set("model.decoder", "mirror");
  c.set_int("data.count", 12);
  c.set_int("data.test_count", 4);
  c.set_int("data.image_size", 20);
  c.set_int("optim.batch", 4);
  c.set_int("run.iters", 6);
  c.set_int("run.eval_every", 0);
  return c;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("normalized error: identical outputs score zero") {
  RngStream rng(7);
  std::vector<Tensor> t;
  for (int i = 0; i < 4; ++i) t.push_back(Tensor::gaussian({3, 2}, rng));
  CHECK(normalized_error(t, t) == 0.0);
}

TEST_CASE("normalized error matches a brute-force recomputation") {
  RngStream rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<Tensor> tgts, outs;
    const int n = 3 + trial;
    for (int i = 0; i < n; ++i) {
      tgts.push_back(Tensor::gaussian({2, 3}, rng));
      Tensor noisy = tgts.back();
      for (auto& v : noisy.data) v += 0.1 * rng.next_gaussian();
      outs.push_back(noisy);
    }
    const double got = normalized_error(outs, tgts);
    const double want = brute_force_error(outs, tgts);
    CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("normalized error: a permuted target set scores about 100%") {
  RngStream rng(23);
  const int n = 64;
  std::vector<Tensor> tgts;
  for (int i = 0; i < n; ++i) tgts.push_back(Tensor::gaussian({32}, rng));
  std::vector<Tensor> outs;
  for (int i = 0; i < n; ++i) outs.push_back(tgts[(size_t)((i + 1) % n)]);
  const double err = normalized_error(outs, tgts);
  CHECK(err >= 90.0);
  CHECK(err <= 110.0);
}

TEST_CASE("normalized error: scaling everything by a constant changes nothing") {
  RngStream rng(5);
  std::vector<Tensor> tgts, outs;
  for (int i = 0; i < 5; ++i) {
    tgts.push_back(Tensor::gaussian({4}, rng));
    outs.push_back(Tensor::gaussian({4}, rng));
  }
  const double base = normalized_error(outs, tgts);
  for (auto& t : tgts)
    for (auto& v : t.data) v *= 37.5;
  for (auto& t : outs)
    for (auto& v : t.data) v *= 37.5;
  const double scaled = normalized_error(outs, tgts);
  CHECK(std::abs(scaled - base) <= 1e-9 * std::abs(base));
}

TEST_CASE("normalized error rejects degenerate inputs") {
  Tensor a = Tensor::full({2}, 1.0);
  Tensor b = Tensor::full({2}, 2.0);
  CHECK_THROWS_AS((void)normalized_error({a}, {a}), std::invalid_argument);  // one target
  CHECK_THROWS_AS((void)normalized_error({a, b}, {a}), std::invalid_argument);  // count mismatch
  CHECK_THROWS_AS((void)normalized_error({a, a}, {a, a}), std::invalid_argument);  // N == 0
  Tensor c = Tensor::full({3}, 0.5);
  CHECK_THROWS_AS((void)normalized_error({a, c}, {a, b}), std::invalid_argument);  // shapes
}

TEST_CASE("textures: deterministic, labeled, in range") {
  TextureSet a = make_textures(6, 20, 3, 42);
  TextureSet b = make_textures(6, 20, 3, 42);
  TextureSet other = make_textures(6, 20, 3, 43);
  REQUIRE(a.images.size() == 6);
  CHECK(a.labels == std::vector<int>{0, 1, 2, 0, 1, 2});
  bool all_equal = true, any_differs = false;
  for (int i = 0; i < 6; ++i) {
    all_equal = all_equal && tensors_equal(a.images[(size_t)i], b.images[(size_t)i]);
    any_differs = any_differs || !tensors_equal(a.images[(size_t)i], other.images[(size_t)i]);
    CHECK(a.images[(size_t)i].shape == std::vector<int>{3, 20, 20});
    for (double v : a.images[(size_t)i].data) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
  CHECK(all_equal);
  CHECK(any_differs);
  TextureSet gray = make_textures(2, 12, 1, 7);
  CHECK(gray.images[0].shape == std::vector<int>{1, 12, 12});
}

TEST_CASE("crops: offsets stay in bounds and preserve content") {
  const int W = 11, K = 5;
  Tensor img = Tensor::zeros({1, W, W});
  for (int y = 0; y < W; ++y)
    for (int x = 0; x < W; ++x) img[(int64_t)y * W + x] = y * W + x;

  RngStream rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor crop = random_crop(img, K, rng);
    REQUIRE(crop.shape == std::vector<int>{1, K, K});
    const int start = (int)crop[0];
    const int oy = start / W, ox = start % W;
    REQUIRE(oy >= 0);
    REQUIRE(oy <= W - K);
    REQUIRE(ox >= 0);
    REQUIRE(ox <= W - K);
    for (int y = 0; y < K; ++y)
      for (int x = 0; x < K; ++x)
        REQUIRE(crop[(int64_t)y * K + x] == (oy + y) * W + (ox + x));
  }

  Tensor center = center_crop(img, K);
  CHECK(center[0] == 3 * W + 3);  // offset (11-5)/2 = 3
  Tensor same = center_crop(img, W);
  CHECK(tensors_equal(same, img));
}

TEST_CASE("interpolation hits both endpoints exactly") {
  Tensor a = Tensor::zeros({3});
  Tensor b = Tensor::full({3}, 2.0);
  a[0] = -1.5;
  a[2] = 0.25;
  std::vector<Tensor> rows = interpolate_features(a, b, 5);
  REQUIRE(rows.size() == 5);
  CHECK(tensors_equal(rows.front(), a));
  CHECK(tensors_equal(rows.back(), b));
  // midpoint of 0 and 2 is 1
  Tensor zero = Tensor::zeros({3});
  std::vector<Tensor> mid = interpolate_features(zero, b, 3);
  CHECK(mid[1][0] == 1.0);
  CHECK(mid[1][2] == 1.0);
  CHECK_THROWS_AS((void)interpolate_features(a, b, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)interpolate_features(a, Tensor::zeros({4}), 3), std::invalid_argument);
}

TEST_CASE("iterative re-encode: identity pipeline is a fixed point") {
  auto id = [](const Tensor& t) { return t; };
  RngStream rng(9);
  Tensor batch = Tensor::gaussian({2, 3}, rng);
  std::vector<Tensor> iterates = iterative_reencode(id, id, batch, 4);
  REQUIRE(iterates.size() == 4);
  for (const Tensor& t : iterates) CHECK(tensors_equal(t, batch));

  auto halve = [](const Tensor& t) {
    Tensor o = t;
    for (auto& v : o.data) v *= 0.5;
    return o;
  };
  std::vector<Tensor> one = iterative_reencode(halve, id, batch, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0][0] == 0.5 * batch[0]);
  CHECK_THROWS_AS((void)iterative_reencode(id, id, batch, 0), std::invalid_argument);
}

TEST_CASE("split and stack are inverse") {
  RngStream rng(13);
  Tensor batch = Tensor::gaussian({3, 2, 4}, rng);
  std::vector<Tensor> parts = split_samples(batch);
  REQUIRE(parts.size() == 3);
  CHECK(parts[1].shape == std::vector<int>{2, 4});
  CHECK(parts[2][7] == batch[2 * 8 + 7]);  // sample 2, element (1, 3)
  CHECK(tensors_equal(stack_samples(parts), batch));
}

TEST_CASE("config resolution: defaults, derived values, round-trip") {
  Config c = Config::parse_string("task = autoencoder\n");
  ExperimentConfig ec = resolve_experiment(c);
  CHECK(ec.scale == 0.125);
  CHECK(ec.batch == 8);  // round(64 * 0.125)
  CHECK(ec.input_size == 32);
  CHECK(ec.decoder == "mirror");
  CHECK(ec.label == "autoencoder");
  CHECK(ec.eval_every == 6);  // one epoch: 48 / 8
  CHECK(ec.metric_tap == "conv2");
  CHECK(ec.log_mode == LogMode::kTrain);

  // vae defaults to the up-convolution decoder
  ExperimentConfig vc = resolve_experiment(Config::parse_string("task = vae\n"));
  CHECK(vc.decoder == "generator");

  // the echo re-resolves to the same hash and echo
  Config again = Config::parse_string(ec.resolved.echo());
  ExperimentConfig ec2 = resolve_experiment(again);
  CHECK(ec2.config_hash == ec.config_hash);
  CHECK(ec2.resolved.echo() == ec.resolved.echo());

  // explicit batch and derived batch hash identically once resolved
  Config explicit_batch = Config::parse_string("task = autoencoder\noptim.batch = 8\n");
  CHECK(resolve_experiment(explicit_batch).config_hash == ec.config_hash);
}

TEST_CASE("config resolution rejects bad values and unknown keys") {
  CHECK_THROWS_AS((void)resolve_experiment(Config::parse_string("")), ConfigError);
  CHECK_THROWS_WITH_AS((void)resolve_experiment(Config::parse_string("task = gan\n")),
                       "task: expected autoencoder, vae, or inversion, got 'gan'", ConfigError);
  CHECK_THROWS_AS(
      (void)resolve_experiment(Config::parse_string("task = autoencoder\nfoo.bar = 1\n")),
      ConfigError);
  try {
    (void)resolve_experiment(Config::parse_string("task = autoencoder\nfoo.bar = 1\n"));
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("foo.bar") != std::string::npos);
  }
  CHECK_THROWS_AS((void)resolve_experiment(
                      Config::parse_string("task = autoencoder\nmodel.input_size = 20\n")),
                  ConfigError);
  CHECK_THROWS_AS((void)resolve_experiment(
                      Config::parse_string("task = inversion\nmodel.input_size = 24\n")),
                  ConfigError);
  CHECK_THROWS_AS((void)resolve_experiment(Config::parse_string(
                      "task = autoencoder\nloss.lambda_feat = 0\nloss.lambda_img = 0\n")),
                  ConfigError);
  CHECK_THROWS_AS((void)resolve_experiment(Config::parse_string(
                      "task = autoencoder\ndata.source = directory\n")),
                  ConfigError);
  CHECK_THROWS_AS((void)resolve_experiment(Config::parse_string(
                      "task = vae\nvae.sigma_clamp_zero = true\nvae.kl_weight = 0.1\n")),
                  ConfigError);
  CHECK_THROWS_AS((void)resolve_experiment(Config::parse_string(
                      "task = autoencoder\nloss.image = huber\n")),
                  ConfigError);

  // the identity comparator pins every tap to the raw input
  ExperimentConfig ident = resolve_experiment(Config::parse_string(
      "task = autoencoder\ncomparator.kind = identity\ncomparator.tap = conv2\n"));
  CHECK(ident.comparator_tap == "input");
  CHECK(ident.metric_tap == "input");
}

TEST_CASE("autoencoder smoke run: metrics are finite and bitwise repeatable") {
  Config c = base_config("autoencoder");
  c.set_double("loss.lambda_feat", 0.0);
  ExperimentConfig ec = resolve_experiment(c);

  RunArtifacts a1, a2;
  MetricTable t1 = run_autoencoder(ec, &a1);
  MetricTable t2 = run_autoencoder(ec, &a2);

  REQUIRE(t1.rows.size() == 1);  // eval_every = 0: final row only
  CHECK(t1.rows[0].iteration == 6);
  CHECK(std::isfinite(t1.rows[0].img_err_pct));
  CHECK(std::isfinite(t1.rows[0].feat_err_pct));
  CHECK(t1.rows[0].img_err_pct >= 0.0);

  REQUIRE(a1.reports.size() == 6);
  REQUIRE(a2.reports.size() == 6);
  bool same = t1.rows[0].img_err_pct == t2.rows[0].img_err_pct &&
              t1.rows[0].feat_err_pct == t2.rows[0].feat_err_pct;
  for (size_t i = 0; i < a1.reports.size(); ++i) {
    same = same && a1.reports[i].total == a2.reports[i].total &&
           a1.reports[i].img == a2.reports[i].img;
    CHECK(a1.reports[i].total == a1.reports[i].img);  // img-only objective
  }
  CHECK(same);
  CHECK(tensors_equal(a1.final_recon, a2.final_recon));
}

TEST_CASE("vae with zero kl and clamped sigma walks the autoencoder trajectory") {
  Config ca = base_config("autoencoder");
  ca.set_double("loss.lambda_feat", 0.0);
  Config cv = base_config("vae");
  cv.set_double("loss.lambda_feat", 0.0);
  cv.set_double("vae.kl_weight", 0.0);
  cv.set("vae.sigma_clamp_zero", "true");

  RunArtifacts aa, av;
  MetricTable ta = run_autoencoder(resolve_experiment(ca), &aa);
  MetricTable tv = run_vae(resolve_experiment(cv), &av);

  REQUIRE(aa.reports.size() == av.reports.size());
  bool same = true;
  for (size_t i = 0; i < aa.reports.size(); ++i) {
    same = same && aa.reports[i].total == av.reports[i].total &&
           aa.reports[i].img == av.reports[i].img;
    CHECK(av.reports[i].kl == 0.0);
  }
  CHECK(same);
  CHECK(ta.rows.back().img_err_pct == tv.rows.back().img_err_pct);
  CHECK(ta.rows.back().feat_err_pct == tv.rows.back().feat_err_pct);
  CHECK(tensors_equal(aa.final_recon, av.final_recon));
}

TEST_CASE("vae with a live sigma head reports kl and draws finite varied samples") {
  Config c = base_config("vae");
  c.set_double("loss.lambda_feat", 0.0);
  c.set_double("vae.kl_weight", 0.05);
  c.set_int("vae.sample_count", 4);
  c.set_int("run.iters", 4);
  ExperimentConfig ec = resolve_experiment(c);

  RunArtifacts art;
  MetricTable t = run_vae(ec, &art);
  REQUIRE(art.reports.size() == 4);
  for (const LossReport& r : art.reports) {
    CHECK(std::isfinite(r.kl));
    CHECK(r.kl > 0.0);  // exact (0, 1) posteriors never happen with random init
    CHECK(r.total != r.img);  // the weighted kl term contributes
  }
  REQUIRE(art.vae_samples.shape == std::vector<int>{4, 3, 16, 16});
  CHECK(art.vae_samples.all_finite());
  std::vector<Tensor> samples = split_samples(art.vae_samples);
  for (const Tensor& s : samples) {
    double mean = 0;
    for (double v : s.data) mean += v;
    mean /= (double)s.numel();
    double var = 0;
    for (double v : s.data) var += (v - mean) * (v - mean);
    CHECK(var > 0.0);
  }
  CHECK(std::isfinite(t.rows.back().img_err_pct));
}

TEST_CASE("inversion smoke run with the identity feature network") {
  Config c = base_config("inversion");
  c.set("comparator.kind", "identity");
  c.set_double("loss.lambda_feat", 0.0);
  c.set_int("run.iters", 4);
  ExperimentConfig ec = resolve_experiment(c);
  CHECK(ec.invert_tap == "input");

  Session s = make_session(ec);
  Tensor targets = stack_samples(s.data.test);
  Tensor feats = session_input(s, targets);
  CHECK(feats.shape == std::vector<int>{4, 3 * 16 * 16});
  Tensor imgs = session_generate(s, feats);
  CHECK(imgs.shape == std::vector<int>{4, 3, 16, 16});

  MetricTable t = run_session(s, nullptr);
  REQUIRE(!t.rows.empty());
  CHECK(std::isfinite(t.rows.back().img_err_pct));
  CHECK(std::isfinite(t.rows.back().feat_err_pct));
}

TEST_CASE("session reconstruct composes input and generate") {
  Config c = base_config("autoencoder");
  ExperimentConfig ec = resolve_experiment(c);
  Session s = make_session(ec);
  Tensor targets = stack_samples(s.data.test);
  Tensor code = session_input(s, targets);
  CHECK(code.shape == std::vector<int>{4, 1, 2, 2});  // scaled latent, 16/8 spatial
  CHECK(tensors_equal(session_reconstruct(s, targets), session_generate(s, code)));
}

TEST_CASE("run artifacts land on disk and the checkpoint loads back") {
  TempDir tmp;
  Config c = base_config("autoencoder");
  c.set_double("loss.lambda_feat", 0.0);
  c.set("run.out", tmp.file("ae"));
  c.set_int("run.eval_every", 3);
  ExperimentConfig ec = resolve_experiment(c);
  MetricTable t = run_autoencoder(ec);
  REQUIRE(t.rows.size() == 2);  // iteration 3 plus the final row at 6

  CHECK(fs::exists(tmp.file("ae/run.txt")));
  CHECK(fs::exists(tmp.file("ae/recon.ppm")));
  std::vector<std::string> run_txt = read_lines(tmp.file("ae/run.txt"));
  bool has_task = false;
  for (const std::string& line : run_txt) has_task = has_task || line == "task = autoencoder";
  CHECK(has_task);

  std::vector<std::string> losses = read_lines(tmp.file("ae/losses.csv"));
  REQUIRE(losses.size() == 7);  // header + one row per iteration
  CHECK(losses[0] == "iteration,total,feat,adv,img,discr,kl,gate_ratio,gate_update");
  CHECK(losses[1].substr(0, 2) == "1,");

  std::vector<std::string> metrics = read_lines(tmp.file("ae/metrics.csv"));
  REQUIRE(metrics.size() == 3);
  CHECK(metrics[0] == "label,img_err_pct,feat_err_pct,iteration");

  CheckpointData cd = load_checkpoint(tmp.file("ae/checkpoint.bin"), ec.config_hash);
  CHECK(cd.iteration == 6);
  CHECK(cd.gen_parts.count("encoder") == 1);
  CHECK(cd.gen_parts.count("decoder") == 1);
}

TEST_CASE("metrics files from identical runs are byte-identical") {
  TempDir tmp;
  Config c = base_config("autoencoder");
  c.set_double("loss.lambda_feat", 0.0);
  c.set("run.out", tmp.file("a"));
  (void)run_autoencoder(resolve_experiment(c));
  c.set("run.out", tmp.file("b"));
  (void)run_autoencoder(resolve_experiment(c));
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(tmp.file("a/metrics.csv")) == slurp(tmp.file("b/metrics.csv")));
  CHECK(slurp(tmp.file("a/losses.csv")) == slurp(tmp.file("b/losses.csv")));
  CHECK(slurp(tmp.file("a/recon.ppm")) == slurp(tmp.file("b/recon.ppm")));
}

TEST_CASE("a resumed run reproduces the uninterrupted tail exactly") {
  TempDir tmp;
  Config c = base_config("autoencoder");
  c.set_double("loss.lambda_feat", 0.0);

  // short run: 3 steps, checkpoint written at the end
  c.set_int("run.iters", 3);
  c.set("run.out", tmp.file("short"));
  (void)run_autoencoder(resolve_experiment(c));

  // resumed continuation to 6
  c.set_int("run.iters", 6);
  c.set("run.out", tmp.file("resumed"));
  c.set("run.resume", tmp.file("short/checkpoint.bin"));
  MetricTable resumed = run_autoencoder(resolve_experiment(c));

  // uninterrupted reference run to 6
  c.set("run.resume", "");
  c.set("run.out", tmp.file("full"));
  MetricTable full = run_autoencoder(resolve_experiment(c));

  std::vector<std::string> tail = read_lines(tmp.file("resumed/losses.csv"));
  std::vector<std::string> ref = read_lines(tmp.file("full/losses.csv"));
  REQUIRE(tail.size() == 4);  // header + iterations 4..6
  REQUIRE(ref.size() == 7);
  CHECK(tail[1] == ref[4]);
  CHECK(tail[2] == ref[5]);
  CHECK(tail[3] == ref[6]);
  CHECK(resumed.rows.back().img_err_pct == full.rows.back().img_err_pct);
  CHECK(resumed.rows.back().feat_err_pct == full.rows.back().feat_err_pct);
  CHECK(resumed.rows.back().iteration == 6);
}

TEST_CASE("ablation runs the five masks and the double-mask equals the direct run") {
  Config c = base_config("inversion");
  c.set_int("run.iters", 3);
  c.set_double("loss.lambda_feat", 1.0);
  c.set_double("loss.lambda_adv", 0.05);
  c.set_double("loss.lambda_img", 1.0);
  ExperimentConfig ec = resolve_experiment(c);

  MetricTable ab = ablation_matrix(ec);
  REQUIRE(ab.rows.size() == 5);
  CHECK(ab.rows[0].label == "full");
  CHECK(ab.rows[1].label == "-L_img");
  CHECK(ab.rows[2].label == "-L_feat");
  CHECK(ab.rows[3].label == "-L_adv");
  CHECK(ab.rows[4].label == "-L_feat-L_adv");
  for (const MetricRow& row : ab.rows) {
    CHECK(std::isfinite(row.img_err_pct));
    CHECK(std::isfinite(row.feat_err_pct));
    CHECK(row.iteration == 3);
  }

  // a direct lambda = (0, 0, img) run is the same trajectory
  Config direct = ec.resolved;
  direct.set_double("loss.lambda_feat", 0.0);
  direct.set_double("loss.lambda_adv", 0.0);
  MetricTable dt = run_inversion(resolve_experiment(direct));
  CHECK(dt.rows.back().img_err_pct == ab.rows[4].img_err_pct);
  CHECK(dt.rows.back().feat_err_pct == ab.rows[4].feat_err_pct);

  // base configs missing a term cannot ablate
  Config bad = base_config("inversion");
  CHECK_THROWS_AS((void)ablation_matrix(resolve_experiment(bad)), ConfigError);
}

TEST_CASE("trained comparator differs from the random one but stays deterministic") {
  Config c = base_config("autoencoder");
  c.set("comparator.kind", "trained_tiny");
  c.set_int("comparator.train_iters", 5);
  ExperimentConfig ec = resolve_experiment(c);

  Network t1 = build_comparator(ec);
  Network t2 = build_comparator(ec);
  CHECK(t1.mode == Network::Mode::kEval);
  CHECK_FALSE(t1.trainable);

  Config cr = base_config("autoencoder");
  ExperimentConfig er = resolve_experiment(cr);
  Network r = build_comparator(er);

  bool t_same = true, differs_from_random = false;
  for (const auto& [name, p] : t1.params) {
    t_same = t_same && tensors_equal(p, t2.params.at(name));
    if (r.params.count(name))
      differs_from_random = differs_from_random || !tensors_equal(p, r.params.at(name));
  }
  CHECK(t_same);
  CHECK(differs_from_random);  // the head training moved shared-name weights

  // features still flow from the tap used for the loss
  Tensor probe = Tensor::zeros({1, 3, 16, 16});
  Tensor f = phi_features(t1, probe, "conv2");
  CHECK(f.rank() == 2);
  CHECK(f.all_finite());
}

}  // TEST_SUITE
