#include "psim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "psim/checkpoint.hpp"
#include "psim/dataset.hpp"
#include "psim/graph.hpp"
#include "psim/image_io.hpp"
#include "psim/rng.hpp"

namespace psim {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Sequence the next `count` training indices: reshuffles (drop-last) whenever
// fewer than a full batch remains in the current epoch permutation.
std::vector<int32_t> next_indices(DataCursor& cur, int64_t train_size, int count) {
  if ((int64_t)cur.order.size() != train_size ||
      cur.pos + count > (int64_t)cur.order.size()) {
    cur.order.resize(train_size);
    for (int64_t i = 0; i < train_size; ++i) cur.order[(size_t)i] = (int32_t)i;
    for (int64_t i = train_size - 1; i > 0; --i) {
      uint64_t j = cur.shuffle_rng.next_below((uint64_t)i + 1);
      std::swap(cur.order[(size_t)i], cur.order[(size_t)j]);
    }
    cur.pos = 0;
  }
  std::vector<int32_t> out(cur.order.begin() + cur.pos, cur.order.begin() + cur.pos + count);
  cur.pos += count;
  return out;
}

Tensor draw_batch(const Session& s, DataCursor& cur) {
  std::vector<int32_t> idx =
      next_indices(cur, (int64_t)s.data.train.size(), s.ec.batch);
  std::vector<Tensor> picks;
  picks.reserve(idx.size());
  for (int32_t i : idx)
    picks.push_back(random_crop(s.data.train[(size_t)i], s.ec.input_size, cur.crop_rng));
  return stack_samples(picks);
}

GeneratorForward make_enc_dec_forward(bool use_sigma, double kl_weight) {
  return [use_sigma, kl_weight](Graph& g, TrainState& st, const Tensor& x) {
    GenBuild out;
    const Network& enc = st.gen_parts.at("encoder").net;
    ForwardResult e = forward(enc, g, g.leaf(x), &st.dropout_rng);
    Value code = e.out;  // the mean when a sigma head is present
    out.parts.push_back({"encoder", e.params});
    if (use_sigma) {
      const Network& head = st.gen_parts.at("sigma").net;
      Value penultimate = e.taps[e.taps.size() - 2].second;
      ForwardResult sr = forward(head, g, penultimate, &st.dropout_rng);
      Value sigma = g.exp(sr.out);  // head predicts log sigma
      out.parts.push_back({"sigma", sr.params});
      Tensor eps = Tensor::gaussian(g.value(code).shape, st.eps_rng);
      if (kl_weight != 0.0) {
        out.extra_loss = kl_loss(g, code, sigma);
        out.extra_weight = kl_weight;
      }
      code = reparameterize(g, code, sigma, g.leaf(eps));
    }
    const Network& dec = st.gen_parts.at("decoder").net;
    ForwardResult d = forward(dec, g, code, &st.dropout_rng);
    out.image = d.out;
    out.parts.push_back({"decoder", d.params});
    return out;
  };
}

GeneratorForward make_inversion_forward() {
  return [](Graph& g, TrainState& st, const Tensor& x) {
    GenBuild out;
    const Network& gen = st.gen_parts.at("generator").net;
    ForwardResult r = forward(gen, g, g.leaf(x), &st.dropout_rng);
    out.image = r.out;
    out.parts.push_back({"generator", r.params});
    return out;
  };
}

AdamState make_adam(double lr) {
  AdamState s;
  s.cfg.lr = lr;
  return s;
}

// Eval-mode forward of one named part on a plain tensor.
Tensor eval_forward(TrainState& st, const std::string& role, const Tensor& x) {
  Network& net = st.gen_parts.at(role).net;
  const Network::Mode keep = net.mode;
  net.mode = Network::Mode::kEval;
  Graph g;
  Tensor out = g.value(forward(net, g, g.leaf(x)).out);
  net.mode = keep;
  return out;
}

// Binary texture classifier: stripes (label 0) against checkers (label 1).
void train_comparator_head(Network& net, const ExperimentConfig& ec) {
  TextureSet pool = make_textures(64, ec.data_image_size, ec.channels,
                                  ec.seed ^ fnv1a64("comparator-data"));
  std::vector<Tensor> images;
  std::vector<double> labels;
  for (size_t i = 0; i < pool.images.size(); ++i) {
    if (pool.labels[i] > 1) continue;
    images.push_back(center_crop(pool.images[i], ec.input_size));
    labels.push_back((double)pool.labels[i]);
  }
  AdamState opt;
  opt.cfg.lr = 1e-3;
  const int B = 8;
  size_t pos = 0;
  for (int it = 0; it < ec.comparator_train_iters; ++it) {
    std::vector<Tensor> batch;
    Tensor is_stripes = Tensor::zeros({B});
    for (int b = 0; b < B; ++b) {
      batch.push_back(images[pos]);
      is_stripes[b] = labels[pos] == 0.0 ? 1.0 : 0.0;
      pos = (pos + 1) % images.size();
    }
    Graph g;
    ForwardResult r = forward(net, g, g.leaf(stack_samples(batch)));
    Value p0 = g.slice_col(r.out, 0);  // P(stripes)
    Value m = g.leaf(is_stripes);
    Value p_correct = g.add(g.mul(m, p0),
                            g.mul(g.add_scalar(g.neg(m), 1.0), g.add_scalar(g.neg(p0), 1.0)));
    Value loss = g.neg(g.mean(g.log_clamped(p_correct, 1e-12)));
    g.backward(loss);
    adam_step(net.params, collect_grads(g, r.params), opt);
  }
}

MetricRow eval_metrics(Session& s, const Tensor& targets, Tensor* recon_out) {
  Tensor recon = session_reconstruct(s, targets);
  MetricRow row;
  row.label = s.ec.label;
  row.iteration = s.state.iteration;
  row.img_err_pct = normalized_error(split_samples(recon), split_samples(targets));
  Tensor f_out = phi_features(s.comparator, recon, s.metric_tap);
  Tensor f_tgt = phi_features(s.comparator, targets, s.metric_tap);
  row.feat_err_pct = normalized_error(split_samples(f_out), split_samples(f_tgt));
  if (recon_out != nullptr) *recon_out = std::move(recon);
  return row;
}

void write_pair_grid(const Tensor& top, const Tensor& bottom, int max_cols,
                     const std::string& path) {
  std::vector<ImageRecord> tops = split_batch(top);
  std::vector<ImageRecord> bottoms = split_batch(bottom);
  const int cols = std::min<int>(max_cols, (int)tops.size());
  std::vector<ImageRecord> cells;
  for (int i = 0; i < cols; ++i) cells.push_back(tops[(size_t)i]);
  for (int i = 0; i < cols; ++i) cells.push_back(bottoms[(size_t)i]);
  write_grid(cells, cols, path);
}

std::string sanitize_label(const std::string& label) {
  std::string out = label;
  for (char& c : out)
    if (!std::isalnum((unsigned char)c)) c = '_';
  return out;
}

}  // namespace

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "task",
      "run.label",
      "run.seed",
      "run.out",
      "run.iters",
      "run.eval_every",
      "run.checkpoint_every",
      "run.log_every",
      "run.resume",
      "run.allow_config_mismatch",
      "model.scale",
      "model.input_size",
      "model.decoder",
      "model.latent_channels",
      "data.source",
      "data.path",
      "data.count",
      "data.test_count",
      "data.image_size",
      "data.channels",
      "loss.lambda_feat",
      "loss.lambda_adv",
      "loss.lambda_img",
      "loss.image",
      "loss.log_mode",
      "comparator.kind",
      "comparator.tap",
      "comparator.train_iters",
      "metric.tap",
      "vae.kl_weight",
      "vae.sigma_clamp_zero",
      "vae.sample_count",
      "invert.tap",
      "optim.lr",
      "optim.gate_threshold",
      "optim.batch",
      "interp.steps",
      "reencode.iters",
  };
  return keys;
}

ExperimentConfig resolve_experiment(const Config& in) {
  Config cfg = in;
  ExperimentConfig ec;

  if (!cfg.has("task")) throw ConfigError("missing required key: task");
  ec.task = cfg.get_string("task");
  if (ec.task != "autoencoder" && ec.task != "vae" && ec.task != "inversion")
    throw ConfigError("task: expected autoencoder, vae, or inversion, got '" + ec.task + "'");

  ec.seed = (uint64_t)cfg.get_int_or("run.seed", 1);
  ec.label = cfg.get_string_or("run.label", ec.task);
  ec.out_dir = cfg.get_string_or("run.out", "");
  ec.iters = cfg.get_int_or("run.iters", 400);
  ec.checkpoint_every = cfg.get_int_or("run.checkpoint_every", 0);
  ec.log_every = cfg.get_int_or("run.log_every", 1);
  ec.resume = cfg.get_string_or("run.resume", "");
  ec.allow_config_mismatch = cfg.get_bool_or("run.allow_config_mismatch", false);

  ec.scale = cfg.get_double_or("model.scale", 0.125);
  ec.input_size = (int)cfg.get_int_or("model.input_size", 32);
  ec.decoder = cfg.get_string_or("model.decoder", ec.task == "vae" ? "generator" : "mirror");
  ec.latent_channels = (int)cfg.get_int_or("model.latent_channels", 8);

  ec.data_source = cfg.get_string_or("data.source", "textures");
  ec.data_path = cfg.get_string_or("data.path", "");
  ec.data_count = (int)cfg.get_int_or("data.count", 48);
  ec.test_count = (int)cfg.get_int_or("data.test_count", 16);
  ec.data_image_size = (int)cfg.get_int_or("data.image_size", 40);
  ec.channels = (int)cfg.get_int_or("data.channels", 3);

  ec.weights.lambda_feat = cfg.get_double_or("loss.lambda_feat", 1.0);
  ec.weights.lambda_adv = cfg.get_double_or("loss.lambda_adv", 0.0);
  ec.weights.lambda_img = cfg.get_double_or("loss.lambda_img", 1.0);
  ec.image_loss = cfg.get_string_or("loss.image", "se");
  const std::string log_mode = cfg.get_string_or("loss.log_mode", "train");

  ec.comparator_kind = cfg.get_string_or("comparator.kind", "random_tiny");
  ec.comparator_tap = cfg.get_string_or("comparator.tap", "conv2");
  ec.comparator_train_iters = (int)cfg.get_int_or("comparator.train_iters", 300);

  ec.kl_weight = cfg.get_double_or("vae.kl_weight", 0.05);
  ec.sigma_clamp_zero = cfg.get_bool_or("vae.sigma_clamp_zero", false);
  ec.sample_count = (int)cfg.get_int_or("vae.sample_count", 16);

  ec.invert_tap = cfg.get_string_or("invert.tap", "fc1");

  ec.lr = cfg.get_double_or("optim.lr", 2e-4);
  ec.gate_threshold = cfg.get_double_or("optim.gate_threshold", 0.1);
  ec.batch = (int)cfg.get_int_or("optim.batch", 0);

  ec.interp_steps = (int)cfg.get_int_or("interp.steps", 5);
  ec.reencode_iters = (int)cfg.get_int_or("reencode.iters", 8);

  if (ec.scale <= 0.0 || ec.scale > 1.0) throw ConfigError("model.scale: must be in (0, 1]");
  if (ec.input_size < 8 || ec.input_size % 8 != 0)
    throw ConfigError("model.input_size: must be a positive multiple of 8");
  if (ec.task == "inversion" && !power_of_two(ec.input_size / 4))
    throw ConfigError("model.input_size: the inversion generator needs 4 * 2^k (8, 16, 32, ...)");
  if (ec.latent_channels < 1) throw ConfigError("model.latent_channels: must be >= 1");
  if (ec.decoder != "mirror" && ec.decoder != "generator")
    throw ConfigError("model.decoder: expected mirror or generator, got '" + ec.decoder + "'");

  if (ec.data_source != "textures" && ec.data_source != "directory")
    throw ConfigError("data.source: expected textures or directory, got '" + ec.data_source + "'");
  if (ec.data_source == "directory" && ec.data_path.empty())
    throw ConfigError("data.path: required when data.source = directory");
  if (ec.channels != 1 && ec.channels != 3) throw ConfigError("data.channels: must be 1 or 3");
  if (ec.data_image_size < ec.input_size)
    throw ConfigError("data.image_size: must be >= model.input_size");
  if (ec.test_count < 2) throw ConfigError("data.test_count: need at least 2 test images");

  if (ec.weights.lambda_feat < 0 || ec.weights.lambda_adv < 0 || ec.weights.lambda_img < 0)
    throw ConfigError("loss weights: must be >= 0");
  if (ec.weights.lambda_feat == 0 && ec.weights.lambda_adv == 0 && ec.weights.lambda_img == 0)
    throw ConfigError("loss weights: at least one must be positive");
  if (ec.image_loss != "se" && ec.image_loss != "l1")
    throw ConfigError("loss.image: expected se or l1, got '" + ec.image_loss + "'");
  if (log_mode == "train")
    ec.log_mode = LogMode::kTrain;
  else if (log_mode == "strict")
    ec.log_mode = LogMode::kStrict;
  else
    throw ConfigError("loss.log_mode: expected train or strict, got '" + log_mode + "'");

  if (ec.comparator_kind != "identity" && ec.comparator_kind != "random_tiny" &&
      ec.comparator_kind != "trained_tiny")
    throw ConfigError("comparator.kind: expected identity, random_tiny, or trained_tiny, got '" +
                      ec.comparator_kind + "'");
  if (ec.comparator_kind == "trained_tiny" && ec.comparator_train_iters < 1)
    throw ConfigError("comparator.train_iters: must be >= 1");
  if (ec.comparator_kind == "identity") {
    // the identity feature network exposes exactly one tap
    ec.comparator_tap = "input";
    ec.invert_tap = "input";
    cfg.set("comparator.tap", "input");
    cfg.set("invert.tap", "input");
  }
  ec.metric_tap = cfg.get_string_or(
      "metric.tap", ec.task == "inversion" ? ec.invert_tap : ec.comparator_tap);

  if (ec.kl_weight < 0) throw ConfigError("vae.kl_weight: must be >= 0");
  if (ec.sigma_clamp_zero && ec.kl_weight != 0.0)
    throw ConfigError("vae.sigma_clamp_zero: requires vae.kl_weight = 0");
  if (ec.sample_count < 1) throw ConfigError("vae.sample_count: must be >= 1");

  if (ec.lr <= 0) throw ConfigError("optim.lr: must be > 0");
  if (ec.gate_threshold < 0) throw ConfigError("optim.gate_threshold: must be >= 0");
  if (ec.iters < 0) throw ConfigError("run.iters: must be >= 0");
  if (ec.checkpoint_every < 0) throw ConfigError("run.checkpoint_every: must be >= 0");
  if (ec.log_every < 0) throw ConfigError("run.log_every: must be >= 0");
  if (ec.batch < 0) throw ConfigError("optim.batch: must be >= 0 (0 picks round(64 * scale))");
  if (ec.batch == 0) {
    ec.batch = std::max(1, (int)std::lround(64.0 * ec.scale));
    cfg.set_int("optim.batch", ec.batch);
  }
  if (ec.data_source == "textures" && ec.data_count < ec.batch)
    throw ConfigError("data.count: must cover at least one batch of " + std::to_string(ec.batch));

  ec.eval_every = cfg.get_int_or(
      "run.eval_every",
      ec.data_source == "textures" ? std::max(1, ec.data_count / ec.batch) : 0);
  if (ec.eval_every < 0) throw ConfigError("run.eval_every: must be >= 0");

  if (ec.interp_steps < 2) throw ConfigError("interp.steps: must be >= 2");
  if (ec.reencode_iters < 1) throw ConfigError("reencode.iters: must be >= 1");

  cfg.require_known(known_config_keys());
  ec.config_hash = cfg.trajectory_hash();
  ec.resolved = cfg;
  return ec;
}

DataBundle load_experiment_data(const ExperimentConfig& ec) {
  DataBundle d;
  if (ec.data_source == "textures") {
    TextureSet train = make_textures(ec.data_count, ec.data_image_size, ec.channels, ec.seed);
    TextureSet test = make_textures(ec.test_count, ec.data_image_size, ec.channels,
                                    ec.seed ^ fnv1a64("test-data"));
    d.train = std::move(train.images);
    d.test.reserve(test.images.size());
    for (const Tensor& img : test.images) d.test.push_back(center_crop(img, ec.input_size));
    return d;
  }
  std::vector<ImageRecord> records =
      load_dataset(ec.data_path, ec.data_image_size, ec.data_image_size);
  for (size_t i = 0; i < records.size(); ++i)
    if (records[i].channels != ec.channels)
      throw ConfigError("data.path: image " + std::to_string(i) + " has " +
                        std::to_string(records[i].channels) + " channels, config expects " +
                        std::to_string(ec.channels));
  if ((int)records.size() < ec.test_count + ec.batch)
    throw ConfigError("data.path: need at least test_count + batch = " +
                      std::to_string(ec.test_count + ec.batch) + " images, found " +
                      std::to_string(records.size()));
  const size_t n_train = records.size() - (size_t)ec.test_count;
  for (size_t i = 0; i < records.size(); ++i) {
    Tensor t = to_tensor(records[i]);
    if (i < n_train)
      d.train.push_back(std::move(t));
    else
      d.test.push_back(center_crop(t, ec.input_size));
  }
  return d;
}

Network build_comparator(const ExperimentConfig& ec) {
  Network net;
  if (ec.comparator_kind == "identity") {
    NetworkSpec spec;
    spec.name = "identity";
    spec.scale = 1.0;
    spec.input_shape = {ec.channels, ec.input_size, ec.input_size};
    net = build(spec, InitScheme::kGlorotUniform, ec.seed);
  } else {
    PresetOptions po;
    po.scale = ec.scale;
    po.image_size = ec.input_size;
    po.in_channels = ec.channels;
    if (ec.comparator_kind == "trained_tiny") po.comparator_classes = 2;
    net = build(preset_specs(po).at("comparator_tiny"), InitScheme::kGlorotUniform, ec.seed);
    if (ec.comparator_kind == "trained_tiny") train_comparator_head(net, ec);
  }
  net.mode = Network::Mode::kEval;
  net.trainable = false;  // a frozen feature extractor from here on
  return net;
}

Tensor phi_features(const Network& comparator, const Tensor& batch, const std::string& tap) {
  Graph g;
  return g.value(comparator_features(comparator, g, g.leaf(batch), tap));
}

Session make_session(const ExperimentConfig& ec) {
  Session s;
  s.ec = ec;
  s.invert = ec.task == "inversion";
  s.metric_tap = ec.metric_tap;
  s.data = load_experiment_data(ec);
  s.comparator = build_comparator(ec);

  TrainState& st = s.state;
  st.gate_threshold = ec.gate_threshold;
  st.dropout_rng = RngStream::derive(ec.seed, "dropout");
  st.eps_rng = RngStream::derive(ec.seed, "eps");

  PresetOptions po;
  po.scale = ec.scale;
  po.image_size = ec.input_size;
  po.in_channels = ec.channels;
  po.latent_channels = ec.latent_channels;

  if (s.invert) {
    Tensor probe = Tensor::zeros({1, ec.channels, ec.input_size, ec.input_size});
    const int feature_dim = phi_features(s.comparator, probe, ec.invert_tap).dim(1);
    po.generator_input_dim = feature_dim;
    po.generator_output = ec.input_size;
    po.discr_side = true;
    po.side_input_dim = feature_dim;
    auto specs = preset_specs(po);
    st.gen_parts["generator"] = {
        build(specs.at("generator_fc"), InitScheme::kGlorotUniform, ec.seed), make_adam(ec.lr)};
    s.gen_fn = make_inversion_forward();
  } else {
    auto specs = preset_specs(po);
    st.gen_parts["encoder"] = {
        build(specs.at("autoencoder_enc"), InitScheme::kGlorotUniform, ec.seed), make_adam(ec.lr)};
    const NetworkSpec& dec =
        ec.decoder == "generator" ? specs.at("generator_conv") : specs.at("autoencoder_dec");
    st.gen_parts["decoder"] = {build(dec, InitScheme::kGlorotUniform, ec.seed), make_adam(ec.lr)};
    const bool use_sigma = ec.task == "vae" && !ec.sigma_clamp_zero;
    if (use_sigma) {
      NetworkSpec head;
      head.name = "sigma_head";
      head.scale = ec.scale;
      head.input_shape = {scaled_channels(64, ec.scale), ec.input_size / 8, ec.input_size / 8};
      head.layers = {LayerSpec::conv(ec.latent_channels, 3, 1, 8, 8, Act::kLinear)};
      st.gen_parts["sigma"] = {build(head, InitScheme::kGlorotUniform, ec.seed),
                               make_adam(ec.lr)};
    }
    s.gen_fn = make_enc_dec_forward(use_sigma, ec.task == "vae" ? ec.kl_weight : 0.0);
  }

  if (ec.weights.lambda_adv > 0) {
    auto specs = preset_specs(po);
    st.discr = {build(specs.at("discriminator"), InitScheme::kGlorotUniform, ec.seed),
                make_adam(ec.lr)};
    st.has_discr = true;
  }
  return s;
}

Tensor session_input(Session& s, const Tensor& targets) {
  if (s.invert) return phi_features(s.comparator, targets, s.ec.invert_tap);
  return eval_forward(s.state, "encoder", targets);
}

Tensor session_generate(Session& s, const Tensor& x) {
  return eval_forward(s.state, s.invert ? "generator" : "decoder", x);
}

Tensor session_reconstruct(Session& s, const Tensor& targets) {
  return session_generate(s, session_input(s, targets));
}

Tensor session_sample(Session& s, int count) {
  if (s.invert) throw std::logic_error("session_sample: inversion has no prior to sample");
  RngStream rng = RngStream::derive(s.ec.seed, "sample");
  std::vector<int> shape = s.state.gen_parts.at("decoder").net.spec.input_shape;
  shape.insert(shape.begin(), count);
  return session_generate(s, Tensor::gaussian(shape, rng));
}

MetricTable run_session(Session& s, RunArtifacts* artifacts) {
  const ExperimentConfig& ec = s.ec;
  const bool has_out = !ec.out_dir.empty();
  fs::path out(ec.out_dir);
  if (has_out) {
    fs::create_directories(out);
    write_text_atomic((out / "run.txt").string(), ec.resolved.echo());
  }

  TrainStepOptions opts;
  opts.weights = ec.weights;
  opts.comparator = &s.comparator;
  opts.tap = ec.comparator_tap;
  opts.log_mode = ec.log_mode;
  opts.l1_image = ec.image_loss == "l1";

  DataCursor cursor;
  cursor.shuffle_rng = RngStream::derive(ec.seed, "shuffle");
  cursor.crop_rng = RngStream::derive(ec.seed, "crop");
  if (!ec.resume.empty()) {
    CheckpointData cd = load_checkpoint(ec.resume, ec.config_hash, ec.allow_config_mismatch);
    restore(cd, s.state, cursor);
  }
  const int64_t start = s.state.iteration;

  std::ofstream losses;
  if (has_out) {
    losses.open(out / "losses.csv", std::ios::binary | std::ios::trunc);
    if (!losses) throw std::runtime_error("cannot open for writing: " + (out / "losses.csv").string());
    losses << "iteration,total,feat,adv,img,discr,kl,gate_ratio,gate_update\n";
  }

  MetricTable table;
  const Tensor targets = stack_samples(s.data.test);
  if (artifacts != nullptr) artifacts->targets = targets;
  Tensor last_recon;

  try {
    for (int64_t it = start + 1; it <= ec.iters; ++it) {
      Tensor y = draw_batch(s, cursor);
      Tensor x = s.invert ? phi_features(s.comparator, y, ec.invert_tap) : y;
      opts.side = s.invert && ec.weights.lambda_adv > 0 ? &x : nullptr;
      LossReport rep = train_step(s.state, x, y, s.gen_fn, opts);
      if (artifacts != nullptr) artifacts->reports.push_back(rep);
      if (losses.is_open() && ec.log_every > 0 && (it % ec.log_every == 0 || it == ec.iters)) {
        losses << it << ',' << fmt_double(rep.total) << ',' << fmt_double(rep.feat) << ','
               << fmt_double(rep.adv) << ',' << fmt_double(rep.img) << ','
               << fmt_double(rep.discr) << ',' << fmt_double(rep.kl) << ','
               << fmt_double(rep.gate_ratio) << ',' << (rep.gate_update ? 1 : 0) << '\n';
      }
      if (ec.eval_every > 0 && it % ec.eval_every == 0 && it != ec.iters)
        table.rows.push_back(eval_metrics(s, targets, nullptr));
      if (has_out && ec.checkpoint_every > 0 && it % ec.checkpoint_every == 0)
        save_checkpoint((out / "checkpoint.bin").string(),
                        snapshot(s.state, ec.config_hash, cursor));
    }
  } catch (const DivergenceError&) {
    if (losses.is_open()) losses.flush();
    throw;  // the last periodic checkpoint stays on disk
  }

  table.rows.push_back(eval_metrics(s, targets, &last_recon));
  if (artifacts != nullptr) artifacts->final_recon = last_recon;

  Tensor samples;
  if (ec.task == "vae" && (has_out || artifacts != nullptr)) {
    samples = session_sample(s, ec.sample_count);
    if (artifacts != nullptr) artifacts->vae_samples = samples;
  }

  if (has_out) {
    write_metrics_csv((out / "metrics.csv").string(), table);
    save_checkpoint((out / "checkpoint.bin").string(), snapshot(s.state, ec.config_hash, cursor));
    write_pair_grid(targets, last_recon, 8, (out / "recon.ppm").string());
    if (ec.task == "vae")
      write_grid(split_batch(samples), std::min(8, ec.sample_count),
                 (out / "samples.ppm").string());
  }
  return table;
}

MetricTable run_experiment(const ExperimentConfig& ec, RunArtifacts* artifacts) {
  Session s = make_session(ec);
  return run_session(s, artifacts);
}

namespace {

MetricTable run_checked(const ExperimentConfig& ec, const char* expected_task,
                        RunArtifacts* artifacts) {
  if (ec.task != expected_task)
    throw ConfigError(std::string("task: expected ") + expected_task + ", got '" + ec.task + "'");
  return run_experiment(ec, artifacts);
}

}  // namespace

MetricTable run_autoencoder(const ExperimentConfig& ec, RunArtifacts* artifacts) {
  return run_checked(ec, "autoencoder", artifacts);
}

MetricTable run_vae(const ExperimentConfig& ec, RunArtifacts* artifacts) {
  return run_checked(ec, "vae", artifacts);
}

MetricTable run_inversion(const ExperimentConfig& ec, RunArtifacts* artifacts) {
  return run_checked(ec, "inversion", artifacts);
}

MetricTable ablation_matrix(const ExperimentConfig& ec) {
  if (ec.weights.lambda_feat <= 0 || ec.weights.lambda_adv <= 0 || ec.weights.lambda_img <= 0)
    throw ConfigError("ablation: all three loss weights must be positive in the base config");

  struct Mask {
    const char* label;
    bool feat, adv, img;
  };
  const Mask masks[] = {
      {"full", true, true, true},         {"-L_img", true, true, false},
      {"-L_feat", false, true, true},     {"-L_adv", true, false, true},
      {"-L_feat-L_adv", false, false, true},
  };

  const bool has_out = !ec.out_dir.empty();
  fs::path out(ec.out_dir);
  if (has_out) {
    fs::create_directories(out);
    write_text_atomic((out / "run.txt").string(), ec.resolved.echo());
  }

  MetricTable combined;
  Tensor targets;
  std::vector<Tensor> recon_rows;
  for (const Mask& m : masks) {
    Config sub = ec.resolved;
    sub.set_double("loss.lambda_feat", m.feat ? ec.weights.lambda_feat : 0.0);
    sub.set_double("loss.lambda_adv", m.adv ? ec.weights.lambda_adv : 0.0);
    sub.set_double("loss.lambda_img", m.img ? ec.weights.lambda_img : 0.0);
    sub.set("run.label", m.label);
    sub.set("run.resume", "");
    sub.set("run.out", has_out ? (out / sanitize_label(m.label)).string() : "");
    ExperimentConfig sec = resolve_experiment(sub);
    RunArtifacts art;
    MetricTable t = run_experiment(sec, &art);
    combined.rows.push_back(t.rows.back());
    if (targets.numel() == 0) targets = art.targets;
    recon_rows.push_back(art.final_recon);
  }

  if (has_out) {
    write_metrics_csv((out / "metrics.csv").string(), combined);
    const int cols = std::min(8, targets.dim(0));
    std::vector<ImageRecord> cells;
    std::vector<ImageRecord> target_cells = split_batch(targets);
    for (int i = 0; i < cols; ++i) cells.push_back(target_cells[(size_t)i]);
    for (const Tensor& recon : recon_rows) {
      std::vector<ImageRecord> row = split_batch(recon);
      for (int i = 0; i < cols; ++i) cells.push_back(row[(size_t)i]);
    }
    write_grid(cells, cols, (out / "ablation.ppm").string());
  }
  return combined;
}

std::vector<Tensor> iterative_reencode(const std::function<Tensor(const Tensor&)>& generate,
                                       const std::function<Tensor(const Tensor&)>& encode,
                                       const Tensor& batch, int iters) {
  if (iters < 1) throw std::invalid_argument("iterative_reencode: iters must be >= 1");
  std::vector<Tensor> out;
  out.reserve((size_t)iters);
  Tensor x = batch;
  for (int k = 0; k < iters; ++k) {
    x = generate(encode(x));
    out.push_back(x);
  }
  return out;
}

std::vector<Tensor> interpolate_features(const Tensor& a, const Tensor& b, int steps) {
  if (!a.same_shape(b))
    throw std::invalid_argument("interpolate_features: shapes differ: " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
  if (steps < 2) throw std::invalid_argument("interpolate_features: steps must be >= 2");
  std::vector<Tensor> rows;
  rows.reserve((size_t)steps);
  for (int i = 0; i < steps; ++i) {
    const double t = (double)i / (double)(steps - 1);
    Tensor r = a;
    for (size_t j = 0; j < r.data.size(); ++j) r.data[j] = (1.0 - t) * a.data[j] + t * b.data[j];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<Tensor> split_samples(const Tensor& batch) {
  if (batch.rank() < 2) throw std::invalid_argument("split_samples: need a batch dimension");
  const int n = batch.dim(0);
  const std::vector<int> shape(batch.shape.begin() + 1, batch.shape.end());
  const int64_t chunk = batch.numel() / n;
  std::vector<Tensor> out;
  out.reserve((size_t)n);
  for (int i = 0; i < n; ++i) {
    Tensor t = Tensor::zeros(shape);
    std::copy_n(batch.data.begin() + (int64_t)i * chunk, chunk, t.data.begin());
    out.push_back(std::move(t));
  }
  return out;
}

Tensor stack_samples(const std::vector<Tensor>& samples) {
  if (samples.empty()) throw std::invalid_argument("stack_samples: no samples");
  std::vector<int> shape;
  shape.push_back((int)samples.size());
  shape.insert(shape.end(), samples[0].shape.begin(), samples[0].shape.end());
  Tensor out = Tensor::zeros(shape);
  const int64_t chunk = samples[0].numel();
  for (size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].same_shape(samples[0]))
      throw std::invalid_argument("stack_samples: shape mismatch at sample " + std::to_string(i));
    std::copy_n(samples[i].data.begin(), chunk, out.data.begin() + (int64_t)i * chunk);
  }
  return out;
}

}  // namespace psim
