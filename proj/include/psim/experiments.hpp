#pragma once

// The three applications (autoencoder, variational autoencoder, feature
// inversion), their shared training loop, the normalized-error evaluation,
// and the analysis procedures: ablation grid, iterative re-encoding, and
// feature interpolation.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "psim/config.hpp"
#include "psim/losses.hpp"
#include "psim/metrics.hpp"
#include "psim/nn.hpp"
#include "psim/optim.hpp"
#include "psim/tensor.hpp"

namespace psim {

// A config resolved to concrete values: every field has been defaulted,
// validated, and written back into `resolved` so the echo is complete.
struct ExperimentConfig {
  std::string task;   // "autoencoder" | "vae" | "inversion"
  std::string label;  // row label for metric reports
  uint64_t seed = 1;
  std::string out_dir;  // empty: no artifacts are written
  int64_t iters = 400;
  int64_t eval_every = 0;        // metric rows during training; 0 = final only
  int64_t checkpoint_every = 0;  // 0 = final checkpoint only
  int64_t log_every = 1;         // loss-row cadence
  std::string resume;            // checkpoint path restored before training
  bool allow_config_mismatch = false;

  double scale = 0.125;
  int input_size = 32;
  std::string decoder = "mirror";  // "mirror" | "generator"
  int latent_channels = 8;         // bottleneck channels before scaling

  std::string data_source = "textures";  // "textures" | "directory"
  std::string data_path;
  int data_count = 48;  // generated training images (textures source)
  int test_count = 16;
  int data_image_size = 40;  // source side; training crops input_size patches
  int channels = 3;

  LossWeights weights{1.0, 0.0, 1.0};
  std::string image_loss = "se";  // "se" | "l1"
  LogMode log_mode = LogMode::kTrain;

  std::string comparator_kind = "random_tiny";  // "identity" | "random_tiny" | "trained_tiny"
  std::string comparator_tap = "conv2";         // feature-loss tap
  int comparator_train_iters = 300;             // trained_tiny head budget

  double kl_weight = 0.05;
  bool sigma_clamp_zero = false;  // sigma = 0: the sample collapses to the mean

  std::string invert_tap = "fc1";  // representation the inversion generator receives
  std::string metric_tap;          // feature space of the reported error

  double lr = 2e-4;
  double gate_threshold = 0.1;
  int batch = 0;  // resolved to round(64 * scale), at least 1

  int interp_steps = 5;
  int reencode_iters = 8;
  int sample_count = 16;

  uint64_t config_hash = 0;
  Config resolved;
};

// Reads, defaults, and validates a key=value config. Unknown keys are
// rejected; derived values (batch, taps, cadence) are written back so the
// echoed config round-trips to the same resolution and hash.
ExperimentConfig resolve_experiment(const Config& cfg);

const std::vector<std::string>& known_config_keys();

struct DataBundle {
  std::vector<Tensor> train;  // {C, source, source}
  std::vector<Tensor> test;   // {C, input, input}, center-cropped
};

DataBundle load_experiment_data(const ExperimentConfig& ec);

// identity (tap "input"), random_tiny, or trained_tiny (a stripes-vs-checker
// classifier head trained on its own texture set). Deterministic in ec.seed;
// returned frozen (eval mode, trainable = false).
Network build_comparator(const ExperimentConfig& ec);

// Flattened eval-mode activations at the tap, one row per sample: {N, F}.
Tensor phi_features(const Network& comparator, const Tensor& batch, const std::string& tap);

// A fully wired run: data, feature network, model parts, and the generator
// closure the training step drives. The closures read parts out of `state`
// by role, so checkpoint restores and freezes take effect transparently.
struct Session {
  ExperimentConfig ec;
  DataBundle data;
  Network comparator;
  TrainState state;
  GeneratorForward gen_fn;
  bool invert = false;  // generator input is phi(image), not the image
  std::string metric_tap;
};

Session make_session(const ExperimentConfig& ec);

// What the generator consumes for a target batch: the image itself is the
// encoder input for autoencoder/vae (this returns the mean code), and the
// flattened comparator features at invert_tap for inversion.
Tensor session_input(Session& s, const Tensor& targets);

// Decodes generator inputs (codes or feature rows) to images, eval mode.
Tensor session_generate(Session& s, const Tensor& x);

// generate(input(targets)): the deterministic reconstruction used by metrics.
Tensor session_reconstruct(Session& s, const Tensor& targets);

// Decodes `count` standard-normal codes drawn from the "sample" stream.
Tensor session_sample(Session& s, int count);

// Everything a finished run leaves behind in memory, for tests and the CLI.
struct RunArtifacts {
  std::vector<LossReport> reports;  // one per training step taken
  Tensor targets;                   // test targets {N, C, S, S}
  Tensor final_recon;               // reconstructions of targets
  Tensor vae_samples;               // decoded prior draws (vae only)
};

// Trains (resuming from ec.resume if set), evaluates on the test split, and
// writes losses.csv / metrics.csv / run.txt / checkpoint.bin / image grids
// into ec.out_dir. Returns the metric rows. A non-finite total loss raises
// DivergenceError; the last periodic checkpoint stays on disk.
MetricTable run_session(Session& s, RunArtifacts* artifacts = nullptr);

MetricTable run_autoencoder(const ExperimentConfig& ec, RunArtifacts* artifacts = nullptr);
MetricTable run_vae(const ExperimentConfig& ec, RunArtifacts* artifacts = nullptr);
MetricTable run_inversion(const ExperimentConfig& ec, RunArtifacts* artifacts = nullptr);
MetricTable run_experiment(const ExperimentConfig& ec, RunArtifacts* artifacts = nullptr);

// Five weight masks (full, -L_img, -L_feat, -L_adv, -L_feat-L_adv) run with
// a shared seed and budget: one final metric row per mask, plus a combined
// target/reconstruction grid in ec.out_dir. Requires all three base weights
// positive so every mask removes something real.
MetricTable ablation_matrix(const ExperimentConfig& ec);

// x0 = batch; x_{k+1} = generate(encode(x_k)); returns [x1 .. x_iters].
std::vector<Tensor> iterative_reencode(const std::function<Tensor(const Tensor&)>& generate,
                                       const std::function<Tensor(const Tensor&)>& encode,
                                       const Tensor& batch, int iters);

// (1-t)*a + t*b for `steps` evenly spaced t in [0, 1]; endpoints are exact.
std::vector<Tensor> interpolate_features(const Tensor& a, const Tensor& b, int steps);

// Per-sample views of a batch: {N, ...} -> N tensors of shape {...}.
std::vector<Tensor> split_samples(const Tensor& batch);
Tensor stack_samples(const std::vector<Tensor>& samples);

}  // namespace psim
