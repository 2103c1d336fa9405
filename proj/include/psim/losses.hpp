#pragma once

// Loss terms and their composition. Reduction convention: sum within each
// sample, mean over the batch (dim 0 for rank >= 2 tensors), so weight
// settings are batch-size independent. Rank-1 inputs to the image losses are
// treated as a single sample; rank-1 inputs to the adversarial losses are the
// per-sample probability vector.

#include <string>

#include "psim/graph.hpp"
#include "psim/nn.hpp"

namespace psim {

struct LossWeights {
  double lambda_feat = 0.0;
  double lambda_adv = 0.0;
  double lambda_img = 0.0;

  void validate() const;  // all nonnegative, at least one positive
};

struct LossReport {
  double total = 0.0;
  double feat = 0.0;
  double adv = 0.0;
  double img = 0.0;
  double discr = 0.0;
  double kl = 0.0;
  double gate_ratio = 0.0;
  bool gate_update = true;
  bool gate_warning = false;  // set when loss_adv <= 0 forced the gate open
};

// Strict mode raises a domain error when a log argument is not positive;
// train mode clamps the argument at 1e-12 instead.
enum class LogMode { kStrict, kTrain };

Value loss_img_se(Graph& g, Value gen, Value target);
Value loss_img_l1(Graph& g, Value gen, Value target);

// Squared feature distance through the comparator at the named tap. The
// target branch is detached: gradients flow into gen_img only.
Value loss_feat(Graph& g, Value gen_img, Value target_img, const Network& comp,
                const std::string& tap);

// d_real/d_fake are real-class probabilities, one per sample.
Value loss_discr(Graph& g, Value d_real, Value d_fake, LogMode mode = LogMode::kStrict);
Value loss_adv(Graph& g, Value d_fake, LogMode mode = LogMode::kStrict);

// lambda_feat * feat + lambda_adv * adv + lambda_img * img. Terms whose
// weight is zero may be passed as invalid Values and are skipped.
Value composite_loss(Graph& g, const LossWeights& w, Value feat, Value adv, Value img);

Value reparameterize(Graph& g, Value mu, Value sigma, Value eps);

// 1/2 (|mu|^2 + |sigma|^2 - <log sigma^2, 1>) per sample, mean over batch.
Value kl_loss(Graph& g, Value mu, Value sigma);

// Scalar conveniences over plain tensors (strict mode).
double loss_img_se(const Tensor& gen, const Tensor& target);
double loss_discr(const Tensor& d_real, const Tensor& d_fake);
double loss_adv(const Tensor& d_fake);
double kl_loss(const Tensor& mu, const Tensor& sigma);

}  // namespace psim
