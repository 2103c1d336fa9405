#pragma once

// Adam optimizer and the adversarial training step: discriminator update
// first (gated by the loss ratio), then the generator update, each on a
// fresh forward pass.

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "psim/graph.hpp"
#include "psim/losses.hpp"
#include "psim/nn.hpp"
#include "psim/rng.hpp"
#include "psim/tensor.hpp"

namespace psim {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};

struct AdamSlot {
  Tensor m;
  Tensor v;
};

struct AdamState {
  AdamConfig cfg{};
  int64_t step = 0;                      // completed update steps
  std::map<std::string, AdamSlot> slots;  // created lazily per parameter
};

// One bias-corrected Adam update, in place. Parameters without a gradient
// entry keep their value and moments. A non-finite gradient aborts the whole
// step (no parameter is touched) naming the parameter and element.
void adam_step(std::map<std::string, Tensor>& params,
               const std::map<std::string, Tensor>& grads, AdamState& state);

// Gradients of a forward pass's parameter leaves, keyed by name. Parameters
// that received no gradient are omitted.
std::map<std::string, Tensor> collect_grads(
    const Graph& g, const std::vector<std::pair<std::string, Value>>& params);

struct GateDecision {
  bool update = true;    // false: pause discriminator updates this step
  bool warning = false;  // non-positive adversarial loss forced the gate open
  double ratio = 0.0;
};

// Pause discriminator updates iff loss_discr / loss_adv < threshold (strict;
// the exact threshold still updates). Re-evaluated every step.
GateDecision gate_discriminator(double loss_discr, double loss_adv, double threshold = 0.1);

struct OptimNet {
  Network net;
  AdamState opt;
};

struct TrainState {
  std::map<std::string, OptimNet> gen_parts;  // trainable generator-side networks, by role
  OptimNet discr;
  bool has_discr = false;
  double gate_threshold = 0.1;
  bool discriminator_active = true;  // last gate decision
  int64_t iteration = 0;             // completed train steps
  RngStream dropout_rng{0};
  RngStream eps_rng{0};
};

// What one generator-side forward pass produced.
struct PartForward {
  std::string role;  // key into TrainState::gen_parts
  std::vector<std::pair<std::string, Value>> params;
};
struct GenBuild {
  Value image{};       // generated image batch
  Value extra_loss{};  // optional penalty term (e.g. the KL term); may be invalid
  double extra_weight = 0.0;
  std::vector<PartForward> parts;
};

// Builds the generated image for a batch on the given graph, drawing any
// randomness from the state's streams.
using GeneratorForward = std::function<GenBuild(Graph&, TrainState&, const Tensor& x)>;

struct TrainStepOptions {
  LossWeights weights{};
  const Network* comparator = nullptr;  // required when weights.lambda_feat > 0
  std::string tap;
  LogMode log_mode = LogMode::kTrain;
  bool l1_image = false;         // absolute-difference image term instead of squared
  const Tensor* side = nullptr;  // optional discriminator side input, one row per sample
};

// Thrown when the total loss goes non-finite; carries the offending report.
struct DivergenceError : std::runtime_error {
  LossReport report;
  explicit DivergenceError(const LossReport& r);
};

// One training step on batch (x, y): when the adversarial weight is active,
// run the discriminator objective on (real, generated) pairs and update it if
// the gate allows; then update the generator under the composite objective.
// The generator is always updated; gate pauses affect only the discriminator.
LossReport train_step(TrainState& state, const Tensor& x, const Tensor& y,
                      const GeneratorForward& gen_forward, const TrainStepOptions& opt);

}  // namespace psim
