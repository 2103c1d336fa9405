#pragma once

// Layer/network abstraction: shape-faithful builders for the reference
// architectures at configurable channel scale, parameter initialization,
// and forward passes with named intermediate taps.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "psim/graph.hpp"
#include "psim/tensor.hpp"

namespace psim {

enum class LayerKind { kConv, kUconv, kFc, kPool, kReshape, kDropout, kActivation, kSoftmax };
enum class PoolKind { kMax, kGlobalAvg };
enum class Direction { kNone, kDown, kUp };
enum class Act { kLrelu, kLinear };

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  int out_channels = 0;  // conv/uconv/fc width; reshape target channels
  int kernel = 0;
  int stride = 1;
  Direction direction = Direction::kNone;
  Act activation = Act::kLrelu;  // applied inline after conv/uconv/fc
  double alpha = 0.3;
  PoolKind pool = PoolKind::kMax;
  double rate = 0.5;      // dropout
  int ref_in = 0;         // reference-table spatial sizes driving the padding solve
  int ref_out = 0;
  int tie_reshape = 0;    // fc width = tie_reshape * scaled(out_channels), keeps reshape exact
  bool scale_exempt = false;  // classifier heads and image outputs keep their raw width

  static LayerSpec conv(int ch, int k, int s, int rin, int rout, Act a = Act::kLrelu);
  static LayerSpec uconv(int ch, int k, int rin, int rout, Act a = Act::kLrelu);
  static LayerSpec fc(int width, Act a = Act::kLrelu);
  static LayerSpec fc_tied(int channels, int multiple, Act a = Act::kLrelu);
  static LayerSpec max_pool(int k, int s);
  static LayerSpec global_pool();
  static LayerSpec reshape_to(int channels);
  static LayerSpec dropout(double rate);
  static LayerSpec softmax();
};

// Optional feature side-input to the discriminator: the features pass through
// fc layers and the result is concatenated with the pooled activations.
struct SideBranch {
  bool enabled = false;
  int input_dim = 0;
  std::vector<int> widths = {1024, 512};
};

struct NetworkSpec {
  std::string name;
  std::vector<int> input_shape;  // per sample: {C, H, W} or {F}
  std::vector<LayerSpec> layers;
  double scale = 1.0;  // channel multiplier, rounded to >= 1
  SideBranch side;
};

struct Network {
  NetworkSpec spec;
  std::map<std::string, Tensor> params;  // ordered: deterministic iteration
  std::vector<std::string> layer_names;  // per spec row; "" for parameter-free rows
  enum class Mode { kTrain, kEval };
  Mode mode = Mode::kEval;
  bool trainable = true;  // forward records params as requires-grad leaves
};

enum class InitScheme { kGlorotUniform, kZeros };

// Channel count after scaling, never below 1.
int scaled_channels(int raw, double scale);

// Output spatial size for one conv row given the actual input extent, by
// proportionality to the reference-table sizes.
int target_extent(int ref_in, int ref_out, int in);

// Per-row input/output shapes ({C,H,W} or {F}) computed from spec.input_shape.
// Throws naming the first offending layer if the spec does not chain.
struct LayerShape {
  std::vector<int> in, out;
};
std::vector<LayerShape> chain_shapes(const NetworkSpec& spec);

// Allocates and initializes parameters; validates that the spec shape-chains
// from spec.input_shape. Deterministic: each parameter draws from its own
// named stream so unrelated networks never perturb each other.
Network build(const NetworkSpec& spec, InitScheme init, uint64_t seed);

struct ForwardResult {
  Value out;
  std::vector<std::pair<std::string, Value>> taps;    // "input" plus one per parametric layer
  std::vector<std::pair<std::string, Value>> params;  // leaf recorded per parameter

  bool has_tap(const std::string& name) const;
  Value tap(const std::string& name) const;  // unknown tap -> error listing taps
};

// Runs the network inside g. x is [N, ...input_shape]. dropout_rng is required
// in train mode when the spec contains dropout rows. side is the optional
// feature side-input [N, side.input_dim].
ForwardResult forward(const Network& net, Graph& g, Value x, RngStream* dropout_rng = nullptr,
                      Value side = Value{},
                      const std::vector<std::pair<std::string, Value>>* reuse_params = nullptr);

struct PresetOptions {
  double scale = 1.0;
  int image_size = 64;
  int in_channels = 3;
  int latent_channels = 8;     // bottleneck channel count before scaling
  int generator_output = 0;    // 0 -> image_size
  int generator_input_dim = 0; // fc-generator input width; 0 -> scaled(4096)
  int latent_spatial = 0;      // conv-generator input extent; 0 -> image_size/8
  int generator_in_channels = 0;  // conv-generator input channels; 0 -> scaled(latent)
  bool discr_side = false;
  int side_input_dim = 0;
  int comparator_classes = 0;  // >0 appends a classifier head + softmax
};

// The six reference specs: discriminator, autoencoder_enc, autoencoder_dec,
// generator_fc, generator_conv, comparator_tiny.
std::map<std::string, NetworkSpec> preset_specs(const PresetOptions& opt = {});

// Flattened activation at the named tap, with the processing steps that follow
// the layer (activation, pooling) included. comp must be in eval mode.
Value comparator_features(const Network& comp, Graph& g, Value image, const std::string& tap);

}  // namespace psim
