#include "psim/nn.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace psim {

LayerSpec LayerSpec::conv(int ch, int k, int s, int rin, int rout, Act a) {
  LayerSpec l;
  l.kind = LayerKind::kConv;
  l.out_channels = ch;
  l.kernel = k;
  l.stride = s;
  l.direction = s > 1 ? Direction::kDown : Direction::kNone;
  l.activation = a;
  l.ref_in = rin;
  l.ref_out = rout;
  return l;
}

LayerSpec LayerSpec::uconv(int ch, int k, int rin, int rout, Act a) {
  LayerSpec l;
  l.kind = LayerKind::kUconv;
  l.out_channels = ch;
  l.kernel = k;
  l.stride = 1;  // the x2 upsampling carries the stride
  l.direction = Direction::kUp;
  l.activation = a;
  l.ref_in = rin;
  l.ref_out = rout;
  return l;
}

LayerSpec LayerSpec::fc(int width, Act a) {
  LayerSpec l;
  l.kind = LayerKind::kFc;
  l.out_channels = width;
  l.activation = a;
  return l;
}

LayerSpec LayerSpec::fc_tied(int channels, int multiple, Act a) {
  LayerSpec l;
  l.kind = LayerKind::kFc;
  l.out_channels = channels;
  l.tie_reshape = multiple;
  l.activation = a;
  return l;
}

LayerSpec LayerSpec::max_pool(int k, int s) {
  LayerSpec l;
  l.kind = LayerKind::kPool;
  l.pool = PoolKind::kMax;
  l.kernel = k;
  l.stride = s;
  return l;
}

LayerSpec LayerSpec::global_pool() {
  LayerSpec l;
  l.kind = LayerKind::kPool;
  l.pool = PoolKind::kGlobalAvg;
  return l;
}

LayerSpec LayerSpec::reshape_to(int channels) {
  LayerSpec l;
  l.kind = LayerKind::kReshape;
  l.out_channels = channels;
  return l;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec l;
  l.kind = LayerKind::kDropout;
  l.rate = rate;
  return l;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec l;
  l.kind = LayerKind::kSoftmax;
  return l;
}

int scaled_channels(int raw, double scale) {
  const auto s = static_cast<int>(std::llround(raw * scale));
  return s < 1 ? 1 : s;
}

int target_extent(int ref_in, int ref_out, int in) {
  if (in == ref_in) return ref_out;
  const auto t = static_cast<int>(std::llround(static_cast<double>(ref_out) * in / ref_in));
  return t < 1 ? 1 : t;
}

namespace {

struct Dims {  // per-sample shape while chaining
  bool spatial = true;
  int c = 0, h = 0, w = 0;  // spatial
  int f = 0;                // flat
  int64_t count() const { return spatial ? static_cast<int64_t>(c) * h * w : f; }
};

std::string kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kUconv: return "uconv";
    case LayerKind::kFc: return "fc";
    case LayerKind::kPool: return "pool";
    case LayerKind::kReshape: return "reshape";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kActivation: return "activation";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "?";
}

[[noreturn]] void fail_layer(const NetworkSpec& spec, size_t idx, const std::string& what) {
  throw std::invalid_argument(spec.name + ": layer " + std::to_string(idx + 1) + " (" +
                              kind_name(spec.layers[idx].kind) + "): " + what);
}

int effective_width(const LayerSpec& l, double scale) {
  if (l.tie_reshape > 0) return l.tie_reshape * scaled_channels(l.out_channels, scale);
  if (l.scale_exempt) return l.out_channels;
  return scaled_channels(l.out_channels, scale);
}

// Padding total so the strided window sweep lands on the target extent; odd
// totals put the extra unit at bottom/right.
int pad_total(int in, int k, int stride, int target) {
  const int p = stride * (target - 1) + k - in;
  return p < 0 ? 0 : p;
}

int conv_out(int in, int k, int stride, int p) { return (in + p - k) / stride + 1; }

// Assigns conv1..convN / fc1..fcM names to parametric rows.
std::vector<std::string> name_layers(const NetworkSpec& spec) {
  std::vector<std::string> names(spec.layers.size());
  int nconv = 0, nfc = 0;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    switch (spec.layers[i].kind) {
      case LayerKind::kConv:
      case LayerKind::kUconv:
        names[i] = "conv" + std::to_string(++nconv);
        break;
      case LayerKind::kFc:
        names[i] = "fc" + std::to_string(++nfc);
        break;
      default:
        break;
    }
  }
  return names;
}

Tensor init_param(const std::vector<int>& shape, int fan_in, int fan_out, InitScheme init,
                  uint64_t seed, const std::string& stream_name) {
  if (init == InitScheme::kZeros) return Tensor(shape);
  RngStream rng = RngStream::derive(seed, stream_name);
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  return Tensor::uniform(shape, rng, -a, a);
}

}  // namespace

std::vector<LayerShape> chain_shapes(const NetworkSpec& spec) {
  if (spec.scale <= 0.0) throw std::invalid_argument(spec.name + ": scale must be positive");
  Dims d;
  if (spec.input_shape.size() == 3) {
    d.spatial = true;
    d.c = spec.input_shape[0];
    d.h = spec.input_shape[1];
    d.w = spec.input_shape[2];
  } else if (spec.input_shape.size() == 1) {
    d.spatial = false;
    d.f = spec.input_shape[0];
  } else {
    throw std::invalid_argument(spec.name + ": input_shape must be {C,H,W} or {F}, got " +
                                shape_str(spec.input_shape));
  }
  auto dims_of = [](const Dims& x) {
    return x.spatial ? std::vector<int>{x.c, x.h, x.w} : std::vector<int>{x.f};
  };

  std::vector<LayerShape> shapes;
  shapes.reserve(spec.layers.size());
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    LayerShape row;
    row.in = dims_of(d);
    switch (l.kind) {
      case LayerKind::kConv:
      case LayerKind::kUconv: {
        if (!d.spatial) fail_layer(spec, i, "expects a spatial input, previous output is flat");
        if (l.kernel < 1) fail_layer(spec, i, "kernel must be >= 1");
        if (l.ref_in < 1 || l.ref_out < 1) fail_layer(spec, i, "reference sizes must be positive");
        const int up = l.kind == LayerKind::kUconv ? 2 : 1;
        const int th = target_extent(l.ref_in, l.ref_out, d.h);
        const int tw = target_extent(l.ref_in, l.ref_out, d.w);
        const int ph = pad_total(d.h * up, l.kernel, l.stride, th);
        const int pw = pad_total(d.w * up, l.kernel, l.stride, tw);
        if (d.h * up + ph < l.kernel || d.w * up + pw < l.kernel)
          fail_layer(spec, i, "kernel " + std::to_string(l.kernel) + " exceeds padded input " +
                                  std::to_string(d.h * up) + "x" + std::to_string(d.w * up));
        d.c = l.scale_exempt ? l.out_channels : scaled_channels(l.out_channels, spec.scale);
        d.h = conv_out(d.h * up, l.kernel, l.stride, ph);
        d.w = conv_out(d.w * up, l.kernel, l.stride, pw);
        break;
      }
      case LayerKind::kFc:
        d.spatial = false;
        d.f = effective_width(l, spec.scale);
        break;
      case LayerKind::kPool: {
        if (!d.spatial) fail_layer(spec, i, "expects a spatial input");
        if (l.pool == PoolKind::kGlobalAvg) {
          d.h = d.w = 1;
        } else {
          if (l.kernel > d.h || l.kernel > d.w)
            fail_layer(spec, i, "kernel " + std::to_string(l.kernel) + " exceeds input " +
                                    std::to_string(d.h) + "x" + std::to_string(d.w));
          d.h = (d.h - l.kernel) / l.stride + 1;
          d.w = (d.w - l.kernel) / l.stride + 1;
        }
        break;
      }
      case LayerKind::kReshape: {
        const int ch = l.scale_exempt ? l.out_channels : scaled_channels(l.out_channels, spec.scale);
        const auto n = d.count();
        if (n % ch != 0) fail_layer(spec, i, "cannot reshape " + std::to_string(n) + " values to " +
                                                 std::to_string(ch) + " channels");
        const auto hw = n / ch;
        const int ext = static_cast<int>(std::llround(std::sqrt(static_cast<double>(hw))));
        if (static_cast<int64_t>(ext) * ext != hw)
          fail_layer(spec, i, "reshape spatial size is not square: " + std::to_string(hw));
        d.spatial = true;
        d.c = ch;
        d.h = d.w = ext;
        break;
      }
      case LayerKind::kDropout:
        if (l.rate < 0.0 || l.rate >= 1.0) fail_layer(spec, i, "rate must be in [0, 1)");
        break;
      case LayerKind::kActivation:
        break;
      case LayerKind::kSoftmax:
        if (d.spatial || d.f != 2) fail_layer(spec, i, "softmax expects a flat width-2 input");
        break;
    }
    row.out = dims_of(d);
    shapes.push_back(std::move(row));
  }
  return shapes;
}

Network build(const NetworkSpec& spec, InitScheme init, uint64_t seed) {
  const std::vector<LayerShape> shapes = chain_shapes(spec);
  Network net;
  net.spec = spec;
  net.layer_names = name_layers(spec);

  auto add_param = [&](const std::string& name, const std::vector<int>& shape, int fan_in, int fan_out) {
    const std::string full = spec.name + "." + name;
    net.params[name] = init_param(shape, fan_in, fan_out, init, seed, full);
  };

  int side_width = 0;  // concatenated into the first fc input
  if (spec.side.enabled) {
    if (spec.side.input_dim <= 0)
      throw std::invalid_argument(spec.name + ": side branch requires a positive input_dim");
    int in = spec.side.input_dim;
    for (size_t i = 0; i < spec.side.widths.size(); ++i) {
      const int out = scaled_channels(spec.side.widths[i], spec.scale);
      const std::string nm = "side_fc" + std::to_string(i + 1);
      add_param(nm + ".w", {in, out}, in, out);
      add_param(nm + ".b", {out}, in, out);
      in = out;
    }
    side_width = in;
  }

  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string& nm = net.layer_names[i];
    if (nm.empty()) continue;
    if (l.kind == LayerKind::kConv || l.kind == LayerKind::kUconv) {
      const int in_c = shapes[i].in[0];
      const int out_c = shapes[i].out[0];
      const int fan_in = in_c * l.kernel * l.kernel;
      const int fan_out = out_c * l.kernel * l.kernel;
      add_param(nm + ".w", {out_c, in_c, l.kernel, l.kernel}, fan_in, fan_out);
      add_param(nm + ".b", {out_c}, fan_in, fan_out);
    } else if (l.kind == LayerKind::kFc) {
      int in = 1;
      for (int e : shapes[i].in) in *= e;
      in += side_width;
      side_width = 0;
      const int out = shapes[i].out[0];
      add_param(nm + ".w", {in, out}, in, out);
      add_param(nm + ".b", {out}, in, out);
    }
  }
  return net;
}

bool ForwardResult::has_tap(const std::string& name) const {
  for (const auto& [nm, v] : taps)
    if (nm == name) return true;
  return false;
}

Value ForwardResult::tap(const std::string& name) const {
  for (const auto& [nm, v] : taps)
    if (nm == name) return v;
  std::ostringstream os;
  os << "unknown tap '" << name << "'; available:";
  for (const auto& [nm, v] : taps) os << ' ' << nm;
  throw std::invalid_argument(os.str());
}

ForwardResult forward(const Network& net, Graph& g, Value x, RngStream* dropout_rng, Value side,
                      const std::vector<std::pair<std::string, Value>>* reuse_params) {
  const NetworkSpec& spec = net.spec;
  const Tensor& xt = g.value(x);
  {
    std::vector<int> expect = {0};
    expect.insert(expect.end(), spec.input_shape.begin(), spec.input_shape.end());
    bool ok = xt.rank() == static_cast<int>(expect.size());
    for (int i = 1; ok && i < xt.rank(); ++i) ok = xt.dim(i) == expect[static_cast<size_t>(i)];
    if (!ok)
      throw std::invalid_argument(spec.name + ": input shape " + shape_str(xt.shape) +
                                  " does not match spec input " + shape_str(spec.input_shape));
  }

  ForwardResult res;
  auto param = [&](const std::string& name) {
    if (reuse_params != nullptr) {
      // Share the leaves of an earlier pass so gradients from both passes
      // accumulate into one buffer per parameter.
      for (const auto& [nm, v] : *reuse_params)
        if (nm == name) {
          res.params.emplace_back(name, v);
          return v;
        }
      throw std::logic_error(spec.name + ": reused pass lacks parameter " + name);
    }
    auto it = net.params.find(name);
    if (it == net.params.end()) throw std::logic_error(spec.name + ": missing parameter " + name);
    Value v = g.leaf(it->second, net.trainable);
    res.params.emplace_back(name, v);
    return v;
  };
  const bool train = net.mode == Network::Mode::kTrain;

  Value side_out{};
  if (spec.side.enabled) {
    if (!side.valid())
      throw std::invalid_argument(spec.name + ": spec declares a side input but none was provided");
    const Tensor& st = g.value(side);
    if (st.rank() != 2 || st.dim(1) != spec.side.input_dim)
      throw std::invalid_argument(spec.name + ": side input " + shape_str(st.shape) +
                                  " does not match declared width " + std::to_string(spec.side.input_dim));
    side_out = side;
    for (size_t i = 0; i < spec.side.widths.size(); ++i) {
      const std::string nm = "side_fc" + std::to_string(i + 1);
      side_out = g.leaky_relu(g.fc(side_out, param(nm + ".w"), param(nm + ".b")), 0.3);
    }
  } else if (side.valid()) {
    throw std::invalid_argument(spec.name + ": side input given but the spec has no side branch");
  }

  res.taps.emplace_back("input", x);
  Value cur = x;
  std::vector<Value> row_value(spec.layers.size());
  bool side_merged = !spec.side.enabled;

  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string& nm = net.layer_names[i];
    const Tensor& in_t = g.value(cur);
    switch (l.kind) {
      case LayerKind::kConv:
      case LayerKind::kUconv: {
        if (in_t.rank() != 4) fail_layer(spec, i, "expects a spatial input, got " + shape_str(in_t.shape));
        Value h = cur;
        if (l.kind == LayerKind::kUconv) h = g.upsample_nails(h, 2);
        const Tensor& ht = g.value(h);
        const int th = target_extent(l.ref_in, l.ref_out, in_t.dim(2));
        const int tw = target_extent(l.ref_in, l.ref_out, in_t.dim(3));
        const int ph = pad_total(ht.dim(2), l.kernel, l.stride, th);
        const int pw = pad_total(ht.dim(3), l.kernel, l.stride, tw);
        Pad4 pad{ph / 2, ph - ph / 2, pw / 2, pw - pw / 2};
        cur = g.conv2d(h, param(nm + ".w"), param(nm + ".b"), l.stride, pad);
        if (l.activation == Act::kLrelu) cur = g.leaky_relu(cur, l.alpha);
        break;
      }
      case LayerKind::kFc: {
        Value h = in_t.rank() == 2 ? cur : g.flatten2(cur);
        if (!side_merged) {
          h = g.concat_cols(h, side_out);
          side_merged = true;
        }
        cur = g.fc(h, param(nm + ".w"), param(nm + ".b"));
        if (l.activation == Act::kLrelu) cur = g.leaky_relu(cur, l.alpha);
        break;
      }
      case LayerKind::kPool:
        if (l.pool == PoolKind::kGlobalAvg) cur = g.global_avg_pool(cur);
        else cur = g.max_pool(cur, l.kernel, l.stride);
        break;
      case LayerKind::kReshape: {
        const int ch = l.scale_exempt ? l.out_channels : scaled_channels(l.out_channels, spec.scale);
        const auto n = in_t.numel() / in_t.dim(0);
        const int side_len = static_cast<int>(std::llround(std::sqrt(static_cast<double>(n / ch))));
        cur = g.reshape(cur, {in_t.dim(0), ch, side_len, side_len});
        break;
      }
      case LayerKind::kDropout: {
        if (train && dropout_rng == nullptr)
          fail_layer(spec, i, "train mode needs a dropout stream");
        RngStream unused(0);
        cur = g.dropout(cur, l.rate, train, train ? *dropout_rng : unused);
        break;
      }
      case LayerKind::kActivation:
        cur = l.activation == Act::kLrelu ? g.leaky_relu(cur, l.alpha) : cur;
        break;
      case LayerKind::kSoftmax:
        cur = g.softmax2(in_t.rank() == 2 ? cur : g.flatten2(cur));
        break;
    }
    row_value[i] = cur;
  }
  res.out = cur;

  // Tap of a parametric layer includes the processing steps that follow it
  // (pooling, dropout, softmax) up to the next parametric/reshape row.
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    if (net.layer_names[i].empty()) continue;
    size_t j = i;
    while (j + 1 < spec.layers.size() &&
           (spec.layers[j + 1].kind == LayerKind::kPool || spec.layers[j + 1].kind == LayerKind::kDropout ||
            spec.layers[j + 1].kind == LayerKind::kActivation ||
            spec.layers[j + 1].kind == LayerKind::kSoftmax))
      ++j;
    res.taps.emplace_back(net.layer_names[i], row_value[j]);
  }
  return res;
}

std::map<std::string, NetworkSpec> preset_specs(const PresetOptions& opt) {
  using L = LayerSpec;
  std::map<std::string, NetworkSpec> out;
  const int S = opt.image_size;
  const int gen_out = opt.generator_output > 0 ? opt.generator_output : S;

  {
    NetworkSpec d;
    d.name = "discriminator";
    d.scale = opt.scale;
    d.input_shape = {opt.in_channels, S, S};
    d.layers = {
        L::conv(32, 7, 2, 64, 29),
        L::conv(64, 5, 1, 29, 25),
        L::conv(128, 3, 2, 25, 12),
        L::conv(256, 3, 1, 12, 10),
        L::conv(256, 3, 2, 10, 4),
        L::global_pool(),
        L::dropout(0.5),
        L::fc(512),
        L::dropout(0.5),
    };
    L head = L::fc(2, Act::kLinear);
    head.scale_exempt = true;
    d.layers.push_back(head);
    d.layers.push_back(L::softmax());
    if (opt.discr_side) {
      d.side.enabled = true;
      d.side.input_dim = opt.side_input_dim;
      d.side.widths = {1024, 512};
    }
    out["discriminator"] = d;
  }

  {
    NetworkSpec e;
    e.name = "autoencoder_enc";
    e.scale = opt.scale;
    e.input_shape = {opt.in_channels, S, S};
    e.layers = {
        L::conv(32, 5, 2, 64, 32),
        L::conv(32, 3, 1, 32, 32),
        L::conv(64, 5, 2, 32, 16),
        L::conv(64, 3, 1, 16, 16),
        L::conv(128, 3, 2, 16, 8),
        L::conv(128, 3, 1, 8, 8),
        L::conv(64, 3, 1, 8, 8),
        L::conv(opt.latent_channels, 3, 1, 8, 8, Act::kLinear),  // latent head
    };
    out["autoencoder_enc"] = e;
  }

  {
    NetworkSpec dec;
    dec.name = "autoencoder_dec";
    dec.scale = opt.scale;
    dec.input_shape = {scaled_channels(opt.latent_channels, opt.scale), S / 8, S / 8};
    dec.layers = {
        L::conv(64, 3, 1, 8, 8),
        L::conv(128, 3, 1, 8, 8),
        L::uconv(64, 4, 8, 16),
        L::conv(64, 3, 1, 16, 16),
        L::uconv(32, 4, 16, 32),
        L::conv(32, 3, 1, 32, 32),
        L::uconv(16, 4, 32, 64),
    };
    L last = L::conv(opt.in_channels, 3, 1, 64, 64, Act::kLinear);
    last.scale_exempt = true;
    dec.layers.push_back(last);
    out["autoencoder_dec"] = dec;
  }

  // Shared up-convolution ladder. Rows carry the reference-table sizes; the
  // padding solver maps them proportionally when the actual extents differ.
  // doublings = how many x2 steps the output lies above the ladder entry.
  auto ladder = [&](int doublings) {
    std::vector<L> rows;
    const struct { bool up; int ch, k, rin, rout; } table[] = {
        {true, 256, 4, 4, 8},    {false, 512, 3, 8, 8},   {true, 256, 4, 8, 16},
        {false, 256, 3, 16, 16}, {true, 128, 4, 16, 32},  {false, 128, 3, 32, 32},
        {true, 64, 4, 32, 64},   {true, 32, 4, 64, 128},  {true, 3, 4, 128, 256},
    };
    const int cutoff = 4 << doublings;  // table-frame output extent
    for (const auto& r : table) {
      if (r.rout > cutoff) continue;
      if (r.ch == 3 && r.up) {  // image output row of the full-size table
        L l = L::uconv(opt.in_channels, r.k, r.rin, r.rout, Act::kLinear);
        l.scale_exempt = true;
        rows.push_back(l);
      } else {
        rows.push_back(r.up ? L::uconv(r.ch, r.k, r.rin, r.rout) : L::conv(r.ch, r.k, 1, r.rin, r.rout));
      }
    }
    // Truncated ladders end with a linear image-space conv instead.
    const bool full = !rows.empty() && rows.back().scale_exempt;
    if (!full) {
      L l = L::conv(opt.in_channels, 3, 1, cutoff, cutoff, Act::kLinear);
      l.scale_exempt = true;
      rows.push_back(l);
    }
    return rows;
  };

  auto exact_log2 = [](int num, int den, const char* what) {
    if (den <= 0 || num % den != 0)
      throw std::invalid_argument(std::string(what) + ": output extent must be a power-of-two multiple of the input extent");
    int q = num / den, k = 0;
    while (q > 1 && q % 2 == 0) {
      q /= 2;
      ++k;
    }
    if (q != 1)
      throw std::invalid_argument(std::string(what) + ": output extent must be a power-of-two multiple of the input extent");
    return k;
  };

  {
    NetworkSpec gfc;
    gfc.name = "generator_fc";
    gfc.scale = opt.scale;
    const int in_dim = opt.generator_input_dim > 0 ? opt.generator_input_dim
                                                   : scaled_channels(4096, opt.scale);
    gfc.input_shape = {in_dim};
    gfc.layers = {L::fc(4096), L::fc(4096), L::fc_tied(256, 16), L::reshape_to(256)};
    for (const L& l : ladder(exact_log2(gen_out, 4, "generator_fc"))) gfc.layers.push_back(l);
    out["generator_fc"] = gfc;
  }

  {
    NetworkSpec gcv;
    gcv.name = "generator_conv";
    gcv.scale = opt.scale;
    const int ls = opt.latent_spatial > 0 ? opt.latent_spatial : S / 8;
    const int lc = opt.generator_in_channels > 0 ? opt.generator_in_channels
                                                 : scaled_channels(opt.latent_channels, opt.scale);
    gcv.input_shape = {lc, ls, ls};
    gcv.layers = {
        L::conv(256, 3, 1, ls, ls),
        L::conv(256, 3, 1, ls, ls),
        L::conv(256, 3, 1, ls, ls),
    };
    for (const L& l : ladder(exact_log2(gen_out, ls, "generator_conv"))) gcv.layers.push_back(l);
    out["generator_conv"] = gcv;
  }

  {
    NetworkSpec c;
    c.name = "comparator_tiny";
    c.scale = opt.scale;
    c.input_shape = {opt.in_channels, S, S};
    c.layers = {
        L::conv(64, 5, 1, 64, 64),  L::max_pool(2, 2),
        L::conv(128, 3, 1, 64, 64), L::max_pool(2, 2),
        L::conv(256, 3, 1, 64, 64), L::max_pool(2, 2),
        L::fc(512),
    };
    if (opt.comparator_classes > 0) {
      L head = L::fc(opt.comparator_classes, Act::kLinear);
      head.scale_exempt = true;
      c.layers.push_back(head);
      if (opt.comparator_classes == 2) c.layers.push_back(L::softmax());
    }
    out["comparator_tiny"] = c;
  }

  return out;
}

Value comparator_features(const Network& comp, Graph& g, Value image, const std::string& tap) {
  if (comp.mode != Network::Mode::kEval)
    throw std::invalid_argument(comp.spec.name + ": comparator must be in eval mode");
  ForwardResult r = forward(comp, g, image);
  Value t = r.tap(tap);
  return g.value(t).rank() == 2 ? t : g.flatten2(t);
}

}  // namespace psim
