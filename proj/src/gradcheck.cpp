#include "psim/gradcheck.hpp"

#include <algorithm>
#include <functional>

#include "psim/fd.hpp"
#include "psim/graph.hpp"
#include "psim/losses.hpp"
#include "psim/nn.hpp"
#include "psim/rng.hpp"
#include "psim/tensor.hpp"

namespace psim {

namespace {

constexpr double kTolerance = 1e-4;
constexpr int kShapes = 5;

// Random positive weights make every output element matter in the loss.
Value weighted_sum(Graph& g, Value v, const Tensor& w) { return g.sum(g.mul(v, g.leaf(w))); }

// Keeps inputs clear of kinks (|x| >= margin) so central differences do not
// straddle a non-differentiable point.
Tensor away_from_zero(const std::vector<int>& shape, RngStream& rng, double margin = 0.25) {
  Tensor t = Tensor::gaussian(shape, rng);
  for (auto& v : t.data) v = v < 0 ? v - margin : v + margin;
  return t;
}

int pick(RngStream& rng, int lo, int hi) {
  return lo + (int)rng.next_below((uint64_t)(hi - lo + 1));
}

using CaseFn = std::function<double(RngStream&, int)>;  // returns max rel err for shape i

void run_op(GradcheckSummary& sum, uint64_t seed, const std::string& op, const CaseFn& fn) {
  RngStream rng = RngStream::derive(seed, "gradcheck." + op);
  GradcheckEntry e;
  e.op = op;
  e.shapes = kShapes;
  e.tolerance = kTolerance;
  for (int i = 0; i < kShapes; ++i) e.max_rel_err = std::max(e.max_rel_err, fn(rng, i));
  e.pass = e.max_rel_err < e.tolerance;
  sum.entries.push_back(e);
}

}  // namespace

GradcheckSummary run_gradcheck_suite(uint64_t seed) {
  GradcheckSummary sum;

  run_op(sum, seed, "conv2d", [](RngStream& rng, int) {
    const int n = pick(rng, 1, 2), ci = pick(rng, 1, 3), co = pick(rng, 1, 3);
    const int k = pick(rng, 1, 3), s = pick(rng, 1, 2);
    const int h = k + pick(rng, 0, 4), w = k + pick(rng, 0, 4);
    const Pad4 pad{pick(rng, 0, k - 1) , pick(rng, 0, k - 1), pick(rng, 0, k - 1),
                   pick(rng, 0, k - 1)};
    Tensor x = Tensor::gaussian({n, ci, h, w}, rng);
    Tensor wt = Tensor::gaussian({co, ci, k, k}, rng);
    Tensor b = Tensor::gaussian({co}, rng);
    const int oh = (h + pad.top + pad.bottom - k) / s + 1;
    const int ow = (w + pad.left + pad.right - k) / s + 1;
    Tensor lw = Tensor::gaussian({n, co, oh, ow}, rng);
    return fd_check({x, wt, b}, [&](Graph& g, const std::vector<Value>& in) {
             return weighted_sum(g, g.conv2d(in[0], in[1], in[2], s, pad), lw);
           })
        .max_rel_err;
  });

  run_op(sum, seed, "uconv", [](RngStream& rng, int) {
    const int n = pick(rng, 1, 2), ci = pick(rng, 1, 2), co = pick(rng, 1, 3);
    const int h = pick(rng, 2, 4), w = pick(rng, 2, 4);
    const int k = pick(rng, 2, 4);
    Tensor x = Tensor::gaussian({n, ci, h, w}, rng);
    Tensor wt = Tensor::gaussian({co, ci, k, k}, rng);
    Tensor b = Tensor::gaussian({co}, rng);
    const Pad4 pad{k - 1, k - 1, k - 1, k - 1};
    const int oh = 2 * h + k - 1, ow = 2 * w + k - 1;
    Tensor lw = Tensor::gaussian({n, co, oh, ow}, rng);
    return fd_check({x, wt, b}, [&](Graph& g, const std::vector<Value>& in) {
             Value up = g.upsample_nails(in[0], 2);
             return weighted_sum(g, g.conv2d(up, in[1], in[2], 1, pad), lw);
           })
        .max_rel_err;
  });

  run_op(sum, seed, "fc", [](RngStream& rng, int) {
    const int n = pick(rng, 1, 3), fi = pick(rng, 1, 6), fo = pick(rng, 1, 5);
    Tensor x = Tensor::gaussian({n, fi}, rng);
    Tensor wt = Tensor::gaussian({fi, fo}, rng);
    Tensor b = Tensor::gaussian({fo}, rng);
    Tensor lw = Tensor::gaussian({n, fo}, rng);
    return fd_check({x, wt, b}, [&](Graph& g, const std::vector<Value>& in) {
             return weighted_sum(g, g.fc(in[0], in[1], in[2]), lw);
           })
        .max_rel_err;
  });

  run_op(sum, seed, "max_pool", [](RngStream& rng, int) {
    const int n = pick(rng, 1, 2), c = pick(rng, 1, 3);
    const int k = pick(rng, 2, 3), s = pick(rng, 1, k), q = pick(rng, 1, 3);
    const int h = k + s * q;
    Tensor x = Tensor::gaussian({n, c, h, h}, rng);
    const int o = (h - k) / s + 1;
    Tensor lw = Tensor::gaussian({n, c, o, o}, rng);
    return fd_check({x}, [&](Graph& g, const std::vector<Value>& in) {
             return weighted_sum(g, g.max_pool(in[0], k, s), lw);
           })
        .max_rel_err;
  });

  run_op(sum, seed, "global_pool", [](RngStream& rng, int) {
    const int n = pick(rng, 1, 3), c = pick(rng, 1, 4), h = pick(rng, 1, 5), w = pick(rng, 1, 5);
    Tensor x = Tensor::gaussian({n, c, h, w}, rng);
    Tensor lw = Tensor::gaussian({n, c, 1, 1}, rng);
    return fd_check({x}, [&](Graph& g, const std::vector<Value>& in) {
             return weighted_sum(g, g.global_avg_pool(in[0]), lw);
           })
        .max_rel_err;
  });

  run_op(sum, seed, "leaky_relu", [](RngStream& rng, int) {
    const int n = pick(rng, 1, 3), f = pick(rng, 1, 8);
    Tensor x = away_from_zero({n, f}, rng);
    Tensor lw = Tensor::gaussian({n, f}, rng);
    const double alpha = 0.1 + 0.2 * rng.next_double();
    return fd_check({x}, [&](Graph& g, const std::vector<Value>& in) {
             return weighted_sum(g, g.leaky_relu(in[0], alpha), lw);
           })
        .max_rel_err;
  });

  run_op(sum, seed, "dropout_eval", [](RngStream& rng, int) {
    const int n = pick(rng, 1, 3), f = pick(rng, 1, 8);
    Tensor x = Tensor::gaussian({n, f}, rng);
    Tensor lw = Tensor::gaussian({n, f}, rng);
    return fd_check({x}, [&](Graph& g, const std::vector<Value>& in) {
             RngStream unused(0);
             return weighted_sum(g, g.dropout(in[0], 0.5, /*train=*/false, unused), lw);
           })
        .max_rel_err;
  });

  run_op(sum, seed, "softmax2", [](RngStream& rng, int) {
    const int n = pick(rng, 1, 5);
    Tensor z = Tensor::gaussian({n, 2}, rng);
    Tensor lw = Tensor::gaussian({n, 2}, rng);
    return fd_check({z}, [&](Graph& g, const std::vector<Value>& in) {
             return weighted_sum(g, g.softmax2(in[0]), lw);
           })
        .max_rel_err;
  });

  run_op(sum, seed, "loss_img_se", [](RngStream& rng, int i) {
    const int n = pick(rng, 1, 3), f = pick(rng, 2, 8);
    std::vector<int> shape = i % 2 == 0 ? std::vector<int>{n, f}
                                        : std::vector<int>{n, pick(rng, 1, 2), f, f};
    Tensor gen = Tensor::gaussian(shape, rng);
    Tensor target = Tensor::gaussian(shape, rng);
    return fd_check({gen, target}, [&](Graph& g, const std::vector<Value>& in) {
             return loss_img_se(g, in[0], in[1]);
           })
        .max_rel_err;
  });

  run_op(sum, seed, "loss_img_l1", [](RngStream& rng, int) {
    const int n = pick(rng, 1, 3), f = pick(rng, 2, 8);
    Tensor target = Tensor::gaussian({n, f}, rng);
    Tensor gen = target;
    // keep |gen - target| bounded away from the absolute-value kink
    for (auto& v : gen.data) v += (rng.next_double() < 0.5 ? -1.0 : 1.0) * (0.25 + rng.next_double());
    return fd_check({gen}, [&](Graph& g, const std::vector<Value>& in) {
             return loss_img_l1(g, in[0], g.leaf(target));
           })
        .max_rel_err;
  });

  run_op(sum, seed, "loss_feat", [seed](RngStream& rng, int i) {
    const int c = pick(rng, 1, 3), h = 4 + 2 * pick(rng, 0, 2);
    NetworkSpec spec;
    spec.name = "probe_comparator";
    spec.input_shape = {c, h, h};
    spec.layers = {LayerSpec::conv(3, 3, 1, h, h), LayerSpec::max_pool(2, 2),
                   LayerSpec::fc(6)};
    Network comp = build(spec, InitScheme::kGlorotUniform, seed + (uint64_t)i);
    comp.trainable = false;
    const int n = pick(rng, 1, 2);
    Tensor gen = Tensor::gaussian({n, c, h, h}, rng);
    Tensor target = Tensor::gaussian({n, c, h, h}, rng);
    const char* tap = i % 2 == 0 ? "conv1" : "fc1";
    return fd_check({gen}, [&](Graph& g, const std::vector<Value>& in) {
             return loss_feat(g, in[0], g.leaf(target), comp, tap);
           })
        .max_rel_err;
  });

  run_op(sum, seed, "loss_discr", [](RngStream& rng, int) {
    const int n = pick(rng, 1, 4);
    Tensor zr = Tensor::gaussian({n, 2}, rng);
    Tensor zf = Tensor::gaussian({n, 2}, rng);
    return fd_check({zr, zf}, [&](Graph& g, const std::vector<Value>& in) {
             Value pr = g.slice_col(g.softmax2(in[0]), 0);
             Value pf = g.slice_col(g.softmax2(in[1]), 0);
             return loss_discr(g, pr, pf);
           })
        .max_rel_err;
  });

  run_op(sum, seed, "loss_adv", [](RngStream& rng, int) {
    const int n = pick(rng, 1, 4);
    Tensor z = Tensor::gaussian({n, 2}, rng);
    return fd_check({z}, [&](Graph& g, const std::vector<Value>& in) {
             return loss_adv(g, g.slice_col(g.softmax2(in[0]), 0));
           })
        .max_rel_err;
  });

  run_op(sum, seed, "composite_loss", [](RngStream& rng, int) {
    LossWeights w{0.1 + rng.next_double(), 0.1 + rng.next_double(), 0.1 + rng.next_double()};
    const int f = pick(rng, 2, 6);
    Tensor a = Tensor::gaussian({f}, rng);
    Tensor b = Tensor::gaussian({f}, rng);
    Tensor c = Tensor::gaussian({f}, rng);
    return fd_check({a, b, c}, [&](Graph& g, const std::vector<Value>& in) {
             return composite_loss(g, w, g.sum(g.square(in[0])), g.sum(g.square(in[1])),
                                   g.sum(g.square(in[2])));
           })
        .max_rel_err;
  });

  run_op(sum, seed, "kl_loss", [](RngStream& rng, int i) {
    const int n = pick(rng, 1, 3), d = pick(rng, 1, 6);
    std::vector<int> shape = i % 2 == 0 ? std::vector<int>{n, d}
                                        : std::vector<int>{n, 1, d, d};
    Tensor mu = Tensor::gaussian(shape, rng);
    Tensor log_sigma = Tensor::gaussian(shape, rng);
    return fd_check({mu, log_sigma}, [&](Graph& g, const std::vector<Value>& in) {
             return kl_loss(g, in[0], g.exp(in[1]));
           })
        .max_rel_err;
  });

  run_op(sum, seed, "reparameterize", [](RngStream& rng, int) {
    const int n = pick(rng, 1, 3), d = pick(rng, 1, 6);
    Tensor mu = Tensor::gaussian({n, d}, rng);
    Tensor log_sigma = Tensor::gaussian({n, d}, rng);
    Tensor eps = Tensor::gaussian({n, d}, rng);
    Tensor lw = Tensor::gaussian({n, d}, rng);
    return fd_check({mu, log_sigma}, [&](Graph& g, const std::vector<Value>& in) {
             Value z = reparameterize(g, in[0], g.exp(in[1]), g.leaf(eps));
             return weighted_sum(g, g.square(z), lw);
           })
        .max_rel_err;
  });

  for (const GradcheckEntry& e : sum.entries)
    sum.max_rel_err = std::max(sum.max_rel_err, e.max_rel_err);
  sum.all_pass = std::all_of(sum.entries.begin(), sum.entries.end(),
                             [](const GradcheckEntry& e) { return e.pass; });
  return sum;
}

}  // namespace psim
