#include "psim/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace psim {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

std::string op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConv2d: return "conv2d";
    case Op::kUpsampleNails: return "upsample_nails";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kFc: return "fc";
    case Op::kMaxPool: return "max_pool";
    case Op::kGlobalAvgPool: return "global_avg_pool";
    case Op::kDropout: return "dropout";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kAddScalar: return "add_scalar";
    case Op::kMulScalar: return "mul_scalar";
    case Op::kLog: return "log";
    case Op::kExp: return "exp";
    case Op::kSquare: return "square";
    case Op::kNeg: return "neg";
    case Op::kAbs: return "abs";
    case Op::kSoftmax2: return "softmax2";
    case Op::kSum: return "sum";
    case Op::kReshape: return "reshape";
    case Op::kConcatCols: return "concat_cols";
    case Op::kSliceCol: return "slice_col";
  }
  return "?";
}

void Graph::check(Value v) const {
  if (!v.valid() || v.id >= size()) throw std::invalid_argument("invalid graph value handle");
}

Graph::Node& Graph::at(Value v) { return nodes_[static_cast<size_t>(v.id)]; }
const Graph::Node& Graph::at(Value v) const { return nodes_[static_cast<size_t>(v.id)]; }

void Graph::fail_op(const std::string& what, Value v) const {
  throw std::domain_error(what + " at node #" + std::to_string(v.id) + " (" + op_name(at(v).op) + ")");
}

Value Graph::push(Node n) {
  for (int i = 0; i < n.n_in; ++i) {
    check(n.in[static_cast<size_t>(i)]);
    n.needs_grad = n.needs_grad || at(n.in[static_cast<size_t>(i)]).needs_grad;
  }
  nodes_.push_back(std::move(n));
  return Value{size() - 1};
}

Value Graph::leaf(Tensor t, bool requires_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.out = std::move(t);
  n.needs_grad = requires_grad;
  return push(std::move(n));
}

Value Graph::conv2d(Value x, Value w, Value b, int stride, Pad4 pad) {
  check(x); check(w); check(b);
  const Tensor& xt = at(x).out;
  const Tensor& wt = at(w).out;
  const Tensor& bt = at(b).out;
  require(xt.rank() == 4, "conv2d: input must be N x C x H x W, got " + shape_str(xt.shape));
  require(wt.rank() == 4, "conv2d: weight must be Cout x Cin x kH x kW, got " + shape_str(wt.shape));
  require(xt.dim(1) == wt.dim(1), "conv2d: input channels " + shape_str(xt.shape) +
                                      " do not match weight channels " + shape_str(wt.shape));
  require(bt.rank() == 1 && bt.dim(0) == wt.dim(0),
          "conv2d: bias shape " + shape_str(bt.shape) + " does not match weight " + shape_str(wt.shape));
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(pad.top >= 0 && pad.bottom >= 0 && pad.left >= 0 && pad.right >= 0, "conv2d: negative padding");
  const int h = xt.dim(2), w_ = xt.dim(3), kh = wt.dim(2), kw = wt.dim(3);
  require(kh <= h + pad.top + pad.bottom && kw <= w_ + pad.left + pad.right,
          "conv2d: kernel " + shape_str(wt.shape) + " exceeds padded input " + shape_str(xt.shape));
  const int oh = (h + pad.top + pad.bottom - kh) / stride + 1;
  const int ow = (w_ + pad.left + pad.right - kw) / stride + 1;

  Node n;
  n.op = Op::kConv2d;
  n.in = {x, w, b};
  n.n_in = 3;
  n.stride = stride;
  n.pad = pad;
  n.out = Tensor({xt.dim(0), wt.dim(0), oh, ow});
  kernels::Conv2dDims d{xt.dim(0), xt.dim(1), h, w_, wt.dim(0), kh, kw,
                        stride, pad.top, pad.bottom, pad.left, pad.right, oh, ow};
  kernels::conv2d_forward(xt.data.data(), wt.data.data(), bt.data.data(), n.out.data.data(), d);
  return push(std::move(n));
}

Value Graph::upsample_nails(Value x, int factor) {
  check(x);
  require(factor >= 1, "upsample_nails: factor must be >= 1, got " + std::to_string(factor));
  const Tensor& xt = at(x).out;
  require(xt.rank() == 4, "upsample_nails: input must be N x C x H x W, got " + shape_str(xt.shape));
  Node n;
  n.op = Op::kUpsampleNails;
  n.in = {x};
  n.n_in = 1;
  n.factor = factor;
  n.out = Tensor({xt.dim(0), xt.dim(1), xt.dim(2) * factor, xt.dim(3) * factor});
  kernels::upsample_nails_forward(xt.data.data(), n.out.data.data(), xt.dim(0), xt.dim(1), xt.dim(2),
                                  xt.dim(3), factor);
  return push(std::move(n));
}

Value Graph::leaky_relu(Value x, double alpha) {
  check(x);
  require(std::isfinite(alpha), "leaky_relu: alpha must be finite");
  Node n;
  n.op = Op::kLeakyRelu;
  n.in = {x};
  n.n_in = 1;
  n.alpha = alpha;
  n.out = at(x).out;
  for (auto& v : n.out.data) v = v > 0.0 ? v : alpha * v;
  return push(std::move(n));
}

Value Graph::fc(Value x, Value w, Value b) {
  check(x); check(w); check(b);
  const Tensor& xt = at(x).out;
  const Tensor& wt = at(w).out;
  const Tensor& bt = at(b).out;
  require(xt.rank() == 2, "fc: input must be N x F, got " + shape_str(xt.shape));
  require(wt.rank() == 2 && wt.dim(0) == xt.dim(1),
          "fc: weight " + shape_str(wt.shape) + " does not chain with input " + shape_str(xt.shape));
  require(bt.rank() == 1 && bt.dim(0) == wt.dim(1),
          "fc: bias " + shape_str(bt.shape) + " does not match weight " + shape_str(wt.shape));
  const int N = xt.dim(0), F = xt.dim(1), G = wt.dim(1);
  Node n;
  n.op = Op::kFc;
  n.in = {x, w, b};
  n.n_in = 3;
  n.out = Tensor({N, G});
  kernels::matmul(xt.data.data(), wt.data.data(), n.out.data.data(), N, F, G);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < G; ++j) n.out.data[static_cast<size_t>(i) * G + j] += bt.data[static_cast<size_t>(j)];
  return push(std::move(n));
}

Value Graph::max_pool(Value x, int kernel, int stride) {
  check(x);
  const Tensor& xt = at(x).out;
  require(xt.rank() == 4, "max_pool: input must be N x C x H x W, got " + shape_str(xt.shape));
  require(kernel >= 1 && stride >= 1, "max_pool: kernel and stride must be >= 1");
  require(kernel <= xt.dim(2) && kernel <= xt.dim(3),
          "max_pool: kernel " + std::to_string(kernel) + " exceeds input " + shape_str(xt.shape));
  const int oh = (xt.dim(2) - kernel) / stride + 1;
  const int ow = (xt.dim(3) - kernel) / stride + 1;
  Node n;
  n.op = Op::kMaxPool;
  n.in = {x};
  n.n_in = 1;
  n.kernel = kernel;
  n.stride = stride;
  n.out = Tensor({xt.dim(0), xt.dim(1), oh, ow});
  n.argmax.assign(static_cast<size_t>(n.out.numel()), -1);
  kernels::PoolDims d{xt.dim(0), xt.dim(1), xt.dim(2), xt.dim(3), kernel, stride, oh, ow};
  kernels::maxpool_forward(xt.data.data(), n.out.data.data(), n.argmax.data(), d);
  return push(std::move(n));
}

Value Graph::global_avg_pool(Value x) {
  check(x);
  const Tensor& xt = at(x).out;
  require(xt.rank() == 4, "global_avg_pool: input must be N x C x H x W, got " + shape_str(xt.shape));
  Node n;
  n.op = Op::kGlobalAvgPool;
  n.in = {x};
  n.n_in = 1;
  n.out = Tensor({xt.dim(0), xt.dim(1), 1, 1});
  kernels::global_avg_pool_forward(xt.data.data(), n.out.data.data(), xt.dim(0), xt.dim(1), xt.dim(2),
                                   xt.dim(3));
  return push(std::move(n));
}

Value Graph::dropout(Value x, double p, bool train, RngStream& rng) {
  check(x);
  require(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1), got " + std::to_string(p));
  if (!train) {
    Node n;
    n.op = Op::kDropout;
    n.in = {x};
    n.n_in = 1;
    n.out = at(x).out;
    return push(std::move(n));  // eval mode: identity, empty mask
  }
  Node n;
  n.op = Op::kDropout;
  n.in = {x};
  n.n_in = 1;
  n.out = at(x).out;
  const double keep_scale = 1.0 / (1.0 - p);
  n.mask.resize(n.out.data.size());
  for (size_t i = 0; i < n.mask.size(); ++i) {
    n.mask[i] = rng.next_double() < p ? 0.0 : keep_scale;
    n.out.data[i] *= n.mask[i];
  }
  return push(std::move(n));
}

namespace {
Value binary_common(Graph& g, const Tensor& a, const Tensor& b, const char* name) {
  (void)g;
  require(a.shape == b.shape, std::string(name) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                                  shape_str(b.shape));
  return Value{};
}
}  // namespace

Value Graph::add(Value a, Value b) {
  check(a); check(b);
  binary_common(*this, at(a).out, at(b).out, "add");
  Node n;
  n.op = Op::kAdd;
  n.in = {a, b};
  n.n_in = 2;
  n.out = at(a).out;
  const Tensor& bt = at(b).out;
  for (size_t i = 0; i < n.out.data.size(); ++i) n.out.data[i] += bt.data[i];
  return push(std::move(n));
}

Value Graph::sub(Value a, Value b) {
  check(a); check(b);
  binary_common(*this, at(a).out, at(b).out, "sub");
  Node n;
  n.op = Op::kSub;
  n.in = {a, b};
  n.n_in = 2;
  n.out = at(a).out;
  const Tensor& bt = at(b).out;
  for (size_t i = 0; i < n.out.data.size(); ++i) n.out.data[i] -= bt.data[i];
  return push(std::move(n));
}

Value Graph::mul(Value a, Value b) {
  check(a); check(b);
  binary_common(*this, at(a).out, at(b).out, "mul");
  Node n;
  n.op = Op::kMul;
  n.in = {a, b};
  n.n_in = 2;
  n.out = at(a).out;
  const Tensor& bt = at(b).out;
  for (size_t i = 0; i < n.out.data.size(); ++i) n.out.data[i] *= bt.data[i];
  return push(std::move(n));
}

Value Graph::add_scalar(Value a, double s) {
  check(a);
  Node n;
  n.op = Op::kAddScalar;
  n.in = {a};
  n.n_in = 1;
  n.scalar = s;
  n.out = at(a).out;
  for (auto& v : n.out.data) v += s;
  return push(std::move(n));
}

Value Graph::mul_scalar(Value a, double s) {
  check(a);
  Node n;
  n.op = Op::kMulScalar;
  n.in = {a};
  n.n_in = 1;
  n.scalar = s;
  n.out = at(a).out;
  for (auto& v : n.out.data) v *= s;
  return push(std::move(n));
}

Value Graph::log(Value x) {
  check(x);
  Node n;
  n.op = Op::kLog;
  n.in = {x};
  n.n_in = 1;
  n.out = at(x).out;
  for (auto& v : n.out.data) {
    if (v <= 0.0) fail_op("log: non-positive input " + std::to_string(v), x);
    v = std::log(v);
  }
  return push(std::move(n));
}

Value Graph::log_clamped(Value x, double floor) {
  check(x);
  require(floor > 0.0, "log_clamped: floor must be positive");
  Node n;
  n.op = Op::kLog;
  n.in = {x};
  n.n_in = 1;
  n.scalar = floor;  // elements at or below the floor get zero gradient
  n.out = at(x).out;
  for (auto& v : n.out.data) v = std::log(v < floor ? floor : v);
  return push(std::move(n));
}

Value Graph::exp(Value x) {
  check(x);
  Node n;
  n.op = Op::kExp;
  n.in = {x};
  n.n_in = 1;
  n.out = at(x).out;
  for (auto& v : n.out.data) v = std::exp(v);
  return push(std::move(n));
}

Value Graph::square(Value x) {
  check(x);
  Node n;
  n.op = Op::kSquare;
  n.in = {x};
  n.n_in = 1;
  n.out = at(x).out;
  for (auto& v : n.out.data) v *= v;
  return push(std::move(n));
}

Value Graph::neg(Value x) {
  check(x);
  Node n;
  n.op = Op::kNeg;
  n.in = {x};
  n.n_in = 1;
  n.out = at(x).out;
  for (auto& v : n.out.data) v = -v;
  return push(std::move(n));
}

Value Graph::abs(Value x) {
  check(x);
  Node n;
  n.op = Op::kAbs;
  n.in = {x};
  n.n_in = 1;
  n.out = at(x).out;
  for (auto& v : n.out.data) v = std::fabs(v);
  return push(std::move(n));
}

Value Graph::softmax2(Value logits) {
  check(logits);
  const Tensor& xt = at(logits).out;
  require(xt.rank() == 2 && xt.dim(1) == 2, "softmax2: input must be N x 2, got " + shape_str(xt.shape));
  Node n;
  n.op = Op::kSoftmax2;
  n.in = {logits};
  n.n_in = 1;
  n.out = xt;
  for (int i = 0; i < xt.dim(0); ++i) {
    double& a = n.out.data[static_cast<size_t>(2 * i)];
    double& b = n.out.data[static_cast<size_t>(2 * i + 1)];
    const double m = a > b ? a : b;
    const double ea = std::exp(a - m), eb = std::exp(b - m);
    const double z = ea + eb;
    a = ea / z;
    b = eb / z;
  }
  return push(std::move(n));
}

Value Graph::sum(Value x) {
  check(x);
  Node n;
  n.op = Op::kSum;
  n.in = {x};
  n.n_in = 1;
  double acc = 0.0;
  for (double v : at(x).out.data) acc += v;
  n.out = Tensor::scalar(acc);
  return push(std::move(n));
}

Value Graph::mean(Value x) {
  check(x);
  const double inv = 1.0 / static_cast<double>(at(x).out.numel());
  return mul_scalar(sum(x), inv);
}

Value Graph::reshape(Value x, std::vector<int> shape) {
  check(x);
  const Tensor& xt = at(x).out;
  require(numel_of(shape) == xt.numel(), "reshape: cannot view " + shape_str(xt.shape) + " as " +
                                             shape_str(shape));
  Node n;
  n.op = Op::kReshape;
  n.in = {x};
  n.n_in = 1;
  n.in_shape = xt.shape;
  n.out = xt;
  n.out.shape = std::move(shape);
  return push(std::move(n));
}

Value Graph::flatten2(Value x) {
  check(x);
  const Tensor& xt = at(x).out;
  require(xt.rank() >= 1, "flatten2: rank-0 input");
  const int n0 = xt.dim(0);
  return reshape(x, {n0, static_cast<int>(xt.numel() / n0)});
}

Value Graph::concat_cols(Value a, Value b) {
  check(a); check(b);
  const Tensor& ta = at(a).out;
  const Tensor& tb = at(b).out;
  require(ta.rank() == 2 && tb.rank() == 2 && ta.dim(0) == tb.dim(0),
          "concat_cols: expected N x A and N x B, got " + shape_str(ta.shape) + " and " + shape_str(tb.shape));
  const int N = ta.dim(0), A = ta.dim(1), B = tb.dim(1);
  Node n;
  n.op = Op::kConcatCols;
  n.in = {a, b};
  n.n_in = 2;
  n.in_shape = ta.shape;
  n.out = Tensor({N, A + B});
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < A; ++j)
      n.out.data[static_cast<size_t>(i) * (A + B) + j] = ta.data[static_cast<size_t>(i) * A + j];
    for (int j = 0; j < B; ++j)
      n.out.data[static_cast<size_t>(i) * (A + B) + A + j] = tb.data[static_cast<size_t>(i) * B + j];
  }
  return push(std::move(n));
}

Value Graph::slice_col(Value x, int col) {
  check(x);
  const Tensor& xt = at(x).out;
  require(xt.rank() == 2, "slice_col: input must be N x C, got " + shape_str(xt.shape));
  require(col >= 0 && col < xt.dim(1), "slice_col: column " + std::to_string(col) + " out of range for " +
                                           shape_str(xt.shape));
  Node n;
  n.op = Op::kSliceCol;
  n.in = {x};
  n.n_in = 1;
  n.col = col;
  n.out = Tensor({xt.dim(0)});
  for (int i = 0; i < xt.dim(0); ++i)
    n.out.data[static_cast<size_t>(i)] = xt.data[static_cast<size_t>(i) * xt.dim(1) + col];
  return push(std::move(n));
}

Value Graph::detach(Value x) {
  check(x);
  return leaf(at(x).out, false);
}

const Tensor& Graph::value(Value v) const {
  check(v);
  return at(v).out;
}

bool Graph::has_grad(Value v) const {
  check(v);
  return !grad_set_.empty() && grad_set_[static_cast<size_t>(v.id)] != 0;
}

const Tensor& Graph::grad(Value v) const {
  check(v);
  if (has_grad(v)) return grads_[static_cast<size_t>(v.id)];
  static thread_local Tensor zero;
  zero = Tensor(at(v).out.shape);
  return zero;
}

Tensor& Graph::grad_buf(Value v) {
  auto& slot = grads_[static_cast<size_t>(v.id)];
  if (!grad_set_[static_cast<size_t>(v.id)]) {
    slot = Tensor(at(v).out.shape);
    grad_set_[static_cast<size_t>(v.id)] = 1;
  }
  return slot;
}

void Graph::backward(Value loss) {
  check(loss);
  if (backward_done_) throw std::logic_error("backward() may be called once per graph");
  const Node& ln = at(loss);
  if (ln.out.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(ln.out.shape));
  grads_.assign(nodes_.size(), Tensor{});
  grad_set_.assign(nodes_.size(), 0);
  backward_done_ = true;
  if (!ln.needs_grad) return;
  grad_buf(loss).data[0] = 1.0;
  for (int32_t id = loss.id; id >= 0; --id) {
    if (!grad_set_[static_cast<size_t>(id)] || !nodes_[static_cast<size_t>(id)].needs_grad) continue;
    backward_node(id);
  }
}

void Graph::backward_node(int32_t id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  const Tensor& gy = grads_[static_cast<size_t>(id)];
  auto in_needs = [&](int i) { return at(n.in[static_cast<size_t>(i)]).needs_grad; };
  auto gin = [&](int i) -> Tensor& { return grad_buf(n.in[static_cast<size_t>(i)]); };
  auto vin = [&](int i) -> const Tensor& { return at(n.in[static_cast<size_t>(i)]).out; };

  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kConv2d: {
      const Tensor& xt = vin(0);
      const Tensor& wt = vin(1);
      kernels::Conv2dDims d{xt.dim(0), xt.dim(1), xt.dim(2), xt.dim(3), wt.dim(0), wt.dim(2), wt.dim(3),
                            n.stride, n.pad.top, n.pad.bottom, n.pad.left, n.pad.right,
                            n.out.dim(2), n.out.dim(3)};
      if (in_needs(0))
        kernels::conv2d_backward_input(gy.data.data(), wt.data.data(), gin(0).data.data(), d);
      if (in_needs(1))
        kernels::conv2d_backward_weight(gy.data.data(), xt.data.data(), gin(1).data.data(), d);
      if (in_needs(2)) kernels::conv2d_backward_bias(gy.data.data(), gin(2).data.data(), d);
      break;
    }
    case Op::kUpsampleNails: {
      if (!in_needs(0)) break;
      const Tensor& xt = vin(0);
      kernels::upsample_nails_backward(gy.data.data(), gin(0).data.data(), xt.dim(0), xt.dim(1), xt.dim(2),
                                       xt.dim(3), n.factor);
      break;
    }
    case Op::kLeakyRelu: {
      if (!in_needs(0)) break;
      const Tensor& xt = vin(0);
      Tensor& gx = gin(0);
      // subgradient at 0 is alpha
      for (size_t i = 0; i < gx.data.size(); ++i)
        gx.data[i] += gy.data[i] * (xt.data[i] > 0.0 ? 1.0 : n.alpha);
      break;
    }
    case Op::kFc: {
      const Tensor& xt = vin(0);
      const Tensor& wt = vin(1);
      const int N = xt.dim(0), F = xt.dim(1), G = wt.dim(1);
      if (in_needs(0)) {
        Tensor tmp({N, F});
        kernels::matmul_a_bt(gy.data.data(), wt.data.data(), tmp.data.data(), N, F, G);
        Tensor& gx = gin(0);
        for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += tmp.data[i];
      }
      if (in_needs(1)) {
        Tensor tmp({F, G});
        kernels::matmul_at_b(xt.data.data(), gy.data.data(), tmp.data.data(), N, F, G);
        Tensor& gw = gin(1);
        for (size_t i = 0; i < gw.data.size(); ++i) gw.data[i] += tmp.data[i];
      }
      if (in_needs(2)) {
        Tensor& gb = gin(2);
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < G; ++j) gb.data[static_cast<size_t>(j)] += gy.data[static_cast<size_t>(i) * G + j];
      }
      break;
    }
    case Op::kMaxPool: {
      if (!in_needs(0)) break;
      const Tensor& xt = vin(0);
      kernels::PoolDims d{xt.dim(0), xt.dim(1), xt.dim(2), xt.dim(3), n.kernel, n.stride,
                          n.out.dim(2), n.out.dim(3)};
      kernels::maxpool_backward(gy.data.data(), n.argmax.data(), gin(0).data.data(), d);
      break;
    }
    case Op::kGlobalAvgPool: {
      if (!in_needs(0)) break;
      const Tensor& xt = vin(0);
      kernels::global_avg_pool_backward(gy.data.data(), gin(0).data.data(), xt.dim(0), xt.dim(1), xt.dim(2),
                                        xt.dim(3));
      break;
    }
    case Op::kDropout: {
      if (!in_needs(0)) break;
      Tensor& gx = gin(0);
      if (n.mask.empty()) {
        for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += gy.data[i];
      } else {
        for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += gy.data[i] * n.mask[i];
      }
      break;
    }
    case Op::kAdd: {
      for (int k = 0; k < 2; ++k) {
        if (!in_needs(k)) continue;
        Tensor& g = gin(k);
        for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i];
      }
      break;
    }
    case Op::kSub: {
      if (in_needs(0)) {
        Tensor& g = gin(0);
        for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i];
      }
      if (in_needs(1)) {
        Tensor& g = gin(1);
        for (size_t i = 0; i < g.data.size(); ++i) g.data[i] -= gy.data[i];
      }
      break;
    }
    case Op::kMul: {
      if (in_needs(0)) {
        const Tensor& bt = vin(1);
        Tensor& g = gin(0);
        for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i] * bt.data[i];
      }
      if (in_needs(1)) {
        const Tensor& atv = vin(0);
        Tensor& g = gin(1);
        for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i] * atv.data[i];
      }
      break;
    }
    case Op::kAddScalar: {
      if (!in_needs(0)) break;
      Tensor& g = gin(0);
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i];
      break;
    }
    case Op::kMulScalar: {
      if (!in_needs(0)) break;
      Tensor& g = gin(0);
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i] * n.scalar;
      break;
    }
    case Op::kLog: {
      if (!in_needs(0)) break;
      const Tensor& xt = vin(0);
      Tensor& g = gin(0);
      const double floor = n.scalar;  // 0 for strict log
      for (size_t i = 0; i < g.data.size(); ++i) {
        if (floor > 0.0 && xt.data[i] < floor) continue;
        g.data[i] += gy.data[i] / xt.data[i];
      }
      break;
    }
    case Op::kExp: {
      if (!in_needs(0)) break;
      Tensor& g = gin(0);
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i] * n.out.data[i];
      break;
    }
    case Op::kSquare: {
      if (!in_needs(0)) break;
      const Tensor& xt = vin(0);
      Tensor& g = gin(0);
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i] * 2.0 * xt.data[i];
      break;
    }
    case Op::kNeg: {
      if (!in_needs(0)) break;
      Tensor& g = gin(0);
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] -= gy.data[i];
      break;
    }
    case Op::kAbs: {
      if (!in_needs(0)) break;
      const Tensor& xt = vin(0);
      Tensor& g = gin(0);
      // subgradient at 0 is 0
      for (size_t i = 0; i < g.data.size(); ++i) {
        const double s = xt.data[i] > 0.0 ? 1.0 : (xt.data[i] < 0.0 ? -1.0 : 0.0);
        g.data[i] += gy.data[i] * s;
      }
      break;
    }
    case Op::kSoftmax2: {
      if (!in_needs(0)) break;
      Tensor& g = gin(0);
      const int N = n.out.dim(0);
      for (int i = 0; i < N; ++i) {
        const double y0 = n.out.data[static_cast<size_t>(2 * i)];
        const double y1 = n.out.data[static_cast<size_t>(2 * i + 1)];
        const double g0 = gy.data[static_cast<size_t>(2 * i)];
        const double g1 = gy.data[static_cast<size_t>(2 * i + 1)];
        const double dot = g0 * y0 + g1 * y1;
        g.data[static_cast<size_t>(2 * i)] += y0 * (g0 - dot);
        g.data[static_cast<size_t>(2 * i + 1)] += y1 * (g1 - dot);
      }
      break;
    }
    case Op::kSum: {
      if (!in_needs(0)) break;
      Tensor& g = gin(0);
      const double gv = gy.data[0];
      for (auto& v : g.data) v += gv;
      break;
    }
    case Op::kReshape: {
      if (!in_needs(0)) break;
      Tensor& g = gin(0);
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i];
      break;
    }
    case Op::kConcatCols: {
      const int N = n.in_shape[0], A = n.in_shape[1];
      const int B = n.out.dim(1) - A;
      if (in_needs(0)) {
        Tensor& g = gin(0);
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < A; ++j)
            g.data[static_cast<size_t>(i) * A + j] += gy.data[static_cast<size_t>(i) * (A + B) + j];
      }
      if (in_needs(1)) {
        Tensor& g = gin(1);
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < B; ++j)
            g.data[static_cast<size_t>(i) * B + j] += gy.data[static_cast<size_t>(i) * (A + B) + A + j];
      }
      break;
    }
    case Op::kSliceCol: {
      if (!in_needs(0)) break;
      const Tensor& xt = vin(0);
      Tensor& g = gin(0);
      const int C = xt.dim(1);
      for (int i = 0; i < xt.dim(0); ++i)
        g.data[static_cast<size_t>(i) * C + n.col] += gy.data[static_cast<size_t>(i)];
      break;
    }
  }
}

}  // namespace psim
