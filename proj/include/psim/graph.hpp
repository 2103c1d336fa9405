#pragma once

// Reverse-mode autodiff tape. Ops append nodes to a Graph; node ids are
// topologically ordered by construction (every input id < node id).
// backward() walks the tape in reverse from a scalar loss, accumulating
// gradient buffers shaped like each node's output.

#include <array>
#include <cstdint>
#include <string>
#include <deque>
#include <vector>

#include "psim/kernels.hpp"
#include "psim/rng.hpp"
#include "psim/tensor.hpp"

namespace psim {

struct Value {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

struct Pad4 {
  int top = 0, bottom = 0, left = 0, right = 0;
};

enum class Op : uint8_t {
  kLeaf,
  kConv2d,
  kUpsampleNails,
  kLeakyRelu,
  kFc,
  kMaxPool,
  kGlobalAvgPool,
  kDropout,
  kAdd,
  kSub,
  kMul,
  kAddScalar,
  kMulScalar,
  kLog,
  kExp,
  kSquare,
  kNeg,
  kAbs,
  kSoftmax2,
  kSum,
  kReshape,
  kConcatCols,
  kSliceCol,
};

class Graph {
 public:
  Value leaf(Tensor t, bool requires_grad = false);

  Value conv2d(Value x, Value w, Value b, int stride, Pad4 pad);
  Value upsample_nails(Value x, int factor);
  Value leaky_relu(Value x, double alpha);
  Value fc(Value x, Value w, Value b);
  Value max_pool(Value x, int kernel, int stride);
  Value global_avg_pool(Value x);
  // Train mode zeroes elements with probability p and scales survivors by
  // 1/(1-p); eval mode is the identity. 0 <= p < 1.
  Value dropout(Value x, double p, bool train, RngStream& rng);

  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value add_scalar(Value a, double s);
  Value mul_scalar(Value a, double s);
  Value log(Value x);                        // domain error on x <= 0
  Value log_clamped(Value x, double floor);  // log(max(x, floor))
  Value exp(Value x);
  Value square(Value x);
  Value neg(Value x);
  Value abs(Value x);
  Value softmax2(Value logits);  // [N,2] -> [N,2], rows sum to 1
  Value sum(Value x);            // -> shape {1}
  Value mean(Value x);
  Value reshape(Value x, std::vector<int> shape);
  Value flatten2(Value x);                // [N, ...] -> [N, rest]
  Value concat_cols(Value a, Value b);    // [N,A],[N,B] -> [N,A+B]
  Value slice_col(Value x, int col);      // [N,C] -> [N]
  Value detach(Value x);                  // value copy, blocks gradient flow

  // Reverse accumulation from a scalar loss. Gradient of the loss w.r.t.
  // itself is 1. May be called once per graph.
  void backward(Value loss);

  const Tensor& value(Value v) const;
  bool has_grad(Value v) const;
  const Tensor& grad(Value v) const;  // zeros if the node never received one

  int32_t size() const { return static_cast<int32_t>(nodes_.size()); }

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::array<Value, 3> in{};
    int n_in = 0;
    bool needs_grad = false;
    Tensor out;
    // op attributes
    int stride = 1, kernel = 0, factor = 1, col = 0;
    Pad4 pad;
    double alpha = 0.0, scalar = 0.0;
    std::vector<int> in_shape;      // reshape / concat split point
    std::vector<double> mask;       // dropout
    std::vector<int64_t> argmax;    // max pool
  };

  Value push(Node n);
  Node& at(Value v);
  const Node& at(Value v) const;
  void check(Value v) const;
  Tensor& grad_buf(Value v);
  void backward_node(int32_t id);
  [[noreturn]] void fail_op(const std::string& what, Value v) const;

  std::deque<Node> nodes_;  // deque: value() references stay valid as the graph grows
  std::vector<Tensor> grads_;
  std::vector<uint8_t> grad_set_;
  bool backward_done_ = false;
};

std::string op_name(Op op);

}  // namespace psim
