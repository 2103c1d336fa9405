#include "psim/fd.hpp"

#include <cmath>
#include <stdexcept>

namespace psim {

namespace {

double eval(const std::vector<Tensor>& inputs, const BuildFn& build) {
  Graph g;
  std::vector<Value> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(g.leaf(t, false));
  Value loss = build(g, leaves);
  const Tensor& out = g.value(loss);
  if (out.numel() != 1) throw std::invalid_argument("fd_check: build function must return a scalar");
  return out.data[0];
}

}  // namespace

FdReport fd_check(const std::vector<Tensor>& inputs, const BuildFn& build, double h, double floor) {
  Graph g;
  std::vector<Value> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(g.leaf(t, true));
  Value loss = build(g, leaves);
  if (g.value(loss).numel() != 1) throw std::invalid_argument("fd_check: build function must return a scalar");
  g.backward(loss);

  std::vector<Tensor> analytic;
  analytic.reserve(inputs.size());
  for (Value v : leaves) analytic.push_back(g.grad(v));

  FdReport rep;
  std::vector<Tensor> work = inputs;
  for (size_t k = 0; k < work.size(); ++k) {
    for (int64_t i = 0; i < work[k].numel(); ++i) {
      const double orig = work[k][i];
      work[k][i] = orig + h;
      const double fp = eval(work, build);
      work[k][i] = orig - h;
      const double fm = eval(work, build);
      work[k][i] = orig;

      const double num = (fp - fm) / (2.0 * h);
      const double ana = analytic[k][i];
      const double denom = std::max({std::fabs(num), std::fabs(ana), floor});
      const double rel = std::fabs(num - ana) / denom;
      ++rep.checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.input_index = static_cast<int>(k);
        rep.element = i;
        rep.analytic = ana;
        rep.numeric = num;
      }
    }
  }
  return rep;
}

}  // namespace psim
