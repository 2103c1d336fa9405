#pragma once

#include <functional>
#include <vector>

#include "psim/graph.hpp"

namespace psim {

// Builds a scalar loss from graph leaves. Must be deterministic: called many
// times with perturbed copies of the same inputs.
using BuildFn = std::function<Value(Graph&, const std::vector<Value>&)>;

struct FdReport {
  double max_rel_err = 0.0;
  int64_t checked = 0;     // number of scalar derivatives compared
  int input_index = -1;    // location of the worst element
  int64_t element = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central finite differences with step h against the tape gradient.
// rel err = |a - f| / max(|a|, |f|, floor).
FdReport fd_check(const std::vector<Tensor>& inputs, const BuildFn& build, double h = 1e-5,
                  double floor = 1e-6);

}  // namespace psim
