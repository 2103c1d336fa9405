#pragma once

// Finite-difference audit of every differentiable building block: network
// layers, activations, and all loss terms, each on several random shapes.
// Backed by the same central-difference checker the unit tests use.

#include <cstdint>
#include <string>
#include <vector>

namespace psim {

struct GradcheckEntry {
  std::string op;
  int shapes = 0;            // random shapes exercised
  double max_rel_err = 0.0;  // worst relative error across shapes and elements
  double tolerance = 1e-4;
  bool pass = false;
};

struct GradcheckSummary {
  std::vector<GradcheckEntry> entries;
  double max_rel_err = 0.0;
  bool all_pass = false;
};

GradcheckSummary run_gradcheck_suite(uint64_t seed = 1);

}  // namespace psim
