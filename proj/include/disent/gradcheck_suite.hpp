#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace disent {

struct GradSuiteEntry {
  std::string name;
  std::size_t points = 0;
  double max_rel_error = 0.0;
  /// Draws discarded for sitting within the kink margin of a relu/hinge.
  std::size_t rejected = 0;
  bool passed = false;
};

struct GradSuiteReport {
  std::vector<GradSuiteEntry> entries;
  double tolerance = 1e-5;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Finite-difference checks of every tape op, every metric loss, the
/// two-branch joint objective and the FLF losses and objectives, each at
/// `points` random points kept at least 1e-3 away from any kink.
GradSuiteReport run_gradcheck_suite(std::uint64_t seed = 0, std::size_t points = 10,
                                    double tolerance = 1e-5);

}  // namespace disent
