#pragma once

#include "tgf/array.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace tgf {

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-5;
  /// Denominator floor for the per-coordinate relative error.
  double abs_floor = 1e-6;
  /// A coordinate whose one-sided slopes disagree by more than
  /// kink_abs + kink_rel * max(|fwd|, |bwd|) sits on a kink and is excluded.
  /// So is a failing coordinate whose slope gap does not shrink when the
  /// step is quartered.
  double kink_abs = 1e-3;
  double kink_rel = 1e-2;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  Index checked = 0;
  std::vector<Index> unreliable;  ///< flat (row-major) coordinates excluded
  Index worst_coordinate = -1;
  bool passed = true;
};

/// Compares the tape gradient of a scalar function with central differences
/// (f(x + h e_i) - f(x - h e_i)) / 2h, coordinate by coordinate.
GradCheckReport grad_check(const std::function<Var(Tape&, const Var&)>& f, const Matrix& x,
                           const GradCheckOptions& opts = {});

/// Same check over a set of parameters perturbed in place; one report per
/// parameter name. `loss` must rebuild the whole computation on the tape.
std::map<std::string, GradCheckReport> grad_check_parameters(std::vector<Parameter*> params,
                                                             const std::function<Var(Tape&)>& loss,
                                                             const GradCheckOptions& opts = {});

}  // namespace tgf
