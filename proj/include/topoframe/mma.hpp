#pragma once

#include <span>
#include <vector>

namespace topoframe {

struct MmaOptions {
  double initial_asymptote = 0.5;  // initial distance, fraction of the bound range
  double contract = 0.7;           // asymptote factor on oscillation
  double expand = 1.2;             // asymptote factor on monotone progress
  double min_gap = 0.01;           // min asymptote distance, fraction of range
  double max_gap = 10.0;           // max asymptote distance, fraction of range
  double move_limit = 1.0;         // max step, fraction of range
  double albefa = 0.1;             // inner move bound towards the asymptotes
};

/// Iteration history kept between MMA steps.
struct MmaState {
  std::vector<double> lower_asymptote;
  std::vector<double> upper_asymptote;
  std::vector<double> previous;         // x^{k-1}
  std::vector<double> before_previous;  // x^{k-2}
  double multiplier = 0.0;              // volume-constraint multiplier of the last subproblem
  int iteration = 0;
};

/// Method of moving asymptotes for one objective, at most one inequality
/// constraint g(x) <= 0 and box bounds. Each step builds the convex separable
/// approximation around x and solves it exactly through its scalar dual.
class Mma {
 public:
  Mma(std::vector<double> lower, std::vector<double> upper, MmaOptions options = {});

  /// Returns the minimiser of the subproblem at x. Pass an empty `dg` for an
  /// unconstrained problem. Throws Error("infeasible bounds") when no point in
  /// the box can satisfy the linearised constraint.
  std::vector<double> step(std::span<const double> x, double f, std::span<const double> df,
                           double g, std::span<const double> dg);

  const MmaState& state() const { return state_; }
  std::size_t size() const { return lower_.size(); }
  /// Forgets the history (asymptotes restart from their initial spread).
  void reset();

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
  MmaOptions options_;
  MmaState state_;
};

}  // namespace topoframe
