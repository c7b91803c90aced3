#pragma once

// Dense primal-dual interior-point solver for small block-diagonal SDPs.
//
// Dual (LMI) form, which is how the synthesis problems are stated:
//
//     maximize    b' y
//     subject to  S = C - sum_i y_i A_i  >= 0      (block diagonal)
//
// with the primal
//
//     minimize    <C, X>
//     subject to  <A_i, X> = b_i,  X >= 0.
//
// Search direction is HKM with Mehrotra predictor-corrector, started from an
// infeasible point X = xi I, S = eta I, y = 0.

#include <Eigen/Core>

#include <string>
#include <vector>

namespace attiq::sdp {

/// One symmetric matrix per block.
using BlockMatrix = std::vector<Eigen::MatrixXd>;

struct Problem {
  std::vector<int> block_sizes;
  BlockMatrix c;
  /// a[i][k]: block k of constraint matrix A_i. A 0x0 matrix marks a zero block.
  std::vector<BlockMatrix> a;
  Eigen::VectorXd b;

  int num_vars() const { return static_cast<int>(a.size()); }
  /// Throws std::invalid_argument on inconsistent sizes or asymmetric data.
  void validate() const;
};

struct Options {
  double gap_tolerance = 1e-9;         ///< on <X, S> / mean(|pobj|, |dobj|)
  double feasibility_tolerance = 1e-7; ///< relative primal and dual residuals
  /// Once the above hold, iterate until max |dy| <= step_tolerance (1 + max |y|).
  double step_tolerance = 1e-9;
  /// A run that stalls or hits the iteration cap with a gap below this (and
  /// feasible residuals) ends as NearOptimal instead of failing.
  double reduced_gap_tolerance = 1e-6;
  int max_iterations = 120;
  double step_fraction = 0.98;
};

enum class Status { Optimal, NearOptimal, Infeasible, MaxIterations, NumericalFailure };

std::string to_string(Status s);

struct Result {
  Status status = Status::NumericalFailure;
  Eigen::VectorXd y;
  BlockMatrix x;  ///< primal matrix
  BlockMatrix s;  ///< dual slack C - sum y_i A_i
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double relative_gap = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;
};

Result solve(const Problem& problem, const Options& options = {});

/// C - sum_i y_i A_i.
BlockMatrix slack(const Problem& problem, const Eigen::VectorXd& y);

/// Smallest eigenvalue over all blocks.
double min_eigenvalue(const BlockMatrix& m);

}  // namespace attiq::sdp
