#include "attiq/sdp.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <random>

using namespace attiq;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }

// minimize t subject to t I - M >= 0, written as maximize -t with S = -M + t I.
sdp::Problem max_eigenvalue_problem(const MatrixXd& m) {
  sdp::Problem p;
  p.block_sizes = {static_cast<int>(m.rows())};
  p.c = {-m};
  p.a = {{-MatrixXd::Identity(m.rows(), m.cols())}};
  p.b = VectorXd::Constant(1, -1.0);
  return p;
}

}  // namespace

TEST(Sdp, ScalarBound) {
  // maximize y subject to 1 - y >= 0
  sdp::Problem p;
  p.block_sizes = {1};
  p.c = {scalar(1.0)};
  p.a = {{scalar(1.0)}};
  p.b = VectorXd::Constant(1, 1.0);
  const sdp::Result r = sdp::solve(p);
  ASSERT_EQ(r.status, sdp::Status::Optimal);
  EXPECT_NEAR(r.y[0], 1.0, 1e-7);
  EXPECT_NEAR(r.primal_objective, 1.0, 1e-7);
}

TEST(Sdp, LargestEigenvalueMatchesEigensolver) {
  std::mt19937_64 g(3);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd m(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) m(i, j) = n(g);
    m = 0.5 * (m + m.transpose()).eval();
    const double oracle = Eigen::SelfAdjointEigenSolver<MatrixXd>(m).eigenvalues().maxCoeff();
    const sdp::Result r = sdp::solve(max_eigenvalue_problem(m));
    ASSERT_EQ(r.status, sdp::Status::Optimal);
    EXPECT_NEAR(r.y[0], oracle, 1e-7 * (1.0 + std::abs(oracle)));
    EXPECT_GE(sdp::min_eigenvalue(r.s), -1e-8);
    EXPECT_GE(sdp::min_eigenvalue(r.x), -1e-8);
  }
}

TEST(Sdp, TwoBlocksAndZeroBlock) {
  // maximize y1 + y2 subject to 2 - y1 >= 0 and [[3 - y2, 0], [0, 1]] >= 0.
  sdp::Problem p;
  p.block_sizes = {1, 2};
  MatrixXd c2(2, 2);
  c2 << 3, 0, 0, 1;
  MatrixXd a2(2, 2);
  a2 << 1, 0, 0, 0;
  p.c = {scalar(2.0), c2};
  p.a = {{scalar(1.0), MatrixXd()}, {MatrixXd(), a2}};
  p.b = VectorXd::Constant(2, 1.0);
  ASSERT_NO_THROW(p.validate());
  const sdp::Result r = sdp::solve(p);
  ASSERT_EQ(r.status, sdp::Status::Optimal);
  EXPECT_NEAR(r.y[0], 2.0, 1e-6);
  EXPECT_NEAR(r.y[1], 3.0, 1e-6);
  const sdp::BlockMatrix s = sdp::slack(p, r.y);
  EXPECT_NEAR(s[1](1, 1), 1.0, 1e-12);
}

TEST(Sdp, InfeasibleDualIsNotReportedOptimal) {
  // S = -1 regardless of y.
  sdp::Problem p;
  p.block_sizes = {1};
  p.c = {scalar(-1.0)};
  p.a = {{scalar(0.0)}};
  p.b = VectorXd::Constant(1, 1.0);
  const sdp::Status st = sdp::solve(p).status;
  EXPECT_NE(st, sdp::Status::Optimal);
  EXPECT_NE(st, sdp::Status::NearOptimal);
}

TEST(Sdp, ValidateRejectsBadData) {
  sdp::Problem p;
  p.block_sizes = {2};
  MatrixXd c(2, 2);
  c << 1, 2, 0, 1;
  p.c = {c};
  p.a = {{MatrixXd::Identity(2, 2)}};
  p.b = VectorXd::Constant(1, 1.0);
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.c = {MatrixXd::Identity(2, 2)};
  p.b = VectorXd::Constant(2, 1.0);
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.b = VectorXd::Constant(1, 1.0);
  p.a = {{MatrixXd::Identity(3, 3)}};
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Sdp, StatusNames) {
  EXPECT_EQ(sdp::to_string(sdp::Status::Optimal), "optimal");
  EXPECT_NE(sdp::to_string(sdp::Status::Infeasible), sdp::to_string(sdp::Status::MaxIterations));
}
