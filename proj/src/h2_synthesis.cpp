#include "attiq/h2_synthesis.hpp"

#include <fmt/format.h>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace attiq {

using Eigen::MatrixXcd;
using Eigen::VectorXd;
using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

constexpr std::array<std::array<bool, 3>, kOctantCount> kPoints{{
    {false, false, false},
    {false, false, true},
    {false, true, false},
    {true, false, false},
    {false, true, true},
    {true, true, false},
    {true, false, true},
    {true, true, true},
}};

void check_octant(int octant) {
  if (octant < 1 || octant > kOctantCount)
    throw SynthesisError("octant index must be in 1..8, got " + std::to_string(octant));
}

MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

Euler linearization_point(int octant) {
  check_octant(octant);
  const auto& p = kPoints[octant - 1];
  return {p[0] ? kPi : 0.0, p[1] ? kPi : 0.0, p[2] ? kPi : 0.0};
}

Dcm linearization_dcm(int octant) {
  // Entries are exactly 0 or +-1; round away the sin(pi) residue.
  Dcm c = dcm_of(quat_of_euler(linearization_point(octant)));
  return c.array().round().matrix();
}

int octant_of_triple(bool roll_pi, bool pitch_pi, bool yaw_pi) {
  for (int i = 0; i < kOctantCount; ++i)
    if (kPoints[i][0] == roll_pi && kPoints[i][1] == pitch_pi && kPoints[i][2] == yaw_pi) return i + 1;
  return 1;  // unreachable: all eight triples are listed
}

double max_real_eigenvalue(const MatrixXd& a) {
  const Eigen::VectorXcd ev = Eigen::EigenSolver<MatrixXd>(a, false).eigenvalues();
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < ev.size(); ++i) m = std::max(m, ev[i].real());
  return m;
}

bool is_detectable(const MatrixXd& a, const MatrixXd& c, double tol) {
  const int n = static_cast<int>(a.rows());
  const Eigen::VectorXcd ev = Eigen::EigenSolver<MatrixXd>(a, false).eigenvalues();
  const double scale = std::max(1.0, a.norm() + c.norm());
  for (int i = 0; i < n; ++i) {
    if (ev[i].real() < -tol) continue;
    MatrixXcd pbh(n + c.rows(), n);
    pbh.topRows(n) = ev[i] * MatrixXcd::Identity(n, n) - a.cast<cd>();
    pbh.bottomRows(c.rows()) = c.cast<cd>();
    const Eigen::VectorXd sv = Eigen::JacobiSVD<MatrixXcd>(pbh).singularValues();
    if (sv[n - 1] < 1e-8 * scale) return false;
  }
  return true;
}

void LinearErrorPlant::validate() const {
  const int n = states();
  if (a.cols() != n || bw.rows() != n || cy.cols() != n || cz.cols() != n || dw.rows() != cy.rows() ||
      dw.cols() != bw.cols())
    throw SynthesisError("plant matrices have inconsistent dimensions");
  const MatrixXd r = dw * dw.transpose();
  Eigen::LLT<MatrixXd> llt(r);
  if (llt.info() != Eigen::Success || r.ldlt().rcond() < 1e-14)
    throw SynthesisError("Dw Dw' is singular; every measurement channel needs noise");
  if (!is_detectable(a, cy)) throw SynthesisError("(A, Cy) is not detectable");
}

LinearErrorPlant build_plant(int octant, const NoiseParams& noise, const Vec3& g, const Vec3& h) {
  check_octant(octant);
  if (g.norm() == 0.0) throw SynthesisError("gravity reference is zero", octant);
  if (h.norm() == 0.0) throw SynthesisError("magnetic reference is zero", octant);
  if (g.cross(h).norm() < 1e-6 * g.norm() * h.norm())
    throw SynthesisError("gravity and magnetic references are parallel; yaw is unobservable", octant);

  const Dcm r = linearization_dcm(octant);
  LinearErrorPlant p;
  p.a = MatrixXd::Zero(6, 6);
  p.a.topRightCorner(3, 3) = -Mat3::Identity();

  // w = (n_w, n_b, n_a, n_m): process channels drive the state, measurement
  // channels the output.
  p.bw = MatrixXd::Zero(6, 12);
  p.bw.block(0, 0, 3, 3) = -noise.gyro_noise * Mat3::Identity();
  p.bw.block(3, 3, 3, 3) = noise.bias_walk * Mat3::Identity();
  p.dw = MatrixXd::Zero(6, 12);
  p.dw.block(0, 6, 3, 3) = noise.accel_noise * Mat3::Identity();
  p.dw.block(3, 9, 3, 3) = noise.mag_noise * Mat3::Identity();

  p.cy = MatrixXd::Zero(6, 6);
  p.cy.block(0, 0, 3, 3) = skew(r * g);
  p.cy.block(3, 0, 3, 3) = skew(r * h);
  p.cz = MatrixXd::Identity(6, 6);
  return p;
}

// ---- Lyapunov / H2 norm ---------------------------------------------------

MatrixXd solve_lyapunov(const MatrixXd& a, const MatrixXd& q) {
  const int n = static_cast<int>(a.rows());
  const double lmax = max_real_eigenvalue(a);
  if (!(lmax < 0.0)) throw SynthesisError(fmt::format("Lyapunov equation needs a Hurwitz matrix (max Re = {:.3e})", lmax));
  // (I kron A + A kron I) vec(P) = -vec(Q), column-major vec.
  const MatrixXd eye = MatrixXd::Identity(n, n);
  MatrixXd k = MatrixXd::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      k.block(i * n, j * n, n, n) += eye(i, j) * a;
      k.block(i * n, j * n, n, n) += a(i, j) * eye;
    }
  const VectorXd rhs = -Eigen::Map<const VectorXd>(q.data(), n * n);
  const VectorXd x = k.fullPivLu().solve(rhs);
  return sym(Eigen::Map<const MatrixXd>(x.data(), n, n));
}

double h2_norm(const MatrixXd& a_cl, const MatrixXd& b_cl, const MatrixXd& cz) {
  const MatrixXd p = solve_lyapunov(a_cl, b_cl * b_cl.transpose());
  return std::sqrt(std::max(0.0, (cz * p * cz.transpose()).trace()));
}

double closed_loop_h2_norm(const LinearErrorPlant& plant, const MatrixXd& gain) {
  return h2_norm(plant.a + gain * plant.cy, plant.bw + gain * plant.dw, plant.cz);
}

// ---- Riccati oracle -------------------------------------------------------

namespace {

// Swap adjacent diagonal entries k, k+1 of an upper-triangular complex Schur
// form, updating the Schur vectors.
void swap_schur(MatrixXcd& t, MatrixXcd& u, int k) {
  const int n = static_cast<int>(t.rows());
  const cd x = t(k, k + 1);
  const cd y = t(k + 1, k + 1) - t(k, k);
  const double rho = std::hypot(std::abs(x), std::abs(y));
  if (rho == 0.0) return;
  const cd a = x / rho;
  const cd b = y / rho;
  // Q = [conj(a) conj(b); -b a] maps (x, y) to (rho, 0).
  Eigen::Matrix2cd q;
  q << std::conj(a), std::conj(b), -b, a;
  t.block(k, k, 2, n - k) = q * t.block(k, k, 2, n - k);
  t.block(0, k, k + 2, 2) = t.block(0, k, k + 2, 2) * q.adjoint();
  u.block(0, k, n, 2) = u.block(0, k, n, 2) * q.adjoint();
  t(k + 1, k) = 0.0;
}

}  // namespace

CareSolution solve_h2_care(const LinearErrorPlant& plant) {
  plant.validate();
  const int n = plant.states();
  const MatrixXd r = plant.dw * plant.dw.transpose();
  const MatrixXd r_inv = r.llt().solve(MatrixXd::Identity(r.rows(), r.cols()));
  const MatrixXd s = plant.bw * plant.dw.transpose();
  const MatrixXd a_t = plant.a - s * r_inv * plant.cy;
  const MatrixXd q = plant.bw * plant.bw.transpose() - s * r_inv * s.transpose();
  const MatrixXd g = plant.cy.transpose() * r_inv * plant.cy;

  // Filter Riccati A P + P A' - P G P + Q = 0 is the control form in A'.
  MatrixXd ham(2 * n, 2 * n);
  ham << a_t.transpose(), -g, -q, -a_t;

  Eigen::ComplexSchur<MatrixXcd> schur(ham.cast<cd>());
  if (schur.info() != Eigen::Success) throw SynthesisError("Schur decomposition failed");
  MatrixXcd t = schur.matrixT();
  MatrixXcd u = schur.matrixU();

  const double scale = std::max(1.0, ham.norm());
  for (int i = 0; i < 2 * n; ++i)
    if (std::abs(t(i, i).real()) < 1e-9 * scale)
      throw SynthesisError("Hamiltonian has eigenvalues on the imaginary axis; no stabilizing solution");

  // Bubble the stable eigenvalues to the leading block.
  for (int pass = 0; pass < 2 * n; ++pass) {
    bool moved = false;
    for (int k = 0; k + 1 < 2 * n; ++k) {
      if (t(k, k).real() > 0.0 && t(k + 1, k + 1).real() < 0.0) {
        swap_schur(t, u, k);
        moved = true;
      }
    }
    if (!moved) break;
  }
  for (int i = 0; i < n; ++i)
    if (!(t(i, i).real() < 0.0)) throw SynthesisError("Hamiltonian lacks n stable eigenvalues");

  const MatrixXcd u11 = u.topLeftCorner(n, n);
  const MatrixXcd u21 = u.bottomLeftCorner(n, n);
  // P = U21 U11^-1
  const MatrixXcd pc = u11.transpose().partialPivLu().solve(u21.transpose()).transpose();

  CareSolution sol;
  sol.p = sym(pc.real());
  sol.gain = -(sol.p * plant.cy.transpose() + s) * r_inv;
  const MatrixXd res = a_t * sol.p + sol.p * a_t.transpose() - sol.p * g * sol.p + q;
  sol.residual = res.norm();
  return sol;
}

// ---- LMI synthesis --------------------------------------------------------

namespace {

struct LmiLayout {
  int n, l, p, m;
  int x_vars() const { return n * (n + 1) / 2; }
  int w_vars() const { return n * l; }
  int q_vars() const { return m * (m + 1) / 2; }
  int total() const { return x_vars() + w_vars() + q_vars(); }
};

// Symmetric basis element for index pair (i <= j).
MatrixXd sym_basis(int dim, int i, int j) {
  MatrixXd e = MatrixXd::Zero(dim, dim);
  e(i, j) = 1.0;
  e(j, i) = 1.0;
  return e;
}

sdp::Problem build_lmi(const LinearErrorPlant& pl, const LmiLayout& lay) {
  const int n = lay.n, l = lay.l, p = lay.p, m = lay.m;
  sdp::Problem prob;
  prob.block_sizes = {n + p, m + n};
  prob.c.resize(2);
  prob.c[0] = MatrixXd::Zero(n + p, n + p);
  prob.c[0].bottomRightCorner(p, p).setIdentity();
  prob.c[1] = MatrixXd::Zero(m + n, m + n);
  prob.c[1].topRightCorner(m, n) = -pl.cz;
  prob.c[1].bottomLeftCorner(n, m) = -pl.cz.transpose();
  prob.b = VectorXd::Zero(lay.total());
  prob.a.reserve(lay.total());

  // X: enters both LMIs.
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) {
      const MatrixXd e = sym_basis(n, i, j);
      sdp::BlockMatrix blk(2);
      blk[0] = MatrixXd::Zero(n + p, n + p);
      blk[0].topLeftCorner(n, n) = e * pl.a + pl.a.transpose() * e;
      blk[0].topRightCorner(n, p) = e * pl.bw;
      blk[0].bottomLeftCorner(p, n) = pl.bw.transpose() * e;
      blk[1] = MatrixXd::Zero(m + n, m + n);
      blk[1].bottomRightCorner(n, n) = -e;
      prob.a.push_back(std::move(blk));
    }
  // W (n x l), column-major.
  for (int c = 0; c < l; ++c)
    for (int r = 0; r < n; ++r) {
      MatrixXd g = MatrixXd::Zero(n, l);
      g(r, c) = 1.0;
      sdp::BlockMatrix blk(2);
      blk[0] = MatrixXd::Zero(n + p, n + p);
      blk[0].topLeftCorner(n, n) = g * pl.cy + pl.cy.transpose() * g.transpose();
      blk[0].topRightCorner(n, p) = g * pl.dw;
      blk[0].bottomLeftCorner(p, n) = pl.dw.transpose() * g.transpose();
      blk[1] = MatrixXd();
      prob.a.push_back(std::move(blk));
    }
  // Q: second LMI and the objective -trace(Q).
  int idx = lay.x_vars() + lay.w_vars();
  for (int j = 0; j < m; ++j)
    for (int i = 0; i <= j; ++i) {
      sdp::BlockMatrix blk(2);
      blk[0] = MatrixXd();
      blk[1] = MatrixXd::Zero(m + n, m + n);
      blk[1].topLeftCorner(m, m) = -sym_basis(m, i, j);
      prob.a.push_back(std::move(blk));
      prob.b[idx++] = (i == j) ? -1.0 : 0.0;
    }
  return prob;
}

struct Unpacked {
  MatrixXd x, w, q;
};

Unpacked unpack(const VectorXd& y, const LmiLayout& lay) {
  Unpacked u;
  u.x = MatrixXd::Zero(lay.n, lay.n);
  u.w = MatrixXd::Zero(lay.n, lay.l);
  u.q = MatrixXd::Zero(lay.m, lay.m);
  int k = 0;
  for (int j = 0; j < lay.n; ++j)
    for (int i = 0; i <= j; ++i) u.x(i, j) = u.x(j, i) = y[k++];
  for (int c = 0; c < lay.l; ++c)
    for (int r = 0; r < lay.n; ++r) u.w(r, c) = y[k++];
  for (int j = 0; j < lay.m; ++j)
    for (int i = 0; i <= j; ++i) u.q(i, j) = u.q(j, i) = y[k++];
  return u;
}

// Solves the LMI for the plant in coordinates x = T xs with the disturbance
// scaled by k, and maps the solution back.
LmiSolution solve_scaled(const LinearErrorPlant& pl, const VectorXd& t, double k, const sdp::Options& opt) {
  const LmiLayout lay{pl.states(), pl.outputs(), pl.disturbances(), pl.performance()};
  const MatrixXd tm = t.asDiagonal();
  const MatrixXd t_inv = t.cwiseInverse().asDiagonal();
  LinearErrorPlant s;
  s.a = t_inv * pl.a * tm;
  s.bw = k * t_inv * pl.bw;
  s.cy = pl.cy * tm;
  s.dw = k * pl.dw;
  s.cz = pl.cz * tm;

  const sdp::Problem prob = build_lmi(s, lay);
  LmiSolution sol;
  sol.solver = sdp::solve(prob, opt);
  const Unpacked u = unpack(sol.solver.y, lay);

  const sdp::BlockMatrix f = sdp::slack(prob, sol.solver.y);
  for (int b = 0; b < 2; ++b) {
    const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(sym(f[b]), Eigen::EigenvaluesOnly).eigenvalues();
    sol.lmi_max_eigenvalue[b] = -ev[0];  // LMI matrix is -F
  }

  const MatrixXd gain_s = u.x.ldlt().solve(u.w);
  sol.gain = tm * gain_s;
  sol.x = k * k * t_inv * u.x * t_inv;
  sol.w = k * k * t_inv * u.w;
  sol.q = u.q / (k * k);
  sol.gamma = std::sqrt(std::max(0.0, sol.q.trace()));
  sol.x_min_eigenvalue =
      Eigen::SelfAdjointEigenSolver<MatrixXd>(sym(sol.x), Eigen::EigenvaluesOnly).eigenvalues()[0];
  return sol;
}

std::string solver_failure(const sdp::Result& r) {
  return fmt::format("LMI infeasible or not converged ({} after {} iterations, relative gap {:.3e}, "
                     "primal residual {:.3e}, dual residual {:.3e})",
                     sdp::to_string(r.status), r.iterations, r.relative_gap, r.primal_infeasibility,
                     r.dual_infeasibility);
}

LmiSolution solve_balanced(const LinearErrorPlant& plant, const LmiOptions& options) {
  const int n = plant.states();
  VectorXd t = VectorXd::Ones(n);
  double k = 1.0;
  if (options.rescale) {
    // Normalize the disturbance so the first solve starts near unit scale.
    const double bd = std::max(plant.bw.norm(), plant.dw.norm());
    k = bd > 0.0 ? 1.0 / bd : 1.0;
    sdp::Options rough = options.sdp;
    rough.gap_tolerance = std::max(1e-4, options.sdp.gap_tolerance);
    rough.feasibility_tolerance = std::max(1e-6, options.sdp.feasibility_tolerance);
    rough.step_tolerance = std::numeric_limits<double>::infinity();
    const LmiSolution first = solve_scaled(plant, t, k, rough);
    if (first.solver.status != sdp::Status::Optimal) {
      throw SynthesisError(solver_failure(first.solver));
    }
    // Balance the state so the error covariance bound X^-1 has unit diagonal,
    // and the disturbance so that gamma is of order one.
    const MatrixXd y = first.x.ldlt().solve(MatrixXd::Identity(n, n));
    t = y.diagonal().cwiseMax(1e-300).cwiseSqrt();
    k = first.gamma > 0.0 ? 1.0 / first.gamma : 1.0;
  }
  LmiSolution sol = solve_scaled(plant, t, k, options.sdp);
  if (sol.solver.status != sdp::Status::Optimal && sol.solver.status != sdp::Status::NearOptimal) {
    throw SynthesisError(solver_failure(sol.solver));
  }
  return sol;
}

}  // namespace

LmiSolution solve_h2_lmi(const LinearErrorPlant& plant, const LmiOptions& options) {
  plant.validate();
  return solve_balanced(plant, options);
}

GainSchedule synthesize_schedule(const NoiseParams& noise, const Vec3& g, const Vec3& h,
                                 const LmiOptions& options) {
  GainSchedule sched;
  sched.noise = noise;
  sched.reference = {g, h};
  for (int i = 1; i <= kOctantCount; ++i) {
    try {
      const LinearErrorPlant plant = build_plant(i, noise, g, h);
      const LmiSolution lmi = solve_h2_lmi(plant, options);
      const CareSolution care = solve_h2_care(plant);
      const double diff = (lmi.gain - care.gain).norm() / care.gain.norm();
      if (!(diff < kCareAgreementTolerance))
        throw SynthesisError(fmt::format("LMI gain disagrees with Riccati gain (relative difference {:.3e})", diff));
      if (!(max_real_eigenvalue(plant.a + lmi.gain * plant.cy) < -1e-9))
        throw SynthesisError("closed loop is not Hurwitz");
      sched.gains[i - 1] = lmi.gain;
      sched.gamma[i - 1] = lmi.gamma;
      sched.care_difference[i - 1] = diff;
    } catch (const SynthesisError& e) {
      if (e.octant()) throw;
      throw SynthesisError(e.what(), i);
    }
  }
  return sched;
}

}  // namespace attiq
