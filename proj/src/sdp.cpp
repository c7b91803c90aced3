#include "attiq/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace attiq::sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::NearOptimal: return "near_optimal";
    case Status::Infeasible: return "infeasible";
    case Status::MaxIterations: return "max_iterations";
    case Status::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

void Problem::validate() const {
  const std::size_t nb = block_sizes.size();
  if (c.size() != nb) throw std::invalid_argument("sdp: C has wrong block count");
  if (static_cast<std::size_t>(b.size()) != a.size()) throw std::invalid_argument("sdp: b and A sizes differ");
  auto check = [&](const MatrixXd& m, std::size_t k, bool allow_empty) {
    if (allow_empty && m.size() == 0) return;
    if (m.rows() != block_sizes[k] || m.cols() != block_sizes[k])
      throw std::invalid_argument("sdp: block " + std::to_string(k) + " has wrong size");
    if (!(m - m.transpose()).isZero(1e-12 * (1.0 + m.norm())))
      throw std::invalid_argument("sdp: block " + std::to_string(k) + " is not symmetric");
  };
  for (std::size_t k = 0; k < nb; ++k) check(c[k], k, false);
  for (const BlockMatrix& ai : a) {
    if (ai.size() != nb) throw std::invalid_argument("sdp: constraint matrix has wrong block count");
    for (std::size_t k = 0; k < nb; ++k) check(ai[k], k, true);
  }
}

namespace {

double inner(const BlockMatrix& x, const BlockMatrix& y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k].array() * y[k].array()).sum();
  return s;
}

double fro(const BlockMatrix& x) { return std::sqrt(inner(x, x)); }

// Sum over blocks of <A_ik, M_k>, skipping zero blocks.
double apply_a(const BlockMatrix& ai, const BlockMatrix& m) {
  double s = 0.0;
  for (std::size_t k = 0; k < ai.size(); ++k)
    if (ai[k].size()) s += (ai[k].array() * m[k].array()).sum();
  return s;
}

MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Largest alpha with x + alpha dx >= 0 (infinity if dx >= 0 along x).
double max_step(const BlockMatrix& x, const BlockMatrix& dx) {
  double alpha = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < x.size(); ++k) {
    Eigen::LLT<MatrixXd> llt(x[k]);
    if (llt.info() != Eigen::Success) return 0.0;
    const MatrixXd l_inv = llt.matrixL().solve(MatrixXd::Identity(x[k].rows(), x[k].cols()));
    const MatrixXd m = sym(l_inv * dx[k] * l_inv.transpose());
    const double lmin = Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
    if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
  }
  return alpha;
}

struct Direction {
  VectorXd dy;
  BlockMatrix dx;
  BlockMatrix ds;
};

}  // namespace

BlockMatrix slack(const Problem& p, const VectorXd& y) {
  BlockMatrix s = p.c;
  for (int i = 0; i < p.num_vars(); ++i) {
    if (y[i] == 0.0) continue;
    for (std::size_t k = 0; k < s.size(); ++k)
      if (p.a[i][k].size()) s[k] -= y[i] * p.a[i][k];
  }
  return s;
}

double min_eigenvalue(const BlockMatrix& m) {
  double lmin = std::numeric_limits<double>::infinity();
  for (const MatrixXd& b : m)
    lmin = std::min(lmin, Eigen::SelfAdjointEigenSolver<MatrixXd>(sym(b), Eigen::EigenvaluesOnly).eigenvalues()(0));
  return lmin;
}

Result solve(const Problem& p, const Options& opt) {
  p.validate();
  const int m = p.num_vars();
  const std::size_t nb = p.block_sizes.size();
  int n_total = 0;
  for (int s : p.block_sizes) n_total += s;

  double norm_c = fro(p.c);
  double max_a = 0.0, max_ratio = 0.0;
  for (int i = 0; i < m; ++i) {
    const double na = fro([&] {
      BlockMatrix z = p.a[i];
      for (std::size_t k = 0; k < nb; ++k)
        if (!z[k].size()) z[k] = MatrixXd::Zero(p.block_sizes[k], p.block_sizes[k]);
      return z;
    }());
    max_a = std::max(max_a, na);
    max_ratio = std::max(max_ratio, (1.0 + std::abs(p.b[i])) / (1.0 + na));
  }
  const double root_n = std::sqrt(static_cast<double>(n_total));
  const double xi = std::max({10.0, root_n, n_total * max_ratio});
  const double eta = std::max({10.0, root_n, max_a, norm_c});

  Result r;
  r.y = VectorXd::Zero(m);
  r.x.resize(nb);
  r.s.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    r.x[k] = xi * MatrixXd::Identity(p.block_sizes[k], p.block_sizes[k]);
    r.s[k] = eta * MatrixXd::Identity(p.block_sizes[k], p.block_sizes[k]);
  }
  const double x0_norm = fro(r.x);
  const double norm_b = p.b.norm();

  auto a_of = [&](const BlockMatrix& mat) {
    VectorXd v(m);
    for (int i = 0; i < m; ++i) v[i] = apply_a(p.a[i], mat);
    return v;
  };
  auto a_adj = [&](const VectorXd& y) {
    BlockMatrix out(nb);
    for (std::size_t k = 0; k < nb; ++k) out[k] = MatrixXd::Zero(p.block_sizes[k], p.block_sizes[k]);
    for (int i = 0; i < m; ++i)
      for (std::size_t k = 0; k < nb; ++k)
        if (p.a[i][k].size() && y[i] != 0.0) out[k] += y[i] * p.a[i][k];
    return out;
  };

  int stalled = 0;
  double last_step = std::numeric_limits<double>::infinity();
  std::optional<Result> best;
  for (int it = 0;; ++it) {
    BlockMatrix rd = p.c;
    const BlockMatrix ay = a_adj(r.y);
    for (std::size_t k = 0; k < nb; ++k) rd[k] -= r.s[k] + ay[k];
    const VectorXd rp = p.b - a_of(r.x);

    r.iterations = it;
    r.primal_objective = inner(p.c, r.x);
    r.dual_objective = p.b.dot(r.y);
    const double gap = inner(r.x, r.s);
    const double scale = std::max(0.5 * (std::abs(r.primal_objective) + std::abs(r.dual_objective)), 1e-12);
    r.relative_gap = gap / scale;
    r.primal_infeasibility = rp.norm() / (1.0 + norm_b);
    r.dual_infeasibility = fro(rd) / (1.0 + norm_c);

    const bool certified = r.relative_gap < opt.gap_tolerance &&
                           r.primal_infeasibility < opt.feasibility_tolerance &&
                           r.dual_infeasibility < opt.feasibility_tolerance;
    if (certified) {
      r.status = Status::Optimal;
      best = r;
      // The gap bounds the objective error only; free directions of y (the
      // estimator gain) settle more slowly, so wait for the steps to vanish.
      if (last_step <= opt.step_tolerance * (1.0 + r.y.lpNorm<Eigen::Infinity>())) return r;
    }
    auto finish = [&](Status s) {
      if (best) return *best;
      const bool reduced = r.relative_gap < opt.reduced_gap_tolerance &&
                           r.primal_infeasibility < opt.feasibility_tolerance &&
                           r.dual_infeasibility < opt.feasibility_tolerance;
      r.status = reduced && s != Status::Infeasible ? Status::NearOptimal : s;
      return r;
    };
    // Unbounded primal ray with A(X) ~ 0 and <C, X> < 0 certifies that the
    // LMI has no feasible point.
    const double xn = fro(r.x);
    if (xn > 1e8 * x0_norm && r.primal_objective / xn < -1e-8 && rp.norm() / xn < 1e-8)
      return finish(Status::Infeasible);
    if (std::abs(r.dual_objective) > 1e12 * (1.0 + norm_c) && r.dual_infeasibility < 1e-6)
      return finish(Status::Infeasible);  // dual unbounded: primal infeasible
    if (it >= opt.max_iterations) return finish(Status::MaxIterations);

    const double mu = gap / n_total;
    BlockMatrix s_inv(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      Eigen::LLT<MatrixXd> llt(r.s[k]);
      if (llt.info() != Eigen::Success) return finish(Status::NumericalFailure);
      s_inv[k] = sym(llt.solve(MatrixXd::Identity(p.block_sizes[k], p.block_sizes[k])));
    }

    // Schur complement M_ij = <A_i, X A_j S^-1>.
    MatrixXd schur = MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      for (std::size_t k = 0; k < nb; ++k) {
        if (!p.a[j][k].size()) continue;
        const MatrixXd t = r.x[k] * p.a[j][k] * s_inv[k];
        for (int i = 0; i < m; ++i)
          if (p.a[i][k].size()) schur(i, j) += (p.a[i][k].array() * t.array()).sum();
      }
    }
    schur = sym(schur);
    Eigen::LLT<MatrixXd> schur_llt(schur);
    Eigen::LDLT<MatrixXd> schur_ldlt;
    const bool use_llt = schur_llt.info() == Eigen::Success;
    if (!use_llt) schur_ldlt.compute(schur);

    BlockMatrix x_rd_sinv(nb);
    for (std::size_t k = 0; k < nb; ++k) x_rd_sinv[k] = r.x[k] * rd[k] * s_inv[k];

    auto direction = [&](const BlockMatrix& rc) {
      BlockMatrix t(nb);
      for (std::size_t k = 0; k < nb; ++k) t[k] = rc[k] - x_rd_sinv[k];
      const VectorXd h = rp - a_of(t);
      Direction d;
      d.dy = use_llt ? VectorXd(schur_llt.solve(h)) : VectorXd(schur_ldlt.solve(h));
      const BlockMatrix ady = a_adj(d.dy);
      d.ds.resize(nb);
      d.dx.resize(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        d.ds[k] = sym(rd[k] - ady[k]);
        d.dx[k] = sym(rc[k] - r.x[k] * d.ds[k] * s_inv[k]);
      }
      return d;
    };

    // Predictor (affine scaling).
    BlockMatrix rc(nb);
    for (std::size_t k = 0; k < nb; ++k) rc[k] = -r.x[k];
    const Direction pred = direction(rc);
    const double ap = std::min(1.0, max_step(r.x, pred.dx));
    const double ad = std::min(1.0, max_step(r.s, pred.ds));
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < nb; ++k)
      mu_aff += ((r.x[k] + ap * pred.dx[k]).array() * (r.s[k] + ad * pred.ds[k]).array()).sum();
    mu_aff /= n_total;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // Corrector.
    for (std::size_t k = 0; k < nb; ++k)
      rc[k] = sigma * mu * s_inv[k] - r.x[k] - pred.dx[k] * pred.ds[k] * s_inv[k];
    const Direction corr = direction(rc);
    const double alpha_p = std::min(1.0, opt.step_fraction * max_step(r.x, corr.dx));
    const double alpha_d = std::min(1.0, opt.step_fraction * max_step(r.s, corr.ds));
    if (!std::isfinite(alpha_p) || !std::isfinite(alpha_d) || !corr.dy.allFinite())
      return finish(Status::NumericalFailure);

    for (std::size_t k = 0; k < nb; ++k) {
      r.x[k] = sym(r.x[k] + alpha_p * corr.dx[k]);
      r.s[k] = sym(r.s[k] + alpha_d * corr.ds[k]);
    }
    r.y += alpha_d * corr.dy;
    last_step = alpha_d * corr.dy.lpNorm<Eigen::Infinity>();

    stalled = (alpha_p < 1e-8 && alpha_d < 1e-8) ? stalled + 1 : 0;
    if (stalled >= 3) return finish(Status::NumericalFailure);
  }
}

}  // namespace attiq::sdp
