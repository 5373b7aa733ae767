#include "jointkin/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jointkin/error.hpp"

namespace jointkin {

namespace {

Eigen::VectorXd checked(const ResidualFn& f, const Eigen::VectorXd& x, int iter) {
  Eigen::VectorXd r = f(x);
  if (!r.allFinite())
    throw Error(ErrorCode::NonFiniteResidual, "residual not finite at iterate " + std::to_string(iter));
  return r;
}

double half_sq(const Eigen::VectorXd& r) { return 0.5 * r.squaredNorm(); }

}  // namespace

Eigen::MatrixXd finite_difference_jacobian(const ResidualFn& f, const Eigen::VectorXd& x, double h) {
  Eigen::MatrixXd J;
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = h * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + step;
    const Eigen::VectorXd rp = f(xp);
    xp[j] = x[j] - step;
    const Eigen::VectorXd rm = f(xp);
    xp[j] = x[j];
    if (J.size() == 0) J.resize(rp.size(), x.size());
    J.col(j) = (rp - rm) / (2.0 * step);
  }
  return J;
}

SolveResult secant_lm(const ResidualFn& f, const Eigen::VectorXd& x0, const SolverOptions& opts,
                      const ProjectionFn& project) {
  SolveResult res;
  Eigen::VectorXd x = x0;
  if (project) project(x);
  Eigen::VectorXd r = checked(f, x, 0);
  Eigen::MatrixXd J = finite_difference_jacobian(f, x, opts.finite_diff_h);
  double cost = half_sq(r);
  res.cost_history.push_back(cost);

  const Eigen::Index n = x.size();
  Eigen::MatrixXd A = J.transpose() * J;
  Eigen::VectorXd g = J.transpose() * r;
  double mu = opts.damping_init * std::max(A.diagonal().maxCoeff(), 1e-12);
  bool fresh = true;  // J was just computed by finite differences
  int since_refresh = 0;

  auto refresh = [&] {
    J = finite_difference_jacobian(f, x, opts.finite_diff_h);
    A = J.transpose() * J;
    g = J.transpose() * r;
    fresh = true;
    since_refresh = 0;
  };

  int k = 0;
  for (; k < opts.max_iter; ++k) {
    if (g.lpNorm<Eigen::Infinity>() <= opts.tol_grad || cost == 0.0) {
      if (fresh) {
        res.converged = true;
        break;
      }
      refresh();
      continue;
    }
    const Eigen::MatrixXd M = A + mu * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd h = M.ldlt().solve(-g);
    Eigen::VectorXd xn = x + h;
    if (project) {
      project(xn);
      h = xn - x;
    }
    if (h.norm() <= opts.tol_step * (x.norm() + opts.tol_step)) {
      if (fresh) {
        res.converged = true;
        break;
      }
      refresh();
      continue;
    }
    const Eigen::VectorXd rn = checked(f, xn, k + 1);
    const double cost_n = half_sq(rn);

    // Broyden rank-one update along the attempted step.
    J += ((rn - r - J * h) * h.transpose()) / h.squaredNorm();
    fresh = false;

    if (cost_n < cost) {
      x = xn;
      r = rn;
      cost = cost_n;
      res.cost_history.push_back(cost);
      mu = std::max(mu / 3.0, 1e-300);
    } else {
      mu *= 10.0;
    }
    if (++since_refresh >= opts.jacobian_refresh) {
      refresh();
    } else {
      A = J.transpose() * J;
      g = J.transpose() * r;
    }
  }
  res.x = x;
  res.iterations = k;
  res.cost = cost;
  res.jacobian = J;
  return res;
}

SolveResult gauss_newton(const ResidualJacobianFn& f, const Eigen::VectorXd& x0,
                         const SolverOptions& opts) {
  SolveResult res;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  f(x, r, J);
  if (!r.allFinite() || !J.allFinite())
    throw Error(ErrorCode::NonFiniteResidual, "residual not finite at iterate 0");
  double cost = half_sq(r);
  res.cost_history.push_back(cost);

  int k = 0;
  for (; k < opts.max_iter; ++k) {
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= opts.tol_grad) {
      res.converged = true;
      break;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    lu.setThreshold(1e-12);
    if (lu.rank() < A.rows())
      throw Error(ErrorCode::SingularSystem,
                  "normal equations rank " + std::to_string(lu.rank()) + " at iterate " + std::to_string(k));
    Eigen::VectorXd h = lu.solve(-g);

    // Halve until the cost drops; a GN direction is a descent direction so
    // this terminates unless we are at the noise floor.
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd rn;
    Eigen::MatrixXd Jn;
    for (int s = 0; s < 30; ++s) {
      const Eigen::VectorXd xn = x + step * h;
      f(xn, rn, Jn);
      if (rn.allFinite() && Jn.allFinite() && half_sq(rn) < cost) {
        x = xn;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.converged = true;
      break;
    }
    const double prev = cost;
    r = rn;
    J = Jn;
    cost = half_sq(r);
    res.cost_history.push_back(cost);
    if ((step * h).norm() <= opts.tol_step * (x.norm() + opts.tol_step) ||
        prev - cost <= 1e-14 * std::max(prev, 1e-300)) {
      res.converged = true;
      ++k;
      break;
    }
  }
  res.x = x;
  res.iterations = k;
  res.cost = cost;
  res.jacobian = J;
  return res;
}

}  // namespace jointkin
