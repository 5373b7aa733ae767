#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace jointkin {

struct SolverOptions {
  int max_iter = 100;
  double damping_init = 1e-3;  // relative to max diag of J^T J
  double tol_step = 1e-10;
  double tol_grad = 1e-10;
  double finite_diff_h = 1e-6;
  int jacobian_refresh = 10;  // secant LM: finite-difference Jacobian every N iterations
};

struct SolveResult {
  Eigen::VectorXd x;
  bool converged = false;
  int iterations = 0;
  double cost = 0.0;                  // 0.5 * |r|^2
  std::vector<double> cost_history;  // initial cost, then one entry per accepted step
  Eigen::MatrixXd jacobian;          // Jacobian held by the solver at exit
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using ResidualJacobianFn =
    std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J)>;
// Maps a trial point back into the feasible set (e.g. clamping weights >= 0).
using ProjectionFn = std::function<void(Eigen::VectorXd&)>;

// Central-difference Jacobian.
Eigen::MatrixXd finite_difference_jacobian(const ResidualFn& f, const Eigen::VectorXd& x, double h);

// Levenberg-Marquardt with a Broyden rank-one secant Jacobian, refreshed by
// finite differences every opts.jacobian_refresh iterations and once more
// before declaring convergence. Throws NonFiniteResidual.
SolveResult secant_lm(const ResidualFn& f, const Eigen::VectorXd& x0, const SolverOptions& opts,
                      const ProjectionFn& project = nullptr);

// Gauss-Newton with step halving. Throws SingularSystem when the normal
// equations are rank deficient, NonFiniteResidual on bad residuals.
SolveResult gauss_newton(const ResidualJacobianFn& f, const Eigen::VectorXd& x0,
                         const SolverOptions& opts);

}  // namespace jointkin
