#pragma once

// Thin wrapper around Eigen's Levenberg-Marquardt (MINPACK lmder port) with a
// central-difference Jacobian and covariance estimation at the solution.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <unsupported/Eigen/LevenbergMarquardt>

namespace levitrap {

struct LeastSquaresOptions {
    int max_evaluations = 4000;
    double ftol = 1e-14;
    double xtol = 1e-14;
    double relative_step = 1e-7;  // finite-difference step relative to |x|
};

struct LeastSquaresResult {
    Eigen::VectorXd x;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd jacobian;
    Eigen::MatrixXd covariance;  // s^2 (J^T J)^-1, s^2 = cost / (m - n)
    double cost = 0.0;           // sum of squared residuals
    int evaluations = 0;
    bool converged = false;
    bool singular = false;
    std::string status;
};

using ResidualFunction = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

namespace detail {

struct ResidualFunctor : Eigen::DenseFunctor<double> {
    ResidualFunctor(ResidualFunction f, int n, int m, double step)
        : Eigen::DenseFunctor<double>(n, m), fn(std::move(f)), rel_step(step) {}

    int operator()(const InputType& x, ValueType& r) const {
        r.resize(values());
        fn(x, r);
        return 0;
    }

    int df(const InputType& x, JacobianType& jac) const {
        jac.resize(values(), inputs());
        InputType xp = x;
        ValueType rp(values()), rm(values());
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            const double h = rel_step * std::max(std::abs(x[j]), 1e-6);
            xp[j] = x[j] + h;
            fn(xp, rp);
            xp[j] = x[j] - h;
            fn(xp, rm);
            xp[j] = x[j];
            jac.col(j) = (rp - rm) / (2.0 * h);
        }
        return 0;
    }

    ResidualFunction fn;
    double rel_step;
};

inline std::string lm_status(Eigen::LevenbergMarquardtSpace::Status s) {
    using namespace Eigen::LevenbergMarquardtSpace;
    switch (s) {
        case RelativeReductionTooSmall: return "relative reduction below ftol";
        case RelativeErrorTooSmall: return "relative step below xtol";
        case RelativeErrorAndReductionTooSmall: return "ftol and xtol satisfied";
        case CosinusTooSmall: return "residual orthogonal to Jacobian";
        case TooManyFunctionEvaluation: return "evaluation limit reached";
        case FtolTooSmall: return "ftol too small, no further reduction possible";
        case XtolTooSmall: return "xtol too small, no further improvement possible";
        case GtolTooSmall: return "gtol too small";
        case ImproperInputParameters: return "improper input parameters";
        default: return "not converged";
    }
}

}  // namespace detail

/// Minimises sum r_i(x)^2 over x from x0; m is the residual count.
inline LeastSquaresResult solve_least_squares(ResidualFunction fn, Eigen::VectorXd x0,
                                              Eigen::Index m,
                                              const LeastSquaresOptions& opt = {}) {
    const auto n = static_cast<int>(x0.size());
    detail::ResidualFunctor functor(std::move(fn), n, static_cast<int>(m), opt.relative_step);
    Eigen::LevenbergMarquardt<detail::ResidualFunctor> lm(functor);
    lm.setMaxfev(opt.max_evaluations);
    lm.setFtol(opt.ftol);
    lm.setXtol(opt.xtol);
    const auto status = lm.minimize(x0);

    LeastSquaresResult out;
    out.x = x0;
    out.residuals.resize(m);
    functor(x0, out.residuals);
    functor.df(x0, out.jacobian);
    out.cost = out.residuals.squaredNorm();
    out.evaluations = static_cast<int>(lm.nfev());
    using namespace Eigen::LevenbergMarquardtSpace;
    out.converged = status == RelativeReductionTooSmall || status == RelativeErrorTooSmall ||
                    status == RelativeErrorAndReductionTooSmall || status == CosinusTooSmall ||
                    status == FtolTooSmall || status == XtolTooSmall || status == GtolTooSmall;
    out.status = detail::lm_status(status);

    const Eigen::MatrixXd jtj = out.jacobian.transpose() * out.jacobian;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jtj);
    out.singular = cod.rank() < n;
    const double dof = static_cast<double>(m - n);
    const double s2 = dof > 0 ? out.cost / dof : 0.0;
    out.covariance = cod.pseudoInverse() * s2;
    return out;
}

}  // namespace levitrap
