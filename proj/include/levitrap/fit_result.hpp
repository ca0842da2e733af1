#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "levitrap/error.hpp"
#include "levitrap/time_trace.hpp"

namespace levitrap {

struct FitParameter {
    std::string name;
    double value = 0.0;
    double sigma = 0.0;
};

/// Outcome of an estimator. Failed or degenerate fits still carry the last
/// iterate so callers can report diagnostics instead of aborting.
struct FitResult {
    std::vector<FitParameter> parameters;
    Eigen::MatrixXd covariance;
    std::vector<double> residuals;  // one per observation used
    std::vector<double> variances;  // per-observation measurement variance, if known
    double mse = 0.0;
    double mean_variance = 0.0;
    bool converged = true;
    bool degenerate = false;
    std::string message;
    std::vector<std::string> flags;

    bool ok() const noexcept { return converged && !degenerate; }

    bool has(std::string_view name) const {
        return std::any_of(parameters.begin(), parameters.end(),
                           [&](const FitParameter& p) { return p.name == name; });
    }

    const FitParameter& param(std::string_view name) const {
        for (const auto& p : parameters)
            if (p.name == name) return p;
        throw InvalidInput("fit has no parameter named '" + std::string(name) + "'");
    }

    Measured get(std::string_view name) const {
        const auto& p = param(name);
        return {p.value, p.sigma};
    }

    bool flagged(std::string_view flag) const {
        return std::find(flags.begin(), flags.end(), flag) != flags.end();
    }

    void add(std::string name, double value, double sigma) {
        parameters.push_back({std::move(name), value, sigma});
    }
};

}  // namespace levitrap
