// disturbance.hpp - tagged disturbance families with samplers and exact moments.
#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "safeprob/random.hpp"

namespace safeprob::dynamics {

struct UniformInterval {
    double lo;
    double hi;
};

/// Normal(mean, std) conditioned on [lo, hi].
struct TruncatedGaussian {
    double mean;
    double std;
    double lo;
    double hi;
};

/// Finite support: (value, probability) pairs.
struct Categorical {
    std::vector<std::pair<double, double>> atoms;
};

/// Uniform on the closed disk of the given radius in R^2.
struct UniformDisk2 {
    double radius;
};

/// Independent uniform disks stacked as (d1, d2), (d3, d4), ...
struct ProductOfDisks {
    std::vector<double> radii;
};

/// Uniform on the ball of the given radius in R^dim.
struct UniformBall {
    int dim;
    double radius;
};

using DisturbanceFamily = std::variant<UniformInterval, TruncatedGaussian, Categorical,
                                       UniformDisk2, ProductOfDisks, UniformBall>;

struct Moments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

class Disturbance {
public:
    /// Throws std::invalid_argument if the parameters are not a valid law.
    explicit Disturbance(DisturbanceFamily family);

    const DisturbanceFamily& family() const { return family_; }
    int dimension() const;
    std::string name() const;

    Eigen::VectorXd sample(Rng& rng) const;
    /// Fast path for one-dimensional families.
    double sample_scalar(Rng& rng) const;

    /// Closed-form mean and covariance.
    Moments exact_moments() const;

    /// Largest norm in the support.
    double support_radius() const;

private:
    DisturbanceFamily family_;
};

/// -1 w.p. 1/6, +1/5 w.p. 5/6: zero mean, support in [-1, 1], variance 1/5.
Disturbance skewed_categorical();

}  // namespace safeprob::dynamics
