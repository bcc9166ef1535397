// systems.hpp - the scalar linear test system and the planar HLIP walker with
// an obstacle barrier and a closed-form expectation safety filter.
#pragma once

#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "safeprob/disturbance.hpp"
#include "safeprob/random.hpp"

namespace safeprob::dynamics {

/// Conditional mean and variance of a scalar quantity one step ahead.
struct CondMoments {
    double mean{0.0};
    double variance{0.0};
};

/// x_{k+1} = alpha x_k + d_k with barrier h(x) = x.
struct ScalarLinearSystem {
    double alpha{1.0};
    Disturbance disturbance;

    double barrier(double x) const { return x; }
    double step(double x, Rng& rng) const { return alpha * x + disturbance.sample_scalar(rng); }
    double step_with(double x, double d) const { return alpha * x + d; }
    /// Moments of h(x_{k+1}) given x_k, from the disturbance's exact moments.
    CondMoments cond_moments(double x) const;
};

using HlipState = Eigen::Matrix<double, 6, 1>;
using HlipA = Eigen::Matrix<double, 6, 6>;
using HlipB = Eigen::Matrix<double, 6, 2>;
using HlipD = Eigen::Matrix<double, 6, 4>;

struct Gait {
    double z0{0.8};
    double t_ssp{1.0 / 3.0};
    double t_dsp{0.0};
    double gravity{9.81};

    double step_period() const { return t_ssp + t_dsp; }
    double step_rate() const { return 1.0 / step_period(); }
    /// Throws std::invalid_argument on a nonpositive height, SSP period or gravity,
    /// or a negative DSP period.
    void validate() const;
};

struct HlipMatrices {
    HlipA a;
    HlipB b;
};

/// Step-to-step map of the planar HLIP with layout x = (p, c, v): p is the
/// global COM position, c the COM relative to the stance foot, v the COM
/// velocity; u is the next foot placement relative to the current one.
HlipMatrices hlip_matrices(const Gait& gait);

/// Position selector: the first two rows of the identity.
Eigen::Matrix<double, 6, 6> hlip_selector();

/// Disturbance map: (d1, d2) enter p and c, (d3, d4) enter v.
HlipD hlip_disturbance_map();

struct Obstacle {
    Eigen::Vector2d center{0.0, 0.0};
    double radius{0.5};
};

/// h = |p - rho| - r, its halfspace version hbar along e_hat(p_k), and e_hat.
struct BarrierEval {
    double h;
    double hbar;
    Eigen::Vector2d e_hat;
};

/// Raised when p coincides with the obstacle centre and e_hat is undefined.
class DegenerateDirection : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when the filter constraint is violated and the input has no effect on it.
class ControllerFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FilterResult {
    Eigen::Vector2d u;
    bool active{false};
    /// a^T u - b for the returned input.
    double slack{0.0};
};

class HlipSystem {
public:
    /// disturbance must be 4-dimensional (ProductOfDisks with two radii or a
    /// 4-ball); throws std::invalid_argument otherwise.
    HlipSystem(HlipMatrices matrices, Gait gait, Obstacle obstacle, double d_max,
               Disturbance disturbance);

    const HlipA& a() const { return m_.a; }
    const HlipB& b() const { return m_.b; }
    const HlipD& d() const { return d_; }
    const Gait& gait() const { return gait_; }
    const Obstacle& obstacle() const { return obstacle_; }
    double d_max() const { return d_max_; }
    const Disturbance& disturbance() const { return disturbance_; }

    double h(const HlipState& x) const;
    /// Barrier at x; hbar equals h here because e_hat is taken at the same p.
    BarrierEval barrier(const HlipState& x) const;
    /// Barrier at x together with hbar of a candidate next state, linearised at x.
    BarrierEval barrier(const HlipState& x, const HlipState& next) const;

    HlipState mean_next(const HlipState& x, const Eigen::Vector2d& u) const;
    HlipState step(const HlipState& x, const Eigen::Vector2d& u, Rng& rng) const;
    HlipState step_with(const HlipState& x, const Eigen::Vector2d& u,
                        const Eigen::Vector4d& d) const;

    /// Moments of hbar(x_{k+1}) given x_k and u.
    CondMoments cond_moments_hbar(const HlipState& x, const Eigen::Vector2d& u) const;
    /// Moments of the true barrier h(x_{k+1}) given x_k and u (polar quadrature
    /// over the position disturbance).
    CondMoments cond_moments_h(const HlipState& x, const Eigen::Vector2d& u) const;

    /// min |u - u_nom| s.t. E[hbar(x_{k+1}) | x_k] >= alpha h(x_k).
    FilterResult safety_filter(const HlipState& x, const Eigen::Vector2d& u_nom,
                               double alpha) const;

    /// One-step deadbeat velocity tracking, norm-capped at input_cap.
    Eigen::Vector2d nominal_controller(const HlipState& x, const Eigen::Vector2d& v_des,
                                       double input_cap) const;

    /// The state at global position p whose deadbeat step keeps v = v_des.
    HlipState periodic_state(const Eigen::Vector2d& p, const Eigen::Vector2d& v_des) const;

private:
    HlipMatrices m_;
    HlipD d_;
    Gait gait_;
    Obstacle obstacle_;
    double d_max_;
    Disturbance disturbance_;
    Eigen::Vector2d pos_noise_mean_;
    Eigen::Matrix2d pos_noise_cov_;
};

}  // namespace safeprob::dynamics
