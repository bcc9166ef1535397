#include "safeprob/systems.hpp"

#include <cmath>
#include <numbers>
#include <variant>

#include <boost/math/quadrature/gauss.hpp>

namespace safeprob::dynamics {

namespace {

constexpr int kAngleNodes = 64;

Eigen::Vector2d position(const HlipState& x) { return x.head<2>(); }

}  // namespace

CondMoments ScalarLinearSystem::cond_moments(double x) const {
    const Moments m = disturbance.exact_moments();
    return {alpha * x + m.mean[0], m.covariance(0, 0)};
}

void Gait::validate() const {
    if (!(z0 > 0.0)) throw std::invalid_argument("gait: z0 must be > 0");
    if (!(t_ssp > 0.0)) throw std::invalid_argument("gait: t_ssp must be > 0");
    if (!(t_dsp >= 0.0)) throw std::invalid_argument("gait: t_dsp must be >= 0");
    if (!(gravity > 0.0)) throw std::invalid_argument("gait: gravity must be > 0");
}

HlipMatrices hlip_matrices(const Gait& gait) {
    gait.validate();
    const double lam = std::sqrt(gait.gravity / gait.z0);
    const double ch = std::cosh(lam * gait.t_ssp);
    const double sh = std::sinh(lam * gait.t_ssp);
    const double td = gait.t_dsp;

    // Per axis on (p, c, v): DSP drift c += v td - u, then the SSP flow.
    Eigen::Matrix3d a1;
    a1 << 1.0, ch - 1.0, ch * td + sh / lam,
          0.0, ch,       ch * td + sh / lam,
          0.0, lam * sh, ch + lam * sh * td;
    const Eigen::Vector3d b1(1.0 - ch, -ch, -lam * sh);

    HlipMatrices m;
    m.a.setZero();
    m.b.setZero();
    for (int axis = 0; axis < 2; ++axis) {
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) m.a(2 * i + axis, 2 * j + axis) = a1(i, j);
            m.b(2 * i + axis, axis) = b1[i];
        }
    }
    return m;
}

Eigen::Matrix<double, 6, 6> hlip_selector() {
    Eigen::Matrix<double, 6, 6> c = Eigen::Matrix<double, 6, 6>::Zero();
    c(0, 0) = 1.0;
    c(1, 1) = 1.0;
    return c;
}

HlipD hlip_disturbance_map() {
    HlipD d;
    d << 1, 0, 0, 0,
         0, 1, 0, 0,
         1, 0, 0, 0,
         0, 1, 0, 0,
         0, 0, 1, 0,
         0, 0, 0, 1;
    return d;
}

HlipSystem::HlipSystem(HlipMatrices matrices, Gait gait, Obstacle obstacle, double d_max,
                       Disturbance disturbance)
    : m_(std::move(matrices)),
      d_(hlip_disturbance_map()),
      gait_(gait),
      obstacle_(std::move(obstacle)),
      d_max_(d_max),
      disturbance_(std::move(disturbance)) {
    gait_.validate();
    if (!(obstacle_.radius > 0.0)) throw std::invalid_argument("obstacle radius must be > 0");
    if (!(d_max_ >= 0.0)) throw std::invalid_argument("d_max must be >= 0");
    if (disturbance_.dimension() != 4)
        throw std::invalid_argument("HLIP disturbance must be 4-dimensional");
    const auto& fam = disturbance_.family();
    const bool two_disks =
        std::holds_alternative<ProductOfDisks>(fam) && std::get<ProductOfDisks>(fam).radii.size() == 2;
    if (!two_disks && !std::holds_alternative<UniformBall>(fam))
        throw std::invalid_argument("HLIP disturbance must be two uniform disks or a 4-ball");
    if (!m_.a.allFinite() || !m_.b.allFinite())
        throw std::invalid_argument("HLIP matrices must be finite");

    const Moments mom = disturbance_.exact_moments();
    const Eigen::Matrix<double, 2, 4> pos_rows = d_.topRows<2>();
    pos_noise_mean_ = pos_rows * mom.mean;
    pos_noise_cov_ = pos_rows * mom.covariance * pos_rows.transpose();
}

double HlipSystem::h(const HlipState& x) const {
    return (position(x) - obstacle_.center).norm() - obstacle_.radius;
}

BarrierEval HlipSystem::barrier(const HlipState& x) const { return barrier(x, x); }

BarrierEval HlipSystem::barrier(const HlipState& x, const HlipState& next) const {
    const Eigen::Vector2d rel = position(x) - obstacle_.center;
    const double dist = rel.norm();
    if (!(dist > 0.0))
        throw DegenerateDirection("barrier: position coincides with the obstacle centre");
    BarrierEval out;
    out.h = dist - obstacle_.radius;
    out.e_hat = rel / dist;
    out.hbar = out.e_hat.dot(position(next) - obstacle_.center) - obstacle_.radius;
    return out;
}

HlipState HlipSystem::mean_next(const HlipState& x, const Eigen::Vector2d& u) const {
    return m_.a * x + m_.b * u + d_ * disturbance_.exact_moments().mean;
}

HlipState HlipSystem::step(const HlipState& x, const Eigen::Vector2d& u, Rng& rng) const {
    const Eigen::Vector4d d = disturbance_.sample(rng);
    return step_with(x, u, d);
}

HlipState HlipSystem::step_with(const HlipState& x, const Eigen::Vector2d& u,
                                const Eigen::Vector4d& d) const {
    return m_.a * x + m_.b * u + d_ * d;
}

CondMoments HlipSystem::cond_moments_hbar(const HlipState& x, const Eigen::Vector2d& u) const {
    const BarrierEval now = barrier(x);
    const Eigen::Vector2d p_next = (m_.a * x + m_.b * u).head<2>() + pos_noise_mean_;
    CondMoments out;
    out.mean = now.e_hat.dot(p_next - obstacle_.center) - obstacle_.radius;
    out.variance = now.e_hat.dot(pos_noise_cov_ * now.e_hat);
    return out;
}

CondMoments HlipSystem::cond_moments_h(const HlipState& x, const Eigen::Vector2d& u) const {
    const Eigen::Vector2d a =
        (m_.a * x + m_.b * u).head<2>() + pos_noise_mean_ - obstacle_.center;
    const double second = a.squaredNorm() + pos_noise_cov_.trace();

    // The position disturbance (d1, d2) is rotation invariant: a uniform disk
    // (radial density 2 s / R^2) or the 2-D marginal of a uniform 4-ball
    // (radial density 4 s (R^2 - s^2) / R^4).
    const auto& fam = disturbance_.family();
    const bool disk = std::holds_alternative<ProductOfDisks>(fam);
    const double radius = disk ? std::get<ProductOfDisks>(fam).radii[0]
                               : std::get<UniformBall>(fam).radius;
    CondMoments out;
    if (radius == 0.0) {
        out.mean = a.norm() - obstacle_.radius;
        out.variance = 0.0;
        return out;
    }
    auto ring_mean = [&](double s) {
        double acc = 0.0;
        for (int j = 0; j < kAngleNodes; ++j) {
            const double th = 2.0 * std::numbers::pi * j / kAngleNodes;
            acc += std::hypot(a[0] + s * std::cos(th), a[1] + s * std::sin(th));
        }
        return acc / kAngleNodes;
    };
    const double r2 = radius * radius;
    auto integrand = [&](double s) {
        const double density = disk ? 2.0 * s / r2 : 4.0 * s * (r2 - s * s) / (r2 * r2);
        return density * ring_mean(s);
    };
    const double mean_norm =
        boost::math::quadrature::gauss<double, 20>::integrate(integrand, 0.0, radius);
    out.mean = mean_norm - obstacle_.radius;
    out.variance = std::max(0.0, second - mean_norm * mean_norm);
    return out;
}

FilterResult HlipSystem::safety_filter(const HlipState& x, const Eigen::Vector2d& u_nom,
                                       double alpha) const {
    const BarrierEval now = barrier(x);
    // E[hbar(x_{k+1})] = e^T (P(Ax + Bu) + E[P D d] - rho) - r is affine in u.
    const Eigen::Vector2d a = (now.e_hat.transpose() * m_.b.topRows<2>()).transpose();
    const Eigen::Vector2d drift = (m_.a * x).head<2>() + pos_noise_mean_ - obstacle_.center;
    const double b = alpha * now.h + obstacle_.radius - now.e_hat.dot(drift);

    FilterResult out;
    const double at_nom = a.dot(u_nom);
    if (at_nom >= b - 1e-12 * (1.0 + std::abs(b))) {
        out.u = u_nom;
        out.slack = at_nom - b;
        return out;
    }
    const double norm2 = a.squaredNorm();
    if (!(norm2 > 0.0))
        throw ControllerFailure("safety filter: constraint violated and input has no effect");
    out.u = u_nom + a * ((b - at_nom) / norm2);
    out.active = true;
    out.slack = a.dot(out.u) - b;
    return out;
}

Eigen::Vector2d HlipSystem::nominal_controller(const HlipState& x, const Eigen::Vector2d& v_des,
                                               double input_cap) const {
    const Eigen::Matrix<double, 2, 6> a_v = m_.a.bottomRows<2>();
    const Eigen::Matrix<double, 2, 2> b_v = m_.b.bottomRows<2>();
    const Eigen::Matrix2d pinv = b_v.completeOrthogonalDecomposition().pseudoInverse();
    Eigen::Vector2d u = pinv * (v_des - a_v * x);
    const double n = u.norm();
    if (input_cap > 0.0 && n > input_cap) u *= input_cap / n;
    return u;
}

HlipState HlipSystem::periodic_state(const Eigen::Vector2d& p, const Eigen::Vector2d& v_des) const {
    const double lam = std::sqrt(gait_.gravity / gait_.z0);
    const double ch = std::cosh(lam * gait_.t_ssp);
    const double sh = std::sinh(lam * gait_.t_ssp);
    HlipState x;
    x << p, v_des * ((ch - 1.0) / (lam * sh)), v_des;
    return x;
}

}  // namespace safeprob::dynamics
