#include "safeprob/disturbance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <type_traits>

namespace safeprob::dynamics {

namespace {

double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void validate(const DisturbanceFamily& family) {
    std::visit(
        overloaded{
            [](const UniformInterval& u) {
                if (!(u.lo <= u.hi)) throw std::invalid_argument("uniform interval needs lo <= hi");
            },
            [](const TruncatedGaussian& t) {
                if (!(t.lo < t.hi)) throw std::invalid_argument("truncated Gaussian needs lo < hi");
                if (!(t.std > 0.0)) throw std::invalid_argument("truncated Gaussian needs std > 0");
                const double mass = normal_cdf((t.hi - t.mean) / t.std) -
                                    normal_cdf((t.lo - t.mean) / t.std);
                if (!(mass > 1e-4))
                    throw std::invalid_argument(
                        "truncated Gaussian window carries too little mass for rejection sampling");
            },
            [](const Categorical& c) {
                if (c.atoms.empty()) throw std::invalid_argument("categorical needs atoms");
                double total = 0.0;
                for (const auto& [v, p] : c.atoms) {
                    if (!(p >= 0.0)) throw std::invalid_argument("categorical probabilities must be >= 0");
                    if (!std::isfinite(v)) throw std::invalid_argument("categorical values must be finite");
                    total += p;
                }
                if (std::abs(total - 1.0) > 1e-12)
                    throw std::invalid_argument("categorical probabilities must sum to 1");
            },
            [](const UniformDisk2& d) {
                if (!(d.radius >= 0.0)) throw std::invalid_argument("disk radius must be >= 0");
            },
            [](const ProductOfDisks& d) {
                if (d.radii.empty()) throw std::invalid_argument("product of disks needs radii");
                for (double r : d.radii)
                    if (!(r >= 0.0)) throw std::invalid_argument("disk radius must be >= 0");
            },
            [](const UniformBall& b) {
                if (b.dim < 1) throw std::invalid_argument("ball dimension must be >= 1");
                if (!(b.radius >= 0.0)) throw std::invalid_argument("ball radius must be >= 0");
            },
        },
        family);
}

Eigen::Vector2d sample_disk(double radius, Rng& rng) {
    const double r = radius * std::sqrt(uniform01(rng));
    const double theta = 2.0 * std::numbers::pi * uniform01(rng);
    return {r * std::cos(theta), r * std::sin(theta)};
}

}  // namespace

Disturbance::Disturbance(DisturbanceFamily family) : family_(std::move(family)) {
    validate(family_);
}

int Disturbance::dimension() const {
    return std::visit(overloaded{
                          [](const UniformDisk2&) { return 2; },
                          [](const ProductOfDisks& d) { return 2 * static_cast<int>(d.radii.size()); },
                          [](const UniformBall& b) { return b.dim; },
                          [](const auto&) { return 1; },
                      },
                      family_);
}

std::string Disturbance::name() const {
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const UniformInterval& u) { os << "uniform[" << u.lo << "," << u.hi << "]"; },
                   [&](const TruncatedGaussian& t) {
                       os << "truncated_gaussian(" << t.mean << "," << t.std << ";" << t.lo << ","
                          << t.hi << ")";
                   },
                   [&](const Categorical& c) { os << "categorical(" << c.atoms.size() << ")"; },
                   [&](const UniformDisk2& d) { os << "uniform_disk(" << d.radius << ")"; },
                   [&](const ProductOfDisks& d) { os << "product_of_disks(" << d.radii.size() << ")"; },
                   [&](const UniformBall& b) { os << "uniform_ball" << b.dim << "(" << b.radius << ")"; },
               },
               family_);
    return os.str();
}

double Disturbance::sample_scalar(Rng& rng) const {
    return std::visit(
        overloaded{
            [&](const UniformInterval& u) { return u.lo + (u.hi - u.lo) * uniform01(rng); },
            [&](const TruncatedGaussian& t) {
                for (;;) {
                    const double z = t.mean + t.std * standard_normal(rng);
                    if (z >= t.lo && z <= t.hi) return z;
                }
            },
            [&](const Categorical& c) {
                const double u = uniform01(rng);
                double acc = 0.0;
                for (const auto& [v, p] : c.atoms) {
                    acc += p;
                    if (u < acc) return v;
                }
                return c.atoms.back().first;
            },
            [&](const UniformBall& b) -> double {
                if (b.dim != 1) throw std::logic_error("sample_scalar on a multivariate disturbance");
                return b.radius * (2.0 * uniform01(rng) - 1.0);
            },
            [](const auto&) -> double {
                throw std::logic_error("sample_scalar on a multivariate disturbance");
            },
        },
        family_);
}

Eigen::VectorXd Disturbance::sample(Rng& rng) const {
    return std::visit(
        overloaded{
            [&](const UniformDisk2& d) -> Eigen::VectorXd { return sample_disk(d.radius, rng); },
            [&](const ProductOfDisks& d) -> Eigen::VectorXd {
                Eigen::VectorXd out(2 * d.radii.size());
                for (std::size_t i = 0; i < d.radii.size(); ++i)
                    out.segment<2>(2 * static_cast<Eigen::Index>(i)) = sample_disk(d.radii[i], rng);
                return out;
            },
            [&](const UniformBall& b) -> Eigen::VectorXd {
                Eigen::VectorXd dir(b.dim);
                for (int i = 0; i < b.dim; ++i) dir[i] = standard_normal(rng);
                const double r = b.radius * std::pow(uniform01(rng), 1.0 / b.dim);
                return dir * (r / dir.norm());
            },
            [&](const auto&) -> Eigen::VectorXd {
                Eigen::VectorXd out(1);
                out[0] = sample_scalar(rng);
                return out;
            },
        },
        family_);
}

Moments Disturbance::exact_moments() const {
    Moments m;
    const int n = dimension();
    m.mean = Eigen::VectorXd::Zero(n);
    m.covariance = Eigen::MatrixXd::Zero(n, n);
    std::visit(
        overloaded{
            [&](const UniformInterval& u) {
                m.mean[0] = 0.5 * (u.lo + u.hi);
                m.covariance(0, 0) = (u.hi - u.lo) * (u.hi - u.lo) / 12.0;
            },
            [&](const TruncatedGaussian& t) {
                const double a = (t.lo - t.mean) / t.std;
                const double b = (t.hi - t.mean) / t.std;
                const double z = normal_cdf(b) - normal_cdf(a);
                const double pa = normal_pdf(a);
                const double pb = normal_pdf(b);
                const double shift = (pa - pb) / z;
                m.mean[0] = t.mean + t.std * shift;
                m.covariance(0, 0) = t.std * t.std * (1.0 + (a * pa - b * pb) / z - shift * shift);
            },
            [&](const Categorical& c) {
                double mean = 0.0;
                for (const auto& [v, p] : c.atoms) mean += p * v;
                double var = 0.0;
                for (const auto& [v, p] : c.atoms) var += p * (v - mean) * (v - mean);
                m.mean[0] = mean;
                m.covariance(0, 0) = var;
            },
            [&](const UniformDisk2& d) {
                m.covariance = Eigen::MatrixXd::Identity(2, 2) * (d.radius * d.radius / 4.0);
            },
            [&](const ProductOfDisks& d) {
                for (std::size_t i = 0; i < d.radii.size(); ++i) {
                    const auto j = 2 * static_cast<Eigen::Index>(i);
                    m.covariance(j, j) = m.covariance(j + 1, j + 1) = d.radii[i] * d.radii[i] / 4.0;
                }
            },
            [&](const UniformBall& b) {
                m.covariance = Eigen::MatrixXd::Identity(b.dim, b.dim) *
                               (b.radius * b.radius / (b.dim + 2.0));
            },
        },
        family_);
    return m;
}

double Disturbance::support_radius() const {
    return std::visit(
        overloaded{
            [](const UniformInterval& u) { return std::max(std::abs(u.lo), std::abs(u.hi)); },
            [](const TruncatedGaussian& t) { return std::max(std::abs(t.lo), std::abs(t.hi)); },
            [](const Categorical& c) {
                double r = 0.0;
                for (const auto& [v, p] : c.atoms)
                    if (p > 0.0) r = std::max(r, std::abs(v));
                return r;
            },
            [](const UniformDisk2& d) { return d.radius; },
            [](const ProductOfDisks& d) {
                double s = 0.0;
                for (double r : d.radii) s += r * r;
                return std::sqrt(s);
            },
            [](const UniformBall& b) { return b.radius; },
        },
        family_);
}

Disturbance skewed_categorical() {
    return Disturbance(Categorical{{{-1.0, 1.0 / 6.0}, {0.2, 5.0 / 6.0}}});
}

}  // namespace safeprob::dynamics
