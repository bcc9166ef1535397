#include "safeprob/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace safeprob::bounds {

namespace {

// (1 + t) log1p(t) - t, nonnegative for t >= 0. The direct form cancels for
// small t, so a series is used there.
double xlog1p_gap(double t) {
    if (t < 0.05) {
        // sum_{n>=2} (-1)^n t^n / (n (n - 1))
        double term = t * t;
        double sum = 0.0;
        double comp = 0.0;
        for (int n = 2; n < 60; ++n) {
            const double add = ((n % 2 == 0) ? term : -term) / (static_cast<double>(n) * (n - 1));
            const double y = add - comp;
            const double s = sum + y;
            comp = (s - sum) - y;
            sum = s;
            if (std::abs(add) <= 1e-18 * std::abs(sum)) break;
            term *= t;
        }
        return sum;
    }
    return (1.0 + t) * std::log1p(t) - t;
}

// t - log1p(t), nonnegative for t > -1.
double log1p_gap(double t) {
    if (std::abs(t) < 0.05) {
        // sum_{n>=2} (-1)^n t^n / n
        double term = t * t;
        double sum = 0.0;
        for (int n = 2; n < 60; ++n) {
            const double add = ((n % 2 == 0) ? term : -term) / n;
            sum += add;
            if (std::abs(add) <= 1e-18 * std::abs(sum)) break;
            term *= t;
        }
        return sum;
    }
    return t - std::log1p(t);
}

double geometric_sum(double ratio, int terms) {
    // sum_{i=0}^{terms-1} ratio^i, accumulated term by term so that ratio == 1
    // gives exactly `terms`.
    double sum = 0.0;
    double power = 1.0;
    for (int i = 0; i < terms; ++i) {
        sum += power;
        power *= ratio;
    }
    return sum;
}

void require(bool ok, const char* what) {
    if (!ok) throw std::domain_error(what);
}

}  // namespace

void SafetySpec::validate() const {
    if (horizon < 1) throw std::invalid_argument("horizon K must be >= 1");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be > 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
    if (!std::isfinite(h0)) throw std::invalid_argument("h0 must be finite");
    if (upper_bound && !(*upper_bound > 0.0)) throw std::invalid_argument("upper bound B must be > 0");
    std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Dtcbf>) {
                if (!(m.alpha > 0.0 && m.alpha <= 1.0))
                    throw std::invalid_argument("DTCBF alpha must lie in (0, 1]");
            } else if constexpr (std::is_same_v<T, CMart>) {
                if (!(m.c >= 0.0)) throw std::invalid_argument("c-martingale c must be >= 0");
            } else {
                if (!(m.alpha > 0.0 && m.alpha <= 1.0))
                    throw std::invalid_argument("general alpha must lie in (0, 1]");
                if (!(m.c >= 0.0)) throw std::invalid_argument("general c must be >= 0");
            }
        },
        mode);
}

BoundResult BoundResult::from_raw(double raw) {
    BoundResult r;
    r.raw = raw;
    r.clamped = std::min(1.0, std::max(0.0, raw));
    r.vacuous = raw >= 1.0;
    return r;
}

double log_freedman_kernel(double lambda, double xi) {
    require(lambda >= 0.0, "freedman_kernel: lambda must be >= 0");
    require(xi > 0.0, "freedman_kernel: xi must be > 0");
    if (lambda == 0.0) return 0.0;
    const double s = xi * xi;
    if (s == 0.0) return -std::numeric_limits<double>::infinity();
    // log H = lambda - (lambda + s) log1p(lambda / s) = -s * [(1 + t) log1p(t) - t]
    const double t = lambda / s;
    if (std::isinf(t)) return -std::numeric_limits<double>::infinity();
    return -s * xlog1p_gap(t);
}

double freedman_kernel(double lambda, double xi) {
    return std::exp(log_freedman_kernel(lambda, xi));
}

double lambda_threshold(const SafetySpec& spec) {
    spec.validate();
    const int k = spec.horizon;
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Dtcbf>) {
                return std::pow(m.alpha, k) * spec.h0;
            } else if constexpr (std::is_same_v<T, CMart>) {
                return spec.h0 - m.c * k;
            } else {
                // alpha^K h0 - sum_{i=1}^K alpha^{K-i} c
                return std::pow(m.alpha, k) * spec.h0 - m.c * geometric_sum(m.alpha, k);
            }
        },
        spec.mode);
}

BoundResult ville_bound(const SafetySpec& spec) {
    if (!spec.upper_bound) throw std::invalid_argument("ville_bound requires an upper bound B");
    const double lambda = lambda_threshold(spec);
    return BoundResult::from_raw(1.0 - lambda / *spec.upper_bound);
}

BoundResult freedman_bound(const SafetySpec& spec) {
    const double lambda = lambda_threshold(spec);
    if (lambda < 0.0) return BoundResult::from_raw(1.0);
    const double xi = spec.sigma * std::sqrt(static_cast<double>(spec.horizon)) / spec.delta;
    return BoundResult::from_raw(freedman_kernel(lambda / spec.delta, xi));
}

double tightened_pqv(double alpha, int horizon, double sigma, double delta) {
    if (alpha == 1.0)
        throw std::domain_error("tightened_pqv: singular at alpha = 1; use sigma^2 K / delta^2");
    require(alpha > 0.0 && alpha < 1.0, "tightened_pqv: alpha must lie in (0, 1)");
    require(horizon >= 1, "tightened_pqv: K must be >= 1");
    require(delta > 0.0, "tightened_pqv: delta must be > 0");
    // (1 - a^{2K}) / (1 - a^2), both through expm1 to keep precision near alpha -> 1
    const double log_alpha = std::log(alpha);
    const double numer = -std::expm1(2.0 * horizon * log_alpha);
    const double denom = -std::expm1(2.0 * log_alpha);
    return sigma * sigma * (numer / denom) / (delta * delta);
}

double issf_worst_case(double alpha, double delta, double h0, int k) {
    require(alpha >= 0.0 && alpha < 1.0, "issf_worst_case: alpha must lie in [0, 1)");
    require(k >= 0, "issf_worst_case: k must be >= 0");
    return std::pow(alpha, k) * h0 - delta * geometric_sum(alpha, k);
}

double issf_safe_level(double alpha, double delta) {
    require(alpha >= 0.0 && alpha < 1.0, "issf_safe_level: alpha must lie in [0, 1)");
    return -delta / (1.0 - alpha);
}

BoundResult stochastic_issf_bound(double alpha, int horizon, double h0, double delta,
                                  double sigma, double epsilon) {
    require(alpha > 0.0 && alpha < 1.0, "stochastic_issf_bound: alpha must lie in (0, 1)");
    require(epsilon >= 0.0, "stochastic_issf_bound: epsilon must be >= 0");
    require(delta > 0.0 && sigma > 0.0, "stochastic_issf_bound: delta, sigma must be > 0");
    const double floor = issf_worst_case(alpha, delta, h0, horizon);
    if (-epsilon < floor) return BoundResult::from_raw(0.0);
    const double lambda = std::pow(alpha, horizon) * (h0 + epsilon) / delta;
    if (lambda < 0.0) return BoundResult::from_raw(1.0);
    const double xi = std::sqrt(tightened_pqv(alpha, horizon, sigma, delta));
    return BoundResult::from_raw(freedman_kernel(lambda, xi));
}

ComparisonConditions comparison_conditions(double lambda, double delta, double sigma,
                                           int horizon, double upper_bound) {
    require(delta > 0.0 && sigma > 0.0 && upper_bound > 0.0,
            "comparison_conditions: delta, sigma, B must be > 0");
    return {lambda * delta >= sigma * sigma * horizon,
            lambda <= upper_bound - delta / kComparisonPhi};
}

double dominance_gap(double lambda, double upper_bound, double sigma, int horizon,
                     double delta) {
    const double xi = sigma * std::sqrt(static_cast<double>(horizon)) / delta;
    return 1.0 - lambda / upper_bound - freedman_kernel(lambda / delta, xi);
}

GapDerivativeFactors dominance_gap_factors(double lambda, double sigma, int horizon,
                                           double delta) {
    require(lambda >= 0.0, "dominance_gap_factors: lambda must be >= 0");
    require(sigma > 0.0 && delta > 0.0 && horizon >= 1,
            "dominance_gap_factors: sigma, delta, K must be positive");
    const double s2k = sigma * sigma * horizon;
    const double xi = sigma * std::sqrt(static_cast<double>(horizon)) / delta;
    // a = -e^{lambda/delta} u^v / (delta^2 sigma^2), and e^{lambda/delta} u^v is H itself.
    const double a = -freedman_kernel(lambda / delta, xi) / (delta * delta * sigma * sigma);
    // b = s2k ln(s2k / (lambda delta + s2k)) + lambda delta = s2k (t - log1p t)
    const double b = s2k * log1p_gap(lambda * delta / s2k);
    return {a, b};
}

double dominance_gap_dsigma2(double lambda, double upper_bound, double sigma, int horizon,
                             double delta) {
    (void)upper_bound;  // B only shifts the gap by a constant
    const auto f = dominance_gap_factors(lambda, sigma, horizon, delta);
    return f.a * f.b;
}

BoundResult santoyo_bound(double alpha, double c, int horizon, double h0, double upper_bound) {
    require(alpha > 0.0 && alpha <= 1.0, "santoyo_bound: alpha must lie in (0, 1]");
    require(upper_bound > 0.0, "santoyo_bound: B must be > 0");
    require(horizon >= 1, "santoyo_bound: K must be >= 1");
    const double b = upper_bound;
    if (c < 0.0) {
        return BoundResult::from_raw(1.0 - h0 / b * std::pow((alpha * b - c) / b, horizon));
    }
    if (c == 0.0) {
        return BoundResult::from_raw(1.0 - std::pow(alpha, horizon) * h0 / b);
    }
    if (alpha == 1.0) {
        return BoundResult::from_raw(1.0 - (h0 - c * horizon) / b);
    }
    return BoundResult::from_raw(1.0 - std::pow(alpha, horizon) * h0 / (1.0 - alpha) *
                                           ((c + (1.0 - alpha) * b) / b));
}

DeltaSigma constructive_delta_sigma(double lipschitz, double d_max) {
    require(lipschitz >= 0.0 && d_max >= 0.0,
            "constructive_delta_sigma: L_h and d_max must be >= 0");
    return {2.0 * lipschitz * d_max, lipschitz * lipschitz * d_max * d_max};
}

DeltaSigma hlip_delta_sigma(double d_max) {
    require(d_max >= 0.0, "hlip_delta_sigma: d_max must be >= 0");
    return {5.0 / 3.0 * d_max, d_max * d_max / 2.0};
}

double lambert_w_minus1(double x) {
    constexpr double branch = -1.0 / std::numbers::e;
    if (x < branch) {
        if (branch - x <= 4.0 * std::numeric_limits<double>::epsilon() * -branch) return -1.0;
        throw std::domain_error("lambert_w_minus1: x must lie in [-1/e, 0)");
    }
    if (!(x < 0.0)) throw std::domain_error("lambert_w_minus1: x must lie in [-1/e, 0)");
    if (x == branch) return -1.0;

    double w;
    if (x < -0.25) {
        // branch-point series in p = -sqrt(2 (1 + e x))
        const double p = -std::sqrt(std::max(0.0, 2.0 * (1.0 + std::numbers::e * x)));
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
    } else {
        const double l1 = std::log(-x);
        const double l2 = std::log(-l1);
        w = l1 - l2 + l2 / l1;
    }

    constexpr int kMaxIterations = 100;
    constexpr double kTolerance = 1e-13;
    for (int it = 0; it < kMaxIterations; ++it) {
        const double ew = std::exp(w);
        const double f = w * ew - x;
        const double wp1 = w + 1.0;
        if (wp1 == 0.0) break;
        const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if (denom == 0.0) break;
        const double next = w - f / denom;
        const double step = std::abs(next - w);
        w = std::min(next, -1.0);
        if (step <= kTolerance * (1.0 + std::abs(w))) break;
    }
    return w;
}

double psi(double phi, double b) {
    return 1.0 / b - std::exp((b - 1.0) * phi);
}

double psi_threshold(double phi) {
    if (!(phi < 0.0))
        throw std::domain_error("psi_threshold: phi e^phi must lie in [-1/e, 0), i.e. phi < 0");
    return lambert_w_minus1(phi * std::exp(phi)) / phi;
}

}  // namespace safeprob::bounds
