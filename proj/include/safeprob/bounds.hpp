// bounds.hpp
//
// Closed-form finite-horizon exit-probability bounds for discrete-time
// stochastic systems certified by a barrier function h (safe set h >= 0).
//
//   Ville-based      P_u <= 1 - lambda / B                (needs h <= B)
//   Freedman-based   P_u <= H(lambda / delta, sigma sqrt(K) / delta)
//   Freedman kernel  H(l, xi) = (xi^2 / (l + xi^2))^(l + xi^2) * e^l
//
// where lambda = alpha^K h(x0) for DTCBF systems and h(x0) - cK for
// c-martingales. Everything here is a pure function of its arguments.
#pragma once

#include <numbers>
#include <optional>
#include <variant>

namespace safeprob::bounds {

/// E[h(x_{k+1}) | F_k] >= alpha h(x_k), alpha in (0, 1].
struct Dtcbf {
    double alpha;
};

/// E[h(x_{k+1}) | F_k] >= h(x_k) - c, c >= 0.
struct CMart {
    double c;
};

/// E[h(x_{k+1}) | F_k] >= alpha h(x_k) - c.
struct General {
    double alpha;
    double c;
};

using Mode = std::variant<Dtcbf, CMart, General>;

struct SafetySpec {
    Mode mode{Dtcbf{1.0}};
    int horizon{1};
    double h0{0.0};
    /// Worst predictable drop: E[h(x_k) | F_{k-1}] - h(x_k) <= delta.
    double delta{1.0};
    /// Conditional standard deviation bound: Var(h(x_{k+1}) | F_k) <= sigma^2.
    double sigma{1.0};
    /// Global upper bound h <= B; only needed by the Ville bound.
    std::optional<double> upper_bound;

    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;
};

struct BoundResult {
    double raw{1.0};
    double clamped{1.0};
    bool vacuous{true};

    static BoundResult from_raw(double raw);
};

/// 2 ln 2 - 1, the constant in the Freedman-vs-Ville comparison conditions.
inline constexpr double kComparisonPhi = 2.0 * std::numbers::ln2 - 1.0;

/// log H(lambda, xi), evaluated without forming the power.
double log_freedman_kernel(double lambda, double xi);

/// H(lambda, xi). Domain error for lambda < 0 or xi <= 0.
double freedman_kernel(double lambda, double xi);

/// Numerator of the Freedman threshold in barrier units (before dividing by
/// delta). May be negative.
double lambda_threshold(const SafetySpec& spec);

/// 1 - lambda / B. Throws std::invalid_argument if the spec carries no B.
BoundResult ville_bound(const SafetySpec& spec);

/// H(lambda / delta, sigma sqrt(K) / delta); raw 1 (vacuous) when lambda < 0.
BoundResult freedman_bound(const SafetySpec& spec);

/// sigma^2 (1 - alpha^{2K}) / (delta^2 (1 - alpha^2)), the geometric-series
/// bound on the PQV of the Doob martingale. alpha must lie in (0, 1); at
/// alpha = 1 use sigma^2 K / delta^2.
double tightened_pqv(double alpha, int horizon, double sigma, double delta);

/// Almost-sure floor alpha^k h0 - sum_{i<k} alpha^i delta.
double issf_worst_case(double alpha, double delta, double h0, int k);

/// -delta / (1 - alpha), the level of the almost-surely invariant set.
double issf_safe_level(double alpha, double delta);

/// Probability of dipping below -epsilon within K steps, using the tightened
/// PQV and the almost-sure floor as an indicator.
BoundResult stochastic_issf_bound(double alpha, int horizon, double h0, double delta,
                                  double sigma, double epsilon);

struct ComparisonConditions {
    /// lambda delta >= sigma^2 K
    bool variance_limited;
    /// lambda <= B - delta / phi
    bool below_upper;

    bool both() const { return variance_limited && below_upper; }
};

ComparisonConditions comparison_conditions(double lambda, double delta, double sigma,
                                           int horizon, double upper_bound);

/// 1 - lambda / B - H(lambda / delta, sigma sqrt(K) / delta). Nonnegative
/// whenever both comparison conditions hold.
double dominance_gap(double lambda, double upper_bound, double sigma, int horizon,
                     double delta);

struct GapDerivativeFactors {
    double a;  // < 0
    double b;  // >= 0
};

/// The two factors of d(gap)/d(sigma^2) = a * b.
GapDerivativeFactors dominance_gap_factors(double lambda, double sigma, int horizon,
                                           double delta);

double dominance_gap_dsigma2(double lambda, double upper_bound, double sigma, int horizon,
                             double delta);

/// Ville-type bounds from the restated Santoyo theorem, dispatched on the
/// sign of c and whether alpha == 1.
BoundResult santoyo_bound(double alpha, double c, int horizon, double h0, double upper_bound);

struct DeltaSigma {
    double delta;
    double sigma2;
};

/// delta = 2 L_h d_max, sigma^2 = L_h^2 d_max^2 for additive bounded noise and a
/// globally Lipschitz barrier.
DeltaSigma constructive_delta_sigma(double lipschitz, double d_max);

/// delta = 5/3 d_max, sigma^2 = d_max^2 / 2 for the HLIP obstacle barrier with a
/// uniform-disk position disturbance.
DeltaSigma hlip_delta_sigma(double d_max);

/// Lower real branch W_{-1} on [-1/e, 0).
double lambert_w_minus1(double x);

/// Psi_phi(B) = 1/B - exp((B - 1) phi).
double psi(double phi, double b);

/// W_{-1}(phi e^phi) / phi: Psi_phi is nonnegative for every B above it.
/// Requires phi < 0.
double psi_threshold(double phi);

}  // namespace safeprob::bounds
