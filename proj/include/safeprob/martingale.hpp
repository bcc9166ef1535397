// martingale.hpp
//
// Candidate supermartingales built from barrier trajectories, their Doob
// decomposition W = M + A, predictable quadratic variation, and the per-step
// checks that certify a trace satisfies the hypotheses of Freedman's
// inequality.
//
// Index convention: values[k] for k = 0..K; per-step conditional quantities
// are stored at position k - 1 for step k = 1..K.
#pragma once

#include <span>
#include <vector>

namespace safeprob::martingale {

/// Default absolute tolerance on the normalized scale.
inline constexpr double kDefaultTolerance = 1e-9;

struct ProcessTrace {
    std::vector<double> values;
    /// E[W_k | F_{k-1}]
    std::vector<double> cond_means;
    /// E[(W_k - W_{k-1})^2 | F_{k-1}]
    std::vector<double> cond_second_moments;
    /// Var(W_k | F_{k-1}); equals the Doob martingale's conditional second moment.
    std::vector<double> cond_variances;

    int horizon() const { return static_cast<int>(values.size()) - 1; }
    /// Throws std::invalid_argument when lengths disagree or a moment is negative.
    void validate() const;
};

struct DoobParts {
    std::vector<double> martingale;
    std::vector<double> predictable;
};

/// Running sums, one entry per k = 0..K.
struct PqvTrace {
    std::vector<double> cumulative;

    double terminal() const { return cumulative.back(); }
};

/// W_k = -a^{K-k} eta(x_k) + a^K eta(x_0) - sum_{i=1}^k a^{K-i} c / delta.
///
/// eta_values[k] = h(x_k) / delta for k = 0..K, eta_cond_means[k-1] and
/// eta_cond_variances[k-1] are E[eta(x_k) | F_{k-1}] and Var(eta(x_k) | F_{k-1}).
/// The variance span may be empty, in which case second moments carry only
/// the drift term.
ProcessTrace build_candidate(std::span<const double> eta_values,
                             std::span<const double> eta_cond_means,
                             std::span<const double> eta_cond_variances, double alpha_tilde,
                             double c_tilde, double delta);

/// Ville construction for DTCBF systems bounded above by B:
/// W_k = B a^{-K} - a^{-k} h(x_k), a nonnegative supermartingale on k <= K.
ProcessTrace build_ville_dtcbf(std::span<const double> h_values,
                               std::span<const double> h_cond_means, double alpha,
                               double upper_bound);

/// Ville construction for c-martingales: W_k = B - h(x_k) + (K - k) c.
ProcessTrace build_ville_cmart(std::span<const double> h_values,
                               std::span<const double> h_cond_means, double c,
                               double upper_bound);

DoobParts doob_decompose(const ProcessTrace& trace);

/// <W>_k from the trace's conditional second moments.
PqvTrace pqv(const ProcessTrace& trace);

/// <M>_k of the Doob martingale, from the trace's conditional variances.
PqvTrace pqv(const DoobParts& parts, const ProcessTrace& trace);

/// Per step k = 1..K: E[W_k | F_{k-1}] <= W_{k-1} + tol.
std::vector<bool> check_supermartingale(const ProcessTrace& trace,
                                        double tol = kDefaultTolerance);

/// Per step k = 1..K: M_k - M_{k-1} <= 1 + tol.
std::vector<bool> check_difference_bound(const DoobParts& parts, const ProcessTrace& trace,
                                         double tol = kDefaultTolerance);

struct ContainmentRecord {
    bool exited{false};
    bool mart_exceeded{false};

    bool holds() const { return !exited || mart_exceeded; }
};

/// exited: some h_k < -epsilon (boundary value -epsilon counts as safe).
/// mart_exceeded: max_k M_k >= lambda - tol.
ContainmentRecord containment_witness(std::span<const double> h_values, const DoobParts& parts,
                                      double lambda, double epsilon = 0.0,
                                      double tol = kDefaultTolerance);

}  // namespace safeprob::martingale
