#include "safeprob/martingale.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace safeprob::martingale {

namespace {

void check_aligned(std::size_t values, std::size_t per_step, const char* name) {
    if (values == 0) throw std::invalid_argument("trace needs at least the initial value");
    if (per_step != values - 1)
        throw std::invalid_argument(std::string(name) + " must have one entry per step (" +
                                    std::to_string(values - 1) + "), got " +
                                    std::to_string(per_step));
}

// Fills cond_second_moments from the means and (optional) variances.
void fill_second_moments(ProcessTrace& t) {
    const std::size_t k = t.cond_means.size();
    t.cond_second_moments.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double drift = t.cond_means[i] - t.values[i];
        const double var = t.cond_variances.empty() ? 0.0 : t.cond_variances[i];
        t.cond_second_moments[i] = var + drift * drift;
    }
}

PqvTrace accumulate(std::span<const double> increments) {
    PqvTrace out;
    out.cumulative.resize(increments.size() + 1);
    out.cumulative[0] = 0.0;
    for (std::size_t i = 0; i < increments.size(); ++i) {
        if (increments[i] < 0.0)
            throw std::invalid_argument("negative conditional second moment at step " +
                                        std::to_string(i + 1));
        out.cumulative[i + 1] = out.cumulative[i] + increments[i];
    }
    return out;
}

}  // namespace

void ProcessTrace::validate() const {
    check_aligned(values.size(), cond_means.size(), "cond_means");
    if (!cond_second_moments.empty())
        check_aligned(values.size(), cond_second_moments.size(), "cond_second_moments");
    if (!cond_variances.empty())
        check_aligned(values.size(), cond_variances.size(), "cond_variances");
}

ProcessTrace build_candidate(std::span<const double> eta_values,
                             std::span<const double> eta_cond_means,
                             std::span<const double> eta_cond_variances, double alpha_tilde,
                             double c_tilde, double delta) {
    check_aligned(eta_values.size(), eta_cond_means.size(), "eta_cond_means");
    if (!eta_cond_variances.empty())
        check_aligned(eta_values.size(), eta_cond_variances.size(), "eta_cond_variances");
    if (!(delta > 0.0)) throw std::invalid_argument("build_candidate: delta must be > 0");
    if (!(alpha_tilde > 0.0 && alpha_tilde <= 1.0))
        throw std::invalid_argument("build_candidate: alpha must lie in (0, 1]");
    if (!(c_tilde >= 0.0)) throw std::invalid_argument("build_candidate: c must be >= 0");

    const int horizon = static_cast<int>(eta_values.size()) - 1;
    ProcessTrace t;
    t.values.resize(eta_values.size());
    t.cond_means.resize(eta_cond_means.size());
    if (!eta_cond_variances.empty()) t.cond_variances.resize(eta_cond_variances.size());

    const double anchor = std::pow(alpha_tilde, horizon) * eta_values[0];
    double drift_sum = 0.0;  // sum_{i=1}^k a^{K-i} c / delta
    t.values[0] = -anchor + anchor;
    for (int k = 1; k <= horizon; ++k) {
        const double weight = std::pow(alpha_tilde, horizon - k);
        drift_sum += weight * c_tilde / delta;
        const double offset = anchor - drift_sum;
        t.values[k] = -weight * eta_values[k] + offset;
        t.cond_means[k - 1] = -weight * eta_cond_means[k - 1] + offset;
        if (!eta_cond_variances.empty())
            t.cond_variances[k - 1] = weight * weight * eta_cond_variances[k - 1];
    }
    fill_second_moments(t);
    return t;
}

ProcessTrace build_ville_dtcbf(std::span<const double> h_values,
                               std::span<const double> h_cond_means, double alpha,
                               double upper_bound) {
    check_aligned(h_values.size(), h_cond_means.size(), "h_cond_means");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("build_ville_dtcbf: alpha must lie in (0, 1]");
    const int horizon = static_cast<int>(h_values.size()) - 1;
    const double top = upper_bound * std::pow(alpha, -horizon);
    ProcessTrace t;
    t.values.resize(h_values.size());
    t.cond_means.resize(h_cond_means.size());
    for (int k = 0; k <= horizon; ++k) {
        const double scale = std::pow(alpha, -k);
        t.values[k] = top - scale * h_values[k];
        if (k > 0) t.cond_means[k - 1] = top - scale * h_cond_means[k - 1];
    }
    fill_second_moments(t);
    return t;
}

ProcessTrace build_ville_cmart(std::span<const double> h_values,
                               std::span<const double> h_cond_means, double c,
                               double upper_bound) {
    check_aligned(h_values.size(), h_cond_means.size(), "h_cond_means");
    const int horizon = static_cast<int>(h_values.size()) - 1;
    ProcessTrace t;
    t.values.resize(h_values.size());
    t.cond_means.resize(h_cond_means.size());
    for (int k = 0; k <= horizon; ++k) {
        const double slack = (horizon - k) * c;
        t.values[k] = upper_bound - h_values[k] + slack;
        if (k > 0) t.cond_means[k - 1] = upper_bound - h_cond_means[k - 1] + slack;
    }
    fill_second_moments(t);
    return t;
}

DoobParts doob_decompose(const ProcessTrace& trace) {
    trace.validate();
    const std::size_t n = trace.values.size();
    DoobParts parts;
    parts.martingale.resize(n);
    parts.predictable.resize(n);
    parts.predictable[0] = 0.0;
    parts.martingale[0] = trace.values[0];
    for (std::size_t k = 1; k < n; ++k) {
        parts.predictable[k] =
            parts.predictable[k - 1] + (trace.cond_means[k - 1] - trace.values[k - 1]);
        parts.martingale[k] = trace.values[k] - parts.predictable[k];
    }
    return parts;
}

PqvTrace pqv(const ProcessTrace& trace) {
    trace.validate();
    if (trace.cond_second_moments.size() != trace.cond_means.size())
        throw std::invalid_argument("pqv: trace carries no conditional second moments");
    return accumulate(trace.cond_second_moments);
}

PqvTrace pqv(const DoobParts& parts, const ProcessTrace& trace) {
    trace.validate();
    if (parts.martingale.size() != trace.values.size())
        throw std::invalid_argument("pqv: Doob parts do not match the trace");
    if (trace.cond_variances.size() != trace.cond_means.size())
        throw std::invalid_argument("pqv: trace carries no conditional variances");
    return accumulate(trace.cond_variances);
}

std::vector<bool> check_supermartingale(const ProcessTrace& trace, double tol) {
    trace.validate();
    std::vector<bool> ok(trace.cond_means.size());
    for (std::size_t i = 0; i < ok.size(); ++i)
        ok[i] = trace.cond_means[i] <= trace.values[i] + tol;
    return ok;
}

std::vector<bool> check_difference_bound(const DoobParts& parts, const ProcessTrace& trace,
                                         double tol) {
    if (parts.martingale.size() != trace.values.size())
        throw std::invalid_argument("check_difference_bound: parts do not match the trace");
    std::vector<bool> ok(trace.values.size() - 1);
    for (std::size_t k = 1; k < parts.martingale.size(); ++k)
        ok[k - 1] = parts.martingale[k] - parts.martingale[k - 1] <= 1.0 + tol;
    return ok;
}

ContainmentRecord containment_witness(std::span<const double> h_values, const DoobParts& parts,
                                      double lambda, double epsilon, double tol) {
    if (parts.martingale.size() != h_values.size())
        throw std::invalid_argument("containment_witness: h values do not match the parts");
    ContainmentRecord rec;
    rec.exited = std::any_of(h_values.begin(), h_values.end(),
                             [epsilon](double h) { return h < -epsilon; });
    const double peak = *std::max_element(parts.martingale.begin(), parts.martingale.end());
    rec.mart_exceeded = peak >= lambda - tol;
    return rec;
}

}  // namespace safeprob::martingale
