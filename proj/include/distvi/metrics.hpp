#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <vector>

#include "distvi/aggregation.hpp"
#include "distvi/error.hpp"
#include "distvi/mdp.hpp"
#include "distvi/simulator.hpp"

namespace distvi {

/**
 * Per-iteration update magnitudes extracted from a recorded run.
 *
 * For round k (0-based): `delta[k][l][i]` is the change of agent l's i-th
 * local value, `delta_bar[k][l]` its maximum magnitude, `eps[k][l][m]` the
 * change of r_{l,m}, and `eps_inf_agent[k][l]` the maximum over m. The
 * windowed maxima accumulate the most recent window+1 rounds and are
 * defined for k >= window; `windowed_delta_bar(k)` / `windowed_eps_inf(k)`
 * index them by round.
 */
struct IterationTrace {
    int window = 0;
    int rounds = 0;
    std::vector<std::vector<std::vector<double>>> delta;
    std::vector<std::vector<double>> delta_bar;
    std::vector<std::vector<std::vector<double>>> eps;
    std::vector<std::vector<double>> eps_inf_agent;
    std::vector<double> delta_bar_windowed; // index 0 corresponds to k = window
    std::vector<double> eps_inf_windowed;

    double windowed_delta_bar(int k) const { return delta_bar_windowed.at(static_cast<std::size_t>(k - window)); }
    double windowed_eps_inf(int k) const { return eps_inf_windowed.at(static_cast<std::size_t>(k - window)); }
    /// max of the two windowed quantities, the contracting sequence.
    double contraction_value(int k) const { return std::max(windowed_delta_bar(k), windowed_eps_inf(k)); }
};

/// Computes all trace quantities from the stored per-round snapshots.
inline IterationTrace trace_from_history(const RunResult& result, int window) {
    if (!result.history)
        throw ValidationError("run result carries no recorded history");
    if (window < 0)
        throw ValidationError("trace window must be nonnegative");
    const auto& h = *result.history;
    const int rounds = static_cast<int>(h.values.size()) - 1;
    const auto q = h.values.front().size();

    IterationTrace trace;
    trace.window = window;
    trace.rounds = rounds;
    for (int k = 0; k < rounds; ++k) {
        std::vector<std::vector<double>> dk(q), ek(q);
        std::vector<double> dbar(q, 0.0), einf(q, 0.0);
        for (std::size_t l = 0; l < q; ++l) {
            const auto& before_v = h.values[static_cast<std::size_t>(k)][l];
            const auto& after_v = h.values[static_cast<std::size_t>(k) + 1][l];
            dk[l].resize(before_v.size());
            for (std::size_t i = 0; i < before_v.size(); ++i) {
                dk[l][i] = after_v[i] - before_v[i];
                dbar[l] = std::max(dbar[l], std::abs(dk[l][i]));
            }
            const auto& before_r = h.aggregates[static_cast<std::size_t>(k)][l];
            const auto& after_r = h.aggregates[static_cast<std::size_t>(k) + 1][l];
            ek[l].resize(before_r.size());
            for (std::size_t m = 0; m < before_r.size(); ++m) {
                ek[l][m] = after_r[m] - before_r[m];
                einf[l] = std::max(einf[l], std::abs(ek[l][m]));
            }
        }
        trace.delta.push_back(std::move(dk));
        trace.eps.push_back(std::move(ek));
        trace.delta_bar.push_back(std::move(dbar));
        trace.eps_inf_agent.push_back(std::move(einf));
    }
    for (int k = window; k < rounds; ++k) {
        double dmax = 0.0, emax = 0.0;
        for (std::size_t l = 0; l < q; ++l) {
            double dsum = 0.0, esum = 0.0;
            for (int n = k - window; n <= k; ++n) {
                dsum += trace.delta_bar[static_cast<std::size_t>(n)][l];
                esum += trace.eps_inf_agent[static_cast<std::size_t>(n)][l];
            }
            dmax = std::max(dmax, dsum);
            emax = std::max(emax, esum);
        }
        trace.delta_bar_windowed.push_back(dmax);
        trace.eps_inf_windowed.push_back(emax);
    }
    return trace;
}

/// Largest spread of the oracle solution within any one partition.
inline double intra_partition_spread(const ValueFunction& j_star, const Partition& partition) {
    if (j_star.size() != static_cast<std::size_t>(partition.num_states()))
        throw ValidationError("value function size does not match partition");
    double spread = 0.0;
    for (int l = 0; l < partition.num_partitions(); ++l) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (int state : partition.members(l)) {
            lo = std::min(lo, j_star[static_cast<std::size_t>(state)]);
            hi = std::max(hi, j_star[static_cast<std::size_t>(state)]);
        }
        spread = std::max(spread, hi - lo);
    }
    return spread;
}

struct ErrorBoundReport {
    bool holds = false;
    double bound = 0.0;         // alpha * spread / (1 - alpha)
    double max_deviation = 0.0; // max_i |V(i) - J*(i)|
    double worst_excess = 0.0;  // max(0, max_deviation - bound)
    double slack = 0.0;         // 10x the run tolerance
};

/**
 * Checks the aggregation error bound: every converged local value must lie
 * within alpha*spread/(1-alpha) of the oracle, up to ten run tolerances of
 * numerical slack. Only meaningful for runs with a window-0 schedule;
 * results from wider windows are refused.
 */
inline ErrorBoundReport check_error_bound(const RunResult& result, const ValueFunction& j_star,
                                          const Partition& partition, double alpha) {
    if (result.config.schedule.window() != 0)
        throw ValidationError("error bound applies only to window-0 runs");
    ErrorBoundReport report;
    report.slack = 10.0 * result.config.tolerance;
    report.bound = alpha * intra_partition_spread(j_star, partition) / (1.0 - alpha);
    const auto values = result.global_values(partition);
    for (std::size_t i = 0; i < values.size(); ++i)
        report.max_deviation = std::max(report.max_deviation, std::abs(values[i] - j_star[i]));
    report.worst_excess = std::max(0.0, report.max_deviation - report.bound);
    report.holds = report.max_deviation <= report.bound + report.slack;
    return report;
}

struct NormalizedErrors {
    double avg = 0.0;
    double max = 0.0;
    int excluded = 0; // states skipped because |J*| < 1e-12
};

/**
 * Relative deviation of the distributed solution from the oracle, averaged
 * and maximized over states. States with |J*| below 1e-12 (the absorbing
 * destination) are excluded from both metrics and counted.
 */
inline NormalizedErrors normalized_errors(const RunResult& result, const ValueFunction& j_star,
                                          const Partition& partition) {
    static constexpr double kZeroCut = 1e-12;
    const auto values = result.global_values(partition);
    if (values.size() != j_star.size())
        throw ValidationError("value function size does not match run result");
    NormalizedErrors out;
    int counted = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::abs(j_star[i]) < kZeroCut) {
            ++out.excluded;
            continue;
        }
        const double rel = std::abs(values[i] - j_star[i]) / std::abs(j_star[i]);
        out.avg += rel;
        out.max = std::max(out.max, rel);
        ++counted;
    }
    if (counted == 0)
        throw ValidationError("no states with nonzero oracle value to compare");
    out.avg /= static_cast<double>(counted);
    return out;
}

} // namespace distvi
