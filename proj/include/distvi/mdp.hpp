#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distvi/error.hpp"

namespace distvi {

using ValueFunction = std::vector<double>;

/// One stored transition entry of a (state, action) row.
struct Transition {
    int to = 0;
    double prob = 0.0;
    double cost = 0.0;
};

/// All transitions reachable under one action identifier.
struct ActionRow {
    int action = 0;
    std::vector<Transition> transitions;
};

namespace detail {
inline std::string state_action(int i, int u) {
    return "state " + std::to_string(i) + ", action " + std::to_string(u);
}
} // namespace detail

/**
 * Finite discounted MDP with sparse transition storage.
 *
 * Rows are keyed by (state, action); each row stores only its nonzero
 * transition probabilities together with the stage costs. Instances are
 * immutable after construction and validated on construction: every state
 * has at least one action, every row sums to one within 1e-12, all
 * probabilities lie in [0,1], all costs are finite, and the discount
 * factor lies in [0,1). Build instances through MdpBuilder.
 */
class DiscountedMdp {
public:
    static constexpr double kProbSumTol = 1e-12;

    DiscountedMdp(int n, double alpha, std::vector<std::vector<ActionRow>> states)
        : n_(n), alpha_(alpha), states_(std::move(states)) {
        validate();
    }

    int num_states() const { return n_; }
    double alpha() const { return alpha_; }

    /// Actions available at state i, sorted by ascending action identifier.
    std::span<const ActionRow> actions(int i) const { return states_[static_cast<std::size_t>(i)]; }

private:
    void validate() const {
        if (n_ <= 0)
            throw ValidationError("MDP must have at least one state");
        if (!(alpha_ >= 0.0 && alpha_ < 1.0))
            throw ValidationError("discount factor must lie in [0,1), got " + std::to_string(alpha_));
        if (states_.size() != static_cast<std::size_t>(n_))
            throw ValidationError("state table size does not match state count");
        for (int i = 0; i < n_; ++i) {
            const auto& rows = states_[static_cast<std::size_t>(i)];
            if (rows.empty())
                throw ValidationError("state " + std::to_string(i) + " has no actions");
            for (const auto& row : rows) {
                if (row.transitions.empty())
                    throw ValidationError(detail::state_action(i, row.action) + " has no transitions");
                double sum = 0.0;
                for (const auto& t : row.transitions) {
                    if (t.to < 0 || t.to >= n_)
                        throw ValidationError(detail::state_action(i, row.action) +
                                              " targets out-of-range state " + std::to_string(t.to));
                    if (!(t.prob >= 0.0 && t.prob <= 1.0))
                        throw ValidationError("probability out of [0,1] at " + detail::state_action(i, row.action));
                    if (!std::isfinite(t.cost))
                        throw ValidationError("non-finite cost at " + detail::state_action(i, row.action));
                    sum += t.prob;
                }
                if (std::abs(sum - 1.0) > kProbSumTol)
                    throw ValidationError("transition probabilities at " + detail::state_action(i, row.action) +
                                          " sum to " + std::to_string(sum) + ", expected 1");
            }
        }
    }

    int n_;
    double alpha_;
    std::vector<std::vector<ActionRow>> states_;
};

/**
 * Accumulates (i, u, j, p, g) records and produces a validated DiscountedMdp.
 * Duplicate (i, u, j) triples are rejected rather than merged.
 */
class MdpBuilder {
public:
    MdpBuilder(int n, double alpha) : n_(n), alpha_(alpha), states_(n > 0 ? static_cast<std::size_t>(n) : 0) {
        if (n <= 0)
            throw ValidationError("MDP must have at least one state");
        if (!(alpha >= 0.0 && alpha < 1.0))
            throw ValidationError("discount factor must lie in [0,1), got " + std::to_string(alpha));
    }

    MdpBuilder& add(int i, int u, int j, double p, double g) {
        if (i < 0 || i >= n_)
            throw ValidationError("origin state " + std::to_string(i) + " out of range");
        if (j < 0 || j >= n_)
            throw ValidationError("target state " + std::to_string(j) + " out of range");
        auto& rows = states_[static_cast<std::size_t>(i)];
        auto it = std::find_if(rows.begin(), rows.end(), [u](const ActionRow& r) { return r.action == u; });
        if (it == rows.end()) {
            rows.push_back(ActionRow{u, {}});
            it = std::prev(rows.end());
        }
        for (const auto& t : it->transitions)
            if (t.to == j)
                throw ValidationError("duplicate transition (" + std::to_string(i) + "," + std::to_string(u) +
                                      "," + std::to_string(j) + ")");
        it->transitions.push_back(Transition{j, p, g});
        return *this;
    }

    DiscountedMdp build() && {
        for (auto& rows : states_)
            std::sort(rows.begin(), rows.end(),
                      [](const ActionRow& a, const ActionRow& b) { return a.action < b.action; });
        return DiscountedMdp(n_, alpha_, std::move(states_));
    }

private:
    int n_;
    double alpha_;
    std::vector<std::vector<ActionRow>> states_;
};

struct BackupResult {
    double value = 0.0;
    int action = 0;
};

/**
 * One-step Bellman lookahead at state i:
 * min over u in U(i) of sum_j p(i,u,j) * (g(i,u,j) + alpha * J(j)).
 * Ties are broken toward the lowest action identifier.
 */
inline BackupResult bellman_backup(const DiscountedMdp& mdp, std::span<const double> values, int i) {
    auto rows = mdp.actions(i);
    double best = std::numeric_limits<double>::infinity();
    int best_action = rows.front().action;
    for (const auto& row : rows) {
        double v = 0.0;
        for (const auto& t : row.transitions)
            v += t.prob * (t.cost + mdp.alpha() * values[static_cast<std::size_t>(t.to)]);
        if (v < best) { // strict: earlier (lower) action id wins ties
            best = v;
            best_action = row.action;
        }
    }
    return BackupResult{best, best_action};
}

struct ValueIterationResult {
    ValueFunction values;
    int iterations = 0;
    bool converged = false;
};

/**
 * Synchronous value iteration until the sup-norm change between successive
 * iterates drops to tol. Non-convergence within max_iters is reported via
 * the converged flag, never silently accepted.
 */
inline ValueIterationResult value_iteration(const DiscountedMdp& mdp, double tol, int max_iters,
                                            std::optional<ValueFunction> start = std::nullopt) {
    if (!(tol > 0.0))
        throw ValidationError("value iteration tolerance must be positive");
    const auto n = static_cast<std::size_t>(mdp.num_states());
    ValueFunction current = start ? std::move(*start) : ValueFunction(n, 0.0);
    if (current.size() != n)
        throw ValidationError("starting vector size does not match state count");
    ValueFunction next(n, 0.0);
    ValueIterationResult result;
    for (int iter = 0; iter < max_iters; ++iter) {
        double residual = 0.0;
        for (int i = 0; i < mdp.num_states(); ++i) {
            next[static_cast<std::size_t>(i)] = bellman_backup(mdp, current, i).value;
            residual = std::max(residual, std::abs(next[static_cast<std::size_t>(i)] -
                                                   current[static_cast<std::size_t>(i)]));
        }
        current.swap(next);
        ++result.iterations;
        if (residual <= tol) {
            result.converged = true;
            break;
        }
    }
    result.values = std::move(current);
    return result;
}

} // namespace distvi
