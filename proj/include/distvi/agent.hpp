#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "distvi/aggregation.hpp"
#include "distvi/error.hpp"
#include "distvi/mdp.hpp"

namespace distvi {

/**
 * The slice of an MDP visible to one agent: transition rows whose origin
 * lies in its own partition, plus the global discount factor. Rows into
 * foreign partitions stay visible (an agent knows where its states lead and
 * at what cost); foreign *values* do not, so backups substitute the
 * aggregate estimates instead.
 */
class LocalMdp {
public:
    LocalMdp(const DiscountedMdp& mdp, const Partition& partition, int ell) : ell_(ell), alpha_(mdp.alpha()) {
        auto members = partition.members(ell);
        rows_.reserve(members.size());
        for (int state : members)
            rows_.emplace_back(mdp.actions(state).begin(), mdp.actions(state).end());
    }

    int partition_index() const { return ell_; }
    double alpha() const { return alpha_; }
    void set_alpha(double a) { alpha_ = a; }

    /// Rows for the agent's k-th local state (ascending state order).
    std::span<const ActionRow> local_actions(std::size_t local_rank) const {
        if (local_rank >= rows_.size())
            throw ValidationError("missing transition data for local state rank " + std::to_string(local_rank) +
                                  " of agent " + std::to_string(ell_));
        return rows_[local_rank];
    }

    std::size_t size() const { return rows_.size(); }

private:
    int ell_;
    double alpha_;
    std::vector<std::vector<ActionRow>> rows_;
};

/// Per-agent mutable state carried across iterations.
struct AgentState {
    int ell = 0;
    std::vector<double> values;          // one entry per own state, ascending state order
    std::vector<double> aggregates;      // r vector: current estimate of every agent's aggregate
    double last_broadcast = 0.0;         // aggregate value most recently sent to peers
    std::vector<int> last_contact;       // iteration of last message sent to each peer, -1 if never

    static AgentState zeros(int ell, std::size_t own_states, int q) {
        AgentState s;
        s.ell = ell;
        s.values.assign(own_states, 0.0);
        s.aggregates.assign(static_cast<std::size_t>(q), 0.0);
        s.last_broadcast = 0.0;
        s.last_contact.assign(static_cast<std::size_t>(q), -1);
        return s;
    }
};

struct AgentUpdateResult {
    std::vector<double> values;
    double own_aggregate = 0.0;
    double max_abs_change = 0.0;
};

/**
 * One Gauss-Seidel sweep of the agent's local value function. States are
 * visited in ascending state order; later states read the values already
 * written earlier in the same sweep. Successor values are taken from the
 * local table for own states and from the aggregate estimates for foreign
 * ones. Returns the new local values and the refreshed own aggregate.
 */
inline AgentUpdateResult agent_update(const LocalMdp& local, const Partition& partition,
                                      const Disaggregation& disagg, const AgentState& state) {
    const int ell = local.partition_index();
    auto members = partition.members(ell);
    if (state.values.size() != members.size())
        throw ValidationError("agent value vector does not cover its partition");
    if (state.aggregates.size() != static_cast<std::size_t>(partition.num_partitions()))
        throw ValidationError("aggregate vector size does not match partition count");

    AgentUpdateResult out;
    out.values = state.values;
    for (std::size_t k = 0; k < members.size(); ++k) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& row : local.local_actions(k)) {
            double v = 0.0;
            for (const auto& t : row.transitions) {
                const int owner = partition.member_of(t.to);
                const double successor = owner == ell
                                             ? out.values[static_cast<std::size_t>(partition.rank_in_partition(t.to))]
                                             : state.aggregates[static_cast<std::size_t>(owner)];
                v += t.prob * (t.cost + local.alpha() * successor);
            }
            best = std::min(best, v);
        }
        out.max_abs_change = std::max(out.max_abs_change, std::abs(best - out.values[k]));
        out.values[k] = best;
    }
    out.own_aggregate = aggregate(disagg, partition, ell, out.values);
    return out;
}

} // namespace distvi
