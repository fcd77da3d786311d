#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "distvi/agent.hpp"
#include "distvi/aggregation.hpp"
#include "distvi/error.hpp"
#include "distvi/mdp.hpp"
#include "distvi/schedule.hpp"

namespace distvi {

struct RunConfig {
    std::optional<double> alpha_override;        // else the MDP's discount
    double c_threshold = 0.0;                    // broadcast gate on |change of own aggregate|
    double tolerance = 1e-8;                     // termination: max per-agent r change
    int max_iters = 100000;
    CommSchedule schedule = CommSchedule::complete(1);
    bool record_history = false;
    int num_threads = 1;                         // <=1 runs the sequential reference path
    std::optional<std::vector<double>> initial_values; // global value vector; zeros if absent
};

struct BroadcastEvent {
    int iteration = 0;
    int sender = 0;
    double value = 0.0;
    std::vector<int> receivers;
};

/// Snapshot t describes the state after t completed rounds; index 0 is the
/// initial state. `sent[k][l][m]` flags a message l->m during round k.
struct RunHistory {
    std::vector<std::vector<std::vector<double>>> values;
    std::vector<std::vector<std::vector<double>>> aggregates;
    std::vector<std::vector<std::vector<bool>>> sent;
};

struct RunResult {
    std::vector<std::vector<double>> values;     // per agent, ascending own-state order
    std::vector<std::vector<double>> aggregates; // per agent, the final r vector
    int iterations = 0;
    bool converged = false;
    long long messages_sent = 0;
    std::vector<BroadcastEvent> broadcast_log;
    std::optional<RunHistory> history;
    RunConfig config;                            // echo of the run parameters
    double alpha_used = 0.0;

    /// Reassembles the per-agent local values into one global vector.
    std::vector<double> global_values(const Partition& partition) const {
        std::vector<double> out(static_cast<std::size_t>(partition.num_states()), 0.0);
        for (int l = 0; l < partition.num_partitions(); ++l) {
            auto members = partition.members(l);
            for (std::size_t k = 0; k < members.size(); ++k)
                out[static_cast<std::size_t>(members[k])] = values[static_cast<std::size_t>(l)][k];
        }
        return out;
    }
};

/**
 * Runs the distributed iteration in synchronous rounds. Each round:
 *
 *   1. every agent sweeps its local values against its pre-round aggregate
 *      estimates and refreshes its own aggregate;
 *   2. an agent broadcasts the fresh aggregate to its current schedule
 *      neighbors when the value moved more than c_threshold since the last
 *      broadcast, or (for window > 0) when some current neighbor has not
 *      been contacted within the last `window` rounds;
 *   3. deliveries overwrite the receivers' estimate of the sender's entry;
 *      non-receivers keep their previous estimate.
 *
 * The run terminates once no agent's aggregate vector changed by more than
 * `tolerance` over a round; exceeding max_iters is flagged, not thrown.
 * Updates within a round may be fanned across `num_threads` workers; every
 * cross-agent effect is applied at the round barrier, so results are
 * identical for any worker count.
 */
inline RunResult run_distributed_vi(const DiscountedMdp& mdp, const Partition& partition,
                                    const Disaggregation& disagg, const RunConfig& config) {
    if (!(config.tolerance > 0.0))
        throw ValidationError("termination tolerance must be positive");
    if (!(config.c_threshold >= 0.0))
        throw ValidationError("communication threshold must be nonnegative");
    if (config.schedule.num_agents() != partition.num_partitions())
        throw ValidationError("schedule agent count does not match partition count");
    if (partition.num_states() != mdp.num_states())
        throw ValidationError("partition state count does not match MDP");
    const double alpha = config.alpha_override.value_or(mdp.alpha());
    if (!(alpha >= 0.0 && alpha < 1.0))
        throw ValidationError("overridden discount factor must lie in [0,1)");
    if (config.initial_values &&
        config.initial_values->size() != static_cast<std::size_t>(mdp.num_states()))
        throw ValidationError("initial value vector size does not match state count");

    const int q = partition.num_partitions();
    const int window = config.schedule.window();

    std::vector<LocalMdp> slices;
    slices.reserve(static_cast<std::size_t>(q));
    for (int l = 0; l < q; ++l) {
        slices.emplace_back(mdp, partition, l);
        slices.back().set_alpha(alpha);
    }

    std::vector<AgentState> agents;
    agents.reserve(static_cast<std::size_t>(q));
    for (int l = 0; l < q; ++l) {
        auto s = AgentState::zeros(l, partition.members(l).size(), q);
        if (config.initial_values) {
            auto members = partition.members(l);
            for (std::size_t k = 0; k < members.size(); ++k)
                s.values[k] = (*config.initial_values)[static_cast<std::size_t>(members[k])];
        }
        agents.push_back(std::move(s));
    }

    RunResult result;
    result.config = config;
    result.alpha_used = alpha;
    if (config.record_history) {
        result.history.emplace();
        auto snapshot = [&] {
            std::vector<std::vector<double>> v, r;
            for (const auto& a : agents) {
                v.push_back(a.values);
                r.push_back(a.aggregates);
            }
            result.history->values.push_back(std::move(v));
            result.history->aggregates.push_back(std::move(r));
        };
        snapshot();
    }

    std::vector<AgentUpdateResult> updates(static_cast<std::size_t>(q));
    for (int k = 0; k < config.max_iters; ++k) {
        const auto run_agent = [&](int l) {
            updates[static_cast<std::size_t>(l)] =
                agent_update(slices[static_cast<std::size_t>(l)], partition, disagg,
                             agents[static_cast<std::size_t>(l)]);
        };
        if (config.num_threads > 1 && q > 1) {
            const int workers = std::min(config.num_threads, q);
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(workers));
            for (int w = 0; w < workers; ++w)
                pool.emplace_back([&, w] {
                    for (int l = w; l < q; l += workers)
                        run_agent(l);
                });
            for (auto& t : pool)
                t.join();
        } else {
            for (int l = 0; l < q; ++l)
                run_agent(l);
        }

        std::vector<std::vector<double>> previous_r;
        previous_r.reserve(static_cast<std::size_t>(q));
        for (const auto& a : agents)
            previous_r.push_back(a.aggregates);

        // Apply local results before deliveries; deliveries only touch the
        // sender's entry in each receiver's vector.
        for (int l = 0; l < q; ++l) {
            agents[static_cast<std::size_t>(l)].values = std::move(updates[static_cast<std::size_t>(l)].values);
            agents[static_cast<std::size_t>(l)].aggregates[static_cast<std::size_t>(l)] =
                updates[static_cast<std::size_t>(l)].own_aggregate;
        }

        std::vector<std::vector<bool>> sent;
        if (config.record_history)
            sent.assign(static_cast<std::size_t>(q), std::vector<bool>(static_cast<std::size_t>(q), false));

        for (int l = 0; l < q; ++l) {
            auto& agent = agents[static_cast<std::size_t>(l)];
            const double fresh = agent.aggregates[static_cast<std::size_t>(l)];
            auto receivers = config.schedule.neighbors_out(l, k);
            if (receivers.empty())
                continue;
            bool fire = std::abs(fresh - agent.last_broadcast) > config.c_threshold;
            if (!fire && window >= 1) {
                for (int m : receivers) {
                    const int last = agent.last_contact[static_cast<std::size_t>(m)];
                    if (last < 0 || k - last > window) {
                        fire = true;
                        break;
                    }
                }
            }
            if (!fire)
                continue;
            for (int m : receivers) {
                agents[static_cast<std::size_t>(m)].aggregates[static_cast<std::size_t>(l)] = fresh;
                agent.last_contact[static_cast<std::size_t>(m)] = k;
                if (config.record_history)
                    sent[static_cast<std::size_t>(l)][static_cast<std::size_t>(m)] = true;
            }
            agent.last_broadcast = fresh;
            result.messages_sent += static_cast<long long>(receivers.size());
            result.broadcast_log.push_back(BroadcastEvent{k, l, fresh, std::move(receivers)});
        }

        if (config.record_history) {
            std::vector<std::vector<double>> v, r;
            for (const auto& a : agents) {
                v.push_back(a.values);
                r.push_back(a.aggregates);
            }
            result.history->values.push_back(std::move(v));
            result.history->aggregates.push_back(std::move(r));
            result.history->sent.push_back(std::move(sent));
        }

        result.iterations = k + 1;
        double change = 0.0;
        for (int l = 0; l < q; ++l)
            for (int m = 0; m < q; ++m)
                change = std::max(change, std::abs(agents[static_cast<std::size_t>(l)]
                                                       .aggregates[static_cast<std::size_t>(m)] -
                                                   previous_r[static_cast<std::size_t>(l)]
                                                             [static_cast<std::size_t>(m)]));
        if (change <= config.tolerance) {
            result.converged = true;
            break;
        }
    }

    for (auto& a : agents) {
        result.values.push_back(std::move(a.values));
        result.aggregates.push_back(std::move(a.aggregates));
    }
    return result;
}

} // namespace distvi
