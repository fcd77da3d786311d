#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "distvi/error.hpp"

namespace distvi {

/**
 * Directed communication schedule E(k) over agents, cyclic in k. The
 * schedule invariant is the bounded-connectivity requirement: the union of
 * any B+1 consecutive edge sets is the complete directed graph on q nodes.
 * Built-in kinds satisfy it by construction; custom schedules are checked
 * over one period and rejected with the first violating window.
 */
class CommSchedule {
public:
    enum class Kind { Complete, RoundRobin, Custom };

    static CommSchedule complete(int q) {
        require_agents(q);
        CommSchedule s;
        s.kind_ = Kind::Complete;
        s.q_ = q;
        s.window_ = 0;
        s.period_ = 1;
        return s;
    }

    /// Distributes the q(q-1) ordered pairs over B+1 rotating slots.
    static CommSchedule round_robin(int q, int window) {
        require_agents(q);
        if (window < 0)
            throw ValidationError("connectivity window must be nonnegative");
        CommSchedule s;
        s.kind_ = Kind::RoundRobin;
        s.q_ = q;
        s.window_ = window;
        s.period_ = window + 1;
        s.edge_sets_.assign(static_cast<std::size_t>(s.period_), {});
        int slot = 0;
        for (int from = 0; from < q; ++from)
            for (int to = 0; to < q; ++to) {
                if (from == to)
                    continue;
                s.edge_sets_[static_cast<std::size_t>(slot)].emplace_back(from, to);
                slot = (slot + 1) % s.period_;
            }
        s.check_windows();
        return s;
    }

    /// Explicit per-iteration edge sets, repeated cyclically.
    static CommSchedule custom(int q, std::vector<std::vector<std::pair<int, int>>> edge_sets, int window) {
        require_agents(q);
        if (window < 0)
            throw ValidationError("connectivity window must be nonnegative");
        if (edge_sets.empty())
            throw ValidationError("custom schedule needs at least one edge set");
        CommSchedule s;
        s.kind_ = Kind::Custom;
        s.q_ = q;
        s.window_ = window;
        s.period_ = static_cast<int>(edge_sets.size());
        s.edge_sets_ = std::move(edge_sets);
        for (const auto& set : s.edge_sets_)
            for (const auto& [from, to] : set)
                if (from < 0 || from >= q || to < 0 || to >= q || from == to)
                    throw ValidationError("custom schedule contains invalid edge (" + std::to_string(from) +
                                          "," + std::to_string(to) + ")");
        s.check_windows();
        return s;
    }

    Kind kind() const { return kind_; }
    int num_agents() const { return q_; }
    int window() const { return window_; }
    int period() const { return period_; }

    /// Receivers of agent `from` at iteration k.
    std::vector<int> neighbors_out(int from, int k) const {
        std::vector<int> out;
        if (kind_ == Kind::Complete) {
            out.reserve(static_cast<std::size_t>(q_ - 1));
            for (int m = 0; m < q_; ++m)
                if (m != from)
                    out.push_back(m);
            return out;
        }
        for (const auto& [f, t] : edge_sets_[static_cast<std::size_t>(k % period_)])
            if (f == from)
                out.push_back(t);
        return out;
    }

private:
    static void require_agents(int q) {
        if (q < 1)
            throw ValidationError("schedule needs at least one agent");
    }

    void check_windows() const {
        if (q_ == 1)
            return;
        const std::size_t pairs_needed = static_cast<std::size_t>(q_) * static_cast<std::size_t>(q_ - 1);
        for (int start = 0; start < period_; ++start) {
            std::set<std::pair<int, int>> covered;
            for (int off = 0; off <= window_; ++off) {
                const auto& set = edge_sets_[static_cast<std::size_t>((start + off) % period_)];
                covered.insert(set.begin(), set.end());
            }
            if (covered.size() != pairs_needed)
                throw ValidationError("schedule window starting at iteration " + std::to_string(start) +
                                      " does not connect all agent pairs");
        }
    }

    Kind kind_ = Kind::Complete;
    int q_ = 1;
    int window_ = 0;
    int period_ = 1;
    std::vector<std::vector<std::pair<int, int>>> edge_sets_;
};

inline CommSchedule make_schedule_complete(int q) { return CommSchedule::complete(q); }
inline CommSchedule make_schedule_round_robin(int q, int window) { return CommSchedule::round_robin(q, window); }
inline CommSchedule make_schedule_custom(int q, std::vector<std::vector<std::pair<int, int>>> edge_sets,
                                         int window) {
    return CommSchedule::custom(q, std::move(edge_sets), window);
}

} // namespace distvi
