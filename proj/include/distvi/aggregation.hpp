#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distvi/error.hpp"
#include "distvi/mdp.hpp"

namespace distvi {

/**
 * Disjoint cover of the state set by q nonempty groups. Under hard
 * aggregation the membership map is the aggregation probability: state j
 * contributes to group l exactly when member_of(j) == l.
 */
class Partition {
public:
    /// Builds from a per-state membership vector with values in [0, q).
    Partition(int q, std::vector<int> member_of) : q_(q), member_of_(std::move(member_of)) {
        if (q_ <= 0)
            throw ValidationError("partition count must be positive");
        sets_.assign(static_cast<std::size_t>(q_), {});
        rank_.assign(member_of_.size(), 0);
        for (std::size_t i = 0; i < member_of_.size(); ++i) {
            int l = member_of_[i];
            if (l < 0 || l >= q_)
                throw ValidationError("state " + std::to_string(i) + " assigned to invalid partition " +
                                      std::to_string(l));
            rank_[i] = static_cast<int>(sets_[static_cast<std::size_t>(l)].size());
            sets_[static_cast<std::size_t>(l)].push_back(static_cast<int>(i));
        }
        for (int l = 0; l < q_; ++l)
            if (sets_[static_cast<std::size_t>(l)].empty())
                throw ValidationError("partition " + std::to_string(l) + " is empty");
    }

    int num_partitions() const { return q_; }
    int num_states() const { return static_cast<int>(member_of_.size()); }
    int member_of(int state) const { return member_of_[static_cast<std::size_t>(state)]; }
    /// Position of a state within its own group's ascending member list.
    int rank_in_partition(int state) const { return rank_[static_cast<std::size_t>(state)]; }
    std::span<const int> members(int l) const { return sets_[static_cast<std::size_t>(l)]; }
    std::span<const int> membership() const { return member_of_; }

private:
    int q_;
    std::vector<int> member_of_;
    std::vector<std::vector<int>> sets_; // members in ascending state order
    std::vector<int> rank_;
};

/**
 * Sparse disaggregation probabilities d(l, i): one simplex per partition,
 * supported only on that partition's members.
 */
class Disaggregation {
public:
    static constexpr double kSumTol = 1e-12;

    /// entries[l] lists (state, weight) pairs for partition l.
    Disaggregation(const Partition& partition, std::vector<std::vector<std::pair<int, double>>> entries)
        : entries_(std::move(entries)) {
        if (entries_.size() != static_cast<std::size_t>(partition.num_partitions()))
            throw ValidationError("disaggregation must provide one weight list per partition");
        for (int l = 0; l < partition.num_partitions(); ++l) {
            double sum = 0.0;
            std::vector<bool> seen(static_cast<std::size_t>(partition.num_states()), false);
            for (const auto& [state, w] : entries_[static_cast<std::size_t>(l)]) {
                if (state < 0 || state >= partition.num_states())
                    throw ValidationError("disaggregation references out-of-range state " + std::to_string(state));
                if (partition.member_of(state) != l)
                    throw ValidationError("disaggregation weight for state " + std::to_string(state) +
                                          " outside partition " + std::to_string(l));
                if (seen[static_cast<std::size_t>(state)])
                    throw ValidationError("duplicate disaggregation weight for state " + std::to_string(state));
                seen[static_cast<std::size_t>(state)] = true;
                if (!(w >= 0.0 && w <= 1.0))
                    throw ValidationError("disaggregation weight out of [0,1] for state " + std::to_string(state));
                sum += w;
            }
            if (std::abs(sum - 1.0) > kSumTol)
                throw ValidationError("disaggregation weights of partition " + std::to_string(l) + " sum to " +
                                      std::to_string(sum) + ", expected 1");
        }
    }

    std::span<const std::pair<int, double>> weights(int l) const { return entries_[static_cast<std::size_t>(l)]; }

private:
    std::vector<std::vector<std::pair<int, double>>> entries_;
};

/**
 * Aggregate value of partition l: the d-weighted sum of a local value
 * function. `local_values` is indexed in the order of partition.members(l).
 */
inline double aggregate(const Disaggregation& disagg, const Partition& partition, int l,
                        std::span<const double> local_values) {
    if (local_values.size() != partition.members(l).size())
        throw ValidationError("local value vector size does not match partition " + std::to_string(l));
    double r = 0.0;
    for (const auto& [state, w] : disagg.weights(l))
        r += w * local_values[static_cast<std::size_t>(partition.rank_in_partition(state))];
    return r;
}

/**
 * Disaggregation rule used by the traffic experiment: within each partition,
 * weight is spread uniformly over the boundary states (states with a
 * positive-probability transition into another partition, under any action).
 * A partition without boundary states falls back to a uniform distribution
 * over all of its members; such partitions are reported through
 * `fallback_partitions` so callers can warn.
 */
inline Disaggregation uniform_boundary_disaggregation(const DiscountedMdp& mdp, const Partition& partition,
                                                      std::vector<int>* fallback_partitions = nullptr) {
    if (partition.num_states() != mdp.num_states())
        throw ValidationError("partition state count does not match MDP");
    std::vector<std::vector<std::pair<int, double>>> entries(
        static_cast<std::size_t>(partition.num_partitions()));
    for (int l = 0; l < partition.num_partitions(); ++l) {
        std::vector<int> boundary;
        for (int state : partition.members(l)) {
            bool crosses = false;
            for (const auto& row : mdp.actions(state)) {
                for (const auto& t : row.transitions) {
                    if (t.prob > 0.0 && partition.member_of(t.to) != l) {
                        crosses = true;
                        break;
                    }
                }
                if (crosses)
                    break;
            }
            if (crosses)
                boundary.push_back(state);
        }
        if (boundary.empty()) {
            if (fallback_partitions)
                fallback_partitions->push_back(l);
            auto members = partition.members(l);
            const double w = 1.0 / static_cast<double>(members.size());
            for (int state : members)
                entries[static_cast<std::size_t>(l)].emplace_back(state, w);
        } else {
            const double w = 1.0 / static_cast<double>(boundary.size());
            for (int state : boundary)
                entries[static_cast<std::size_t>(l)].emplace_back(state, w);
        }
    }
    return Disaggregation(partition, std::move(entries));
}

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

namespace detail {

/// Uniform double in [0,1) from the top 53 bits of the generator output.
/// Used instead of std::uniform_real_distribution so that sequences are
/// identical across standard library implementations.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

inline double squared_distance(const Point2& a, const Point2& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

} // namespace detail

/**
 * Lloyd's algorithm over 2D points, seeded. Initial centers are q distinct
 * input points; a cluster that empties is repaired by stealing the point
 * farthest from its current center. The result is deterministic in
 * (points, q, seed) and always a valid Partition.
 */
inline Partition kmeans_partition(std::span<const Point2> points, int q, std::uint64_t seed,
                                  int max_iters = 100) {
    const auto n = points.size();
    if (q < 1)
        throw ValidationError("k-means requires at least one cluster");
    if (static_cast<std::size_t>(q) > n)
        throw ValidationError("k-means cluster count " + std::to_string(q) + " exceeds point count " +
                              std::to_string(n));

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> picks;
    std::vector<bool> used(n, false);
    while (picks.size() < static_cast<std::size_t>(q)) {
        std::size_t c = detail::uniform_index(rng, n);
        if (!used[c]) {
            used[c] = true;
            picks.push_back(c);
        }
    }
    std::vector<Point2> centers;
    centers.reserve(static_cast<std::size_t>(q));
    for (auto c : picks)
        centers.push_back(points[c]);

    std::vector<int> assign(n, 0);
    auto nearest = [&](const Point2& p) {
        int best = 0;
        double best_d = detail::squared_distance(p, centers[0]);
        for (int c = 1; c < q; ++c) {
            double d = detail::squared_distance(p, centers[static_cast<std::size_t>(c)]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        return best;
    };

    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        std::vector<int> counts(static_cast<std::size_t>(q), 0);
        for (std::size_t i = 0; i < n; ++i) {
            int c = nearest(points[i]);
            if (c != assign[i]) {
                assign[i] = c;
                changed = true;
            }
            ++counts[static_cast<std::size_t>(c)];
        }
        // Empty-cluster repair: move the point farthest from its center,
        // taken from a donor cluster that keeps at least one point.
        for (int c = 0; c < q; ++c) {
            while (counts[static_cast<std::size_t>(c)] == 0) {
                double worst = -1.0;
                std::size_t worst_i = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (counts[static_cast<std::size_t>(assign[i])] <= 1)
                        continue;
                    double d = detail::squared_distance(points[i], centers[static_cast<std::size_t>(assign[i])]);
                    if (d > worst) {
                        worst = d;
                        worst_i = i;
                    }
                }
                --counts[static_cast<std::size_t>(assign[worst_i])];
                assign[worst_i] = c;
                ++counts[static_cast<std::size_t>(c)];
                changed = true;
            }
        }
        std::vector<Point2> sums(static_cast<std::size_t>(q));
        for (std::size_t i = 0; i < n; ++i) {
            sums[static_cast<std::size_t>(assign[i])].x += points[i].x;
            sums[static_cast<std::size_t>(assign[i])].y += points[i].y;
        }
        for (int c = 0; c < q; ++c) {
            centers[static_cast<std::size_t>(c)].x = sums[static_cast<std::size_t>(c)].x /
                                                     counts[static_cast<std::size_t>(c)];
            centers[static_cast<std::size_t>(c)].y = sums[static_cast<std::size_t>(c)].y /
                                                     counts[static_cast<std::size_t>(c)];
        }
        if (!changed)
            break;
    }
    return Partition(q, std::move(assign));
}

} // namespace distvi
