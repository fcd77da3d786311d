#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "distvi/aggregation.hpp"
#include "distvi/error.hpp"
#include "distvi/mdp.hpp"

namespace distvi {

struct RoadNode {
    int id = 0;
    double x = 0.0;
    double y = 0.0;
};

/// Directed road segment; length in meters, speed limit in meters/second.
struct RoadEdge {
    int from = 0;
    int to = 0;
    double length = 0.0;
    double speed_limit = 0.0;
};

/**
 * Planar road graph with a common access (destination) node. States of the
 * routing MDP are node positions in `nodes`, kept sorted by id; use
 * node_index/node_id to translate. Call validate_and_prune after assembling
 * a network by hand; load_network and the generators return pruned graphs.
 */
struct RoadNetwork {
    std::vector<RoadNode> nodes;
    std::vector<RoadEdge> edges;
    int access_node = -1;

    int node_index(int id) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                                   [](const RoadNode& n, int v) { return n.id < v; });
        if (it == nodes.end() || it->id != id)
            throw ValidationError("unknown node id " + std::to_string(id));
        return static_cast<int>(it - nodes.begin());
    }
    int node_id(int index) const { return nodes[static_cast<std::size_t>(index)].id; }
    int num_nodes() const { return static_cast<int>(nodes.size()); }

    std::vector<Point2> coordinates() const {
        std::vector<Point2> pts;
        pts.reserve(nodes.size());
        for (const auto& n : nodes)
            pts.push_back(Point2{n.x, n.y});
        return pts;
    }
};

namespace detail {

/// Node ids (sorted) that cannot reach the access node along directed edges.
inline std::vector<int> unreachable_nodes(const RoadNetwork& net) {
    std::unordered_map<int, std::vector<int>> reverse_adj;
    for (const auto& e : net.edges)
        reverse_adj[e.to].push_back(e.from);
    std::unordered_map<int, bool> reached;
    for (const auto& n : net.nodes)
        reached[n.id] = false;
    std::deque<int> queue{net.access_node};
    reached[net.access_node] = true;
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        auto it = reverse_adj.find(v);
        if (it == reverse_adj.end())
            continue;
        for (int u : it->second)
            if (!reached[u]) {
                reached[u] = true;
                queue.push_back(u);
            }
    }
    std::vector<int> out;
    for (const auto& n : net.nodes)
        if (!reached[n.id])
            out.push_back(n.id);
    return out;
}

} // namespace detail

/**
 * Validates structure (sorted unique node ids, existing endpoints, positive
 * lengths and limits, access node present) and prunes nodes that cannot
 * reach the access node, together with their edges. Returns the pruned node
 * ids so callers can warn.
 */
inline std::vector<int> validate_and_prune(RoadNetwork& net) {
    if (net.nodes.empty())
        throw ValidationError("road network has no nodes");
    std::sort(net.nodes.begin(), net.nodes.end(),
              [](const RoadNode& a, const RoadNode& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < net.nodes.size(); ++i)
        if (net.nodes[i].id == net.nodes[i - 1].id)
            throw ValidationError("duplicate node id " + std::to_string(net.nodes[i].id));
    std::unordered_map<int, bool> known;
    for (const auto& n : net.nodes)
        known[n.id] = true;
    if (net.access_node < 0 || !known.count(net.access_node))
        throw ValidationError("access node " + std::to_string(net.access_node) + " is not a network node");
    for (const auto& e : net.edges) {
        if (!known.count(e.from) || !known.count(e.to))
            throw ValidationError("edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                                  " references unknown node");
        if (!(e.length > 0.0))
            throw ValidationError("edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                                  " has nonpositive length");
        if (!(e.speed_limit > 0.0))
            throw ValidationError("edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                                  " has nonpositive speed limit");
    }
    auto pruned = detail::unreachable_nodes(net);
    if (!pruned.empty()) {
        std::unordered_map<int, bool> gone;
        for (int id : pruned)
            gone[id] = true;
        std::erase_if(net.nodes, [&](const RoadNode& n) { return gone.count(n.id) > 0; });
        std::erase_if(net.edges, [&](const RoadEdge& e) { return gone.count(e.from) || gone.count(e.to); });
        if (net.nodes.empty())
            throw ValidationError("pruning unreachable nodes emptied the network");
    }
    return pruned;
}

/// Sampled average speed per edge, parallel to RoadNetwork::edges.
struct SpeedSample {
    std::vector<double> speeds;
};

/// Draws each edge's average speed uniformly from [0.25, 1.0] times its
/// speed limit; deterministic in the seed.
inline SpeedSample sample_speeds(const RoadNetwork& net, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SpeedSample sample;
    sample.speeds.reserve(net.edges.size());
    for (const auto& e : net.edges)
        sample.speeds.push_back(e.speed_limit * (0.25 + 0.75 * detail::uniform01(rng)));
    return sample;
}

/**
 * Converts the road graph into a routing MDP toward the access node. Each
 * node's outgoing edges are enumerated as actions with deterministic
 * transitions; the stage cost is the expected travel time length/speed in
 * seconds. The access node becomes absorbing through a single zero-cost
 * self-loop, so the optimal values are discounted travel times to it.
 */
inline DiscountedMdp build_routing_mdp(const RoadNetwork& net, const SpeedSample& speeds, double alpha) {
    if (speeds.speeds.size() != net.edges.size())
        throw ValidationError("speed sample does not cover every edge");
    if (!detail::unreachable_nodes(net).empty())
        throw ValidationError("network has nodes that cannot reach the access node; prune first");
    const int n = net.num_nodes();
    const int access = net.node_index(net.access_node);
    MdpBuilder builder(n, alpha);
    std::vector<int> next_action(static_cast<std::size_t>(n), 0);
    builder.add(access, 0, access, 1.0, 0.0);
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        const auto& edge = net.edges[e];
        const int from = net.node_index(edge.from);
        if (from == access)
            continue; // destination reached; outgoing roads become irrelevant
        const int to = net.node_index(edge.to);
        const double speed = speeds.speeds[e];
        if (!(speed > 0.0))
            throw ValidationError("sampled speed must be positive");
        builder.add(from, next_action[static_cast<std::size_t>(from)]++, to, 1.0, edge.length / speed);
    }
    return std::move(builder).build();
}

} // namespace distvi
