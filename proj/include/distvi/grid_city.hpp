#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "distvi/road_network.hpp"

namespace distvi {

/// Parameters of the synthetic city generator. Defaults produce the bundled
/// ~300-node network used by the experiments (data/grid_city.net).
struct GridCityParams {
    int rows = 17;
    int cols = 18;
    double spacing = 100.0;     // meters between neighboring junctions
    double jitter = 0.25;       // coordinate noise, fraction of spacing
    double removal_prob = 0.12; // chance to drop a directed street segment
    std::uint64_t seed = 7;
};

/**
 * Generates a jittered street grid with mixed speed limits and a seeded
 * subset of one-way gaps. Removals that would disconnect some junction from
 * the access node are rolled back, so the result is always a valid network.
 * The access node sits at the middle of the right boundary, standing in for
 * a highway on-ramp. Deterministic in the parameter set.
 */
inline RoadNetwork make_grid_city(const GridCityParams& params = {}) {
    if (params.rows < 2 || params.cols < 2)
        throw ValidationError("grid city needs at least a 2x2 grid");
    std::mt19937_64 rng(params.seed);
    RoadNetwork net;
    const auto node_id = [&](int r, int c) { return r * params.cols + c; };
    for (int r = 0; r < params.rows; ++r)
        for (int c = 0; c < params.cols; ++c) {
            const double jx = (detail::uniform01(rng) * 2.0 - 1.0) * params.jitter * params.spacing;
            const double jy = (detail::uniform01(rng) * 2.0 - 1.0) * params.jitter * params.spacing;
            net.nodes.push_back(RoadNode{node_id(r, c), c * params.spacing + jx, r * params.spacing + jy});
        }
    net.access_node = node_id(params.rows / 2, params.cols - 1);

    const auto coord = [&](int id) { return net.nodes[static_cast<std::size_t>(id)]; };
    const auto add_street = [&](int a, int b) {
        const double u = detail::uniform01(rng);
        const double limit = u < 0.3 ? 30.0 / 3.6 : (u < 0.85 ? 50.0 / 3.6 : 80.0 / 3.6);
        const double dx = coord(a).x - coord(b).x;
        const double dy = coord(a).y - coord(b).y;
        const double length = std::sqrt(dx * dx + dy * dy);
        net.edges.push_back(RoadEdge{a, b, length, limit});
        net.edges.push_back(RoadEdge{b, a, length, limit});
    };
    for (int r = 0; r < params.rows; ++r)
        for (int c = 0; c < params.cols; ++c) {
            if (c + 1 < params.cols)
                add_street(node_id(r, c), node_id(r, c + 1));
            if (r + 1 < params.rows)
                add_street(node_id(r, c), node_id(r + 1, c));
        }

    // Thin the grid, keeping every junction connected to the access node.
    std::vector<bool> removed(net.edges.size(), false);
    const auto still_connected = [&] {
        RoadNetwork probe;
        probe.nodes = net.nodes;
        probe.access_node = net.access_node;
        for (std::size_t e = 0; e < net.edges.size(); ++e)
            if (!removed[e])
                probe.edges.push_back(net.edges[e]);
        return detail::unreachable_nodes(probe).empty();
    };
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        if (detail::uniform01(rng) >= params.removal_prob)
            continue;
        removed[e] = true;
        if (!still_connected())
            removed[e] = false;
    }
    std::vector<RoadEdge> kept;
    kept.reserve(net.edges.size());
    for (std::size_t e = 0; e < net.edges.size(); ++e)
        if (!removed[e])
            kept.push_back(net.edges[e]);
    net.edges = std::move(kept);
    validate_and_prune(net);
    return net;
}

} // namespace distvi
