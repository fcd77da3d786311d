#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "distvi/aggregation.hpp"
#include "distvi/error.hpp"
#include "distvi/mdp.hpp"
#include "distvi/road_network.hpp"
#include "distvi/schedule.hpp"
#include "distvi/simulator.hpp"

namespace distvi {

/// Shortest exact decimal form of a double; round-trips bit-exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline bool skippable(const std::string& line) {
    for (char c : line) {
        if (c == '#')
            return true;
        if (!std::isspace(static_cast<unsigned char>(c)))
            return false;
    }
    return true;
}

[[noreturn]] inline void parse_fail(const std::string& context, int line_no, const std::string& what) {
    throw ParseError(context + ":" + std::to_string(line_no) + ": " + what);
}

/// Extracts exactly the requested fields from one line, rejecting trailing junk.
template <typename... Ts>
void scan_line(const std::string& line, const std::string& context, int line_no, Ts&... fields) {
    std::istringstream in(line);
    auto take = [&](auto& f) {
        if (!(in >> f))
            parse_fail(context, line_no, "malformed record: '" + line + "'");
    };
    (take(fields), ...);
    std::string rest;
    if (in >> rest)
        parse_fail(context, line_no, "unexpected trailing token '" + rest + "'");
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError(path + ": cannot open file");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw ParseError(path + ": cannot open file for writing");
    return out;
}

} // namespace detail

// --- MDP files: header `n alpha`, then one `i u j p g` record per line. ---

inline DiscountedMdp read_mdp(std::istream& in, const std::string& context = "<mdp>") {
    std::string line;
    int line_no = 0;
    int n = -1;
    double alpha = 0.0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::skippable(line))
            continue;
        detail::scan_line(line, context, line_no, n, alpha);
        break;
    }
    if (n < 0)
        detail::parse_fail(context, line_no, "missing `n alpha` header");
    MdpBuilder builder(n, alpha);
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::skippable(line))
            continue;
        int i = 0, u = 0, j = 0;
        double p = 0.0, g = 0.0;
        detail::scan_line(line, context, line_no, i, u, j, p, g);
        try {
            builder.add(i, u, j, p, g);
        } catch (const ValidationError& err) {
            detail::parse_fail(context, line_no, err.what());
        }
    }
    return std::move(builder).build();
}

inline DiscountedMdp read_mdp_file(const std::string& path) {
    auto in = detail::open_input(path);
    return read_mdp(in, path);
}

inline void write_mdp(std::ostream& out, const DiscountedMdp& mdp) {
    out << mdp.num_states() << ' ' << format_double(mdp.alpha()) << '\n';
    for (int i = 0; i < mdp.num_states(); ++i)
        for (const auto& row : mdp.actions(i))
            for (const auto& t : row.transitions)
                out << i << ' ' << row.action << ' ' << t.to << ' ' << format_double(t.prob) << ' '
                    << format_double(t.cost) << '\n';
}

// --- Partition files: one `state partition` line per state. ---

inline Partition read_partition(std::istream& in, const std::string& context = "<partition>") {
    std::string line;
    int line_no = 0;
    std::vector<std::pair<int, int>> records;
    int max_state = -1, max_part = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::skippable(line))
            continue;
        int state = 0, part = 0;
        detail::scan_line(line, context, line_no, state, part);
        records.emplace_back(state, part);
        max_state = std::max(max_state, state);
        max_part = std::max(max_part, part);
    }
    if (records.empty())
        detail::parse_fail(context, line_no, "empty partition file");
    std::vector<int> member_of(static_cast<std::size_t>(max_state) + 1, -1);
    for (const auto& [state, part] : records) {
        if (state < 0 || member_of[static_cast<std::size_t>(state)] != -1)
            throw ParseError(context + ": state " + std::to_string(state) + " assigned twice or negative");
        member_of[static_cast<std::size_t>(state)] = part;
    }
    for (std::size_t s = 0; s < member_of.size(); ++s)
        if (member_of[s] == -1)
            throw ParseError(context + ": state " + std::to_string(s) + " missing from partition file");
    return Partition(max_part + 1, std::move(member_of));
}

inline void write_partition(std::ostream& out, const Partition& partition) {
    for (int s = 0; s < partition.num_states(); ++s)
        out << s << ' ' << partition.member_of(s) << '\n';
}

// --- Disaggregation files: one `partition state weight` line per entry. ---

inline Disaggregation read_disaggregation(std::istream& in, const Partition& partition,
                                          const std::string& context = "<disagg>") {
    std::string line;
    int line_no = 0;
    std::vector<std::vector<std::pair<int, double>>> entries(
        static_cast<std::size_t>(partition.num_partitions()));
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::skippable(line))
            continue;
        int part = 0, state = 0;
        double w = 0.0;
        detail::scan_line(line, context, line_no, part, state, w);
        if (part < 0 || part >= partition.num_partitions())
            detail::parse_fail(context, line_no, "partition index out of range");
        entries[static_cast<std::size_t>(part)].emplace_back(state, w);
    }
    return Disaggregation(partition, std::move(entries));
}

inline void write_disaggregation(std::ostream& out, const Disaggregation& disagg, const Partition& partition) {
    for (int l = 0; l < partition.num_partitions(); ++l)
        for (const auto& [state, w] : disagg.weights(l))
            out << l << ' ' << state << ' ' << format_double(w) << '\n';
}

// --- Value files: one `state value` line per state. ---

inline std::vector<std::pair<int, double>> read_values(std::istream& in, const std::string& context = "<values>") {
    std::string line;
    int line_no = 0;
    std::vector<std::pair<int, double>> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::skippable(line))
            continue;
        int state = 0;
        double v = 0.0;
        detail::scan_line(line, context, line_no, state, v);
        out.emplace_back(state, v);
    }
    return out;
}

inline void write_values(std::ostream& out, std::span<const double> values) {
    for (std::size_t s = 0; s < values.size(); ++s)
        out << s << ' ' << format_double(values[s]) << '\n';
}

inline void write_values(std::ostream& out, std::span<const int> states, std::span<const double> values) {
    for (std::size_t k = 0; k < states.size(); ++k)
        out << states[k] << ' ' << format_double(values[k]) << '\n';
}

// --- Network files: `N id x y`, `E from to length limit`, `A id` lines. ---

struct NetworkLoadResult {
    RoadNetwork network;
    std::vector<int> pruned_nodes;
};

inline NetworkLoadResult load_network(std::istream& in, const std::string& context = "<network>") {
    std::string line;
    int line_no = 0;
    RoadNetwork net;
    bool have_access = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::skippable(line))
            continue;
        std::istringstream fields(line);
        std::string tag;
        fields >> tag;
        std::string rest;
        std::getline(fields, rest);
        if (tag == "N") {
            RoadNode node;
            detail::scan_line(rest, context, line_no, node.id, node.x, node.y);
            net.nodes.push_back(node);
        } else if (tag == "E") {
            RoadEdge edge;
            detail::scan_line(rest, context, line_no, edge.from, edge.to, edge.length, edge.speed_limit);
            if (!(edge.length > 0.0))
                detail::parse_fail(context, line_no, "edge length must be positive");
            if (!(edge.speed_limit > 0.0))
                detail::parse_fail(context, line_no, "speed limit must be positive");
            net.edges.push_back(edge);
        } else if (tag == "A") {
            if (have_access)
                detail::parse_fail(context, line_no, "duplicate access line");
            detail::scan_line(rest, context, line_no, net.access_node);
            have_access = true;
        } else {
            detail::parse_fail(context, line_no, "unknown record tag '" + tag + "'");
        }
    }
    if (!have_access)
        throw ParseError(context + ": missing `A <id>` access line");
    NetworkLoadResult result;
    result.network = std::move(net);
    try {
        result.pruned_nodes = validate_and_prune(result.network);
    } catch (const ValidationError& err) {
        throw ParseError(context + ": " + err.what());
    }
    return result;
}

inline NetworkLoadResult load_network_file(const std::string& path) {
    auto in = detail::open_input(path);
    return load_network(in, path);
}

inline void write_network(std::ostream& out, const RoadNetwork& net) {
    for (const auto& n : net.nodes)
        out << "N " << n.id << ' ' << format_double(n.x) << ' ' << format_double(n.y) << '\n';
    for (const auto& e : net.edges)
        out << "E " << e.from << ' ' << e.to << ' ' << format_double(e.length) << ' '
            << format_double(e.speed_limit) << '\n';
    out << "A " << net.access_node << '\n';
}

// --- Speed samples: `from to speed` lines, in network edge order. ---

inline void write_speeds(std::ostream& out, const RoadNetwork& net, const SpeedSample& sample) {
    for (std::size_t e = 0; e < net.edges.size(); ++e)
        out << net.edges[e].from << ' ' << net.edges[e].to << ' ' << format_double(sample.speeds[e]) << '\n';
}

inline SpeedSample read_speeds(std::istream& in, const RoadNetwork& net, const std::string& context = "<speeds>") {
    std::string line;
    int line_no = 0;
    SpeedSample sample;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::skippable(line))
            continue;
        int from = 0, to = 0;
        double speed = 0.0;
        detail::scan_line(line, context, line_no, from, to, speed);
        const std::size_t e = sample.speeds.size();
        if (e >= net.edges.size())
            detail::parse_fail(context, line_no, "more speed records than network edges");
        if (net.edges[e].from != from || net.edges[e].to != to)
            detail::parse_fail(context, line_no, "speed record does not match edge order");
        sample.speeds.push_back(speed);
    }
    if (sample.speeds.size() != net.edges.size())
        throw ParseError(context + ": speed records missing for some edges");
    return sample;
}

// --- Run configuration files: `key value` lines. ---

struct ExperimentConfig {
    double alpha = 0.9;
    double c_threshold = 0.0;
    double tolerance = 1e-8;
    int max_iters = 100000;
    std::string schedule = "complete"; // complete | round-robin | custom:<file>
    int window_b = 0;
    std::uint64_t seed = 0;
    bool record_history = false;
};

inline ExperimentConfig read_experiment_config(std::istream& in, const std::string& context = "<config>") {
    ExperimentConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::skippable(line))
            continue;
        std::istringstream fields(line);
        std::string key;
        fields >> key;
        std::string value;
        std::getline(fields, value);
        const std::string rest = value;
        if (key == "alpha")
            detail::scan_line(rest, context, line_no, cfg.alpha);
        else if (key == "c_threshold")
            detail::scan_line(rest, context, line_no, cfg.c_threshold);
        else if (key == "tolerance")
            detail::scan_line(rest, context, line_no, cfg.tolerance);
        else if (key == "max_iters")
            detail::scan_line(rest, context, line_no, cfg.max_iters);
        else if (key == "schedule")
            detail::scan_line(rest, context, line_no, cfg.schedule);
        else if (key == "window_b")
            detail::scan_line(rest, context, line_no, cfg.window_b);
        else if (key == "seed")
            detail::scan_line(rest, context, line_no, cfg.seed);
        else if (key == "record_history") {
            int flag = 0;
            detail::scan_line(rest, context, line_no, flag);
            cfg.record_history = flag != 0;
        } else {
            detail::parse_fail(context, line_no, "unknown configuration key '" + key + "'");
        }
    }
    return cfg;
}

inline void write_experiment_config(std::ostream& out, const ExperimentConfig& cfg) {
    out << "alpha " << format_double(cfg.alpha) << '\n'
        << "c_threshold " << format_double(cfg.c_threshold) << '\n'
        << "tolerance " << format_double(cfg.tolerance) << '\n'
        << "max_iters " << cfg.max_iters << '\n'
        << "schedule " << cfg.schedule << '\n'
        << "window_b " << cfg.window_b << '\n'
        << "seed " << cfg.seed << '\n'
        << "record_history " << (cfg.record_history ? 1 : 0) << '\n';
}

// --- Custom schedule files: header `period window`, then `k from to` lines. ---

inline CommSchedule read_custom_schedule(std::istream& in, int q, const std::string& context = "<schedule>") {
    std::string line;
    int line_no = 0;
    int period = -1, window = -1;
    std::vector<std::vector<std::pair<int, int>>> edge_sets;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::skippable(line))
            continue;
        if (period < 0) {
            detail::scan_line(line, context, line_no, period, window);
            if (period <= 0)
                detail::parse_fail(context, line_no, "schedule period must be positive");
            edge_sets.assign(static_cast<std::size_t>(period), {});
            continue;
        }
        int k = 0, from = 0, to = 0;
        detail::scan_line(line, context, line_no, k, from, to);
        if (k < 0 || k >= period)
            detail::parse_fail(context, line_no, "iteration index out of schedule period");
        edge_sets[static_cast<std::size_t>(k)].emplace_back(from, to);
    }
    if (period < 0)
        throw ParseError(context + ": missing `period window` header");
    return make_schedule_custom(q, std::move(edge_sets), window);
}

// --- History tables: one `k agent m r_value sent_flag` row per entry. ---

inline void write_history(std::ostream& out, const RunResult& result) {
    if (!result.history)
        throw ValidationError("run result carries no recorded history");
    const auto& h = *result.history;
    out << "# k agent m r_value sent_flag\n";
    for (int k = 0; k < result.iterations; ++k) {
        const auto& r = h.aggregates[static_cast<std::size_t>(k) + 1];
        const auto& sent = h.sent[static_cast<std::size_t>(k)];
        for (std::size_t l = 0; l < r.size(); ++l)
            for (std::size_t m = 0; m < r[l].size(); ++m)
                out << k << ' ' << l << ' ' << m << ' ' << format_double(r[l][m]) << ' '
                    << (sent[l][m] ? 1 : 0) << '\n';
    }
}

// --- Metrics summaries: one `metric value` row each. ---

inline void write_metrics_summary(std::ostream& out,
                                  const std::vector<std::pair<std::string, std::string>>& rows) {
    for (const auto& [metric, value] : rows)
        out << metric << ' ' << value << '\n';
}

} // namespace distvi
