#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "distvi/agent.hpp"
#include "support/random_instances.hpp"

using namespace distvi;

namespace {

DiscountedMdp four_state_chain() {
    MdpBuilder b(4, 0.9);
    b.add(0, 0, 1, 1.0, 1.0);
    b.add(1, 0, 2, 1.0, 1.0);
    b.add(2, 0, 3, 1.0, 1.0);
    b.add(3, 0, 3, 1.0, 0.0);
    return std::move(b).build();
}

} // namespace

TEST(AgentUpdate, SingleAgentConvergesToValueIterationSolution) {
    auto mdp = testsupport::random_mdp(910, 10, 3, 0.9);
    Partition p(1, std::vector<int>(10, 0));
    auto d = testsupport::uniform_disaggregation(p);
    LocalMdp local(mdp, p, 0);
    auto state = AgentState::zeros(0, 10, 1);
    for (int sweep = 0; sweep < 500; ++sweep) {
        auto out = agent_update(local, p, d, state);
        state.values = std::move(out.values);
        state.aggregates[0] = out.own_aggregate;
        if (out.max_abs_change < 1e-13)
            break;
    }
    auto oracle = value_iteration(mdp, 1e-12, 100000);
    ASSERT_TRUE(oracle.converged);
    for (int s = 0; s < 10; ++s)
        EXPECT_NEAR(state.values[static_cast<std::size_t>(s)], oracle.values[static_cast<std::size_t>(s)], 1e-8);
}

TEST(AgentUpdate, ClosedPartitionIgnoresForeignAggregates) {
    // partition 0 = {0,1} is closed: every transition stays inside it
    MdpBuilder b(4, 0.9);
    b.add(0, 0, 1, 1.0, 2.0);
    b.add(1, 0, 0, 1.0, 1.0);
    b.add(2, 0, 3, 1.0, 1.0);
    b.add(3, 0, 0, 1.0, 1.0);
    auto mdp = std::move(b).build();
    Partition p(2, {0, 0, 1, 1});
    auto d = testsupport::uniform_disaggregation(p);
    LocalMdp local(mdp, p, 0);

    auto state = AgentState::zeros(0, 2, 2);
    state.values = {3.0, 4.0};
    state.aggregates = {1.0, 100.0};
    auto base = agent_update(local, p, d, state);
    state.aggregates[1] = -5000.0;
    auto perturbed = agent_update(local, p, d, state);
    for (std::size_t i = 0; i < base.values.size(); ++i)
        EXPECT_EQ(base.values[i], perturbed.values[i]);
    EXPECT_EQ(base.own_aggregate, perturbed.own_aggregate);
}

TEST(AgentUpdate, TwoAgentChainMatchesHandComputation) {
    auto mdp = four_state_chain();
    Partition p(2, {0, 0, 1, 1});
    auto d = testsupport::uniform_disaggregation(p);

    const double j3 = 0.0;
    const double j2 = 1.0 + 0.9 * j3;
    const double j1 = 1.0 + 0.9 * j2;
    const double j0 = 1.0 + 0.9 * j1;

    // agent 0 starts at the oracle restriction with exact aggregates
    auto s0 = AgentState::zeros(0, 2, 2);
    s0.values = {j0, j1};
    s0.aggregates = {0.5 * (j0 + j1), 0.5 * (j2 + j3)};
    LocalMdp local0(mdp, p, 0);
    auto out0 = agent_update(local0, p, d, s0);
    // state 0 reads the pre-sweep value of state 1; state 1 reads the
    // foreign aggregate instead of J*(2)
    EXPECT_NEAR(out0.values[0], 1.0 + 0.9 * j1, 1e-12);
    EXPECT_NEAR(out0.values[1], 1.0 + 0.9 * 0.5 * (j2 + j3), 1e-12);
    EXPECT_NEAR(out0.own_aggregate, 0.5 * (out0.values[0] + out0.values[1]), 1e-12);

    auto s1 = AgentState::zeros(1, 2, 2);
    s1.values = {j2, j3};
    s1.aggregates = s0.aggregates;
    LocalMdp local1(mdp, p, 1);
    auto out1 = agent_update(local1, p, d, s1);
    EXPECT_NEAR(out1.values[0], j2, 1e-12);
    EXPECT_NEAR(out1.values[1], j3, 1e-12);
    EXPECT_NEAR(out1.own_aggregate, 0.5 * (j2 + j3), 1e-12);
}

TEST(AgentUpdate, GaussSeidelReadsValuesUpdatedEarlierInSweep) {
    // 1 -> 0 within one partition: after state 0 updates, state 1 must see
    // the fresh value, not the pre-sweep one
    MdpBuilder b(2, 0.5);
    b.add(0, 0, 0, 1.0, 1.0);
    b.add(1, 0, 0, 1.0, 1.0);
    auto mdp = std::move(b).build();
    Partition p(1, {0, 0});
    auto d = testsupport::uniform_disaggregation(p);
    LocalMdp local(mdp, p, 0);
    auto state = AgentState::zeros(0, 2, 1);
    state.values = {2.0, 0.0};
    auto out = agent_update(local, p, d, state);
    const double v0 = 1.0 + 0.5 * 2.0; // self-loop reads pre-update value of 0
    EXPECT_NEAR(out.values[0], v0, 1e-12);
    EXPECT_NEAR(out.values[1], 1.0 + 0.5 * v0, 1e-12); // reads updated state 0
}

TEST(AgentUpdate, DeterministicAcrossRuns) {
    auto mdp = testsupport::random_mdp(55, 12, 2, 0.9);
    auto p = testsupport::random_partition(56, 12, 3);
    auto d = testsupport::uniform_disaggregation(p);
    LocalMdp local(mdp, p, 1);
    auto state = AgentState::zeros(1, p.members(1).size(), 3);
    std::mt19937_64 rng(3);
    for (auto& v : state.values)
        v = testsupport::uniform01(rng) * 4.0;
    for (auto& r : state.aggregates)
        r = testsupport::uniform01(rng) * 4.0;
    auto a = agent_update(local, p, d, state);
    auto b2 = agent_update(local, p, d, state);
    for (std::size_t i = 0; i < a.values.size(); ++i)
        EXPECT_EQ(a.values[i], b2.values[i]);
    EXPECT_EQ(a.own_aggregate, b2.own_aggregate);
    EXPECT_EQ(a.max_abs_change, b2.max_abs_change);
}

TEST(AgentUpdate, UniformShiftMovesBackupsByAlphaTimesShift) {
    // single action per state keeps the minimizer fixed; every transition
    // crosses partitions, so each backup reads only uniformly shifted inputs
    MdpBuilder b(4, 0.9);
    b.add(0, 0, 2, 0.5, 1.0);
    b.add(0, 0, 3, 0.5, 2.0);
    b.add(1, 0, 2, 1.0, 0.5);
    b.add(2, 0, 0, 1.0, 1.5);
    b.add(3, 0, 1, 1.0, 2.5);
    auto mdp = std::move(b).build();
    Partition p(2, {0, 0, 1, 1});
    auto d = testsupport::uniform_disaggregation(p);
    const double shift = 3.75;
    for (int l = 0; l < 2; ++l) {
        LocalMdp local(mdp, p, l);
        auto state = AgentState::zeros(l, p.members(l).size(), 2);
        std::mt19937_64 rng(l + 1);
        for (auto& v : state.values)
            v = testsupport::uniform01(rng) * 6.0;
        for (auto& r : state.aggregates)
            r = testsupport::uniform01(rng) * 6.0;
        auto base = agent_update(local, p, d, state);

        auto shifted = state;
        for (auto& v : shifted.values)
            v += shift;
        for (auto& r : shifted.aggregates)
            r += shift;
        auto out = agent_update(local, p, d, shifted);
        for (std::size_t i = 0; i < base.values.size(); ++i)
            EXPECT_NEAR(out.values[i] - base.values[i], 0.9 * shift, 1e-12);
    }
}

TEST(AgentUpdate, OwnAggregateStaysFinite) {
    auto mdp = testsupport::random_mdp(88, 9, 2, 0.95);
    auto p = testsupport::random_partition(89, 9, 3);
    auto d = testsupport::uniform_disaggregation(p);
    for (int l = 0; l < 3; ++l) {
        LocalMdp local(mdp, p, l);
        auto state = AgentState::zeros(l, p.members(l).size(), 3);
        auto out = agent_update(local, p, d, state);
        EXPECT_TRUE(std::isfinite(out.own_aggregate));
        for (double v : out.values)
            EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(AgentUpdate, RejectsMismatchedState) {
    auto mdp = testsupport::random_mdp(90, 6, 2, 0.9);
    Partition p(2, {0, 0, 0, 1, 1, 1});
    auto d = testsupport::uniform_disaggregation(p);
    LocalMdp local(mdp, p, 0);
    auto state = AgentState::zeros(0, 2, 2); // wrong local size
    EXPECT_THROW(agent_update(local, p, d, state), ValidationError);
    auto state2 = AgentState::zeros(0, 3, 1); // wrong aggregate count
    EXPECT_THROW(agent_update(local, p, d, state2), ValidationError);
}
