#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "forge/codegen/codegen.hpp"
#include "forge/error.hpp"
#include "forge/model_json.hpp"
#include "oracles/random_model.hpp"

using namespace forge;
using namespace forge::codegen;
using forge::testing::scratch_dir;

namespace {

InstanceModel mini_enhanced(const std::string& f1 = "n1", const std::string& f2 = "n1") {
    return merge_allocation(forge::testing::alloc_mini(), AllocationMatrix{{{{"f1", 0}, f1}, {{"f2", 0}, f2}}});
}

// producer `src` (r replicas, given mechanism) -> consumer `dst`, one replica per node
InstanceModel redundant_model(int r, SafetyMechanism mech) {
    InstanceModel m;
    FunctionSpec src{"src", 1, 16, 1, Asil::QM, r, mech, {{"out0", "Speed"}}, {}};
    FunctionSpec dst{"dst", 1, 16, 1, Asil::QM, 1, SafetyMechanism::none, {}, {{"in0", "Speed"}}};
    m.functions = {dst, src};
    for (int i = 0; i <= r; ++i)
        m.hardware.push_back({"n" + std::to_string(i), 8, 1024, 1, 1, Asil::D});
    for (int i = 1; i <= r; ++i)
        m.links.push_back({"l" + std::to_string(i), "n0", "n" + std::to_string(i), 1e6, 1.0 * i});
    m.edges.push_back({"e1", "src", "out0", "dst", "in0", 100, 64, std::nullopt});
    AllocationMatrix a;
    a.placements.push_back({{"dst", 0}, "n0"});
    for (int i = 0; i < r; ++i)
        a.placements.push_back({{"src", i}, "n" + std::to_string(i + 1)});
    return merge_allocation(m, a);
}

const ServiceEntry* service(const DeploymentPlan& p, const std::string& name) {
    for (const auto& n : p.nodes)
        for (const auto& s : n.services)
            if (s.name == name)
                return &s;
    return nullptr;
}

std::vector<Criterion> criteria(const std::string& doc) { return load_criteria(doc); }

} // namespace

TEST(Plan, AllocMiniColocated) {
    auto plan = plan_deployment(mini_enhanced());
    ASSERT_EQ(plan.nodes.size(), 1u);
    EXPECT_EQ(plan.nodes[0].node, "n1");
    EXPECT_EQ(plan.nodes[0].address, "10.0.0.1");
    ASSERT_EQ(plan.nodes[0].services.size(), 2u);
    EXPECT_EQ(plan.nodes[0].services[0].name, "f1#0");
    EXPECT_EQ(plan.nodes[0].services[0].port, 5000);
    EXPECT_EQ(plan.nodes[0].services[1].name, "f2#0");
    EXPECT_EQ(plan.nodes[0].services[1].port, 5001);
    ASSERT_EQ(plan.flows.size(), 1u);
    EXPECT_EQ(plan.flows[0].topics, std::vector<std::string>{"f1/out0"});
    EXPECT_EQ(*plan.nodes[0].services[0].env_value("PUBLISH_out0"), "f1/out0");
    EXPECT_EQ(*plan.nodes[0].services[1].env_value("SUBSCRIBE_in0"), "f1/out0");
    EXPECT_EQ(*plan.nodes[0].services[1].env_value("PEERS_in0"), "10.0.0.1:5000");
    EXPECT_EQ(*plan.nodes[0].services[1].env_value("REPLICA"), "0");
    EXPECT_EQ(plan.nodes[0].services[1].restart, "always");
}

TEST(Plan, SplitPlacementKeepsGlobalAddressIndex) {
    auto plan = plan_deployment(mini_enhanced("n1", "n2"));
    ASSERT_EQ(plan.nodes.size(), 2u);
    EXPECT_EQ(plan.nodes[1].address, "10.0.0.2");
    EXPECT_EQ(plan.nodes[1].services[0].port, 5000);
    EXPECT_EQ(*plan.nodes[1].services[0].env_value("PEERS_in0"), "10.0.0.1:5000");
    auto p2 = plan_deployment(mini_enhanced("n2", "n2"));
    ASSERT_EQ(p2.nodes.size(), 1u);
    EXPECT_EQ(p2.nodes[0].address, "10.0.0.2");
}

TEST(Plan, VotingAddsVoterPerConsumer) {
    auto plan = plan_deployment(redundant_model(2, SafetyMechanism::voting));
    ASSERT_NE(service(plan, "src#0"), nullptr);
    ASSERT_NE(service(plan, "src#1"), nullptr);
    const auto* v = service(plan, voter_name("src", "out0", "dst#0"));
    ASSERT_NE(v, nullptr);
    EXPECT_TRUE(v->voter);
    EXPECT_EQ(*v->env_value("SUBSCRIBE_replicas"), "src/out0#0,src/out0#1");
    EXPECT_EQ(*v->env_value("VOTE_QUORUM"), "2");
    EXPECT_EQ(plan.node_of_service(v->name)->node, "n0");
    EXPECT_EQ(*service(plan, "dst#0")->env_value("SUBSCRIBE_in0"), voted_topic("src", "out0", "dst#0"));
    int voters = 0;
    for (const auto& n : plan.nodes)
        for (const auto& s : n.services)
            voters += s.voter;
    EXPECT_EQ(voters, 1);
}

TEST(Plan, HotStandbyNeedsNoVoter) {
    auto plan = plan_deployment(redundant_model(2, SafetyMechanism::hot_standby));
    for (const auto& n : plan.nodes)
        for (const auto& s : n.services)
            EXPECT_FALSE(s.voter);
    EXPECT_EQ(*service(plan, "dst#0")->env_value("SUBSCRIBE_in0"), "src/out0#0,src/out0#1");
    EXPECT_EQ(*service(plan, "dst#0")->env_value("PEERS_in0"), "10.0.0.2:5000,10.0.0.3:5000");
}

TEST(Plan, QuorumRule) {
    EXPECT_EQ(voting_quorum(1), 1);
    EXPECT_EQ(voting_quorum(2), 2);
    EXPECT_EQ(voting_quorum(3), 2);
    EXPECT_EQ(voting_quorum(4), 3);
    EXPECT_EQ(voting_quorum(5), 3);
}

TEST(Plan, Preconditions) {
    EXPECT_THROW(plan_deployment(forge::testing::alloc_mini()), MissingAllocationError);
    RuntimeEnvSpec bad;
    bad.base_port = 80;
    EXPECT_THROW(plan_deployment(mini_enhanced(), bad), PreconditionError);
    bad.base_port = 60001;
    EXPECT_THROW(plan_deployment(mini_enhanced(), bad), PreconditionError);
    // colocated replicas break placement fidelity
    auto m = redundant_model(2, SafetyMechanism::hot_standby);
    for (auto& p : *m.allocation)
        p.node = "n0";
    EXPECT_THROW(plan_deployment(m), ConsistencyError);
}

TEST(Plan, RuntimeEnvParameters) {
    RuntimeEnvSpec rt;
    rt.base_port = 7000;
    rt.subnet_prefix = "192.168.4.";
    rt.middleware = Middleware::queue;
    rt.virtualization = Virtualization::process;
    auto plan = plan_deployment(mini_enhanced(), rt);
    EXPECT_EQ(plan.nodes[0].address, "192.168.4.1");
    EXPECT_EQ(plan.nodes[0].services[1].port, 7001);
    EXPECT_EQ(*plan.nodes[0].services[0].env_value("MIDDLEWARE"), "queue");
    EXPECT_EQ(plan.nodes[0].services[0].command, "bin/f1");
}

TEST(Plan, LintCatchesTampering) {
    auto m = mini_enhanced();
    auto plan = plan_deployment(m);
    EXPECT_TRUE(lint_plan(plan, m).empty());
    auto p = plan;
    p.nodes[0].services[1].port = 5000;
    EXPECT_FALSE(lint_plan(p, m).empty());
    p = plan;
    for (auto& [k, v] : p.nodes[0].services[1].env)
        if (k == "SUBSCRIBE_in0")
            v = "ghost/out0";
    EXPECT_FALSE(lint_plan(p, m).empty());
    p = plan;
    for (auto& [k, v] : p.nodes[0].services[1].env)
        if (k == "PEERS_in0")
            v = "10.0.0.9:5000";
    EXPECT_FALSE(lint_plan(p, m).empty());
    p = plan;
    p.nodes[0].node = "n2";
    EXPECT_FALSE(lint_plan(p, m).empty());
}

// Placement fidelity, port and topic uniqueness and determinism over random
// models whose replicas sit on distinct nodes.
TEST(PlanProperty, RandomModels) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        auto m = forge::testing::random_alloc_model(rng);
        AllocationMatrix a;
        for (const auto& f : m.functions) {
            std::vector<std::size_t> order(m.hardware.size());
            for (std::size_t i = 0; i < order.size(); ++i)
                order[i] = i;
            std::shuffle(order.begin(), order.end(), rng);
            for (int k = 0; k < f.redundancy; ++k)
                a.placements.push_back({{f.id, k}, m.hardware[order[k]].id});
        }
        m = merge_allocation(m, a);
        auto plan = plan_deployment(m);
        EXPECT_EQ(render_deploy_yaml(plan.nodes.front()), render_deploy_yaml(plan_deployment(m).nodes.front()));

        std::map<std::string, std::string> placed;
        for (const auto& p : *m.allocation)
            placed[p.instance.str()] = p.node;
        std::set<std::string> seen_services, published, addresses;
        for (const auto& n : plan.nodes) {
            EXPECT_TRUE(addresses.insert(n.address).second);
            std::set<int> ports;
            for (const auto& s : n.services) {
                EXPECT_TRUE(ports.insert(s.port).second);
                EXPECT_TRUE(seen_services.insert(s.name).second);
                EXPECT_EQ(placed.at(s.instance), n.node) << s.name;
                for (const auto& [k, v] : s.env)
                    if (k.rfind("PUBLISH_", 0) == 0)
                        EXPECT_TRUE(published.insert(v).second) << v;
            }
        }
        for (const auto& inst : expand_instances(m))
            EXPECT_TRUE(seen_services.count(inst.str())) << inst.str();
        for (const auto& ft : plan.flows)
            for (const auto& t : ft.topics)
                EXPECT_TRUE(published.count(t)) << t;
    }
}

TEST(Adapters, PortsMapToTopics) {
    auto m = forge::testing::demo_brake();
    m = merge_allocation(m, AllocationMatrix{{{{"brake_ctrl", 0}, "n1"}, {{"brake_ctrl", 1}, "n2"}, {{"speed_sense", 0}, "n2"}}});
    auto plan = plan_deployment(m);
    auto adapters = emit_adapters(plan, m);
    ASSERT_EQ(adapters.size(), 3u);
    const auto& ss = adapters[2];
    EXPECT_EQ(ss.instance, "speed_sense#0");
    ASSERT_EQ(ss.bindings.size(), 1u);
    EXPECT_EQ(ss.bindings[0].direction, Direction::out);
    EXPECT_EQ(ss.bindings[0].topics, std::vector<std::string>{"speed_sense/out0"});
    EXPECT_EQ(adapters[0].bindings[0].direction, Direction::in);
    EXPECT_EQ(adapters[0].bindings[0].topics, std::vector<std::string>{"speed_sense/out0"});
    EXPECT_EQ(render_adapter(ss), render_adapter(emit_adapters(plan, m)[2]));
}

TEST(Adapters, PortlessInstanceHasNoBindings) {
    auto m = mini_enhanced();
    m.functions.push_back({"lonely", 1, 1, 0, Asil::QM, 1, SafetyMechanism::none, {}, {}});
    m.allocation->push_back({{"lonely", 0}, "n2"});
    canonicalize(m);
    auto plan = plan_deployment(m);
    auto adapters = emit_adapters(plan, m);
    ASSERT_EQ(adapters.size(), 3u);
    EXPECT_EQ(adapters[2].instance, "lonely#0");
    EXPECT_TRUE(adapters[2].bindings.empty());
}

TEST(Tests, FunctionalAndNonfunctionalMapping) {
    auto m = forge::testing::demo_brake();
    m = merge_allocation(m, AllocationMatrix{{{{"brake_ctrl", 0}, "n1"}, {{"brake_ctrl", 1}, "n2"}, {{"speed_sense", 0}, "n2"}}});
    auto plan = plan_deployment(m);
    auto suite = emit_tests(criteria(R"({"criteria": [
        {"id": "c1", "flow": {"src": "speed_sense", "dst": "brake_ctrl"}, "min_delivery_ratio": 0.99},
        {"id": "c2", "flow": {"src": "speed_sense", "dst": "brake_ctrl"}, "min_delivery_ratio": 0.9,
         "faults": [{"at_ms": 5000, "kind": "node_crash", "target": "n1"}]},
        {"id": "c3", "flow": {"src": "speed_sense", "dst": "brake_ctrl"}, "max_p95_latency_ms": 3, "duration_ms": 2000}
    ]})"), plan);
    ASSERT_EQ(suite.size(), 3u);
    EXPECT_EQ(suite[0].kind, TestKind::functional);
    EXPECT_TRUE(suite[0].faults.empty());
    EXPECT_DOUBLE_EQ(*suite[0].min_delivery_ratio, 0.99);
    EXPECT_EQ(suite[1].kind, TestKind::nonfunctional);
    ASSERT_EQ(suite[1].faults.size(), 1u);
    EXPECT_EQ(suite[1].faults[0], (FaultSpec{5000, FaultKind::node_crash, "n1", 1.0}));
    EXPECT_EQ(suite[2].kind, TestKind::nonfunctional);
    EXPECT_FALSE(suite[2].min_delivery_ratio);
    EXPECT_DOUBLE_EQ(*suite[2].max_p95_latency_ms, 3.0);
    EXPECT_DOUBLE_EQ(suite[2].duration_ms, 2000.0);

    EXPECT_EQ(load_suite(suite_to_json(suite)), suite);
}

TEST(Tests, UnknownFlowAndTargets) {
    auto plan = plan_deployment(mini_enhanced());
    EXPECT_THROW(emit_tests(criteria(R"({"criteria": [{"id": "x", "flow": {"src": "f1", "dst": "ghost"}}]})"), plan),
                 UnknownFlowError);
    EXPECT_THROW(emit_tests(criteria(R"({"criteria": [{"id": "x", "flow": {"src": "f2", "dst": "f1"}}]})"), plan),
                 UnknownFlowError);
    EXPECT_THROW(emit_tests(criteria(R"({"criteria": [{"id": "x", "flow": {"src": "f1", "dst": "f2"},
                 "faults": [{"at_ms": 1, "kind": "link_drop", "target": "nope", "p": 0.5}]}]})"), plan),
                 SchemaError);
    auto ok = emit_tests(criteria(R"({"criteria": [{"id": "x", "flow": {"src": "f1", "dst": "f2"},
                 "faults": [{"at_ms": 1, "kind": "link_drop", "target": "l1", "p": 0.5}]}]})"), plan);
    EXPECT_DOUBLE_EQ(ok[0].faults[0].p, 0.5);
}

TEST(Tests, CriteriaSchema) {
    for (const char* bad : {
             R"([])",
             R"({"criteria": [{"flow": {"src": "a", "dst": "b"}}]})",
             R"({"criteria": [{"id": "x", "flow": {"src": "a"}}]})",
             R"({"criteria": [{"id": "x", "flow": {"src": "a", "dst": "b"}, "min_delivery_ratio": 1.5}]})",
             R"({"criteria": [{"id": "x", "flow": {"src": "a", "dst": "b"}, "duration_ms": 0}]})",
             R"({"criteria": [{"id": "x", "flow": {"src": "a", "dst": "b"}, "kind": "functional",
                 "faults": [{"at_ms": 1, "kind": "node_crash", "target": "n1"}]}]})",
             R"({"criteria": [{"id": "x", "flow": {"src": "a", "dst": "b"},
                 "faults": [{"at_ms": -1, "kind": "node_crash", "target": "n1"}]}]})",
             R"({"criteria": [{"id": "x", "flow": {"src": "a", "dst": "b"},
                 "faults": [{"at_ms": 1, "kind": "meteor", "target": "n1"}]}]})",
             R"({"criteria": [{"id": "x", "flow": {"src": "a", "dst": "b"}},
                              {"id": "x", "flow": {"src": "a", "dst": "b"}}]})",
         })
        EXPECT_THROW(load_criteria(bad), SchemaError) << bad;
    EXPECT_THROW(load_criteria("{"), SyntaxError);
}

TEST(Render, AllocMiniFileCount) {
    auto m = mini_enhanced();
    auto plan = plan_deployment(m);
    auto dir = scratch_dir("render_mini");
    auto manifest = render(plan, emit_adapters(plan, m), {}, dir);
    ASSERT_EQ(manifest.size(), 4u);
    EXPECT_TRUE(manifest.count("deploy/n1.yaml"));
    EXPECT_TRUE(manifest.count("adapters/f1#0.txt"));
    EXPECT_TRUE(manifest.count("adapters/f2#0.txt"));
    EXPECT_TRUE(manifest.count("tests/suite.json"));
    EXPECT_EQ(read_file(dir / "tests/suite.json"), "[]\n");
    for (const auto& [file, digest] : manifest)
        EXPECT_EQ(sha256_hex(read_file(dir / file)), digest) << file;
    EXPECT_EQ(parse_json(read_file(dir / "manifest.json")).size(), 4u);

    auto again = render(plan_deployment(m), emit_adapters(plan, m), {}, scratch_dir("render_mini2"));
    EXPECT_EQ(again, manifest);
}

TEST(Render, StaleFilesAreCleared) {
    auto dir = scratch_dir("render_stale");
    auto m2 = mini_enhanced("n1", "n2");
    auto p2 = plan_deployment(m2);
    render(p2, emit_adapters(p2, m2), {}, dir);
    EXPECT_TRUE(std::filesystem::exists(dir / "deploy/n2.yaml"));
    auto m1 = mini_enhanced();
    auto p1 = plan_deployment(m1);
    render(p1, emit_adapters(p1, m1), {}, dir);
    EXPECT_FALSE(std::filesystem::exists(dir / "deploy/n2.yaml"));
}

TEST(Render, DeploymentYamlRoundTrip) {
    auto m = redundant_model(3, SafetyMechanism::voting);
    auto plan = plan_deployment(m);
    auto dir = scratch_dir("render_yaml");
    render(plan, emit_adapters(plan, m), {}, dir);
    auto loaded = load_deployment(dir / "deploy");
    ASSERT_EQ(loaded.size(), plan.nodes.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        EXPECT_EQ(loaded[i].node, plan.nodes[i].node);
        EXPECT_EQ(loaded[i].address, plan.nodes[i].address);
        ASSERT_EQ(loaded[i].services.size(), plan.nodes[i].services.size());
        for (std::size_t k = 0; k < loaded[i].services.size(); ++k) {
            const auto& a = loaded[i].services[k];
            const auto& b = plan.nodes[i].services[k];
            EXPECT_EQ(a.name, b.name);
            EXPECT_EQ(a.instance, b.instance);
            EXPECT_EQ(a.voter, b.voter);
            EXPECT_EQ(a.port, b.port);
            EXPECT_EQ(a.env, b.env);
            EXPECT_EQ(a.command, b.command);
        }
    }
    EXPECT_THROW(load_deployment(dir / "missing"), IoError);
}
