#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "forge/error.hpp"
#include "forge/model.hpp"
#include "forge/model_json.hpp"
#include "oracles/random_model.hpp"

using namespace forge;
using forge::testing::fixture_text;

namespace {

SchemaError expect_schema_error(std::string_view doc) {
    try {
        load_instance_model(doc);
    } catch (const SchemaError& e) {
        return e;
    }
    ADD_FAILURE() << "expected SchemaError";
    return SchemaError("", "");
}

} // namespace

TEST(ModelLoad, EmptyDocument) {
    auto m = load_instance_model(R"({"functions":[],"hardware":[],"links":[],"edges":[]})");
    EXPECT_TRUE(m.functions.empty());
    EXPECT_TRUE(m.hardware.empty());
    EXPECT_TRUE(m.links.empty());
    EXPECT_TRUE(m.edges.empty());
    EXPECT_FALSE(m.enhanced());
}

TEST(ModelLoad, DemoBrakeFixture) {
    auto m = forge::testing::demo_brake();
    ASSERT_EQ(m.functions.size(), 2u);
    ASSERT_EQ(m.hardware.size(), 2u);
    ASSERT_EQ(m.links.size(), 1u);
    ASSERT_EQ(m.edges.size(), 1u);
    const auto* brake = m.find_function("brake_ctrl");
    ASSERT_NE(brake, nullptr);
    EXPECT_EQ(brake->asil, Asil::D);
    EXPECT_EQ(brake->redundancy, 2);
    EXPECT_EQ(brake->safety_mechanism, SafetyMechanism::hot_standby);
    EXPECT_DOUBLE_EQ(m.links[0].bandwidth_bps, 1e6);
}

TEST(ModelLoad, DanglingEdgeReference) {
    auto e = expect_schema_error(R"({"functions":[],"hardware":[],"links":[],
        "edges":[{"id":"e","src_fn":"ghost","src_port":"o","dst_fn":"ghost","dst_port":"i","rate_hz":1,"msg_bytes":1}]})");
    EXPECT_EQ(e.path(), "edges[0].src_fn");
}

TEST(ModelLoad, RejectsMalformedJson) {
    EXPECT_THROW(load_instance_model("{\"functions\": ["), SyntaxError);
}

TEST(ModelLoad, RejectsUnknownField) {
    auto e = expect_schema_error(R"({"functions":[],"hardware":[],"links":[],"edges":[],"extra":1})");
    EXPECT_EQ(e.path(), "extra");
    auto f = expect_schema_error(R"({"functions":[{"id":"a","cpu_req":1,"mem_req":1,"asil":"A","colour":"red"}],
        "hardware":[],"links":[],"edges":[]})");
    EXPECT_EQ(f.path(), "functions[0].colour");
}

TEST(ModelLoad, PortTypeMismatch) {
    auto doc = fixture_text("demo_brake.json");
    auto pos = doc.find(R"("in0", "datatype": "Speed")");
    ASSERT_NE(pos, std::string::npos);
    doc.replace(pos, std::string(R"("in0", "datatype": "Speed")").size(), R"("in0", "datatype": "Torque")");
    auto e = expect_schema_error(doc);
    EXPECT_EQ(e.path(), "edges[0].dst_port");
}

TEST(ModelLoad, RedundancyNeedsMechanism) {
    auto e = expect_schema_error(R"({"functions":[{"id":"a","cpu_req":1,"mem_req":1,"asil":"A","redundancy":2}],
        "hardware":[],"links":[],"edges":[]})");
    EXPECT_EQ(e.path(), "functions[0].safety_mechanism");
}

TEST(ModelLoad, LinkInvariants) {
    const char* base = R"({"functions":[],"hardware":[
        {"id":"n1","cpu_cap":1,"mem_cap":1,"asil_cap":"QM"},{"id":"n2","cpu_cap":1,"mem_cap":1,"asil_cap":"QM"}],
        "links":[%s],"edges":[]})";
    auto with_links = [&](const std::string& links) {
        std::string doc = base;
        doc.replace(doc.find("%s"), 2, links);
        return doc;
    };
    EXPECT_EQ(expect_schema_error(with_links(R"({"id":"l","endpoint_a":"n1","endpoint_b":"n1","bandwidth_bps":1,"latency_ms":0})")).path(),
              "links[0].endpoint_b");
    EXPECT_EQ(expect_schema_error(with_links(R"({"id":"l","endpoint_a":"n1","endpoint_b":"n2","bandwidth_bps":0,"latency_ms":0})")).path(),
              "links[0].bandwidth_bps");
    EXPECT_EQ(expect_schema_error(with_links(R"({"id":"l","endpoint_a":"n1","endpoint_b":"n2","bandwidth_bps":1,"latency_ms":0},
                                               {"id":"m","endpoint_a":"n2","endpoint_b":"n1","bandwidth_bps":1,"latency_ms":0})"))
                  .path(),
              "links[1]");
}

TEST(ModelLoad, CpuZeroIsLeftToTheRulePack) {
    auto m = load_instance_model(R"({"functions":[{"id":"a","cpu_req":0,"mem_req":1,"asil":"A"}],
        "hardware":[],"links":[],"edges":[]})");
    EXPECT_EQ(m.functions[0].cpu_req, 0);
    expect_schema_error(R"({"functions":[{"id":"a","cpu_req":-1,"mem_req":1,"asil":"A"}],"hardware":[],"links":[],"edges":[]})");
}

TEST(ModelSave, EmptyModelIsCanonical) {
    EXPECT_EQ(save_instance_model(InstanceModel{}),
              "{\n  \"functions\": [],\n  \"hardware\": [],\n  \"links\": [],\n  \"edges\": []\n}\n");
}

TEST(ModelSave, IdempotentOnDemoBrake) {
    auto once = save_instance_model(load_instance_model(fixture_text("demo_brake.json")));
    auto twice = save_instance_model(load_instance_model(once));
    EXPECT_EQ(once, twice);
}

TEST(ModelSave, ListOrderDoesNotMatter) {
    auto a = forge::testing::demo_brake();
    auto b = a;
    std::reverse(b.functions.begin(), b.functions.end());
    std::reverse(b.hardware.begin(), b.hardware.end());
    EXPECT_EQ(save_instance_model(a), save_instance_model(b));
}

TEST(ModelSave, DecimalRendering) {
    auto m = forge::testing::alloc_mini();
    m.functions[0].power_req = 0.1234567;
    m.hardware[0].cost = 2.5;
    auto text = save_instance_model(m);
    EXPECT_NE(text.find("\"power_req\": 0.123457"), std::string::npos);
    EXPECT_NE(text.find("\"cost\": 2.5"), std::string::npos);
    EXPECT_NE(text.find("\"bandwidth_bps\": 10000000"), std::string::npos);
}

TEST(ModelSave, RoundTripOnRandomModels) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        auto m = forge::testing::random_model(rng);
        auto text = save_instance_model(m);
        auto back = load_instance_model(text);
        EXPECT_EQ(back, m);
        EXPECT_EQ(save_instance_model(back), text);
    }
}

TEST(ModelLoad, DuplicateIdsAlwaysRejected) {
    std::mt19937_64 rng(11);
    int checked = 0;
    for (int i = 0; i < 300; ++i) {
        auto m = forge::testing::random_model(rng, {.min_functions = 1, .min_nodes = 2});
        auto j = nlohmann::json::parse(save_instance_model(m));
        // duplicate a random entity of a random class
        const char* classes[] = {"functions", "hardware", "links", "edges"};
        const char* cls = classes[forge::testing::rand_int(rng, 0, 3)];
        auto& arr = j[cls];
        if (arr.empty())
            continue;
        auto victim = arr[forge::testing::rand_int(rng, 0, static_cast<std::int64_t>(arr.size()) - 1)];
        arr.push_back(victim);
        try {
            load_instance_model(j.dump());
            ADD_FAILURE() << "duplicate " << cls << " accepted";
        } catch (const SchemaError& e) {
            EXPECT_NE(e.detail().find(victim["id"].get<std::string>()), std::string::npos) << e.what();
            ++checked;
        }
    }
    EXPECT_GT(checked, 100);
}

TEST(ExpandInstances, DemoBrake) {
    auto inst = expand_instances(forge::testing::demo_brake());
    ASSERT_EQ(inst.size(), 3u);
    EXPECT_EQ(inst[0].str(), "brake_ctrl#0");
    EXPECT_EQ(inst[1].str(), "brake_ctrl#1");
    EXPECT_EQ(inst[2].str(), "speed_sense#0");
}

TEST(ExpandInstances, IdentityAndEmpty) {
    auto m = forge::testing::alloc_mini();
    auto inst = expand_instances(m);
    ASSERT_EQ(inst.size(), 2u);
    EXPECT_EQ(inst[0].str(), "f1#0");
    EXPECT_TRUE(expand_instances(InstanceModel{}).empty());
}

TEST(ExpandInstances, LengthIsSumOfRedundancy) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        auto m = forge::testing::random_model(rng, {.max_redundancy = 4});
        std::size_t total = 0;
        for (const auto& f : m.functions)
            total += static_cast<std::size_t>(f.redundancy);
        auto a = expand_instances(m);
        EXPECT_EQ(a.size(), total);
        EXPECT_EQ(a, expand_instances(m));
        EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    }
}

TEST(InstanceIdText, RenderAndParse) {
    InstanceId id{"brake_ctrl", 12};
    EXPECT_EQ(id.str(), "brake_ctrl#12");
    EXPECT_EQ(InstanceId::parse("brake_ctrl#12"), id);
    EXPECT_FALSE(InstanceId::parse("brake_ctrl"));
    EXPECT_FALSE(InstanceId::parse("brake_ctrl#"));
    EXPECT_FALSE(InstanceId::parse("brake_ctrl#01"));
    EXPECT_FALSE(InstanceId::parse("#1"));
    EXPECT_FALSE(InstanceId::parse("a#-1"));
}

TEST(MergeAllocation, PopulatesAllocation) {
    auto m = forge::testing::demo_brake();
    AllocationMatrix a{{{{"brake_ctrl", 0}, "n1"}, {{"brake_ctrl", 1}, "n2"}, {{"speed_sense", 0}, "n2"}}};
    auto enhanced = merge_allocation(m, a);
    ASSERT_TRUE(enhanced.allocation);
    EXPECT_EQ(enhanced.allocation->size(), 3u);
    auto plain = enhanced;
    plain.allocation.reset();
    EXPECT_EQ(plain, m);
    // the enhanced model survives a save/load cycle
    EXPECT_EQ(load_instance_model(save_instance_model(enhanced)), enhanced);
}

TEST(MergeAllocation, MissingInstance) {
    auto m = forge::testing::demo_brake();
    AllocationMatrix a{{{{"brake_ctrl", 0}, "n1"}, {{"speed_sense", 0}, "n2"}}};
    EXPECT_THROW(merge_allocation(m, a), CoverageError);
}

TEST(MergeAllocation, ExtraOrDuplicateInstance) {
    auto m = forge::testing::demo_brake();
    AllocationMatrix extra{{{{"brake_ctrl", 0}, "n1"}, {{"brake_ctrl", 1}, "n1"}, {{"brake_ctrl", 2}, "n1"}, {{"speed_sense", 0}, "n2"}}};
    EXPECT_THROW(merge_allocation(m, extra), CoverageError);
    AllocationMatrix dup{{{{"brake_ctrl", 0}, "n1"}, {{"brake_ctrl", 0}, "n2"}, {{"brake_ctrl", 1}, "n1"}, {{"speed_sense", 0}, "n2"}}};
    EXPECT_THROW(merge_allocation(m, dup), CoverageError);
}

TEST(MergeAllocation, UnknownNode) {
    auto m = forge::testing::demo_brake();
    AllocationMatrix a{{{{"brake_ctrl", 0}, "n1"}, {{"brake_ctrl", 1}, "ghost"}, {{"speed_sense", 0}, "n2"}}};
    EXPECT_THROW(merge_allocation(m, a), UnknownNodeError);
}

TEST(Asil, Examples) {
    EXPECT_TRUE(asil_at_least(Asil::D, Asil::B));
    EXPECT_FALSE(asil_at_least(Asil::QM, Asil::A));
    EXPECT_TRUE(asil_at_least(Asil::C, Asil::C));
}

TEST(Asil, TotalOrderOverAllPairs) {
    const Asil all[] = {Asil::QM, Asil::A, Asil::B, Asil::C, Asil::D};
    for (auto a : all) {
        EXPECT_TRUE(asil_at_least(a, a));
        for (auto b : all) {
            EXPECT_TRUE(asil_at_least(a, b) || asil_at_least(b, a));
            if (asil_at_least(a, b) && asil_at_least(b, a))
                EXPECT_EQ(a, b);
            for (auto c : all)
                if (asil_at_least(a, b) && asil_at_least(b, c))
                    EXPECT_TRUE(asil_at_least(a, c));
        }
    }
}

TEST(HardwareSpecFile, LoadsNodesAndLinks) {
    auto spec = load_hardware_spec(R"({"hardware":[{"id":"b","cpu_cap":1,"mem_cap":1,"asil_cap":"D"},
        {"id":"a","cpu_cap":1,"mem_cap":1,"asil_cap":"D"}],
        "links":[{"id":"l","endpoint_a":"a","endpoint_b":"b","bandwidth_bps":5,"latency_ms":1}]})");
    ASSERT_EQ(spec.nodes.size(), 2u);
    EXPECT_EQ(spec.nodes[0].id, "a");
    EXPECT_THROW(load_hardware_spec(R"({"hardware":[],"links":[{"id":"l","endpoint_a":"a","endpoint_b":"b","bandwidth_bps":5,"latency_ms":1}]})"),
                 SchemaError);
}
