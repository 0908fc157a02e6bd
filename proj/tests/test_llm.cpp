#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "forge/error.hpp"
#include "forge/llm/bridge.hpp"
#include "forge/model_json.hpp"
#include "forge/ocl/evaluator.hpp"
#include "forge/ocl/rule_pack.hpp"

#ifdef FORGE_HTTP_LOOPBACK_TESTS
#include <httplib.h>
#include <thread>
#endif

using namespace forge;
using namespace forge::llm;
using forge::testing::fixture_text;

namespace {

std::vector<FunctionSpec> catalogue() { return load_catalogue(fixture_text("catalogue.json")); }
HardwareSpec hardware() { return load_hardware_spec(fixture_text("hardware.json")); }

GenerationResult run(const std::string& req, Provider& p, int rounds = 3) {
    return generate_artifacts(req, catalogue(), hardware(), p, rounds);
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

class ScriptedProvider : public Provider {
public:
    std::vector<std::string> replies;
    std::vector<GenerationRequest> seen;
    bool translate_throws = false;

    std::string_view kind() const noexcept override { return "scripted"; }
    std::string generate(const GenerationRequest& req) override {
        seen.push_back(req);
        return replies.at(std::min(seen.size() - 1, replies.size() - 1));
    }
    std::string translate(const std::vector<ocl::Diagnostic>& diags) override {
        if (translate_throws)
            throw ProviderError("down");
        return "rewritten " + std::to_string(diags.size()) + "\n";
    }
};

} // namespace

TEST(Bridge, BrakingFeatureAcceptedFirstRound) {
    MockProvider mock;
    auto r = run("feature: braking uses speed_sense, brake_ctrl asil D redundancy 2", mock);
    ASSERT_EQ(r.model.functions.size(), 2u);
    const auto* bc = r.model.find_function("brake_ctrl");
    ASSERT_NE(bc, nullptr);
    EXPECT_EQ(bc->asil, Asil::D);
    EXPECT_EQ(bc->redundancy, 2);
    EXPECT_EQ(bc->safety_mechanism, SafetyMechanism::hot_standby);
    ASSERT_EQ(r.model.edges.size(), 1u);
    const auto& e = r.model.edges[0];
    EXPECT_EQ(e.id, "braking_1");
    EXPECT_EQ(e.src_fn, "speed_sense");
    EXPECT_EQ(e.src_port, "out0");
    EXPECT_EQ(e.dst_fn, "brake_ctrl");
    EXPECT_EQ(e.dst_port, "in0");
    EXPECT_DOUBLE_EQ(e.rate_hz, 100.0);
    EXPECT_EQ(e.msg_bytes, 64);
    EXPECT_EQ(r.trace.status, TraceStatus::accepted);
    ASSERT_EQ(r.trace.rounds.size(), 1u);
    EXPECT_TRUE(r.trace.rounds[0].feedback.empty());
    EXPECT_EQ(r.model.hardware.size(), 3u);
    EXPECT_EQ(r.model.links.size(), 2u);
}

TEST(Bridge, UnknownFunctionIsRejectedAndNamed) {
    MockProvider mock;
    try {
        run("feature: braking uses ghost_fn", mock, 2);
        FAIL() << "expected rejection";
    } catch (const RejectedError& e) {
        const auto& t = e.trace();
        EXPECT_EQ(t.status, TraceStatus::rejected);
        ASSERT_EQ(t.rounds.size(), 2u);
        EXPECT_EQ(t.rounds[0].round, 1);
        EXPECT_TRUE(contains(t.rounds[0].feedback, "function 'ghost_fn' is not in the function catalogue"));
        EXPECT_TRUE(contains(t.rounds[0].summary, "ghost_fn"));
    }
}

TEST(Bridge, FaultModeRepairsInSecondRound) {
    MockProvider mock(1);
    auto r = run("feature: braking uses speed_sense, brake_ctrl asil D redundancy 2", mock, 2);
    ASSERT_EQ(r.trace.rounds.size(), 2u);
    EXPECT_EQ(r.trace.status, TraceStatus::accepted);
    EXPECT_TRUE(contains(r.trace.rounds[0].feedback, "MinCpu"));
    // first function by id is brake_ctrl
    EXPECT_TRUE(contains(r.trace.rounds[0].feedback, "brake_ctrl"));
    EXPECT_GE(r.model.find_function("brake_ctrl")->cpu_req, 1);
}

TEST(Bridge, FaultOutlastingBudgetIsRejected) {
    MockProvider mock(5);
    EXPECT_THROW(run("feature: braking uses speed_sense", mock, 3), RejectedError);
}

TEST(Bridge, FeedbackReachesNextRequest) {
    ScriptedProvider p;
    MockProvider good;
    GenerationRequest req{"feature: f uses speed_sense", catalogue(), hardware(), 1, {}, {}};
    p.replies = {"no fences here", good.generate(req)};
    auto r = run("feature: f uses speed_sense", p);
    ASSERT_EQ(p.seen.size(), 2u);
    EXPECT_TRUE(p.seen[0].feedback.empty());
    EXPECT_EQ(p.seen[1].round, 2);
    EXPECT_EQ(p.seen[1].feedback, r.trace.rounds[0].feedback);
    EXPECT_TRUE(contains(r.trace.rounds[0].summary, "no model block"));
}

TEST(Bridge, SchemaAndParseFailuresBecomeFeedback) {
    ScriptedProvider p;
    p.replies = {"```model\n{\"functions\": 3}\n```\n"};
    try {
        run("feature: f uses speed_sense", p, 1);
        FAIL();
    } catch (const RejectedError& e) {
        EXPECT_TRUE(contains(e.trace().rounds[0].feedback, "does not load"));
    }

    MockProvider mock;
    GenerationRequest req{"feature: f uses speed_sense", catalogue(), hardware(), 1, {}, {}};
    auto text = mock.generate(req);
    text.replace(text.find("```constraints\n") + 15, 0, "context Function inv Broken: self.cpu_req >\n");
    p.replies = {text};
    try {
        run("feature: f uses speed_sense", p, 1);
        FAIL();
    } catch (const RejectedError& e) {
        EXPECT_TRUE(contains(e.trace().rounds[0].summary, "constraint source rejected"));
    }
}

TEST(Bridge, ConstraintLinesPassThrough) {
    MockProvider mock;
    auto r = run("feature: b uses speed_sense, brake_ctrl\nconstraint: context Function inv SmallCpu: self.cpu_req <= 4\n",
                 mock);
    ASSERT_EQ(r.constraints.constraints.size(), 1u);
    EXPECT_EQ(r.constraints.constraints[0].name, "SmallCpu");
    EXPECT_TRUE(contains(r.constraint_source, "SmallCpu"));

    EXPECT_THROW(run("feature: b uses brake_ctrl\nconstraint: context Function inv Tiny: self.cpu_req < 2\n", mock),
                 RejectedError);
}

TEST(Bridge, GeneratedConstraintCannotShadowBuiltinRule) {
    // a generated MinCpu that always holds must not hide the built-in one
    MockProvider mock(9);
    try {
        run("feature: b uses speed_sense\nconstraint: context Function inv MinCpu: true\n", mock, 1);
        FAIL();
    } catch (const RejectedError& e) {
        EXPECT_TRUE(contains(e.trace().rounds[0].feedback, "MinCpu"));
    }
}

TEST(Bridge, MultiFeatureMerge) {
    MockProvider mock;
    auto r = run("feature: act uses speed_sense, brake_ctrl asil B, wheel_act\n"
                 "feature: show uses speed_sense asil D, hmi_display rate 10 bytes 8\n"
                 "feature: again uses brake_ctrl redundancy 3 mechanism voting\n",
                 mock);
    EXPECT_EQ(r.model.functions.size(), 4u);
    // catalogue ASIL C beats requested B; requested D beats catalogue B
    EXPECT_EQ(r.model.find_function("brake_ctrl")->asil, Asil::C);
    EXPECT_EQ(r.model.find_function("speed_sense")->asil, Asil::D);
    EXPECT_EQ(r.model.find_function("brake_ctrl")->redundancy, 3);
    EXPECT_EQ(r.model.find_function("brake_ctrl")->safety_mechanism, SafetyMechanism::voting);
    ASSERT_NE(r.model.find_edge("act_2"), nullptr);
    EXPECT_EQ(r.model.find_edge("act_2")->src_port, "cmd");
    EXPECT_EQ(r.model.find_edge("act_2")->dst_port, "torque");
    ASSERT_NE(r.model.find_edge("show_1"), nullptr);
    EXPECT_DOUBLE_EQ(r.model.find_edge("show_1")->rate_hz, 10.0);
    EXPECT_EQ(r.model.find_edge("show_1")->msg_bytes, 8);
    EXPECT_EQ(r.model.edges.size(), 3u);
}

TEST(Bridge, IncompatiblePortsGiveNoEdge) {
    MockProvider mock;
    auto r = run("feature: x uses hmi_display, speed_sense", mock);
    EXPECT_TRUE(r.model.edges.empty());
}

TEST(Bridge, MockIsDeterministic) {
    MockProvider a, b;
    GenerationRequest req{"feature: braking uses speed_sense, brake_ctrl asil D redundancy 2", catalogue(), hardware(),
                          1, {}, {}};
    EXPECT_EQ(a.generate(req), b.generate(req));
}

TEST(Bridge, MalformedRequirementLinesRaiseProviderError) {
    MockProvider mock;
    for (const char* bad : {"feature: braking speed_sense", "feature: b uses speed_sense asil X",
                            "feature: b uses speed_sense redundancy", "feature: b uses speed_sense colour red",
                            "feature: b uses speed_sense,, brake_ctrl", "feature: b uses speed_sense rate fast"})
        EXPECT_THROW(run(bad, mock), ProviderError) << bad;
}

TEST(Bridge, Preconditions) {
    MockProvider mock;
    EXPECT_THROW(run("  \n ", mock), PreconditionError);
    EXPECT_THROW(run("feature: b uses speed_sense", mock, 0), PreconditionError);
    auto cat = catalogue();
    cat.push_back(cat.front());
    EXPECT_THROW(generate_artifacts("feature: b uses speed_sense", cat, hardware(), mock, 1), PreconditionError);
}

TEST(Bridge, TraceJson) {
    MockProvider mock(1);
    auto r = run("feature: b uses speed_sense", mock);
    auto j = trace_to_json(r.trace);
    EXPECT_EQ(j["status"], "accepted");
    ASSERT_EQ(j["rounds"].size(), 2u);
    EXPECT_EQ(j["rounds"][1]["round"], 2);
    EXPECT_EQ(j["rounds"][1]["feedback"], "");
    EXPECT_TRUE(j["rounds"][0]["draft"].get<std::string>().find("```model") != std::string::npos);
}

// Whatever the requirements, an accepted model has no violated or invalid
// verdict under the built-in rules or under its own constraints.
TEST(BridgeProperty, AcceptedOutputsVerifyClean) {
    std::mt19937_64 rng(42);
    const auto cat = catalogue();
    const char* asils[] = {"QM", "A", "B", "C", "D"};
    const char* mechs[] = {"none", "hot_standby", "voting"};
    int accepted = 0, rejected = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::string req;
        int features = 1 + rng() % 3;
        for (int f = 0; f < features; ++f) {
            req += "feature: f" + std::to_string(f) + " uses ";
            int n = 1 + rng() % 4;
            for (int k = 0; k < n; ++k) {
                req += k ? ", " : "";
                req += rng() % 10 == 0 ? std::string("ghost") : cat[rng() % cat.size()].id;
                if (rng() % 3 == 0)
                    req += std::string(" asil ") + asils[rng() % 5];
                if (rng() % 3 == 0)
                    req += " redundancy " + std::to_string(1 + rng() % 3);
                if (rng() % 4 == 0)
                    req += std::string(" mechanism ") + mechs[rng() % 3];
            }
            req += "\n";
        }
        if (rng() % 3 == 0)
            req += "constraint: context Function inv Cap: self.cpu_req <= " + std::to_string(rng() % 3) + "\n";
        MockProvider mock(static_cast<int>(rng() % 3));
        try {
            auto r = generate_artifacts(req, cat, hardware(), mock, 2);
            ++accepted;
            EXPECT_EQ(ocl::evaluate(ocl::builtin_rules(), r.model).count(ocl::Verdict::holds),
                      ocl::evaluate(ocl::builtin_rules(), r.model).entries.size());
            EXPECT_TRUE(ocl::evaluate(r.constraints, r.model).clean()) << req;
            EXPECT_EQ(r.trace.status, TraceStatus::accepted);
            EXPECT_TRUE(r.trace.rounds.back().feedback.empty());
            for (const auto& f : r.model.functions) {
                bool listed = false;
                for (const auto& c : cat)
                    listed |= c.id == f.id;
                EXPECT_TRUE(listed) << f.id;
            }
        } catch (const RejectedError& e) {
            ++rejected;
            EXPECT_LE(e.trace().rounds.size(), 2u);
            for (const auto& round : e.trace().rounds)
                EXPECT_FALSE(round.feedback.empty());
        }
    }
    EXPECT_GT(accepted, 20);
    EXPECT_GT(rejected, 20);
}

TEST(Extract, FencesVerbatim) {
    auto d = extract_blocks("intro\n```model\n{\"a\": 1}\n\n```\ntext\n```constraints\nx\n```\n");
    ASSERT_TRUE(d.model);
    EXPECT_EQ(*d.model, "{\"a\": 1}\n\n");
    ASSERT_TRUE(d.constraints);
    EXPECT_EQ(*d.constraints, "x\n");
}

TEST(Extract, MissingAndUnterminated) {
    auto d = extract_blocks("```json\n{}\n```\n");
    EXPECT_FALSE(d.model);
    EXPECT_FALSE(d.constraints);
    d = extract_blocks("```model\n{}\n");
    EXPECT_FALSE(d.model);
    d = extract_blocks("```constraints\n```\r\n```model\r\n{}\r\n```");
    ASSERT_TRUE(d.constraints);
    EXPECT_EQ(*d.constraints, "");
    ASSERT_TRUE(d.model);
    EXPECT_EQ(*d.model, "{}\r\n");
}

TEST(Translate, EmptyInputGivesEmptyText) {
    MockProvider mock;
    EXPECT_EQ(translate_diagnostics({}, mock), "");
}

TEST(Translate, OneSortedLinePerDiagnostic) {
    MockProvider mock;
    std::vector<ocl::Diagnostic> d = {
        {"MinMem", "b", ocl::Severity::error, "m2.", "s2."},
        {"MinCpu", "z", ocl::Severity::error, "m1.", "s1."},
        {"MinCpu", "a", ocl::Severity::error, "m0.", "s0."},
    };
    EXPECT_EQ(translate_diagnostics(d, mock), "m0. s0.\nm1. s1.\nm2. s2.\n");
}

TEST(Translate, ProviderFailureFallsBackToMock) {
    ScriptedProvider p;
    std::vector<ocl::Diagnostic> d = {{"MinCpu", "a", ocl::Severity::error, "m.", "s."}};
    EXPECT_EQ(translate_diagnostics(d, p), "rewritten 1\n");
    p.translate_throws = true;
    EXPECT_EQ(translate_diagnostics(d, p), "m. s.\n");
}

TEST(Http, TemplateRendering) {
    EXPECT_EQ(render_template("a {{x}} b {{y}} {{x}}", {{"x", "1"}, {"y", "{{x}}"}}), "a 1 b {{x}} 1");
    EXPECT_EQ(render_template("{{missing}}", {}), "{{missing}}");
    auto t = HttpConfig::default_generation_template();
    for (const char* key : {"requirements", "catalogue", "hardware", "feedback", "round"})
        EXPECT_NE(t.find(std::string("{{") + key + "}}"), std::string::npos) << key;
}

TEST(Http, ChatRequestAndResponse) {
    auto j = build_chat_request("m1", "hello", 99);
    EXPECT_EQ(j["model"], "m1");
    EXPECT_EQ(j["messages"][0]["role"], "user");
    EXPECT_EQ(j["messages"][0]["content"], "hello");
    EXPECT_EQ(j["max_tokens"], 99);
    EXPECT_EQ(parse_chat_response(R"({"choices":[{"message":{"content":"hi"}}]})"), "hi");
    EXPECT_THROW(parse_chat_response("nope"), ProviderError);
    EXPECT_THROW(parse_chat_response(R"({"choices":[]})"), ProviderError);
    EXPECT_THROW(parse_chat_response(R"({"choices":[{"message":{"content":3}}]})"), ProviderError);
}

TEST(Http, UnconfiguredProviderFailsCleanly) {
    HttpProvider p(HttpConfig{});
    EXPECT_THROW(p.complete("x"), ProviderError);
    std::vector<ocl::Diagnostic> d = {{"MinCpu", "a", ocl::Severity::error, "m.", "s."}};
    EXPECT_EQ(p.translate(d), "m. s.\n");
    HttpConfig bad;
    bad.endpoint = "no-scheme/path";
    EXPECT_THROW(HttpProvider(bad).complete("x"), ProviderError);
}

#ifdef FORGE_HTTP_LOOPBACK_TESTS
TEST(Http, LoopbackRoundTrip) {
    httplib::Server srv;
    std::string last_auth;
    srv.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
        last_auth = req.get_header_value("Authorization");
        auto body = Json::parse(req.body);
        MockProvider mock;
        GenerationRequest g{"feature: b uses speed_sense", catalogue(), hardware(), 1, {}, {}};
        Json reply;
        reply["choices"] = Json::array({Json{{"message", Json{{"content", mock.generate(g)}}}}});
        res.set_content(reply.dump(), "application/json");
    });
    int port = srv.bind_to_any_port("127.0.0.1");
    std::thread t([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();
    HttpConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
    cfg.api_key = "k";
    HttpProvider p(cfg);
    auto r = generate_artifacts("feature: b uses speed_sense", catalogue(), hardware(), p, 1);
    EXPECT_EQ(r.model.functions.size(), 1u);
    EXPECT_EQ(last_auth, "Bearer k");
    srv.stop();
    t.join();
}
#endif
