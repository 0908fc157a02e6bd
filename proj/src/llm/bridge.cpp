#include "forge/llm/bridge.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "forge/ocl/evaluator.hpp"
#include "forge/ocl/parser.hpp"
#include "forge/ocl/rule_pack.hpp"

namespace forge::llm {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        auto at = s.find(sep, start);
        out.push_back(trim(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start)));
        if (at == std::string_view::npos)
            return out;
        start = at + 1;
    }
}

std::vector<std::string> words(std::string_view s) {
    std::istringstream in{std::string(s)};
    std::vector<std::string> out;
    for (std::string w; in >> w;)
        out.push_back(w);
    return out;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

struct FeatureItem {
    std::string fn;
    std::optional<Asil> asil;
    std::optional<int> redundancy;
    std::optional<SafetyMechanism> mechanism;
};

struct Feature {
    std::string name;
    std::vector<FeatureItem> items;
    double rate_hz = 100.0;
    std::int64_t msg_bytes = 64;
};

[[noreturn]] void mock_fail(int line, const std::string& what) {
    throw ProviderError("mock provider: requirements line " + std::to_string(line) + ": " + what);
}

Feature parse_feature(std::string_view body, int line) {
    auto uses = body.find(" uses ");
    if (uses == std::string_view::npos)
        mock_fail(line, "expected '<name> uses <function>, ...'");
    Feature f;
    f.name = trim(body.substr(0, uses));
    if (!is_valid_id(f.name))
        mock_fail(line, "feature name '" + f.name + "' is not an identifier");
    for (const auto& part : split(body.substr(uses + 6), ',')) {
        auto w = words(part);
        if (w.empty())
            mock_fail(line, "empty function entry");
        FeatureItem item;
        item.fn = w[0];
        if (!is_valid_id(item.fn))
            mock_fail(line, "function name '" + item.fn + "' is not an identifier");
        for (std::size_t k = 1; k < w.size(); k += 2) {
            if (k + 1 >= w.size())
                mock_fail(line, "keyword '" + w[k] + "' needs a value");
            const auto& key = w[k];
            const auto& val = w[k + 1];
            try {
                if (key == "asil") {
                    auto a = parse_asil(val);
                    if (!a)
                        mock_fail(line, "unknown ASIL '" + val + "'");
                    item.asil = *a;
                } else if (key == "redundancy") {
                    item.redundancy = std::stoi(val);
                    if (*item.redundancy < 1 || *item.redundancy > 64)
                        mock_fail(line, "redundancy out of range");
                } else if (key == "mechanism") {
                    auto m = parse_safety_mechanism(val);
                    if (!m)
                        mock_fail(line, "unknown mechanism '" + val + "'");
                    item.mechanism = *m;
                } else if (key == "rate") {
                    f.rate_hz = std::stod(val);
                } else if (key == "bytes") {
                    f.msg_bytes = std::stoll(val);
                } else {
                    mock_fail(line, "unknown keyword '" + key + "'");
                }
            } catch (const std::logic_error&) {
                mock_fail(line, "bad number '" + val + "'");
            }
        }
        f.items.push_back(std::move(item));
    }
    return f;
}

std::optional<std::pair<std::string, std::string>> first_compatible(const FunctionSpec& src, const FunctionSpec& dst) {
    auto outs = src.out_ports;
    auto ins = dst.in_ports;
    auto by_name = [](const Port& a, const Port& b) { return a.name < b.name; };
    std::sort(outs.begin(), outs.end(), by_name);
    std::sort(ins.begin(), ins.end(), by_name);
    for (const auto& o : outs)
        for (const auto& i : ins)
            if (o.datatype == i.datatype)
                return std::make_pair(o.name, i.name);
    return std::nullopt;
}

std::string fence(std::string_view tag, std::string_view body) {
    std::string out = "```" + std::string(tag) + "\n" + std::string(body);
    if (!body.empty() && body.back() != '\n')
        out += "\n";
    return out + "```\n";
}

} // namespace

std::string MockProvider::generate(const GenerationRequest& req) {
    std::map<std::string, const FunctionSpec*> catalogue;
    for (const auto& f : req.catalogue)
        catalogue[f.id] = &f;

    std::vector<Feature> features;
    std::string constraints;
    int line_no = 0;
    std::istringstream in(req.requirements);
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        auto line = trim(raw);
        if (starts_with(line, "feature:"))
            features.push_back(parse_feature(trim(line.substr(8)), line_no));
        else if (starts_with(line, "constraint:"))
            constraints += trim(line.substr(11)) + "\n";
    }

    InstanceModel m;
    std::map<std::string, FunctionSpec> fns;
    for (const auto& f : features)
        for (const auto& item : f.items) {
            auto it = fns.find(item.fn);
            if (it == fns.end()) {
                FunctionSpec spec;
                if (auto c = catalogue.find(item.fn); c != catalogue.end())
                    spec = *c->second;
                else
                    spec.id = item.fn; // not in the catalogue; verification will say so
                it = fns.emplace(item.fn, spec).first;
            }
            auto& spec = it->second;
            if (item.asil && asil_at_least(*item.asil, spec.asil))
                spec.asil = *item.asil;
            if (item.redundancy)
                spec.redundancy = std::max(spec.redundancy, *item.redundancy);
            if (item.mechanism)
                spec.safety_mechanism = *item.mechanism;
        }
    for (auto& [id, spec] : fns) {
        if (spec.redundancy > 1 && spec.safety_mechanism == SafetyMechanism::none)
            spec.safety_mechanism = SafetyMechanism::hot_standby;
        m.functions.push_back(spec);
    }
    if (req.round <= fault_rounds_ && !m.functions.empty())
        m.functions.front().cpu_req = 0;

    for (const auto& f : features)
        for (std::size_t k = 1; k < f.items.size(); ++k) {
            const auto& src = fns.at(f.items[k - 1].fn);
            const auto& dst = fns.at(f.items[k].fn);
            auto ports = first_compatible(src, dst);
            if (!ports)
                continue;
            FlowEdge e;
            e.id = f.name + "_" + std::to_string(k);
            e.src_fn = src.id;
            e.src_port = ports->first;
            e.dst_fn = dst.id;
            e.dst_port = ports->second;
            e.rate_hz = f.rate_hz;
            e.msg_bytes = f.msg_bytes;
            m.edges.push_back(std::move(e));
        }
    m.hardware = req.hardware.nodes;
    m.links = req.hardware.links;

    return fence("model", save_instance_model(m)) + "\n" + fence("constraints", constraints);
}

std::string MockProvider::translate(const std::vector<ocl::Diagnostic>& diags) { return mock_translation(diags); }

ExtractedDraft extract_blocks(std::string_view text) {
    ExtractedDraft out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        std::optional<std::string>* slot = nullptr;
        if (line == "```model")
            slot = &out.model;
        else if (line == "```constraints")
            slot = &out.constraints;
        if (slot && !*slot && eol != std::string_view::npos) {
            std::size_t body = eol + 1;
            std::size_t scan = body;
            for (;;) {
                auto e2 = text.find('\n', scan);
                auto l2 = text.substr(scan, e2 == std::string_view::npos ? std::string_view::npos : e2 - scan);
                if (!l2.empty() && l2.back() == '\r')
                    l2.remove_suffix(1);
                if (l2 == "```") {
                    *slot = std::string(text.substr(body, scan - body));
                    eol = e2;
                    break;
                }
                if (e2 == std::string_view::npos)
                    return out; // unterminated fence
                scan = e2 + 1;
            }
        }
        if (eol == std::string_view::npos)
            break;
        pos = eol + 1;
    }
    return out;
}

std::string mock_translation(const std::vector<ocl::Diagnostic>& diags) {
    auto sorted = diags;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return std::tie(a.constraint_id, a.element_id) < std::tie(b.constraint_id, b.element_id);
    });
    std::string out;
    for (const auto& d : sorted)
        out += d.message + " " + d.suggestion + "\n";
    return out;
}

std::string translate_diagnostics(const std::vector<ocl::Diagnostic>& diags, Provider& provider) {
    if (diags.empty())
        return {};
    try {
        return provider.translate(diags);
    } catch (const ProviderError&) {
        return mock_translation(diags);
    }
}

Json trace_to_json(const GenerationTrace& t) {
    Json j;
    j["status"] = t.status == TraceStatus::accepted ? "accepted" : "rejected";
    j["rounds"] = Json::array();
    for (const auto& r : t.rounds) {
        Json jr;
        jr["round"] = r.round;
        jr["summary"] = r.summary;
        jr["feedback"] = r.feedback;
        jr["draft"] = r.draft;
        j["rounds"].push_back(std::move(jr));
    }
    return j;
}

namespace {

struct RoundOutcome {
    bool accepted = false;
    std::string summary;
    std::string feedback;
    InstanceModel model;
    ocl::ConstraintSet constraints;
    std::string constraint_source;
};

RoundOutcome verify(const std::string& text, const std::vector<FunctionSpec>& catalogue, const HardwareSpec& hw,
                    Provider& provider) {
    RoundOutcome out;
    auto blocks = extract_blocks(text);
    if (!blocks.model) {
        out.summary = "response has no model block";
        out.feedback = "The response must contain a ```model fenced block with the instance-model JSON.\n";
        return out;
    }
    try {
        out.model = load_instance_model(*blocks.model);
    } catch (const Error& e) {
        out.summary = std::string("instance model rejected: ") + e.what();
        out.feedback = std::string("The instance model does not load: ") + e.what() + "\n";
        return out;
    }

    std::set<std::string> known_fns, known_nodes;
    for (const auto& f : catalogue)
        known_fns.insert(f.id);
    for (const auto& n : hw.nodes)
        known_nodes.insert(n.id);
    std::string problems;
    for (const auto& f : out.model.functions)
        if (!known_fns.count(f.id))
            problems += "function '" + f.id + "' is not in the function catalogue.\n";
    for (const auto& n : out.model.hardware)
        if (!known_nodes.count(n.id))
            problems += "hardware node '" + n.id + "' is not in the hardware specification.\n";
    if (!problems.empty()) {
        std::string ids;
        for (const auto& id : known_fns)
            ids += (ids.empty() ? "" : ", ") + id;
        out.summary = "catalogue conformance failed: " + problems.substr(0, problems.find('\n'));
        out.feedback = problems + "Use only catalogue functions: " + ids + ".\n";
        return out;
    }

    out.constraint_source = blocks.constraints.value_or("");
    try {
        out.constraints = ocl::parse_constraints(out.constraint_source);
    } catch (const ocl::ParseError& e) {
        out.summary = std::string("constraint source rejected: ") + e.what();
        out.feedback = std::string("The constraints do not parse: ") + e.what() + "\n";
        return out;
    }

    auto builtin = ocl::evaluate(ocl::builtin_rules(), out.model);
    auto generated = ocl::evaluate(out.constraints, out.model);
    auto diags = ocl::explain(builtin, out.model);
    auto more = ocl::explain(generated, out.model);
    diags.insert(diags.end(), more.begin(), more.end());
    std::size_t checks = builtin.entries.size() + generated.entries.size();
    if (diags.empty()) {
        out.accepted = true;
        out.summary = "accepted: " + std::to_string(checks) + " checks hold";
        return out;
    }
    std::size_t violated = builtin.count(ocl::Verdict::violated) + generated.count(ocl::Verdict::violated);
    std::size_t invalid = builtin.count(ocl::Verdict::invalid) + generated.count(ocl::Verdict::invalid);
    out.summary = std::to_string(violated) + " violated, " + std::to_string(invalid) + " invalid of " +
                  std::to_string(checks) + " checks";
    out.feedback = translate_diagnostics(diags, provider);
    return out;
}

} // namespace

GenerationResult generate_artifacts(const std::string& requirements, const std::vector<FunctionSpec>& catalogue,
                                    const HardwareSpec& hardware, Provider& provider, int max_rounds,
                                    const std::string& context) {
    if (trim(requirements).empty())
        throw PreconditionError("requirements are empty");
    if (max_rounds < 1)
        throw PreconditionError("max_rounds must be at least 1");
    std::set<std::string> ids;
    for (const auto& f : catalogue)
        if (!ids.insert(f.id).second)
            throw PreconditionError("catalogue lists '" + f.id + "' twice");

    GenerationRequest req{requirements, catalogue, hardware, 1, {}, context};
    GenerationTrace trace;
    for (int round = 1; round <= max_rounds; ++round) {
        req.round = round;
        TraceRound tr;
        tr.round = round;
        tr.draft = provider.generate(req);
        auto outcome = verify(tr.draft, catalogue, hardware, provider);
        tr.summary = outcome.summary;
        if (outcome.accepted) {
            trace.rounds.push_back(std::move(tr));
            trace.status = TraceStatus::accepted;
            return GenerationResult{std::move(outcome.model), std::move(outcome.constraints),
                                    std::move(outcome.constraint_source), std::move(trace)};
        }
        tr.feedback = outcome.feedback;
        req.feedback = outcome.feedback;
        trace.rounds.push_back(std::move(tr));
    }
    trace.status = TraceStatus::rejected;
    auto message = "generation rejected after " + std::to_string(max_rounds) +
                   " round(s): " + trace.rounds.back().summary;
    throw RejectedError(message, std::move(trace));
}

} // namespace forge::llm
