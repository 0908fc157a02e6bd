#include <cstdlib>

#include <httplib.h>

#include "forge/llm/bridge.hpp"
#include "forge/model_json.hpp"
#include "forge/ocl/rule_pack.hpp"

namespace forge::llm {

std::string HttpConfig::default_generation_template() {
    return R"(You turn automotive feature requirements into a system model.

Requirements:
{{requirements}}

Function catalogue (use only these function ids, keep their ports and resource figures):
{{catalogue}}

Hardware specification (copy nodes and links unchanged):
{{hardware}}

Additional context:
{{context}}

Built-in rules every model must satisfy:
{{rules}}

Feedback on your previous attempt (round {{round}}):
{{feedback}}

Answer with exactly two fenced blocks. The first, tagged ```model, holds the
instance-model JSON with keys functions, hardware, links and edges. The second,
tagged ```constraints, holds OCL constraints, one per line, in the form
"context <Type> inv <Name>: <expr>". Leave it empty if there is nothing to add.
)";
}

std::string HttpConfig::default_suggestion_template() {
    return R"(Rewrite each verification finding below as one short, actionable instruction
for the engineer who wrote the model. Keep one line per finding, same order.

{{diagnostics}})";
}

void HttpConfig::apply_environment() {
    if (const char* e = std::getenv("FORGE_LLM_ENDPOINT"); e && *e)
        endpoint = e;
    if (const char* k = std::getenv("FORGE_LLM_API_KEY"); k && *k)
        api_key = k;
}

std::string render_template(std::string tmpl, const std::vector<std::pair<std::string, std::string>>& values) {
    for (const auto& [key, value] : values) {
        const std::string tag = "{{" + key + "}}";
        for (auto at = tmpl.find(tag); at != std::string::npos; at = tmpl.find(tag, at + value.size()))
            tmpl.replace(at, tag.size(), value);
    }
    return tmpl;
}

Json build_chat_request(const std::string& model, const std::string& prompt, int max_tokens) {
    Json j;
    j["model"] = model;
    j["messages"] = Json::array({Json{{"role", "user"}, {"content", prompt}}});
    j["max_tokens"] = max_tokens;
    j["temperature"] = 0;
    return j;
}

std::string parse_chat_response(std::string_view body) {
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded())
        throw ProviderError("chat response is not JSON");
    try {
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (!content.is_string())
            throw ProviderError("chat response content is not a string");
        return content.get<std::string>();
    } catch (const Json::exception&) {
        throw ProviderError("chat response has no choices[0].message.content");
    }
}

std::string HttpProvider::complete(const std::string& prompt) {
    if (cfg_.endpoint.empty())
        throw ProviderError("no LLM endpoint configured");
    // split scheme://host[:port] from the path
    auto scheme_end = cfg_.endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw ProviderError("endpoint '" + cfg_.endpoint + "' has no scheme");
    auto path_at = cfg_.endpoint.find('/', scheme_end + 3);
    std::string origin = cfg_.endpoint.substr(0, path_at);
    std::string path = path_at == std::string::npos ? "/" : cfg_.endpoint.substr(path_at);

    httplib::Client cli(origin);
    cli.set_connection_timeout(cfg_.timeout_s, 0);
    cli.set_read_timeout(cfg_.timeout_s, 0);
    cli.set_write_timeout(cfg_.timeout_s, 0);
    httplib::Headers headers;
    if (!cfg_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    auto body = build_chat_request(cfg_.model, prompt, cfg_.max_tokens).dump();
    auto res = cli.Post(path, headers, body, "application/json");
    if (!res)
        throw ProviderError("LLM request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw ProviderError("LLM endpoint answered HTTP " + std::to_string(res->status));
    return parse_chat_response(res->body);
}

std::string HttpProvider::generate(const GenerationRequest& req) {
    Json cat = Json::array();
    for (const auto& f : req.catalogue)
        cat.push_back(to_json(f));
    Json hw;
    hw["hardware"] = Json::array();
    for (const auto& n : req.hardware.nodes)
        hw["hardware"].push_back(to_json(n));
    hw["links"] = Json::array();
    for (const auto& l : req.hardware.links)
        hw["links"].push_back(to_json(l));
    auto prompt = render_template(cfg_.generation_template,
                                  {{"requirements", req.requirements},
                                   {"catalogue", cat.dump(2)},
                                   {"hardware", hw.dump(2)},
                                   {"context", req.context.empty() ? "(none)" : req.context},
                                   {"rules", std::string(ocl::builtin_rule_source())},
                                   {"round", std::to_string(req.round)},
                                   {"feedback", req.feedback.empty() ? "(first attempt)" : req.feedback}});
    return complete(prompt);
}

std::string HttpProvider::translate(const std::vector<ocl::Diagnostic>& diags) {
    auto base = mock_translation(diags);
    try {
        auto text = complete(render_template(cfg_.suggestion_template, {{"diagnostics", base}}));
        return text.empty() ? base : text;
    } catch (const ProviderError&) {
        return base;
    }
}

} // namespace forge::llm
