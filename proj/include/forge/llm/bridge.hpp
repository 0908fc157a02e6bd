#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "forge/canonical.hpp"
#include "forge/error.hpp"
#include "forge/model.hpp"
#include "forge/model_json.hpp"
#include "forge/ocl/ast.hpp"
#include "forge/ocl/diagnostics.hpp"

namespace forge::llm {

struct GenerationRequest {
    std::string requirements;
    std::vector<FunctionSpec> catalogue;
    HardwareSpec hardware;
    int round = 1;          ///< 1-based
    std::string feedback;   ///< verification feedback from the previous round
    std::string context;    ///< opaque extra context (standards, vehicle abstraction)
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string_view kind() const noexcept = 0;
    /// Response text holding a ```model block and a ```constraints block.
    virtual std::string generate(const GenerationRequest& req) = 0;
    /// Feedback text for a list of diagnostics. May throw ProviderError.
    virtual std::string translate(const std::vector<ocl::Diagnostic>& diags) = 0;
};

/// Deterministic stand-in. Requirements lines:
///   feature: <name> uses <fn> [asil L] [redundancy n] [mechanism m] [rate hz] [bytes n], <fn> ...
///   constraint: <declaration>
/// Consecutive functions of a feature are chained by an edge on their first
/// compatible port pair. With fault_rounds = N, the first function (by id)
/// gets cpu_req 0 on rounds 1..N.
class MockProvider : public Provider {
public:
    explicit MockProvider(int fault_rounds = 0) : fault_rounds_(fault_rounds) {}

    std::string_view kind() const noexcept override { return "mock"; }
    std::string generate(const GenerationRequest& req) override;
    std::string translate(const std::vector<ocl::Diagnostic>& diags) override;

private:
    int fault_rounds_;
};

struct HttpConfig {
    std::string endpoint;   ///< e.g. https://host/v1/chat/completions
    std::string api_key;
    std::string model = "gpt-4o-mini";
    int timeout_s = 60;
    int max_tokens = 4096;
    std::string generation_template = default_generation_template();
    std::string suggestion_template = default_suggestion_template();

    static std::string default_generation_template();
    static std::string default_suggestion_template();
    /// FORGE_LLM_ENDPOINT / FORGE_LLM_API_KEY override the configured values.
    void apply_environment();
};

/// Chat-completions client. Never used by the default test suite.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpConfig cfg) : cfg_(std::move(cfg)) {}

    std::string_view kind() const noexcept override { return "http"; }
    std::string generate(const GenerationRequest& req) override;
    std::string translate(const std::vector<ocl::Diagnostic>& diags) override;

    /// One chat round trip; throws ProviderError on transport or format failure.
    std::string complete(const std::string& prompt);

private:
    HttpConfig cfg_;
};

/// Replace {{key}} placeholders.
std::string render_template(std::string tmpl, const std::vector<std::pair<std::string, std::string>>& values);
Json build_chat_request(const std::string& model, const std::string& prompt, int max_tokens);
/// choices[0].message.content; throws ProviderError.
std::string parse_chat_response(std::string_view body);

struct ExtractedDraft {
    std::optional<std::string> model;
    std::optional<std::string> constraints;
};

/// Bodies of the first ```model and ```constraints fences, verbatim.
ExtractedDraft extract_blocks(std::string_view text);

/// Mock format: one "message suggestion" line per diagnostic, sorted by
/// (constraint id, element id).
std::string mock_translation(const std::vector<ocl::Diagnostic>& diags);

/// provider.translate with the mock format as fallback on ProviderError.
std::string translate_diagnostics(const std::vector<ocl::Diagnostic>& diags, Provider& provider);

enum class TraceStatus { accepted, rejected };

struct TraceRound {
    int round = 0;
    std::string draft;    ///< raw provider response
    std::string summary;  ///< verification outcome
    std::string feedback; ///< text sent back (empty on acceptance)
};

struct GenerationTrace {
    std::vector<TraceRound> rounds;
    TraceStatus status = TraceStatus::rejected;
};

Json trace_to_json(const GenerationTrace& t);

class RejectedError : public Error {
public:
    RejectedError(const std::string& message, GenerationTrace trace)
        : Error(message), trace_(std::move(trace)) {}
    const GenerationTrace& trace() const noexcept { return trace_; }

private:
    GenerationTrace trace_;
};

struct GenerationResult {
    InstanceModel model;
    ocl::ConstraintSet constraints;   ///< generated declarations only
    std::string constraint_source;
    GenerationTrace trace;
};

/// Bounded verification-driven repair loop. Throws PreconditionError for empty
/// requirements or max_rounds < 1, RejectedError when no round passes, and
/// ProviderError from the provider itself.
GenerationResult generate_artifacts(const std::string& requirements, const std::vector<FunctionSpec>& catalogue,
                                    const HardwareSpec& hardware, Provider& provider, int max_rounds,
                                    const std::string& context = {});

} // namespace forge::llm
