#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/codegen/codegen.hpp"

namespace forge::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 2;  // usage, I/O, parse or config error
inline constexpr int exit_failed = 3; // verification, feasibility or test failure

/// `key = value` lines; `[section]` headers prefix keys with "section.";
/// `#` starts a comment; values may be double-quoted.
std::map<std::string, std::string> parse_config_text(std::string_view text);

struct PipelineConfig {
    std::filesystem::path catalogue;
    std::filesystem::path hardware;
    std::filesystem::path requirements;
    std::optional<std::filesystem::path> constraints; // extra user constraints
    std::optional<std::filesystem::path> criteria;
    std::optional<std::filesystem::path> context;     // opaque standards / vehicle text
    std::filesystem::path out = "out";

    std::string provider = "mock"; // mock | http
    int mock_fault_rounds = 0;
    std::string llm_endpoint;
    std::string llm_api_key;
    std::string llm_model = "gpt-4o-mini";
    int llm_timeout_s = 60;
    int max_rounds = 3;

    bool nsga2 = false;
    int population = 64;
    int generations = 200;
    double exact_cap = 1e7;
    std::array<double, 3> weights{1.0, 1.0, 1.0};
    std::uint64_t seed = 0;

    codegen::RuntimeEnvSpec rtenv;
    double horizon_ms = 10000.0;

    /// Relative paths resolve against the config file's directory. Throws
    /// IoError or PreconditionError.
    static PipelineConfig load(const std::filesystem::path& file);
    static PipelineConfig from_map(const std::map<std::string, std::string>& kv,
                                   const std::filesystem::path& base_dir);
    /// Every referenced input must exist. Throws PreconditionError.
    void check_inputs() const;
};

/// "p,c,t"; throws PreconditionError.
std::array<double, 3> parse_weights(std::string_view text);

struct AllocateOptions {
    bool nsga2 = false;
    int population = 64;
    int generations = 200;
    double exact_cap = 1e7;
    std::array<double, 3> weights{1.0, 1.0, 1.0};
    std::uint64_t seed = 0;
};

struct SimulateOptions {
    std::uint64_t seed = 0;
    double horizon_ms = 10000.0;
};

// Each command writes its artifacts under `out` and returns an exit code.
// Progress goes to `log`, failures to `err`.
int cmd_gen_model(const PipelineConfig& cfg, std::ostream& log, std::ostream& err);
int cmd_validate(const std::filesystem::path& model, const std::vector<std::filesystem::path>& constraints,
                 const std::filesystem::path& out, std::ostream& log, std::ostream& err);
int cmd_allocate(const std::filesystem::path& model, const AllocateOptions& opts, const std::filesystem::path& out,
                 std::ostream& log, std::ostream& err);
int cmd_codegen(const std::filesystem::path& enhanced_model, const std::optional<std::filesystem::path>& criteria,
                const codegen::RuntimeEnvSpec& rtenv, const std::filesystem::path& out, std::ostream& log,
                std::ostream& err);
/// Reads deploy/*.yaml and tests/suite.json from `codegen_dir`.
int cmd_simulate(const std::filesystem::path& enhanced_model, const std::filesystem::path& codegen_dir,
                 const SimulateOptions& opts, const std::filesystem::path& out, std::ostream& log,
                 std::ostream& err);
/// All stages in order, stopping at the first non-zero exit; always writes
/// pipeline_manifest.json over whatever artifacts exist.
int cmd_pipeline(const PipelineConfig& cfg, std::ostream& log, std::ostream& err);

/// Relative path -> sha256 of every regular file under `dir` except the
/// pipeline manifest itself.
codegen::Manifest digest_tree(const std::filesystem::path& dir);

} // namespace forge::cli
