#include "forge/cli/commands.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>

#include "forge/alloc/allocator.hpp"
#include "forge/error.hpp"
#include "forge/llm/bridge.hpp"
#include "forge/model_json.hpp"
#include "forge/ocl/diagnostics.hpp"
#include "forge/ocl/evaluator.hpp"
#include "forge/ocl/parser.hpp"
#include "forge/ocl/rule_pack.hpp"
#include "forge/sim/sim.hpp"

namespace fs = std::filesystem;

namespace forge::cli {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

template <class T>
T number(const std::string& key, const std::string& v) {
    T out{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw PreconditionError("config key '" + key + "': '" + v + "' is not a valid number");
    return out;
}

bool boolean(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw PreconditionError("config key '" + key + "': expected true or false");
}

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return exit_usage;
}

void remove_quietly(const fs::path& p) {
    std::error_code ec;
    fs::remove_all(p, ec);
}

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec)
        throw IoError("cannot create " + p.string() + ": " + ec.message());
}

std::string read_input(const fs::path& p, const char* what) {
    std::error_code ec;
    if (!fs::is_regular_file(p, ec))
        throw IoError(std::string(what) + " file " + p.string() + " does not exist");
    return read_file(p);
}

Json diagnostics_json(const std::vector<ocl::Diagnostic>& ds) {
    Json arr = Json::array();
    for (const auto& d : ds)
        arr.push_back(Json{{"constraint", d.constraint_id},
                           {"element", d.element_id},
                           {"severity", ocl::to_string(d.severity)},
                           {"message", d.message},
                           {"suggestion", d.suggestion}});
    return arr;
}

} // namespace

std::map<std::string, std::string> parse_config_text(std::string_view text) {
    std::map<std::string, std::string> kv;
    std::string section;
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        auto raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        // strip a comment that is not inside quotes
        bool quoted = false;
        std::size_t cut = raw.size();
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] == '"')
                quoted = !quoted;
            else if (raw[i] == '#' && !quoted) {
                cut = i;
                break;
            }
        }
        auto line = trim(raw.substr(0, cut));
        if (line.empty())
            continue;
        auto where = "config line " + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw PreconditionError(where + ": unterminated section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw PreconditionError(where + ": expected key = value");
        auto key = trim(std::string_view(line).substr(0, eq));
        auto value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty())
            throw PreconditionError(where + ": empty key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        kv[section.empty() ? key : section + "." + key] = value;
    }
    return kv;
}

std::array<double, 3> parse_weights(std::string_view text) {
    std::array<double, 3> w{};
    std::size_t start = 0;
    for (int i = 0; i < 3; ++i) {
        auto comma = text.find(',', start);
        if ((i < 2) != (comma != std::string_view::npos))
            throw PreconditionError("weights must be three comma-separated numbers, got '" + std::string(text) + "'");
        auto part = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        w[i] = number<double>("weights", part);
        if (w[i] < 0 || !std::isfinite(w[i]))
            throw PreconditionError("weights must be finite and non-negative");
        start = comma + 1;
    }
    if (w[0] + w[1] + w[2] <= 0)
        throw PreconditionError("at least one weight must be positive");
    return w;
}

PipelineConfig PipelineConfig::from_map(const std::map<std::string, std::string>& kv, const fs::path& base_dir) {
    PipelineConfig c;
    auto path = [&](const std::string& v) {
        fs::path p(v);
        return p.is_absolute() ? p : base_dir / p;
    };
    for (const auto& [k, v] : kv) {
        if (k == "catalogue")
            c.catalogue = path(v);
        else if (k == "hardware")
            c.hardware = path(v);
        else if (k == "requirements")
            c.requirements = path(v);
        else if (k == "constraints")
            c.constraints = path(v);
        else if (k == "criteria")
            c.criteria = path(v);
        else if (k == "context")
            c.context = path(v);
        else if (k == "out")
            c.out = path(v);
        else if (k == "provider" || k == "llm.provider") {
            if (v != "mock" && v != "http")
                throw PreconditionError("provider must be mock or http");
            c.provider = v;
        } else if (k == "mock.fault_rounds")
            c.mock_fault_rounds = number<int>(k, v);
        else if (k == "llm.endpoint")
            c.llm_endpoint = v;
        else if (k == "llm.api_key")
            c.llm_api_key = v;
        else if (k == "llm.model")
            c.llm_model = v;
        else if (k == "llm.timeout_s")
            c.llm_timeout_s = number<int>(k, v);
        else if (k == "max_rounds" || k == "llm.max_rounds")
            c.max_rounds = number<int>(k, v);
        else if (k == "solver.nsga2")
            c.nsga2 = boolean(k, v);
        else if (k == "solver.pop")
            c.population = number<int>(k, v);
        else if (k == "solver.gens")
            c.generations = number<int>(k, v);
        else if (k == "solver.exact_cap")
            c.exact_cap = number<double>(k, v);
        else if (k == "weights" || k == "solver.weights")
            c.weights = parse_weights(v);
        else if (k == "seed" || k == "solver.seed")
            c.seed = number<std::uint64_t>(k, v);
        else if (k == "runtime.base_port")
            c.rtenv.base_port = number<int>(k, v);
        else if (k == "runtime.subnet_prefix")
            c.rtenv.subnet_prefix = v;
        else if (k == "runtime.transport")
            c.rtenv.transport = v;
        else if (k == "runtime.middleware") {
            if (v != "pubsub" && v != "queue")
                throw PreconditionError("runtime.middleware must be pubsub or queue");
            c.rtenv.middleware = v == "pubsub" ? codegen::Middleware::pubsub : codegen::Middleware::queue;
        } else if (k == "runtime.virtualization") {
            if (v != "container" && v != "process")
                throw PreconditionError("runtime.virtualization must be container or process");
            c.rtenv.virtualization =
                v == "container" ? codegen::Virtualization::container : codegen::Virtualization::process;
        } else if (k == "sim.horizon_ms")
            c.horizon_ms = number<double>(k, v);
        else
            throw PreconditionError("unknown config key '" + k + "'");
    }
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& file) {
    auto text = read_input(file, "config");
    return from_map(parse_config_text(text), file.parent_path());
}

void PipelineConfig::check_inputs() const {
    auto need = [](const fs::path& p, const char* what) {
        std::error_code ec;
        if (p.empty())
            throw PreconditionError(std::string("config does not name a ") + what + " file");
        if (!fs::is_regular_file(p, ec))
            throw PreconditionError(std::string(what) + " file " + p.string() + " does not exist");
    };
    need(catalogue, "catalogue");
    need(hardware, "hardware");
    need(requirements, "requirements");
    if (constraints)
        need(*constraints, "constraints");
    if (criteria)
        need(*criteria, "criteria");
    if (context)
        need(*context, "context");
    if (max_rounds < 1)
        throw PreconditionError("max_rounds must be at least 1");
    if (!(horizon_ms > 0))
        throw PreconditionError("sim.horizon_ms must be positive");
    rtenv.validate();
}

int cmd_gen_model(const PipelineConfig& cfg, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        cfg.check_inputs();
        auto catalogue = load_catalogue(read_file(cfg.catalogue));
        auto hardware = load_hardware_spec(read_file(cfg.hardware));
        auto requirements = read_file(cfg.requirements);
        std::string context = cfg.context ? read_file(*cfg.context) : std::string();

        std::unique_ptr<llm::Provider> provider;
        if (cfg.provider == "http") {
            llm::HttpConfig hc;
            hc.endpoint = cfg.llm_endpoint;
            hc.api_key = cfg.llm_api_key;
            hc.model = cfg.llm_model;
            hc.timeout_s = cfg.llm_timeout_s;
            hc.apply_environment();
            provider = std::make_unique<llm::HttpProvider>(hc);
        } else {
            provider = std::make_unique<llm::MockProvider>(cfg.mock_fault_rounds);
        }

        ensure_dir(cfg.out);
        remove_quietly(cfg.out / "model.json");
        remove_quietly(cfg.out / "constraints.ocl");
        try {
            auto r = llm::generate_artifacts(requirements, catalogue, hardware, *provider, cfg.max_rounds, context);
            write_file(cfg.out / "model.json", save_instance_model(r.model));
            write_file(cfg.out / "constraints.ocl", ocl::print_constraints(r.constraints));
            write_file(cfg.out / "trace.json", dump_json(llm::trace_to_json(r.trace)));
            log << "gen-model: accepted in round " << r.trace.rounds.size() << " (" << r.model.functions.size()
                << " functions, " << r.constraints.constraints.size() << " generated constraints)\n";
            return exit_ok;
        } catch (const llm::RejectedError& e) {
            write_file(cfg.out / "trace.json", dump_json(llm::trace_to_json(e.trace())));
            err << "gen-model: " << e.what() << "\n";
            if (!e.trace().rounds.empty())
                err << e.trace().rounds.back().feedback;
            return exit_failed;
        }
    });
}

int cmd_validate(const fs::path& model, const std::vector<fs::path>& constraints, const fs::path& out,
                 std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        auto m = load_instance_model(read_input(model, "model"));
        std::vector<ocl::ConstraintSet> sets{ocl::builtin_rules()};
        for (const auto& c : constraints)
            sets.push_back(ocl::parse_constraints(read_input(c, "constraints")));
        std::vector<ocl::Diagnostic> diags;
        std::size_t checks = 0, holds = 0;
        for (const auto& cs : sets) {
            auto rep = ocl::evaluate(cs, m);
            checks += rep.entries.size();
            holds += rep.count(ocl::Verdict::holds);
            auto d = ocl::explain(rep, m);
            diags.insert(diags.end(), d.begin(), d.end());
        }
        ensure_dir(out);
        write_file(out / "diagnostics.json", dump_json(diagnostics_json(diags)));
        log << "validate: " << checks << " checks, " << holds << " hold, " << diags.size() << " diagnostics\n";
        for (const auto& d : diags)
            log << "  [" << d.constraint_id << "] " << d.element_id << ": " << d.message << "\n    " << d.suggestion
                << "\n";
        return diags.empty() ? exit_ok : exit_failed;
    });
}

int cmd_allocate(const fs::path& model, const AllocateOptions& opts, const fs::path& out, std::ostream& log,
                 std::ostream& err) {
    return guarded(err, [&] {
        auto m = load_instance_model(read_input(model, "model"));
        auto problem = alloc::build_problem(m);
        double space = std::pow(static_cast<double>(problem.nodes.size()),
                                static_cast<double>(problem.instances.size()));
        bool exact = !opts.nsga2 && space <= opts.exact_cap;
        alloc::SolveResult result;
        if (exact) {
            result = alloc::solve_exact(problem, {opts.exact_cap});
        } else {
            alloc::Nsga2Params p;
            p.population = opts.population;
            p.generations = opts.generations;
            p.seed = opts.seed;
            if (p.population < 4 || p.population % 2 || p.generations < 0)
                throw PreconditionError("population must be even and at least 4; generations non-negative");
            result = alloc::solve_nsga2(problem, p);
        }
        ensure_dir(out);
        for (const char* stale : {"enhanced_model.json", "allocation.csv", "violations.json"})
            remove_quietly(out / stale);
        Json front;
        front["solver"] = exact ? "exact" : "nsga2";
        front["seed"] = exact ? Json() : Json(opts.seed);
        front["weights"] = Json::array({decimal_json(opts.weights[0]), decimal_json(opts.weights[1]),
                                        decimal_json(opts.weights[2])});

        if (auto* empty = std::get_if<alloc::EmptyFront>(&result)) {
            front["selected"] = Json();
            front["points"] = Json::array();
            write_file(out / "front.json", dump_json(front));
            Json v;
            v["witness"] = Json::object();
            for (const auto& pl : empty->witness.placements)
                v["witness"][pl.instance.str()] = pl.node;
            v["violations"] = alloc::violations_to_json(empty->violations);
            write_file(out / "violations.json", dump_json(v));
            err << "allocate: no feasible allocation; least-violating witness breaks:\n";
            for (const auto& viol : empty->violations)
                err << "  " << alloc::describe(viol) << "\n";
            return exit_failed;
        }
        const auto& set = std::get<alloc::ParetoSet>(result);
        const auto& chosen = alloc::select_solution(set, opts.weights);
        std::size_t index = static_cast<std::size_t>(&chosen - set.points.data());
        front["selected"] = index;
        front["points"] = alloc::front_to_json(set);
        write_file(out / "front.json", dump_json(front));
        write_file(out / "allocation.csv", alloc::allocation_csv(chosen.matrix));
        write_file(out / "enhanced_model.json", save_instance_model(merge_allocation(m, chosen.matrix)));
        log << "allocate: " << (exact ? "exact" : "nsga2") << " front with " << set.points.size()
            << " point(s); selected #" << index << " (power " << format_decimal(chosen.objectives.power_w)
            << " W, cost " << format_decimal(chosen.objectives.cost) << ", traffic "
            << format_decimal(chosen.objectives.traffic_bps) << " bps)\n";
        return exit_ok;
    });
}

int cmd_codegen(const fs::path& enhanced_model, const std::optional<fs::path>& criteria,
                const codegen::RuntimeEnvSpec& rtenv, const fs::path& out, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        auto m = load_instance_model(read_input(enhanced_model, "model"));
        auto plan = codegen::plan_deployment(m, rtenv);
        auto adapters = codegen::emit_adapters(plan, m);
        std::vector<codegen::TestCase> tests;
        if (criteria)
            tests = codegen::emit_tests(codegen::load_criteria(read_input(*criteria, "criteria")), plan);
        auto manifest = codegen::render(plan, adapters, tests, out);
        log << "codegen: " << plan.nodes.size() << " deploy file(s), " << adapters.size() << " adapter(s), "
            << tests.size() << " test case(s); manifest lists " << manifest.size() << " files\n";
        return exit_ok;
    });
}

int cmd_simulate(const fs::path& enhanced_model, const fs::path& codegen_dir, const SimulateOptions& opts,
                 const fs::path& out, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        auto m = load_instance_model(read_input(enhanced_model, "model"));
        codegen::DeploymentPlan plan;
        plan.nodes = codegen::load_deployment(codegen_dir / "deploy");
        auto suite = codegen::load_suite(read_input(codegen_dir / "tests" / "suite.json", "test suite"));
        auto world = sim::build_sim(plan.nodes, m);
        auto run = sim::run_suite(world, suite, opts.seed);

        Json report;
        report["seed"] = opts.seed;
        report["results"] = sim::results_to_json(run.results);
        report["runs"] = Json::array();
        for (std::size_t i = 0; i < suite.size(); ++i)
            report["runs"].push_back(Json{{"case", suite[i].id}, {"report", sim::report_to_json(run.reports[i])}});
        try {
            auto red = sim::redundancy_scenarios(plan, m, opts.horizon_ms, opts.seed);
            report["redundancy"] = sim::redundancy_to_json(red);
            log << "simulate: redundancy check on " << red.function << " (crash " << red.crashed_node << " at "
                << format_decimal(red.crash_at_ms) << " ms)\n";
        } catch (const PreconditionError&) {
            report["redundancy"] = Json();
        }
        ensure_dir(out);
        write_file(out / "report.json", dump_json(report));

        std::size_t passed = 0;
        for (const auto& c : run.results.cases) {
            passed += c.passed;
            log << "  " << (c.passed ? "pass" : "FAIL") << " " << c.id << " (" << codegen::to_string(c.kind)
                << ", ratio " << format_decimal(c.measured.delivery_ratio) << ")\n";
            for (const auto& f : c.failures)
                log << "      " << f << "\n";
        }
        log << "simulate: " << passed << "/" << run.results.cases.size() << " test case(s) pass; "
            << run.results.functional_failures.size() << " functional and "
            << run.results.nonfunctional_failures.size() << " non-functional failure(s)\n";
        return run.results.all_passed() ? exit_ok : exit_failed;
    });
}

codegen::Manifest digest_tree(const fs::path& dir) {
    codegen::Manifest m;
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        return m;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file())
            continue;
        auto rel = fs::relative(e.path(), dir).generic_string();
        if (rel == "pipeline_manifest.json")
            continue;
        m[rel] = sha256_hex(read_file(e.path()));
    }
    return m;
}

int cmd_pipeline(const PipelineConfig& cfg, std::ostream& log, std::ostream& err) {
    int code = guarded(err, [&] {
        cfg.check_inputs();
        ensure_dir(cfg.out);
        return exit_ok;
    });
    if (code != exit_ok)
        return code;
    for (const char* stale : {"model.json", "constraints.ocl", "trace.json", "diagnostics.json", "front.json",
                              "allocation.csv", "enhanced_model.json", "violations.json", "deploy", "adapters", "tests",
                              "manifest.json", "report.json", "pipeline_manifest.json"})
        remove_quietly(cfg.out / stale);

    const auto& out = cfg.out;
    std::vector<fs::path> constraint_files{out / "constraints.ocl"};
    if (cfg.constraints)
        constraint_files.push_back(*cfg.constraints);
    AllocateOptions ao{cfg.nsga2, cfg.population, cfg.generations, cfg.exact_cap, cfg.weights, cfg.seed};
    SimulateOptions so{cfg.seed, cfg.horizon_ms};

    std::vector<std::pair<std::string, std::function<int()>>> stages = {
        {"gen-model", [&] { return cmd_gen_model(cfg, log, err); }},
        {"validate", [&] { return cmd_validate(out / "model.json", constraint_files, out, log, err); }},
        {"allocate", [&] { return cmd_allocate(out / "model.json", ao, out, log, err); }},
        {"codegen", [&] { return cmd_codegen(out / "enhanced_model.json", cfg.criteria, cfg.rtenv, out, log, err); }},
        {"simulate", [&] { return cmd_simulate(out / "enhanced_model.json", out, so, out, log, err); }},
    };
    Json ran = Json::array();
    for (auto& [name, stage] : stages) {
        code = stage();
        ran.push_back(Json{{"stage", name}, {"exit", code}});
        if (code != exit_ok) {
            err << "pipeline: stopped at " << name << " (exit " << code << ")\n";
            break;
        }
    }
    Json manifest;
    manifest["exit"] = code;
    manifest["stages"] = ran;
    manifest["files"] = codegen::manifest_to_json(digest_tree(out));
    return guarded(err, [&] {
        write_file(out / "pipeline_manifest.json", dump_json(manifest));
        if (code == exit_ok)
            log << "pipeline: all stages passed\n";
        return code;
    });
}

} // namespace forge::cli
