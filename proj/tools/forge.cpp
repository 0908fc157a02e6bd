// forge: command-line front end for the model-to-deployment toolchain.
#include <iostream>

#include <CLI11.hpp>

#include "forge/cli/commands.hpp"
#include "forge/error.hpp"

namespace fs = std::filesystem;
using namespace forge::cli;

namespace {

struct Overrides {
    std::string config;
    std::string catalogue, hardware, requirements, context, constraints, criteria, out;
    std::string provider, weights, middleware, virtualization;
    int fault_rounds = -1, max_rounds = -1, pop = -1, gens = -1;
    long long seed = -1;
    double horizon = -1;
    bool nsga2 = false;
};

// Config file first, then whatever was given on the command line.
PipelineConfig resolve(const Overrides& o) {
    PipelineConfig c = o.config.empty() ? PipelineConfig{} : PipelineConfig::load(o.config);
    std::map<std::string, std::string> kv;
    auto put = [&](const char* k, const std::string& v) {
        if (!v.empty())
            kv[k] = v;
    };
    put("catalogue", o.catalogue);
    put("hardware", o.hardware);
    put("requirements", o.requirements);
    put("context", o.context);
    put("constraints", o.constraints);
    put("criteria", o.criteria);
    put("provider", o.provider);
    put("weights", o.weights);
    put("runtime.middleware", o.middleware);
    put("runtime.virtualization", o.virtualization);
    if (o.fault_rounds >= 0)
        kv["mock.fault_rounds"] = std::to_string(o.fault_rounds);
    if (o.max_rounds >= 0)
        kv["max_rounds"] = std::to_string(o.max_rounds);
    if (o.pop >= 0)
        kv["solver.pop"] = std::to_string(o.pop);
    if (o.gens >= 0)
        kv["solver.gens"] = std::to_string(o.gens);
    if (o.seed >= 0)
        kv["seed"] = std::to_string(o.seed);
    auto over = PipelineConfig::from_map(kv, fs::current_path());
    if (!o.catalogue.empty()) c.catalogue = over.catalogue;
    if (!o.hardware.empty()) c.hardware = over.hardware;
    if (!o.requirements.empty()) c.requirements = over.requirements;
    if (!o.context.empty()) c.context = over.context;
    if (!o.constraints.empty()) c.constraints = over.constraints;
    if (!o.criteria.empty()) c.criteria = over.criteria;
    if (!o.provider.empty()) c.provider = over.provider;
    if (!o.weights.empty()) c.weights = over.weights;
    if (!o.middleware.empty()) c.rtenv.middleware = over.rtenv.middleware;
    if (!o.virtualization.empty()) c.rtenv.virtualization = over.rtenv.virtualization;
    if (o.fault_rounds >= 0) c.mock_fault_rounds = o.fault_rounds;
    if (o.max_rounds >= 0) c.max_rounds = o.max_rounds;
    if (o.pop >= 0) c.population = o.pop;
    if (o.gens >= 0) c.generations = o.gens;
    if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
    if (o.horizon > 0) c.horizon_ms = o.horizon;
    if (o.nsga2) c.nsga2 = true;
    if (!o.out.empty()) c.out = o.out;
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"forge: requirements to instance model, allocation, deployment and simulation"};
    app.require_subcommand(1);
    Overrides o;
    // shared flags are accepted before or after the subcommand
    app.fallthrough();
    app.add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--out", o.out, "Output directory");
    app.add_option("--provider", o.provider, "mock or http");
    app.add_option("--mock-fault-rounds", o.fault_rounds, "Rounds in which the mock returns a broken model");
    app.add_option("--max-rounds", o.max_rounds, "Refinement rounds before giving up");
    app.add_flag("--nsga2", o.nsga2, "Use the evolutionary search even for small spaces");
    app.add_option("--pop", o.pop, "Population size");
    app.add_option("--gens", o.gens, "Generations");
    app.add_option("--seed", o.seed, "Random seed");
    app.add_option("--weights", o.weights, "power,cost,traffic weights for choosing one solution");
    app.add_option("--horizon", o.horizon, "Redundancy scenario horizon in ms");

    auto* gen = app.add_subcommand("gen-model", "Generate and verify an instance model from requirements");
    gen->add_option("--catalogue", o.catalogue, "Function catalogue JSON");
    gen->add_option("--hardware", o.hardware, "Hardware specification JSON");
    gen->add_option("--requirements", o.requirements, "Feature requirements text");
    gen->add_option("--context", o.context, "Extra context passed to the provider");

    std::string model;
    std::vector<std::string> constraint_files;
    auto* val = app.add_subcommand("validate", "Check a model against the rule pack and extra constraints");
    val->add_option("model", model, "Instance model JSON")->required();
    val->add_option("--constraints", constraint_files, "Constraint source files")->expected(0, -1);

    double exact_cap = 1e7;
    auto* alc = app.add_subcommand("allocate", "Search Pareto-optimal allocations");
    alc->add_option("model", model, "Instance model JSON")->required();
    alc->add_option("--exact-cap", exact_cap, "Largest search space for exhaustive enumeration");

    auto* cg = app.add_subcommand("codegen", "Render deployment files, adapters and tests");
    cg->add_option("model", model, "Enhanced instance model JSON")->required();
    cg->add_option("--criteria", o.criteria, "Acceptance criteria JSON");
    cg->add_option("--middleware", o.middleware, "pubsub or queue");
    cg->add_option("--virtualization", o.virtualization, "container or process");

    std::string codegen_dir;
    auto* sim = app.add_subcommand("simulate", "Run the generated tests in the discrete-event simulator");
    sim->add_option("model", model, "Enhanced instance model JSON")->required();
    sim->add_option("--codegen", codegen_dir, "Directory holding deploy/ and tests/")->required();

    app.add_subcommand("pipeline", "Run every stage in order");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    PipelineConfig cfg;
    try {
        cfg = resolve(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    }
    auto& log = std::cout;
    auto& err = std::cerr;

    if (*gen)
        return cmd_gen_model(cfg, log, err);
    if (*val) {
        std::vector<fs::path> files(constraint_files.begin(), constraint_files.end());
        if (files.empty() && cfg.constraints)
            files.push_back(*cfg.constraints);
        return cmd_validate(model, files, cfg.out, log, err);
    }
    if (*alc) {
        AllocateOptions ao{cfg.nsga2, cfg.population, cfg.generations, exact_cap, cfg.weights, cfg.seed};
        if (alc->count("--exact-cap") == 0)
            ao.exact_cap = cfg.exact_cap;
        return cmd_allocate(model, ao, cfg.out, log, err);
    }
    if (*cg)
        return cmd_codegen(model, cfg.criteria, cfg.rtenv, cfg.out, log, err);
    if (*sim)
        return cmd_simulate(model, codegen_dir, {cfg.seed, cfg.horizon_ms}, cfg.out, log, err);
    return cmd_pipeline(cfg, log, err);
}
