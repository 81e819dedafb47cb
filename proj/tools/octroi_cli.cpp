// Command-line front end: each subcommand runs one pipeline stage against a run
// directory (--out), `run` does everything in a fresh timestamped directory.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "octroi/core.hpp"
#include "octroi/experiment/config.hpp"
#include "octroi/experiment/report.hpp"
#include "octroi/experiment/runner.hpp"
#include "octroi/synth.hpp"

namespace fs = std::filesystem;
namespace ex = octroi::experiment;
using nlohmann::json;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> threads;
};

ex::ExperimentConfig build_config(const Globals& g) {
    json j;
    fs::path base;
    if (!g.config_path.empty()) {
        try {
            j = json::parse(octroi::read_file(g.config_path));
        } catch (const json::exception& e) {
            throw octroi::ValidationError("config '" + g.config_path + "': " + e.what());
        }
        base = fs::path(g.config_path).parent_path();
    } else {
        j = {{"dataset", {{"synth", json::object()}}}};
    }
    if (!j.is_object()) throw octroi::ValidationError("config must be a JSON object");
    if (g.seed) j["seed"] = *g.seed;
    if (g.threads) j["threads"] = *g.threads;
    if (!g.out.empty()) j["output_dir"] = fs::absolute(g.out).string();
    return ex::parse_config(j, base);
}

// Stage subcommands work on an existing (or new) run directory given by --out.
fs::path stage_dir(const Globals& g) {
    if (g.out.empty()) throw octroi::ValidationError("--out <run dir> is required for this subcommand");
    fs::create_directories(g.out);
    return g.out;
}

const octroi::RoiRequest& find_variant(const ex::ExperimentConfig& c, const std::string& name) {
    for (const auto& r : c.roi_variants)
        if (r.name() == name) return r;
    throw octroi::ValidationError("variant '" + name + "' is not in the configuration");
}

std::vector<octroi::RoiRequest> pick_variants(const ex::ExperimentConfig& c, const std::string& name) {
    if (name.empty()) return c.roi_variants;
    return {find_variant(c, name)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OCT region-of-interest comparison pipeline"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "override the run seed");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--threads", g.threads, "variants trained concurrently")->check(CLI::PositiveNumber);

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset into --out");
    auto* prepare = app.add_subcommand("prepare", "select scans, split subjects and extract ROIs");
    std::string variant;
    auto* train = app.add_subcommand("train", "train one variant (or all)");
    train->add_option("--variant", variant, "variant name, e.g. cropping-bm-cho");
    auto* evals = app.add_subcommand("eval", "score the test split and compute metrics");
    evals->add_option("--variant", variant, "variant name");
    bool paired = false;
    auto* compare = app.add_subcommand("compare", "pairwise DeLong tests over persisted scores");
    compare->add_flag("--paired", paired, "paired DeLong instead of unpaired");
    auto* run = app.add_subcommand("run", "full experiment in a new timestamped directory under --out");
    run->add_flag("--paired", paired, "paired DeLong instead of unpaired");
    auto* report = app.add_subcommand("report", "re-emit tables and plots for a finished run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    ex::set_log_stream(&std::cerr);
    try {
        auto config = build_config(g);
        if (paired) config.eval.delong_mode = octroi::eval::DelongMode::Paired;

        if (synth->parsed()) {
            if (!config.dataset.synth) throw octroi::ValidationError("config has no synth dataset section");
            const auto dir = stage_dir(g);
            const auto m = octroi::generate_dataset(*config.dataset.synth, dir);
            std::cout << "wrote " << m.entries.size() << " B-scans to " << dir.string() << "\n";
        } else if (prepare->parsed()) {
            const auto dir = stage_dir(g);
            const auto manifest = ex::stage_dataset(config, dir);
            ex::stage_split(config, manifest, dir);
            const auto sets = ex::stage_prepare(config, dir);
            std::cout << "prepared " << sets.size() << " variants in " << dir.string() << "\n";
        } else if (train->parsed()) {
            const auto dir = stage_dir(g);
            for (const auto& r : pick_variants(config, variant)) {
                const auto result = ex::stage_train(config, ex::load_roi_set(dir, r), dir);
                std::cout << r.name() << ": best epoch " << result.best_epoch << " of " << result.epochs_run << "\n";
            }
        } else if (evals->parsed()) {
            const auto dir = stage_dir(g);
            for (const auto& r : pick_variants(config, variant)) {
                const auto v = ex::stage_eval(config, ex::load_roi_set(dir, r), dir);
                std::cout << v.name << ": AUROC " << ex::format_ci(v.metrics.auroc) << "\n";
            }
        } else if (compare->parsed()) {
            const auto dir = stage_dir(g);
            const auto comps = ex::stage_compare(config, dir);
            for (const auto& c : comps)
                std::cout << c.a << " vs " << c.b << ": p " << ex::format_p(c.result.p_value) << "\n";
        } else if (run->parsed()) {
            const auto results = ex::run_experiment(config);
            std::cout << "run directory: " << results.run_dir.string() << "\n";
            for (const auto& v : results.variants)
                std::cout << v.name << ": AUROC " << ex::format_ci(v.metrics.auroc) << "\n";
        } else if (report->parsed()) {
            const auto dir = stage_dir(g);
            const auto results = ex::load_results(config, dir);
            for (const auto& p : ex::emit_report(results, dir)) std::cout << p.string() << "\n";
        }
    } catch (const octroi::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
