#include "octroi/experiment/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "octroi/experiment/report.hpp"
#include "octroi/nn/checkpoint.hpp"
#include "octroi/png_io.hpp"
#include "octroi/synth.hpp"

namespace octroi::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ostream* g_log = nullptr;
std::mutex g_log_mutex;

void log_line(const std::string& line) {
    if (!g_log) return;
    std::lock_guard lock(g_log_mutex);
    *g_log << line << std::endl;
}

template <typename F>
auto timed(std::map<std::string, double>& seconds, const std::string& stage, F&& fn) {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&] {
        seconds[stage] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    try {
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            finish();
        } else {
            auto out = fn();
            finish();
            return out;
        }
    } catch (const StageError&) {
        throw;
    } catch (const ValidationError& ex) {
        throw StageError(stage, ex.what());
    } catch (const std::exception& ex) {
        throw StageError(stage, ex.what());
    }
}

std::string entry_stem(const ManifestEntry& e) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s_%03d", e.volume_id.c_str(), e.index_in_volume);
    return buf;
}

}  // namespace

void set_log_stream(std::ostream* os) { g_log = os; }

std::uint64_t variant_seed(std::uint64_t run_seed, std::string_view purpose, const std::string& variant) {
    return mix_seed(mix_seed(run_seed, purpose), variant);
}

fs::path stage_dataset(const ExperimentConfig& config, const fs::path& run_dir) {
    if (config.dataset.manifest) {
        if (!fs::exists(*config.dataset.manifest))
            throw MissingFileError("manifest '" + config.dataset.manifest->string() + "' does not exist");
        return fs::absolute(*config.dataset.manifest);
    }
    const fs::path dir = run_dir / "dataset";
    const fs::path manifest = dir / "manifest.json";
    const std::string wanted = synth_config_to_json(*config.dataset.synth).dump(2) + "\n";
    if (fs::exists(manifest) && fs::exists(dir / "synth_config.json") && read_file(dir / "synth_config.json") == wanted) {
        log_line("dataset: reusing " + dir.string());
        return fs::absolute(manifest);
    }
    log_line("dataset: generating synthetic B-scans into " + dir.string());
    generate_dataset(*config.dataset.synth, dir);
    write_file_atomic(dir / "synth_config.json", wanted);
    return fs::absolute(manifest);
}

DatasetManifest stage_split(const ExperimentConfig& config, const fs::path& manifest_path, const fs::path& run_dir) {
    const auto manifest = read_manifest(manifest_path);
    const auto central = filter_central(manifest, config.keep_fraction);
    const std::uint64_t seed = mix_seed(config.seed, "split");
    auto split = split_subjects(central, config.split_ratios, seed);
    split.validate();

    json counts = json::object();
    for (const auto& e : split.entries) {
        auto& c = counts[std::string(to_string(e.split))][std::string(to_string(e.label))];
        c = c.is_null() ? 1 : c.get<int>() + 1;
    }
    const json info = {{"dataset_dir", fs::absolute(manifest_path).parent_path().string()},
                       {"keep_fraction", config.keep_fraction},
                       {"split_ratios", config.split_ratios},
                       {"split_seed", seed},
                       {"image_counts", counts}};
    write_manifest(split, run_dir / "split" / "manifest.json");
    write_file_atomic(run_dir / "split" / "info.json", info.dump(2) + "\n");
    log_line("split: " + std::to_string(split.entries.size()) + " B-scans after central selection");
    return split;
}

std::vector<RoiSet> stage_prepare(const ExperimentConfig& config, const fs::path& run_dir) {
    const auto split = read_manifest(run_dir / "split" / "manifest.json");
    const auto info = json::parse(read_file(run_dir / "split" / "info.json"));
    const fs::path dataset_dir = info.at("dataset_dir").get<std::string>();

    std::vector<RoiSet> sets(config.roi_variants.size());
    std::vector<json> provenance(config.roi_variants.size(), json::array());
    for (std::size_t v = 0; v < sets.size(); ++v) {
        sets[v].request = config.roi_variants[v];
        sets[v].entries = split.entries;
        sets[v].images.reserve(split.entries.size());
    }

    for (const auto& entry : split.entries) {
        DatasetManifest one;
        one.entries.push_back(entry);
        const auto sample = load_entries(one, dataset_dir).front();
        const std::string stem = entry_stem(entry);
        for (std::size_t v = 0; v < sets.size(); ++v) {
            const auto& req = sets[v].request;
            Image pre;
            try {
                pre = extract_roi(sample.bscan, sample.segmentation, req);
            } catch (const RoiBoundsError& ex) {
                throw RoiBoundsError(req.name() + " for " + stem + ": " + ex.what(), ex.deficit());
            }
            Image input = prepare_model_input(sample.bscan, sample.segmentation, req);
            const std::string rel = std::string(to_string(entry.split)) + "/" + stem + ".png";
            write_png(input, run_dir / "rois" / req.name() / rel);
            provenance[v].push_back({{"file", rel},
                                     {"source_scan", (dataset_dir / entry.scan_path).string()},
                                     {"subject_id", entry.subject_id},
                                     {"volume_id", entry.volume_id},
                                     {"index_in_volume", entry.index_in_volume},
                                     {"label", to_string(entry.label)},
                                     {"split", to_string(entry.split)},
                                     {"kind", to_string(req.kind)},
                                     {"method", to_string(req.method)},
                                     {"pre_resize", {pre.rows, pre.cols}}});
            sets[v].images.push_back(std::move(input));
        }
    }
    for (std::size_t v = 0; v < sets.size(); ++v) {
        write_file_atomic(run_dir / "rois" / sets[v].request.name() / "provenance.json", provenance[v].dump(1) + "\n");
        log_line("prepare: " + sets[v].request.name() + " -> " + std::to_string(sets[v].images.size()) + " images");
    }
    return sets;
}

RoiSet load_roi_set(const fs::path& run_dir, const RoiRequest& request) {
    const fs::path dir = run_dir / "rois" / request.name();
    const auto records = json::parse(read_file(dir / "provenance.json"));
    RoiSet set;
    set.request = request;
    for (const auto& r : records) {
        ManifestEntry e;
        e.subject_id = r.at("subject_id").get<std::string>();
        e.volume_id = r.at("volume_id").get<std::string>();
        e.index_in_volume = r.at("index_in_volume").get<int>();
        e.label = parse_label(r.at("label").get<std::string>());
        e.split = parse_split(r.at("split").get<std::string>());
        e.scan_path = r.at("source_scan").get<std::string>();
        set.entries.push_back(std::move(e));
        set.images.push_back(read_png(dir / r.at("file").get<std::string>()));
    }
    return set;
}

namespace {

nn::ImageSet subset(const RoiSet& rois, Split split) {
    nn::ImageSet out;
    for (std::size_t i = 0; i < rois.entries.size(); ++i)
        if (rois.entries[i].split == split) {
            out.images.push_back(rois.images[i]);
            out.labels.push_back(label_value(rois.entries[i].label));
        }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

nn::TrainResult stage_train(const ExperimentConfig& config, const RoiSet& rois, const fs::path& run_dir) {
    const std::string name = rois.request.name();
    const auto train_set = subset(rois, Split::Train);
    const auto val_set = subset(rois, Split::Val);
    nn::Model<float> model(config.model, variant_seed(config.seed, "init", name));
    nn::TrainConfig tc = config.train;
    tc.seed = variant_seed(config.seed, "train", name);
    const auto result = nn::train(model, train_set, val_set, tc, [&](const nn::EpochRecord& r) {
        std::ostringstream os;
        os << "train " << name << ": epoch " << r.epoch << " loss " << format_double(r.train_loss) << " val_loss "
           << format_double(r.val_loss) << " val_acc " << format_double(r.val_acc);
        log_line(os.str());
    });
    nn::save_checkpoint(model, run_dir / "models" / name);
    write_file_atomic(run_dir / ("history_" + name + ".csv"), nn::history_to_csv(result.history));
    const json summary = {{"best_epoch", result.best_epoch},
                          {"epochs_run", result.epochs_run},
                          {"train_seed", tc.seed},
                          {"init_seed", variant_seed(config.seed, "init", name)},
                          {"train_images", train_set.size()},
                          {"val_images", val_set.size()}};
    write_file_atomic(run_dir / "models" / name / "training.json", summary.dump(2) + "\n");
    return result;
}

std::string scores_to_csv(const eval::ScoreSet& set, const std::vector<ManifestEntry>& entries) {
    std::ostringstream os;
    os << "subject_id,volume_id,index_in_volume,label,score\n";
    for (std::size_t i = 0; i < set.size(); ++i)
        os << set.subject_ids[i] << ',' << entries[i].volume_id << ',' << entries[i].index_in_volume << ','
           << set.labels[i] << ',' << format_double(set.scores[i]) << '\n';
    return os.str();
}

eval::ScoreSet read_scores(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);
    if (line != "subject_id,volume_id,index_in_volume,label,score")
        throw ValidationError("'" + path.string() + "' is not a score file");
    eval::ScoreSet set;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        if (cells.size() != 5) throw ValidationError("'" + path.string() + "': malformed row '" + line + "'");
        set.subject_ids.push_back(cells[0]);
        set.labels.push_back(std::stoi(cells[3]));
        set.scores.push_back(std::stod(cells[4]));
    }
    return set;
}

json metrics_to_json(const eval::MetricsReport& m) {
    auto est = [](const eval::Estimate& e) { return json{{"point", e.point}, {"ci_low", e.ci_low}, {"ci_high", e.ci_high}}; };
    return {{"auroc", est(m.auroc)},
            {"accuracy", est(m.accuracy)},
            {"sensitivity", est(m.sensitivity)},
            {"specificity", est(m.specificity)},
            {"threshold", m.threshold},
            {"n_pos", m.n_pos},
            {"n_neg", m.n_neg}};
}

namespace {

eval::MetricsReport metrics_from_json(const json& j) {
    auto est = [](const json& e) {
        return eval::Estimate{e.at("point").get<double>(), e.at("ci_low").get<double>(), e.at("ci_high").get<double>()};
    };
    eval::MetricsReport m;
    m.auroc = est(j.at("auroc"));
    m.accuracy = est(j.at("accuracy"));
    m.sensitivity = est(j.at("sensitivity"));
    m.specificity = est(j.at("specificity"));
    m.threshold = j.at("threshold").get<double>();
    m.n_pos = j.at("n_pos").get<std::size_t>();
    m.n_neg = j.at("n_neg").get<std::size_t>();
    return m;
}

std::vector<nn::EpochRecord> read_history(const fs::path& path) {
    std::vector<nn::EpochRecord> out;
    if (!fs::exists(path)) return out;
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nn::EpochRecord r;
        char comma;
        std::istringstream ls(line);
        ls >> r.epoch >> comma >> r.train_loss >> comma >> r.val_loss >> comma >> r.train_acc >> comma >> r.val_acc;
        out.push_back(r);
    }
    return out;
}

}  // namespace

VariantResult stage_eval(const ExperimentConfig& config, const RoiSet& rois, const fs::path& run_dir) {
    const std::string name = rois.request.name();
    auto model = nn::load_checkpoint(run_dir / "models" / name);
    std::vector<Image> test_images;
    std::vector<ManifestEntry> test_entries;
    for (std::size_t i = 0; i < rois.entries.size(); ++i)
        if (rois.entries[i].split == Split::Test) {
            test_images.push_back(rois.images[i]);
            test_entries.push_back(rois.entries[i]);
        }
    const auto probs = nn::score_images(model, test_images);

    VariantResult r;
    r.name = name;
    r.request = rois.request;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        // stored at 9 significant digits; keep the in-memory value identical to the file
        r.scores.scores.push_back(std::stod(format_double(probs[i])));
        r.scores.labels.push_back(label_value(test_entries[i].label));
        r.scores.subject_ids.push_back(test_entries[i].subject_id);
    }
    write_file_atomic(run_dir / "scores" / (name + ".csv"), scores_to_csv(r.scores, test_entries));

    const std::uint64_t boot_seed = variant_seed(config.seed, "bootstrap", name);
    r.metrics = eval::compute_metrics(r.scores, config.eval.threshold, config.eval.bootstrap_B, config.eval.alpha, boot_seed);
    r.youden_metrics = eval::compute_metrics(r.scores, eval::youden_threshold(r.scores), config.eval.bootstrap_B,
                                             config.eval.alpha, boot_seed);
    r.history = read_history(run_dir / ("history_" + name + ".csv"));
    const json j = {{"variant", name},
                    {"metrics", metrics_to_json(r.metrics)},
                    {"youden", metrics_to_json(r.youden_metrics)},
                    {"bootstrap_seed", boot_seed}};
    write_file_atomic(run_dir / "metrics" / (name + ".json"), j.dump(2) + "\n");
    log_line("eval " + name + ": auroc " + format_double(r.metrics.auroc.point));
    return r;
}

std::vector<PairComparison> stage_compare(const ExperimentConfig& config, const fs::path& run_dir) {
    std::vector<std::pair<std::string, eval::ScoreSet>> sets;
    for (const auto& v : config.roi_variants)
        sets.emplace_back(v.name(), read_scores(run_dir / "scores" / (v.name() + ".csv")));
    std::vector<PairComparison> out;
    json arr = json::array();
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
            PairComparison pc{sets[i].first, sets[j].first, {}};
            try {
                pc.result = eval::delong_test(sets[i].second, sets[j].second, config.eval.delong_mode);
            } catch (const eval::DegenerateComparisonError&) {
                pc.result.mode = config.eval.delong_mode;
                pc.result.auroc_a = eval::auroc(sets[i].second);
                pc.result.auroc_b = eval::auroc(sets[j].second);
                pc.result.z = std::numeric_limits<double>::quiet_NaN();
                pc.result.p_value = std::numeric_limits<double>::quiet_NaN();
            }
            out.push_back(pc);
        }
    RunResults tmp;
    tmp.comparisons = out;
    write_file_atomic(run_dir / "comparisons.json", results_to_json(tmp).at("comparisons").dump(2) + "\n");
    return out;
}

fs::path make_run_dir(const fs::path& output_dir, bool exact) {
    if (exact) {
        fs::create_directories(output_dir);
        return output_dir;
    }
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    localtime_r(&now, &tm);
    std::ostringstream name;
    name << "run-" << std::put_time(&tm, "%Y%m%d-%H%M%S");
    fs::path dir = output_dir / name.str();
    for (int k = 2; fs::exists(dir); ++k) dir = output_dir / (name.str() + "-" + std::to_string(k));
    fs::create_directories(dir);
    return dir;
}

json results_to_json(const RunResults& results) {
    json variants = json::array();
    for (const auto& v : results.variants)
        variants.push_back({{"variant", v.name},
                            {"kind", to_string(v.request.kind)},
                            {"method", to_string(v.request.method)},
                            {"metrics", metrics_to_json(v.metrics)},
                            {"youden", metrics_to_json(v.youden_metrics)}});
    json comps = json::array();
    for (const auto& c : results.comparisons) {
        auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
        comps.push_back({{"a", c.a},
                         {"b", c.b},
                         {"auroc_a", c.result.auroc_a},
                         {"auroc_b", c.result.auroc_b},
                         {"z", num(c.result.z)},
                         {"p_value", num(c.result.p_value)},
                         {"mode", to_string(c.result.mode)}});
    }
    return {{"variants", variants}, {"comparisons", comps}};
}

RunResults run_experiment(const ExperimentConfig& config, bool exact_dir) {
    RunResults results;
    results.run_dir = make_run_dir(config.output_dir, exact_dir);
    const fs::path& dir = results.run_dir;
    results.config_echo = config_to_json(config);
    write_file_atomic(dir / "config.json", results.config_echo.dump(2) + "\n");
    log_line("run directory: " + dir.string());

    auto& t = results.stage_seconds;
    try {
        const auto manifest_path = timed(t, "dataset", [&] { return stage_dataset(config, dir); });
        timed(t, "split", [&] { return stage_split(config, manifest_path, dir); });
        auto rois = timed(t, "prepare", [&] { return stage_prepare(config, dir); });

        results.variants.resize(rois.size());
        std::vector<std::map<std::string, double>> variant_times(rois.size());
        auto work = [&](std::size_t v) {
            const std::string name = rois[v].request.name();
            timed(variant_times[v], "train:" + name, [&] { stage_train(config, rois[v], dir); });
            results.variants[v] = timed(variant_times[v], "eval:" + name, [&] { return stage_eval(config, rois[v], dir); });
            rois[v].images.clear();
            rois[v].images.shrink_to_fit();
        };
        if (config.threads <= 1 || rois.size() <= 1) {
            for (std::size_t v = 0; v < rois.size(); ++v) work(v);
        } else {
            std::mutex m;
            std::size_t next = 0;
            std::exception_ptr failure;
            std::vector<std::thread> pool;
            for (int k = 0; k < config.threads; ++k)
                pool.emplace_back([&] {
                    for (;;) {
                        std::size_t v;
                        {
                            std::lock_guard lock(m);
                            if (failure || next >= rois.size()) return;
                            v = next++;
                        }
                        try {
                            work(v);
                        } catch (...) {
                            std::lock_guard lock(m);
                            if (!failure) failure = std::current_exception();
                        }
                    }
                });
            for (auto& th : pool) th.join();
            if (failure) std::rethrow_exception(failure);
        }
        for (const auto& vt : variant_times) t.insert(vt.begin(), vt.end());

        results.comparisons = timed(t, "compare", [&] { return stage_compare(config, dir); });
        write_file_atomic(dir / "metrics.json", results_to_json(results).dump(2) + "\n");
        results.artifacts = timed(t, "report", [&] { return emit_report(results, dir); });
    } catch (const StageError& ex) {
        write_file_atomic(dir / "error.txt", std::string(ex.what()) + "\n");
        throw;
    }
    json timings = json::object();
    for (const auto& [stage, s] : t) timings[stage] = s;
    write_file_atomic(dir / "timings.json", timings.dump(2) + "\n");
    return results;
}

RunResults run_experiment(const fs::path& config_path) { return run_experiment(load_config(config_path)); }

RunResults load_results(const ExperimentConfig& config, const fs::path& run_dir) {
    RunResults results;
    results.run_dir = run_dir;
    results.config_echo = config_to_json(config);
    for (const auto& req : config.roi_variants) {
        VariantResult v;
        v.name = req.name();
        v.request = req;
        v.scores = read_scores(run_dir / "scores" / (v.name + ".csv"));
        const auto j = json::parse(read_file(run_dir / "metrics" / (v.name + ".json")));
        v.metrics = metrics_from_json(j.at("metrics"));
        v.youden_metrics = metrics_from_json(j.at("youden"));
        v.history = read_history(run_dir / ("history_" + v.name + ".csv"));
        results.variants.push_back(std::move(v));
    }
    const auto comps = json::parse(read_file(run_dir / "comparisons.json"));
    for (const auto& c : comps) {
        PairComparison pc;
        pc.a = c.at("a").get<std::string>();
        pc.b = c.at("b").get<std::string>();
        pc.result.auroc_a = c.at("auroc_a").get<double>();
        pc.result.auroc_b = c.at("auroc_b").get<double>();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        pc.result.z = c.at("z").is_null() ? nan : c.at("z").get<double>();
        pc.result.p_value = c.at("p_value").is_null() ? nan : c.at("p_value").get<double>();
        pc.result.mode = eval::parse_delong_mode(c.at("mode").get<std::string>());
        results.comparisons.push_back(pc);
    }
    return results;
}

}  // namespace octroi::experiment
