#include "octroi/experiment/config.hpp"

#include <set>

namespace octroi::experiment {

using nlohmann::json;

namespace {

bool takes_method(RoiKind k) { return k != RoiKind::WholeImage && k != RoiKind::RpeBmMaskOnly; }

/// Reads fields of one JSON object and rejects any key nobody asked for.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ValidationError(where_ + ": expected a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& ex) {
            throw ValidationError(path(key) + ": " + ex.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ValidationError("unknown config key '" + (where_.empty() ? key : where_ + "." + key) + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

nn::Range parse_range(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ValidationError(where + ": expected [low, high]");
    return {j[0].get<double>(), j[1].get<double>()};
}

RoiRequest parse_variant(const json& j, const std::string& where) {
    if (j.is_string()) return parse_variant_name(j.get<std::string>());
    Fields f(j, where);
    std::string kind, method = "none";
    RoiRequest req;
    f.get("kind", kind);
    f.get("method", method);
    f.get("choroid_offset", req.choroid_offset);
    f.get("pad_below", req.pad_below);
    f.finish();
    if (kind.empty()) throw ValidationError(where + ": 'kind' is required");
    req.kind = parse_roi_kind(kind);
    req.method = parse_roi_method(method);
    if (!takes_method(req.kind) && req.method != RoiMethod::None)
        throw ValidationError(where + ": ROI kind '" + kind + "' does not take a method");
    return req;
}

}  // namespace

std::vector<RoiRequest> default_roi_variants() {
    std::vector<RoiRequest> v;
    v.push_back({RoiKind::WholeImage, RoiMethod::None});
    for (auto method : {RoiMethod::Masking, RoiMethod::Cropping})
        for (auto kind : {RoiKind::IlmBm, RoiKind::RpeBm, RoiKind::BmCho}) v.push_back({kind, method});
    v.push_back({RoiKind::RpeBmMaskOnly, RoiMethod::None});
    return v;
}

RoiRequest parse_variant_name(std::string_view name) {
    RoiRequest req;
    if (name == "img" || name == "rpe-bm-mask") {
        req.kind = parse_roi_kind(name);
        return req;
    }
    const auto dash = name.find('-');
    if (dash == std::string_view::npos) throw ValidationError("unknown ROI variant '" + std::string(name) + "'");
    req.method = parse_roi_method(name.substr(0, dash));
    req.kind = parse_roi_kind(name.substr(dash + 1));
    if (req.method == RoiMethod::None || !takes_method(req.kind)) throw ValidationError("unknown ROI variant '" + std::string(name) + "'");
    return req;
}

void ExperimentConfig::finalize() {
    if (roi_variants.empty()) roi_variants = default_roi_variants();
    std::set<std::string> names;
    for (auto& v : roi_variants) {
        v.target_rows = model.input_rows;
        v.target_cols = model.input_cols;
        v.validate();
        if (!names.insert(v.name()).second) throw ValidationError("duplicate ROI variant '" + v.name() + "'");
    }
    if (dataset.manifest.has_value() == dataset.synth.has_value())
        throw ValidationError("dataset needs exactly one of 'manifest' or 'synth'");
    if (dataset.synth) dataset.synth->validate();
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ValidationError("keep_fraction must lie in (0, 1]");
    model.validate();
    train.validate();
    if (eval.bootstrap_B < 100) throw ValidationError("eval.bootstrap_B must be >= 100");
    if (!(eval.alpha > 0.0 && eval.alpha < 1.0)) throw ValidationError("eval.alpha must lie in (0, 1)");
    if (!(eval.threshold >= 0.0 && eval.threshold <= 1.0)) throw ValidationError("eval.threshold must lie in [0, 1]");
    if (threads < 1) throw ValidationError("threads must be >= 1");
}

SynthConfig parse_synth_config(const json& j, std::uint64_t default_seed) {
    SynthConfig s;
    s.seed = default_seed;
    Fields f(j, "dataset.synth");
    f.get("image_width", s.image_width);
    f.get("image_height", s.image_height);
    f.get("axial_resolution_um", s.axial_resolution_um);
    f.get("lateral_resolution_um", s.lateral_resolution_um);
    f.get("subjects_per_class", s.subjects_per_class);
    f.get("bscans_per_subject", s.bscans_per_subject);
    f.get("speckle_sigma", s.speckle_sigma);
    f.get("shadow_attenuation", s.shadow_attenuation);
    f.get("seed", s.seed);
    if (const auto* g = f.child("geometry")) {
        Fields gf(*g, "dataset.synth.geometry");
        gf.get("ilm_depth", s.geometry.ilm_depth);
        gf.get("retina_thickness", s.geometry.retina_thickness);
        gf.get("rpe_bm_gap", s.geometry.rpe_bm_gap);
        gf.get("curvature_min", s.geometry.curvature_min);
        gf.get("curvature_max", s.geometry.curvature_max);
        gf.get("subject_jitter", s.geometry.subject_jitter);
        gf.get("foveal_pit_depth", s.geometry.foveal_pit_depth);
        gf.finish();
    }
    if (const auto* d = f.child("drusen")) {
        Fields df(*d, "dataset.synth.drusen");
        df.get("count_min", s.drusen.count_min);
        df.get("count_max", s.drusen.count_max);
        df.get("width_min_um", s.drusen.width_min_um);
        df.get("width_max_um", s.drusen.width_max_um);
        df.get("height_min_px", s.drusen.height_min_px);
        df.get("height_max_px", s.drusen.height_max_px);
        df.finish();
    }
    if (const auto* c = f.child("choroid")) {
        Fields cf(*c, "dataset.synth.choroid");
        cf.get("mean_intensity", s.choroid.mean_intensity);
        cf.get("blob_density", s.choroid.blob_density);
        cf.finish();
    }
    f.finish();
    return s;
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    ExperimentConfig c;
    Fields f(j, "");
    f.get("seed", c.seed);
    f.get("keep_fraction", c.keep_fraction);
    f.get("threads", c.threads);
    std::string out;
    f.get("output_dir", out);
    if (!out.empty()) c.output_dir = base_dir / out;

    if (const auto* r = f.child("split_ratios")) {
        if (!r->is_array() || r->size() != 3) throw ValidationError("split_ratios: expected [train, val, test]");
        for (int k = 0; k < 3; ++k) c.split_ratios[k] = (*r)[k].get<double>();
    }

    const auto* ds = f.child("dataset");
    if (!ds) throw ValidationError("config needs a 'dataset' section");
    {
        Fields df(*ds, "dataset");
        std::string manifest;
        df.get("manifest", manifest);
        if (!manifest.empty()) c.dataset.manifest = base_dir / manifest;
        if (const auto* s = df.child("synth")) c.dataset.synth = parse_synth_config(*s, c.seed);
        df.finish();
    }

    if (const auto* vs = f.child("roi_variants")) {
        if (!vs->is_array()) throw ValidationError("roi_variants: expected an array");
        for (std::size_t i = 0; i < vs->size(); ++i)
            c.roi_variants.push_back(parse_variant((*vs)[i], "roi_variants[" + std::to_string(i) + "]"));
        if (c.roi_variants.empty()) throw ValidationError("roi_variants must not be empty");
    }

    if (const auto* m = f.child("model")) {
        Fields mf(*m, "model");
        if (const auto* size = mf.child("input_size")) {
            if (!size->is_array() || size->size() != 2) throw ValidationError("model.input_size: expected [rows, cols]");
            c.model.input_rows = (*size)[0].get<int>();
            c.model.input_cols = (*size)[1].get<int>();
        }
        mf.get("block_channels", c.model.block_channels);
        mf.get("convs_per_block", c.model.convs_per_block);
        mf.get("dense_sizes", c.model.dense_sizes);
        mf.finish();
    }

    if (const auto* t = f.child("train")) {
        Fields tf(*t, "train");
        tf.get("learning_rate", c.train.learning_rate);
        tf.get("momentum", c.train.momentum);
        tf.get("batch_size", c.train.batch_size);
        tf.get("max_epochs", c.train.max_epochs);
        tf.get("patience", c.train.patience);
        if (const auto* a = tf.child("augmentation")) {
            Fields af(*a, "train.augmentation");
            auto& aug = c.train.augmentation;
            af.get("enabled", aug.enabled);
            af.get("horizontal_flip", aug.horizontal_flip);
            af.get("shift_fraction", aug.shift_fraction);
            if (const auto* r = af.child("rotation_degrees")) aug.rotation_degrees = parse_range(*r, "train.augmentation.rotation_degrees");
            if (const auto* r = af.child("brightness_factor")) aug.brightness_factor = parse_range(*r, "train.augmentation.brightness_factor");
            if (const auto* r = af.child("zoom_factor")) aug.zoom_factor = parse_range(*r, "train.augmentation.zoom_factor");
            af.finish();
        }
        tf.finish();
    }

    if (const auto* e = f.child("eval")) {
        Fields ef(*e, "eval");
        ef.get("bootstrap_B", c.eval.bootstrap_B);
        ef.get("alpha", c.eval.alpha);
        ef.get("threshold", c.eval.threshold);
        std::string mode;
        ef.get("delong_mode", mode);
        if (!mode.empty()) c.eval.delong_mode = eval::parse_delong_mode(mode);
        ef.finish();
    }
    f.finish();
    c.finalize();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& ex) {
        throw ValidationError("config '" + path.string() + "' is not valid JSON: " + ex.what());
    } catch (const std::runtime_error& ex) {
        throw ValidationError(ex.what());
    }
    return parse_config(j, path.parent_path());
}

json synth_config_to_json(const SynthConfig& s) {
    return {{"image_width", s.image_width},
            {"image_height", s.image_height},
            {"axial_resolution_um", s.axial_resolution_um},
            {"lateral_resolution_um", s.lateral_resolution_um},
            {"subjects_per_class", s.subjects_per_class},
            {"bscans_per_subject", s.bscans_per_subject},
            {"speckle_sigma", s.speckle_sigma},
            {"shadow_attenuation", s.shadow_attenuation},
            {"seed", s.seed},
            {"geometry",
             {{"ilm_depth", s.geometry.ilm_depth},
              {"retina_thickness", s.geometry.retina_thickness},
              {"rpe_bm_gap", s.geometry.rpe_bm_gap},
              {"curvature_min", s.geometry.curvature_min},
              {"curvature_max", s.geometry.curvature_max},
              {"subject_jitter", s.geometry.subject_jitter},
              {"foveal_pit_depth", s.geometry.foveal_pit_depth}}},
            {"drusen",
             {{"count_min", s.drusen.count_min},
              {"count_max", s.drusen.count_max},
              {"width_min_um", s.drusen.width_min_um},
              {"width_max_um", s.drusen.width_max_um},
              {"height_min_px", s.drusen.height_min_px},
              {"height_max_px", s.drusen.height_max_px}}},
            {"choroid", {{"mean_intensity", s.choroid.mean_intensity}, {"blob_density", s.choroid.blob_density}}}};
}

json config_to_json(const ExperimentConfig& c) {
    json variants = json::array();
    for (const auto& v : c.roi_variants)
        variants.push_back({{"kind", to_string(v.kind)},
                            {"method", to_string(v.method)},
                            {"choroid_offset", v.choroid_offset},
                            {"pad_below", v.pad_below}});
    json dataset = json::object();
    if (c.dataset.manifest) dataset["manifest"] = c.dataset.manifest->string();
    if (c.dataset.synth) dataset["synth"] = synth_config_to_json(*c.dataset.synth);
    const auto& a = c.train.augmentation;
    return {{"dataset", dataset},
            {"keep_fraction", c.keep_fraction},
            {"split_ratios", c.split_ratios},
            {"roi_variants", variants},
            {"model",
             {{"input_size", {c.model.input_rows, c.model.input_cols}},
              {"block_channels", c.model.block_channels},
              {"convs_per_block", c.model.convs_per_block},
              {"dense_sizes", c.model.dense_sizes}}},
            {"train",
             {{"learning_rate", c.train.learning_rate},
              {"momentum", c.train.momentum},
              {"batch_size", c.train.batch_size},
              {"max_epochs", c.train.max_epochs},
              {"patience", c.train.patience},
              {"augmentation",
               {{"enabled", a.enabled},
                {"rotation_degrees", {a.rotation_degrees.lo, a.rotation_degrees.hi}},
                {"horizontal_flip", a.horizontal_flip},
                {"brightness_factor", {a.brightness_factor.lo, a.brightness_factor.hi}},
                {"shift_fraction", a.shift_fraction},
                {"zoom_factor", {a.zoom_factor.lo, a.zoom_factor.hi}}}}}},
            {"eval",
             {{"bootstrap_B", c.eval.bootstrap_B},
              {"alpha", c.eval.alpha},
              {"threshold", c.eval.threshold},
              {"delong_mode", to_string(c.eval.delong_mode)}}},
            {"output_dir", c.output_dir.string()},
            {"seed", c.seed},
            {"threads", c.threads}};
}

}  // namespace octroi::experiment
