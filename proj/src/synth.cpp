#include "octroi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "octroi/png_io.hpp"

namespace octroi {

namespace {

constexpr double kVitreous = 8.0;
constexpr double kRpe = 215.0;
constexpr double kDruse = 125.0;
constexpr double kBm = 190.0;
constexpr int kRpeBand = 3;
constexpr int kChoroidBand = 80;

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Druse {
    double center;
    double width;   // pixels
    double height;  // pixels
};

// Bump of the given height that falls to exactly zero at |x| = width / 2.
double druse_profile(const Druse& d, double x) {
    const double half = d.width / 2.0;
    const double dx = x - d.center;
    if (std::abs(dx) > half) return 0.0;
    const double sigma = d.width / 4.0;
    const double edge = std::exp(-half * half / (2 * sigma * sigma));
    const double g = std::exp(-dx * dx / (2 * sigma * sigma));
    return d.height * (g - edge) / (1.0 - edge);
}

double retina_intensity(double rel) {
    // nerve fibre layer near the ILM, alternating plexiform/nuclear bands,
    // then the ellipsoid zone just above the RPE
    double v = 55.0 + 30.0 * std::cos(2.0 * std::numbers::pi * rel * 3.0);
    v += 95.0 * std::exp(-rel / 0.06);
    v += 80.0 * std::exp(-std::pow((rel - 0.88) / 0.03, 2));
    return v;
}

}  // namespace

void SynthConfig::validate() const {
    if (image_width < 8 || image_height < 8) throw ValidationError("synth image must be at least 8x8");
    if (axial_resolution_um <= 0.0 || lateral_resolution_um <= 0.0)
        throw ValidationError("synth resolutions must be positive");
    if (subjects_per_class < 1 || bscans_per_subject < 1)
        throw ValidationError("subjects_per_class and bscans_per_subject must be >= 1");
    if (!(shadow_attenuation >= 0.0 && shadow_attenuation <= 1.0))
        throw ValidationError("shadow_attenuation must lie in [0, 1]");
    if (speckle_sigma < 0.0) throw ValidationError("speckle_sigma must be non-negative");
    if (geometry.curvature_min > geometry.curvature_max)
        throw ValidationError("curvature range is empty");
    if (drusen.count_min < 0 || drusen.count_min > drusen.count_max)
        throw ValidationError("drusen count range is invalid");
    if (drusen.count_max > 0) {
        if (drusen.width_min_um <= 125.0)
            throw ValidationError("drusen minimum width must exceed 125 um for intermediate AMD, got " +
                                  std::to_string(drusen.width_min_um));
        if (drusen.width_min_um > drusen.width_max_um || drusen.height_min_px > drusen.height_max_px ||
            drusen.height_min_px <= 0.0)
            throw ValidationError("drusen size ranges are invalid");
        if (drusen.width_max_um / lateral_resolution_um >= image_width)
            throw ValidationError("drusen wider than the image");
    }
    if (choroid.mean_intensity < 0.0 || choroid.blob_density < 0.0)
        throw ValidationError("choroid texture parameters must be non-negative");
}

std::uint64_t subject_seed(const SynthConfig& config, const std::string& subject_id) {
    return mix_seed(config.seed, subject_id);
}

std::string subject_name(ClassLabel label, int ordinal) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%03d", label == ClassLabel::AMD ? "amd" : "control", ordinal);
    return buf;
}

GeneratedSample generate_bscan(const SynthConfig& config, std::uint64_t subj_seed, ClassLabel label, int index) {
    config.validate();
    const int W = config.image_width;
    const int H = config.image_height;
    const auto& geo = config.geometry;

    // Independent streams keep the choroid and noise draws identical across labels.
    std::mt19937_64 subject_rng(mix_seed(subj_seed, "subject"));
    std::mt19937_64 shape_rng(mix_seed(mix_seed(subj_seed, "shape"), static_cast<std::uint64_t>(index)));
    std::mt19937_64 drusen_rng(mix_seed(mix_seed(subj_seed, "drusen"), static_cast<std::uint64_t>(index)));
    std::mt19937_64 choroid_rng(mix_seed(mix_seed(subj_seed, "choroid"), static_cast<std::uint64_t>(index)));
    std::mt19937_64 noise_rng(mix_seed(mix_seed(subj_seed, "noise"), static_cast<std::uint64_t>(index)));

    const double depth_offset = uniform(subject_rng, -geo.subject_jitter, geo.subject_jitter);
    const double thickness_offset = uniform(subject_rng, -geo.subject_jitter, geo.subject_jitter);

    const double bowl = uniform(shape_rng, geo.curvature_min, geo.curvature_max);
    const double tilt = uniform(shape_rng, -0.5, 0.5) * bowl;
    const double cubic = uniform(shape_rng, -0.25, 0.25) * bowl;
    const double fovea = uniform(shape_rng, 0.4, 0.6) * (W - 1);
    const double pit_width = uniform(shape_rng, 0.06, 0.1) * W;

    const double bm_mean = geo.ilm_depth + depth_offset + geo.retina_thickness + thickness_offset + geo.rpe_bm_gap;

    GeneratedSample out;
    auto& seg = out.segmentation;
    seg.ilm.resize(W);
    seg.rpe.resize(W);
    seg.bm.resize(W);
    out.drusen_footprint.assign(W, false);
    out.drusen_elevation.assign(W, 0.0);

    std::vector<Druse> drusen;
    if (label == ClassLabel::AMD && config.drusen.count_max > 0) {
        const int count = std::uniform_int_distribution<int>(config.drusen.count_min, config.drusen.count_max)(drusen_rng);
        for (int k = 0; k < count; ++k) {
            Druse d;
            d.width = uniform(drusen_rng, config.drusen.width_min_um, config.drusen.width_max_um) /
                      config.lateral_resolution_um;
            d.height = uniform(drusen_rng, config.drusen.height_min_px, config.drusen.height_max_px);
            d.center = uniform(drusen_rng, d.width / 2.0, (W - 1) - d.width / 2.0);
            drusen.push_back(d);
        }
    }

    for (int c = 0; c < W; ++c) {
        const double x = 2.0 * c / (W - 1) - 1.0;
        // rows grow downward, so the bowl bulges toward the bottom in the middle
        const double bm = bm_mean + bowl * (1.0 - x * x) - bowl / 2.0 + tilt * x + cubic * x * x * x;
        const double pit = geo.foveal_pit_depth * std::exp(-std::pow((c - fovea) / pit_width, 2));
        const double rpe_base = bm - geo.rpe_bm_gap;
        double lift = 0.0;
        for (const auto& d : drusen) lift = std::max(lift, druse_profile(d, c));
        for (const auto& d : drusen)
            if (std::abs(c - d.center) <= d.width / 2.0) out.drusen_footprint[c] = true;
        seg.bm[c] = bm;
        seg.rpe[c] = rpe_base - lift;
        seg.ilm[c] = rpe_base - (geo.retina_thickness + thickness_offset - pit);
        out.drusen_elevation[c] = lift;
    }

    const auto [ilm_min, ilm_max] = std::minmax_element(seg.ilm.begin(), seg.ilm.end());
    const double bm_max = *std::max_element(seg.bm.begin(), seg.bm.end());
    if (*ilm_min < 0.0) {
        std::ostringstream os;
        os << "synthetic ILM leaves the image top: min ilm row " << *ilm_min << " < 0";
        throw ValidationError(os.str());
    }
    if (bm_max > H - 1.0) {
        std::ostringstream os;
        os << "synthetic BM leaves the image bottom: max bm row " << bm_max << " > " << H - 1;
        throw ValidationError(os.str());
    }
    for (int c = 0; c < W; ++c)
        if (seg.rpe[c] < seg.ilm[c]) {
            std::ostringstream os;
            os << "druse lifts RPE above ILM at column " << c;
            throw ValidationError(os.str());
        }

    // Dark vessel lumens in a band under BM, positioned relative to the local BM row.
    struct Blob {
        double dr, c, radius;
    };
    std::vector<Blob> blobs;
    {
        const double expected = config.choroid.blob_density * W * kChoroidBand;
        const int count = std::poisson_distribution<int>(expected > 0 ? expected : 1e-12)(choroid_rng);
        for (int k = 0; k < count; ++k) {
            Blob b;
            b.dr = uniform(choroid_rng, 4.0, kChoroidBand - 4.0);
            b.c = uniform(choroid_rng, 0.0, W - 1.0);
            b.radius = uniform(choroid_rng, 2.0, 6.0);
            blobs.push_back(b);
        }
    }

    Image clean(H, W, 0.0f);
    for (int c = 0; c < W; ++c) {
        const int ri = static_cast<int>(std::lround(seg.ilm[c]));
        const int rr = static_cast<int>(std::lround(seg.rpe[c]));
        const int rb = static_cast<int>(std::lround(seg.bm[c]));
        const double span = std::max(1.0, seg.rpe[c] - seg.ilm[c]);
        for (int r = 0; r < H; ++r) {
            double v;
            if (r < ri) {
                v = kVitreous;
            } else if (r < rr && r < rb - 1) {
                v = retina_intensity((r - seg.ilm[c]) / span);
            } else if (r < rb - 1) {
                v = (r < rr + kRpeBand) ? kRpe : kDruse;
            } else if (r <= rb) {
                // two-row BM line; flattening may move the crop top by one row either way
                v = kBm;
            } else {
                const double d = r - rb;
                double texture = 1.0;
                for (const auto& b : blobs) {
                    const double dr = d - b.dr, dc = c - b.c;
                    const double q = (dr * dr + dc * dc) / (b.radius * b.radius);
                    if (q < 9.0) texture -= 0.55 * std::exp(-q);
                }
                v = config.choroid.mean_intensity * (0.45 + 0.55 * std::exp(-d / 50.0)) * std::max(texture, 0.1);
                if (out.drusen_footprint[c]) v *= config.shadow_attenuation;
            }
            clean.at(r, c) = static_cast<float>(v);
        }
    }

    Image noisy(H, W);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sigma = config.speckle_sigma;
    for (std::size_t i = 0; i < clean.px.size(); ++i) {
        const double n = normal(noise_rng);
        const double v = clean.px[i] * std::exp(sigma * n - sigma * sigma / 2.0);
        noisy.px[i] = static_cast<float>(std::clamp(std::nearbyint(v), 0.0, 255.0));
    }

    out.bscan.image = std::move(noisy);
    out.bscan.label = label;
    out.bscan.index_in_volume = index;
    out.clean = std::move(clean);
    return out;
}

std::string segmentation_to_json(const LayerSegmentation& seg) {
    nlohmann::json j = {{"ilm", seg.ilm}, {"rpe", seg.rpe}, {"bm", seg.bm}};
    return j.dump() + "\n";
}

LayerSegmentation segmentation_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    LayerSegmentation seg;
    seg.ilm = j.at("ilm").get<std::vector<double>>();
    seg.rpe = j.at("rpe").get<std::vector<double>>();
    seg.bm = j.at("bm").get<std::vector<double>>();
    return seg;
}

DatasetManifest generate_dataset(const SynthConfig& config, const std::filesystem::path& output_dir) {
    config.validate();
    namespace fs = std::filesystem;
    fs::create_directories(output_dir / "scans");
    fs::create_directories(output_dir / "segmentations");

    DatasetManifest manifest;
    for (ClassLabel label : {ClassLabel::Control, ClassLabel::AMD}) {
        for (int s = 0; s < config.subjects_per_class; ++s) {
            const std::string subject = subject_name(label, s);
            const std::uint64_t seed = subject_seed(config, subject);
            const std::string volume = subject + "-v0";
            for (int i = 0; i < config.bscans_per_subject; ++i) {
                auto sample = generate_bscan(config, seed, label, i);
                char stem[128];
                std::snprintf(stem, sizeof stem, "%s_%03d", volume.c_str(), i);
                ManifestEntry e;
                e.subject_id = subject;
                e.label = label;
                e.volume_id = volume;
                e.index_in_volume = i;
                e.scan_path = std::string("scans/") + stem + ".png";
                e.segmentation_path = std::string("segmentations/") + stem + ".json";
                e.split = Split::Train;
                try {
                    write_png(sample.bscan.image, output_dir / e.scan_path);
                    write_file_atomic(output_dir / e.segmentation_path, segmentation_to_json(sample.segmentation));
                } catch (const std::exception& ex) {
                    throw std::runtime_error("writing sample " + std::string(stem) + " under '" +
                                             output_dir.string() + "': " + ex.what());
                }
                manifest.entries.push_back(std::move(e));
            }
        }
    }
    write_manifest(manifest, output_dir / "manifest.json");
    return manifest;
}

std::vector<LoadedSample> load_entries(const DatasetManifest& manifest, const std::filesystem::path& base_dir) {
    namespace fs = std::filesystem;
    std::vector<LoadedSample> out;
    out.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        const std::string who = "entry " + e.volume_id + "[" + std::to_string(e.index_in_volume) + "]";
        const fs::path scan_path = base_dir / e.scan_path;
        const fs::path seg_path = base_dir / e.segmentation_path;
        if (!fs::exists(scan_path)) throw MissingFileError(who + ": missing scan file '" + scan_path.string() + "'");
        if (!fs::exists(seg_path))
            throw MissingFileError(who + ": missing segmentation file '" + seg_path.string() + "'");

        LoadedSample s;
        s.entry = e;
        try {
            s.bscan.image = read_png(scan_path);
            s.segmentation = segmentation_from_json(read_file(seg_path));
        } catch (const DatasetError&) {
            throw;
        } catch (const std::exception& ex) {
            throw DatasetError(who + ": " + ex.what());
        }
        s.bscan.subject_id = e.subject_id;
        s.bscan.volume_id = e.volume_id;
        s.bscan.index_in_volume = e.index_in_volume;
        s.bscan.label = e.label;

        const auto w = static_cast<std::size_t>(s.bscan.width());
        if (s.segmentation.ilm.size() != w || s.segmentation.rpe.size() != w || s.segmentation.bm.size() != w)
            throw DimensionMismatchError(who + ": segmentation length does not match scan width " +
                                         std::to_string(w));
        if (auto problem = check_segmentation(s.segmentation, s.bscan.width(), s.bscan.height()))
            throw InvariantViolationError(who + ": " + *problem);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<LoadedSample> load_dataset(const std::filesystem::path& manifest_path) {
    if (!std::filesystem::exists(manifest_path))
        throw MissingFileError("manifest '" + manifest_path.string() + "' does not exist");
    const auto manifest = read_manifest(manifest_path);
    return load_entries(manifest, manifest_path.parent_path());
}

}  // namespace octroi
