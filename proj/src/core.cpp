#include "octroi/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace octroi {

using nlohmann::json;

std::string_view to_string(ClassLabel label) { return label == ClassLabel::AMD ? "amd" : "control"; }

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

ClassLabel parse_label(std::string_view text) {
    if (text == "amd" || text == "AMD") return ClassLabel::AMD;
    if (text == "control" || text == "Control") return ClassLabel::Control;
    throw ValidationError("unknown label '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "val") return Split::Val;
    if (text == "test") return Split::Test;
    throw ValidationError("unknown split '" + std::string(text) + "'");
}

Image::Image(int rows_, int cols_, float fill) : rows(rows_), cols(cols_) {
    if (rows_ < 1 || cols_ < 1)
        throw ValidationError("image dimensions must be positive, got " + std::to_string(rows_) + "x" +
                              std::to_string(cols_));
    px.assign(static_cast<std::size_t>(rows_) * cols_, fill);
}

std::optional<std::string> check_segmentation(const LayerSegmentation& seg, int width, int height) {
    const auto w = static_cast<std::size_t>(width);
    if (seg.ilm.size() != w || seg.rpe.size() != w || seg.bm.size() != w) {
        std::ostringstream os;
        os << "segmentation length mismatch: expected " << width << " columns, got ilm=" << seg.ilm.size()
           << " rpe=" << seg.rpe.size() << " bm=" << seg.bm.size();
        return os.str();
    }
    for (std::size_t c = 0; c < w; ++c) {
        const double ilm = seg.ilm[c], rpe = seg.rpe[c], bm = seg.bm[c];
        if (!(0.0 <= ilm && ilm <= rpe && rpe <= bm && bm <= height - 1.0)) {
            std::ostringstream os;
            os << "layer order violated at column " << c << ": need 0 <= ilm <= rpe <= bm <= " << height - 1
               << ", got ilm=" << ilm << " rpe=" << rpe << " bm=" << bm;
            return os.str();
        }
    }
    return std::nullopt;
}

void DatasetManifest::validate() const {
    std::set<std::pair<std::string, int>> seen;
    std::map<std::string, std::pair<ClassLabel, Split>> subjects;
    for (const auto& e : entries) {
        if (!seen.emplace(e.volume_id, e.index_in_volume).second)
            throw ValidationError("duplicate manifest entry for volume '" + e.volume_id + "' index " +
                                  std::to_string(e.index_in_volume));
        auto [it, inserted] = subjects.emplace(e.subject_id, std::pair{e.label, e.split});
        if (!inserted) {
            if (it->second.first != e.label)
                throw ValidationError("subject '" + e.subject_id + "' has entries with different labels");
            if (it->second.second != e.split)
                throw ValidationError("subject '" + e.subject_id + "' has entries in different splits");
        }
    }
}

std::string manifest_to_json(const DatasetManifest& manifest) {
    json arr = json::array();
    for (const auto& e : manifest.entries) {
        arr.push_back({{"subject_id", e.subject_id},
                       {"label", to_string(e.label)},
                       {"volume_id", e.volume_id},
                       {"scan_path", e.scan_path},
                       {"segmentation_path", e.segmentation_path},
                       {"index_in_volume", e.index_in_volume},
                       {"split", to_string(e.split)}});
    }
    return arr.dump(2) + "\n";
}

DatasetManifest manifest_from_json(std::string_view text) {
    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("manifest is not valid JSON: ") + ex.what());
    }
    if (!arr.is_array()) throw ValidationError("manifest must be a JSON array");
    DatasetManifest m;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& rec = arr[i];
        try {
            ManifestEntry e;
            e.subject_id = rec.at("subject_id").get<std::string>();
            e.label = parse_label(rec.at("label").get<std::string>());
            e.volume_id = rec.at("volume_id").get<std::string>();
            e.scan_path = rec.at("scan_path").get<std::string>();
            e.segmentation_path = rec.at("segmentation_path").get<std::string>();
            e.index_in_volume = rec.at("index_in_volume").get<int>();
            e.split = parse_split(rec.at("split").get<std::string>());
            m.entries.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw ValidationError("manifest entry " + std::to_string(i) + ": " + ex.what());
        }
    }
    m.validate();
    return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    write_file_atomic(path, manifest_to_json(manifest));
}

DatasetManifest read_manifest(const std::filesystem::path& path) { return manifest_from_json(read_file(path)); }

std::array<int, 3> apportion(int total, const SplitRatios& ratios) {
    std::array<int, 3> counts{};
    std::array<double, 3> rem{};
    int assigned = 0;
    for (int k = 0; k < 3; ++k) {
        const double quota = total * ratios[k];
        counts[k] = static_cast<int>(std::floor(quota));
        rem[k] = quota - counts[k];
        assigned += counts[k];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
    for (int i = 0; assigned < total; i = (i + 1) % 3) {
        if (ratios[order[i]] > 0.0) {
            ++counts[order[i]];
            ++assigned;
        }
    }
    return counts;
}

DatasetManifest split_subjects(const DatasetManifest& manifest, const SplitRatios& ratios, std::uint64_t seed) {
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1, got " + std::to_string(sum));
    for (double r : ratios)
        if (r < 0.0) throw ValidationError("split ratios must be non-negative");
    const int nonzero_splits = static_cast<int>(std::count_if(ratios.begin(), ratios.end(), [](double r) { return r > 0.0; }));

    std::map<std::string, ClassLabel> subject_label;
    for (const auto& e : manifest.entries) {
        auto [it, inserted] = subject_label.emplace(e.subject_id, e.label);
        if (!inserted && it->second != e.label)
            throw ValidationError("subject '" + e.subject_id + "' has entries with different labels");
    }

    std::map<std::string, Split> assignment;
    for (ClassLabel label : {ClassLabel::Control, ClassLabel::AMD}) {
        // std::map iteration gives subject_id lexicographic order.
        std::vector<std::string> subjects;
        for (const auto& [id, l] : subject_label)
            if (l == label) subjects.push_back(id);
        if (subjects.empty()) continue;
        if (static_cast<int>(subjects.size()) < nonzero_splits)
            throw ValidationError("class '" + std::string(to_string(label)) + "' has " +
                                  std::to_string(subjects.size()) + " subjects, fewer than the " +
                                  std::to_string(nonzero_splits) + " requested splits");
        std::mt19937_64 rng(mix_seed(seed, to_string(label)));
        std::shuffle(subjects.begin(), subjects.end(), rng);
        const auto counts = apportion(static_cast<int>(subjects.size()), ratios);
        std::size_t pos = 0;
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < counts[k]; ++i) assignment[subjects[pos++]] = static_cast<Split>(k);
    }

    DatasetManifest out = manifest;
    for (auto& e : out.entries) e.split = assignment.at(e.subject_id);
    return out;
}

IndexRange select_central_bscans(int n, double keep_fraction) {
    if (n < 1) throw ValidationError("volume must contain at least one B-scan");
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
        throw ValidationError("keep_fraction must lie in (0, 1], got " + std::to_string(keep_fraction));
    const int size = std::clamp(static_cast<int>(std::lround(n * keep_fraction)), 1, n);
    const int first = (n - size) / 2;
    return {first, first + size - 1};
}

DatasetManifest filter_central(const DatasetManifest& manifest, double keep_fraction) {
    std::map<std::string, int> volume_size;
    for (const auto& e : manifest.entries) {
        int& n = volume_size[e.volume_id];
        n = std::max(n, e.index_in_volume + 1);
    }
    DatasetManifest out;
    for (const auto& e : manifest.entries) {
        const auto window = select_central_bscans(volume_size.at(e.volume_id), keep_fraction);
        if (e.index_in_volume >= window.first && e.index_in_volume <= window.last) out.entries.push_back(e);
    }
    return out;
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view stream) {
    // FNV-1a over the stream name
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : stream) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return mix_seed(seed, h);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw std::runtime_error("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace octroi
