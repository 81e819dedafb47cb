#include "octroi/roi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "octroi/png_io.hpp"

namespace octroi {

std::string_view to_string(RoiKind kind) {
    switch (kind) {
        case RoiKind::WholeImage: return "img";
        case RoiKind::IlmBm: return "ilm-bm";
        case RoiKind::RpeBm: return "rpe-bm";
        case RoiKind::BmCho: return "bm-cho";
        case RoiKind::RpeBmMaskOnly: return "rpe-bm-mask";
    }
    return "img";
}

std::string_view to_string(RoiMethod method) {
    switch (method) {
        case RoiMethod::None: return "none";
        case RoiMethod::Masking: return "masking";
        case RoiMethod::Cropping: return "cropping";
    }
    return "none";
}

RoiKind parse_roi_kind(std::string_view text) {
    for (auto k : {RoiKind::WholeImage, RoiKind::IlmBm, RoiKind::RpeBm, RoiKind::BmCho, RoiKind::RpeBmMaskOnly})
        if (to_string(k) == text) return k;
    throw ValidationError("unknown ROI kind '" + std::string(text) + "'");
}

RoiMethod parse_roi_method(std::string_view text) {
    for (auto m : {RoiMethod::None, RoiMethod::Masking, RoiMethod::Cropping})
        if (to_string(m) == text) return m;
    throw ValidationError("unknown ROI method '" + std::string(text) + "'");
}

void RoiRequest::validate() {
    if (kind == RoiKind::WholeImage || kind == RoiKind::RpeBmMaskOnly)
        method = RoiMethod::None;
    else if (method == RoiMethod::None)
        throw ValidationError("ROI kind '" + std::string(to_string(kind)) + "' requires a method (masking or cropping)");
    if (choroid_offset < 1) throw ValidationError("choroid_offset must be >= 1");
    if (target_rows < 1 || target_cols < 1) throw ValidationError("ROI target size must be positive");
}

std::string RoiRequest::name() const {
    if (method == RoiMethod::None) return std::string(to_string(kind));
    return std::string(to_string(method)) + "-" + std::string(to_string(kind));
}

namespace {
int round_row(double v) { return static_cast<int>(std::lround(v)); }
}  // namespace

FlattenResult flatten(const BScan& bscan, const LayerSegmentation& seg) {
    const int W = bscan.width(), H = bscan.height();
    if (auto problem = check_segmentation(seg, W, H)) throw ValidationError("flatten: " + *problem);
    const double mean = std::accumulate(seg.bm.begin(), seg.bm.end(), 0.0) / W;

    FlattenResult out;
    out.reference_row = round_row(mean);
    out.shifts.resize(W);
    out.image = bscan;
    out.image.image = Image(H, W, 0.0f);
    out.segmentation = seg;
    for (int c = 0; c < W; ++c) {
        const int s = round_row(mean - seg.bm[c]);
        out.shifts[c] = s;
        for (int r = std::max(0, s); r < std::min(H, H + s); ++r) out.image.image.at(r, c) = bscan.image.at(r - s, c);
        out.segmentation.ilm[c] += s;
        out.segmentation.rpe[c] += s;
        out.segmentation.bm[c] += s;
    }
    return out;
}

Image mask_band(const Image& image, const std::vector<double>& upper, const std::vector<double>& lower) {
    Image out(image.rows, image.cols, 0.0f);
    for (int c = 0; c < image.cols; ++c) {
        const int top = std::max(0, round_row(upper[c]));
        const int bottom = std::min(image.rows - 1, round_row(lower[c]));
        for (int r = top; r <= bottom; ++r) out.at(r, c) = image.at(r, c);
    }
    return out;
}

Image rpe_bm_mask(const BScan& bscan, const LayerSegmentation& seg) {
    Image ones(bscan.height(), bscan.width(), 1.0f);
    return mask_band(ones, seg.rpe, seg.bm);
}

namespace {

Image crop_rows(const Image& image, int top, int bottom, bool pad_below, std::string_view what) {
    top = std::max(top, 0);
    if (bottom > image.rows - 1 && !pad_below) {
        const int deficit = bottom - (image.rows - 1);
        throw RoiBoundsError(std::string(what) + " crop needs rows up to " + std::to_string(bottom) +
                                 " but the image ends at row " + std::to_string(image.rows - 1) + " (deficit " +
                                 std::to_string(deficit) + " rows)",
                             deficit);
    }
    if (bottom < top) bottom = top;
    Image out(bottom - top + 1, image.cols, 0.0f);
    for (int r = top; r <= std::min(bottom, image.rows - 1); ++r)
        std::copy_n(image.px.begin() + static_cast<std::ptrdiff_t>(r) * image.cols, image.cols,
                    out.px.begin() + static_cast<std::ptrdiff_t>(r - top) * image.cols);
    return out;
}

}  // namespace

Image extract_roi(const BScan& bscan, const LayerSegmentation& seg, const RoiRequest& request) {
    if (auto problem = check_segmentation(seg, bscan.width(), bscan.height()))
        throw ValidationError("extract_roi: " + *problem);
    RoiRequest req = request;
    req.validate();

    switch (req.kind) {
        case RoiKind::WholeImage: return bscan.image;
        case RoiKind::RpeBmMaskOnly: return rpe_bm_mask(bscan, seg);
        default: break;
    }

    if (req.method == RoiMethod::Masking) {
        switch (req.kind) {
            case RoiKind::IlmBm: return mask_band(bscan.image, seg.ilm, seg.bm);
            case RoiKind::RpeBm: return mask_band(bscan.image, seg.rpe, seg.bm);
            case RoiKind::BmCho: {
                std::vector<double> deep(seg.bm);
                for (double& v : deep) v += req.choroid_offset - 1;
                return mask_band(bscan.image, seg.bm, deep);
            }
            default: break;
        }
    }

    const auto flat = flatten(bscan, seg);
    const auto& fs = flat.segmentation;
    const auto max_bm = static_cast<int>(std::ceil(*std::max_element(fs.bm.begin(), fs.bm.end())));
    switch (req.kind) {
        case RoiKind::IlmBm:
            return crop_rows(flat.image.image, static_cast<int>(std::floor(*std::min_element(fs.ilm.begin(), fs.ilm.end()))),
                             max_bm, req.pad_below, "ilm-bm");
        case RoiKind::RpeBm:
            return crop_rows(flat.image.image, static_cast<int>(std::floor(*std::min_element(fs.rpe.begin(), fs.rpe.end()))),
                             max_bm, req.pad_below, "rpe-bm");
        case RoiKind::BmCho:
            return crop_rows(flat.image.image, flat.reference_row, flat.reference_row + req.choroid_offset - 1,
                             req.pad_below, "bm-cho");
        default: break;
    }
    throw ValidationError("unsupported ROI request '" + req.name() + "'");
}

Image resize(const Image& image, int rows, int cols) {
    if (image.empty()) throw ValidationError("resize: empty input image");
    if (rows < 1 || cols < 1) throw ValidationError("resize: target size must be positive");
    Image out(rows, cols);
    auto coord = [](int i, int out_n, int in_n) {
        if (out_n == 1) return (in_n - 1) / 2.0;
        return static_cast<double>(i) * (in_n - 1) / (out_n - 1);
    };
    std::vector<int> c0(cols), c1(cols);
    std::vector<double> cw(cols);
    for (int j = 0; j < cols; ++j) {
        const double x = coord(j, cols, image.cols);
        c0[j] = std::min(static_cast<int>(std::floor(x)), image.cols - 1);
        c1[j] = std::min(c0[j] + 1, image.cols - 1);
        cw[j] = x - c0[j];
    }
    for (int i = 0; i < rows; ++i) {
        const double y = coord(i, rows, image.rows);
        const int r0 = std::min(static_cast<int>(std::floor(y)), image.rows - 1);
        const int r1 = std::min(r0 + 1, image.rows - 1);
        const double wy = y - r0;
        for (int j = 0; j < cols; ++j) {
            const double top = image.at(r0, c0[j]) * (1.0 - cw[j]) + image.at(r0, c1[j]) * cw[j];
            const double bot = image.at(r1, c0[j]) * (1.0 - cw[j]) + image.at(r1, c1[j]) * cw[j];
            const double v = top * (1.0 - wy) + bot * wy;
            out.at(i, j) = static_cast<float>(std::clamp(v, 0.0, 255.0));
        }
    }
    return out;
}

Image prepare_model_input(const BScan& bscan, const LayerSegmentation& seg, const RoiRequest& request) {
    Image roi = extract_roi(bscan, seg, request);
    if (request.kind == RoiKind::RpeBmMaskOnly)
        for (float& v : roi.px) v *= 255.0f;
    Image sized = resize(roi, request.target_rows, request.target_cols);
    const auto bytes = quantize(sized);
    for (std::size_t i = 0; i < bytes.size(); ++i) sized.px[i] = bytes[i];
    return sized;
}

}  // namespace octroi
