#include <doctest.h>

#include <cmath>
#include <random>

#include "octroi/roi.hpp"
#include "octroi/synth.hpp"
#include "oracles.hpp"

using namespace octroi;

namespace {

BScan ramp_scan(int rows, int cols) {
    BScan b;
    b.image = Image(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) b.image.at(r, c) = static_cast<float>(1 + (r * 7 + c * 3) % 250);
    return b;
}

LayerSegmentation flat_seg(int cols, double ilm, double rpe, double bm) {
    return {std::vector<double>(cols, ilm), std::vector<double>(cols, rpe), std::vector<double>(cols, bm)};
}

RoiRequest request(RoiKind kind, RoiMethod method) {
    RoiRequest r;
    r.kind = kind;
    r.method = method;
    return r;
}

}  // namespace

TEST_CASE("flatten leaves a flat BM untouched") {
    const auto scan = ramp_scan(120, 16);
    const auto f = flatten(scan, flat_seg(16, 10, 45, 50));
    for (int s : f.shifts) CHECK(s == 0);
    CHECK(f.image.image == scan.image);
    CHECK(f.reference_row == 50);
}

TEST_CASE("flatten shifts each column onto the mean BM row") {
    const auto scan = ramp_scan(100, 3);
    LayerSegmentation seg{{20, 30, 40}, {35, 45, 55}, {40, 50, 60}};
    const auto f = flatten(scan, seg);
    CHECK(f.shifts == std::vector<int>{10, 0, -10});
    CHECK(f.segmentation.bm == std::vector<double>{50, 50, 50});
    CHECK(f.segmentation.ilm == std::vector<double>{30, 30, 30});
    CHECK(f.segmentation.rpe == std::vector<double>{45, 45, 45});
    // vacated rows are zero, everything else is a pure vertical shift
    for (int r = 0; r < 10; ++r) CHECK(f.image.image.at(r, 0) == 0.0f);
    for (int r = 90; r < 100; ++r) CHECK(f.image.image.at(r, 2) == 0.0f);
    CHECK(f.image.image.at(50, 0) == scan.image.at(40, 0));
    CHECK(f.image.image.at(50, 2) == scan.image.at(60, 2));
}

TEST_CASE("masking keeps exactly the band between two curves") {
    const auto scan = ramp_scan(40, 12);
    const auto out = extract_roi(scan, flat_seg(12, 10, 15, 20), request(RoiKind::IlmBm, RoiMethod::Masking));
    REQUIRE(out.rows == 40);
    REQUIRE(out.cols == 12);
    for (int r = 0; r < 40; ++r)
        for (int c = 0; c < 12; ++c) {
            if (r >= 10 && r <= 20)
                CHECK(out.at(r, c) == scan.image.at(r, c));
            else
                CHECK(out.at(r, c) == 0.0f);
        }
    // masking twice changes nothing
    BScan masked = scan;
    masked.image = out;
    CHECK(extract_roi(masked, flat_seg(12, 10, 15, 20), request(RoiKind::IlmBm, RoiMethod::Masking)) == out);
}

TEST_CASE("whole image request is the identity") {
    const auto scan = ramp_scan(30, 10);
    CHECK(extract_roi(scan, flat_seg(10, 5, 12, 15), request(RoiKind::WholeImage, RoiMethod::None)) == scan.image);
}

TEST_CASE("cropping heights follow the flattened curves") {
    const auto scan = ramp_scan(200, 5);
    LayerSegmentation seg{{20, 22, 25, 21, 20}, {60, 58, 50, 59, 60}, {64, 65, 66, 65, 64}};
    const auto f = flatten(scan, seg);
    double lo = 1e9, hi = -1e9;
    for (int c = 0; c < 5; ++c) {
        lo = std::min(lo, f.segmentation.ilm[c]);
        hi = std::max(hi, f.segmentation.bm[c]);
    }
    const auto ilm_bm = extract_roi(scan, seg, request(RoiKind::IlmBm, RoiMethod::Cropping));
    CHECK(ilm_bm.rows == static_cast<int>(std::ceil(hi) - std::floor(lo)) + 1);
    CHECK(ilm_bm.cols == 5);

    const auto cho = extract_roi(scan, seg, request(RoiKind::BmCho, RoiMethod::Cropping));
    CHECK(cho.rows == 80);
    CHECK(cho.cols == 5);
    // first crop row is the flattened BM row
    for (int c = 0; c < 5; ++c) CHECK(cho.at(0, c) == f.image.image.at(f.reference_row, c));
}

TEST_CASE("a BM-CHO crop past the bottom names the deficit unless padding is allowed") {
    const auto scan = ramp_scan(100, 4);
    const auto seg = flat_seg(4, 10, 45, 50);
    auto req = request(RoiKind::BmCho, RoiMethod::Cropping);
    try {
        extract_roi(scan, seg, req);
        FAIL("expected RoiBoundsError");
    } catch (const RoiBoundsError& e) {
        CHECK(e.deficit() == 30);
        CHECK(std::string(e.what()).find("30") != std::string::npos);
    }
    req.pad_below = true;
    const auto out = extract_roi(scan, seg, req);
    CHECK(out.rows == 80);
    CHECK(out.at(79, 0) == 0.0f);
    CHECK(out.at(49, 0) == scan.image.at(99, 0));
}

TEST_CASE("RPE-BM mask is binary and thickens under drusen") {
    SynthConfig cfg;
    cfg.seed = 3;
    const auto s = generate_bscan(cfg, 12345, ClassLabel::AMD, 0);
    const auto mask = extract_roi(s.bscan, s.segmentation, request(RoiKind::RpeBmMaskOnly, RoiMethod::None));
    REQUIRE(mask.rows == s.bscan.height());
    double thick_in = 0, thick_out = 0;
    int n_in = 0, n_out = 0;
    for (int c = 0; c < mask.cols; ++c) {
        int ones = 0;
        for (int r = 0; r < mask.rows; ++r) {
            const float v = mask.at(r, c);
            CHECK((v == 0.0f || v == 1.0f));
            ones += v == 1.0f;
        }
        if (s.drusen_elevation[c] > 2.0) {
            thick_in += ones;
            ++n_in;
        } else if (!s.drusen_footprint[c]) {
            thick_out += ones;
            ++n_out;
        }
    }
    REQUIRE(n_in > 0);
    CHECK(thick_in / n_in > thick_out / n_out + 1.0);
}

TEST_CASE("resize matches an independent bilinear reference") {
    Image img(2, 2);
    img.px = {0, 255, 255, 0};
    const auto out = resize(img, 4, 4);
    const auto ref = oracle::resize({0, 255, 255, 0}, 2, 2, 4, 4);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(out.px[i] == doctest::Approx(ref[i]).epsilon(1e-6));
    // interior pixels are mixtures, corners keep their source values
    CHECK(out.at(0, 0) == 0.0f);
    CHECK(out.at(0, 3) == 255.0f);
    CHECK(out.at(1, 1) == doctest::Approx(255.0 * 4.0 / 9.0));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 255);
    Image big(13, 17);
    std::vector<double> src;
    for (auto& p : big.px) {
        p = static_cast<float>(u(rng));
        src.push_back(p);
    }
    const auto down = resize(big, 6, 29);
    const auto ref2 = oracle::resize(src, 13, 17, 6, 29);
    for (std::size_t i = 0; i < ref2.size(); ++i) CHECK(down.px[i] == doctest::Approx(ref2[i]).epsilon(1e-5));
}

TEST_CASE("resize identity, constants and errors") {
    const auto scan = ramp_scan(24, 24);
    CHECK(resize(scan.image, 24, 24) == scan.image);
    const Image flat(9, 31, 77.0f);
    const auto out = resize(flat, 40, 5);
    for (float v : out.px) CHECK(v == doctest::Approx(77.0f));
    CHECK_THROWS_AS(resize(flat, 0, 5), ValidationError);
}

TEST_CASE("model input is quantized and sized to the request") {
    SynthConfig cfg;
    const auto s = generate_bscan(cfg, 1, ClassLabel::AMD, 0);
    auto req = request(RoiKind::RpeBmMaskOnly, RoiMethod::None);
    req.target_rows = 48;
    req.target_cols = 64;
    const auto img = prepare_model_input(s.bscan, s.segmentation, req);
    CHECK(img.rows == 48);
    CHECK(img.cols == 64);
    float hi = 0;
    for (float v : img.px) {
        CHECK(v == std::round(v));
        hi = std::max(hi, v);
    }
    CHECK(hi == 255.0f);
}

TEST_CASE("request names and parsing") {
    CHECK(request(RoiKind::BmCho, RoiMethod::Cropping).name() == "cropping-bm-cho");
    CHECK(request(RoiKind::WholeImage, RoiMethod::None).name() == "img");
    CHECK(request(RoiKind::RpeBmMaskOnly, RoiMethod::None).name() == "rpe-bm-mask");
    auto bad = request(RoiKind::IlmBm, RoiMethod::None);
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    auto zero = request(RoiKind::BmCho, RoiMethod::Cropping);
    zero.choroid_offset = 0;
    CHECK_THROWS_AS(zero.validate(), ValidationError);
}
