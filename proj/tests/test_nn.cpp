#include <doctest.h>

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "gradcheck.hpp"
#include "octroi/eval.hpp"
#include "octroi/nn/augment.hpp"
#include "octroi/nn/checkpoint.hpp"
#include "octroi/nn/optimizer.hpp"
#include "octroi/nn/train.hpp"
#include "test_util.hpp"

using namespace octroi;
using namespace octroi::nn;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.input_rows = 8;
    c.input_cols = 8;
    c.block_channels = {2, 3};
    c.convs_per_block = {2, 1};
    c.dense_sizes = {4};
    return c;
}

template <typename T>
Tensor<T> random_batch(int n, int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor<T> t({n, 1, rows, cols});
    for (auto& v : t.data) v = static_cast<T>(u(rng));
    return t;
}

// Bright centre blob vs dark centre blob.
ImageSet blob_set(int n, int size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 20.0);
    ImageSet set;
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        Image img(size, size);
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c) {
                const double d = std::hypot(r - size / 2.0, c - size / 2.0);
                const double base = d < size / 4.0 ? (label ? 200.0 : 40.0) : 120.0;
                img.at(r, c) = static_cast<float>(std::clamp(base + noise(rng), 0.0, 255.0));
            }
        set.images.push_back(img);
        set.labels.push_back(label);
    }
    return set;
}

}  // namespace

TEST_CASE("zero weights give probability one half") {
    Model<float> m(tiny_config(), 1);
    std::fill(m.params().begin(), m.params().end(), 0.0f);
    for (float p : m.predict(random_batch<float>(5, 8, 8, 2))) CHECK(p == 0.5f);
}

TEST_CASE("forward is batch independent and deterministic") {
    Model<float> a(tiny_config(), 7);
    Model<float> b(tiny_config(), 7);
    CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
    const auto batch = random_batch<float>(8, 8, 8, 3);
    const auto all = a.predict(batch);
    CHECK(b.predict(batch) == all);
    for (int i = 0; i < 8; ++i) {
        Tensor<float> one({1, 1, 8, 8});
        std::copy_n(batch.data.begin() + i * 64, 64, one.data.begin());
        CHECK(a.predict(one)[0] == doctest::Approx(all[i]).epsilon(1e-6));
    }
}

TEST_CASE("input shape mismatch names both shapes") {
    Model<float> m(tiny_config(), 1);
    try {
        m.predict(random_batch<float>(2, 9, 8, 1));
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("8 x 8") != std::string::npos);
        CHECK(msg.find("2x1x9x8") != std::string::npos);
    }
}

TEST_CASE("binary cross entropy anchors") {
    const std::vector<double> half{0.5, 0.5};
    const std::vector<int> labels{0, 1};
    CHECK(binary_cross_entropy<double>(half, labels) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    const std::vector<double> exact{0.0, 1.0};
    CHECK(binary_cross_entropy<double>(exact, labels) <= -std::log1p(-1e-7) + 1e-15);
    CHECK_THROWS_AS(binary_cross_entropy<double>(half, std::vector<int>{1}), ValidationError);
}

TEST_CASE("finite-difference gradients per layer type") {
    std::mt19937_64 rng(11);
    SUBCASE("conv") {
        Conv3x3<double> layer(2, 3, 5, 6);
        CHECK(gradcheck::check_layer(layer, gradcheck::random_tensor({2, 2, 5, 6}, rng), rng) < 1e-3);
    }
    SUBCASE("relu") {
        Relu<double> layer;
        CHECK(gradcheck::check_layer(layer, gradcheck::random_tensor({3, 2, 4, 4}, rng), rng) < 1e-3);
    }
    SUBCASE("maxpool") {
        MaxPool2<double> layer;
        CHECK(gradcheck::check_layer(layer, gradcheck::random_tensor({2, 2, 6, 6}, rng), rng) < 1e-3);
    }
    SUBCASE("dense") {
        Dense<double> layer(12, 5);
        CHECK(gradcheck::check_layer(layer, gradcheck::random_tensor({3, 12}, rng), rng) < 1e-3);
    }
}

TEST_CASE("finite-difference gradients through a two-block model") {
    Model<double> m(tiny_config(), 5);
    const auto batch = random_batch<double>(4, 8, 8, 6);
    CHECK(gradcheck::check_model(m, batch, {0, 1, 1, 0}) < 1e-3);
}

TEST_CASE("small-step full-batch descent never increases the loss") {
    Model<double> m(tiny_config(), 9);
    const auto batch = random_batch<double>(8, 8, 8, 10);
    const std::vector<int> labels{0, 1, 0, 1, 1, 0, 1, 0};
    auto params = m.params();
    double prev = m.loss(batch, labels);
    for (int step = 0; step < 100; ++step) {
        const auto g = m.loss_and_grad(batch, labels).gradients;
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= 1e-3 * g[i];
        const double now = m.loss(batch, labels);
        REQUIRE(now <= prev + 1e-12);
        prev = now;
    }
}

TEST_CASE("Nesterov update") {
    std::vector<double> theta{1.0}, grad{0.5}, vel{0.0};
    sgd_nesterov_step<double>(theta, grad, vel, 0.1, 0.9);
    CHECK(vel[0] == doctest::Approx(0.5));
    CHECK(theta[0] == doctest::Approx(0.905).epsilon(1e-12));

    std::vector<double> p{1.0, -2.0}, zero{0.0, 0.0}, v{0.0, 0.0};
    sgd_nesterov_step<double>(p, zero, v, 0.1, 0.9);
    CHECK(p == std::vector<double>{1.0, -2.0});

    std::mt19937_64 rng(4);
    std::normal_distribution<double> n;
    std::vector<double> q(20), g(20), w(20, 0.0);
    for (auto& x : q) x = n(rng);
    for (auto& x : g) x = n(rng);
    auto expected = q;
    for (std::size_t i = 0; i < q.size(); ++i) expected[i] -= 0.01 * g[i];
    sgd_nesterov_step<double>(q, g, w, 0.01, 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(q[i] == doctest::Approx(expected[i]).epsilon(1e-14));
    std::vector<double> short_v{0.0};
    CHECK_THROWS_AS(sgd_nesterov_step<double>(q, g, short_v, 0.01, 0.9), ValidationError);
}

TEST_CASE("augmentation examples") {
    const Image flat(20, 100, 100.0f);
    AugmentConfig off;
    off.enabled = false;
    std::mt19937_64 rng(1);
    CHECK(augment(flat, off, rng) == flat);

    AugmentParams bright;
    bright.brightness = 1.2;
    for (float v : apply_augment(flat, bright).px) CHECK(v == doctest::Approx(120.0f));
    bright.brightness = 3.0;
    for (float v : apply_augment(flat, bright).px) CHECK(v == 255.0f);

    Image ramp(4, 100);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 100; ++c) ramp.at(r, c) = static_cast<float>(c + 1);
    AugmentParams shift;
    shift.shift_cols = 5;
    const auto moved = apply_augment(ramp, shift);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 5; ++c) CHECK(moved.at(r, c) == 0.0f);
        for (int c = 5; c < 100; ++c) CHECK(moved.at(r, c) == ramp.at(r, c - 5));
    }

    AugmentParams flip;
    flip.flip = true;
    CHECK(apply_augment(ramp, flip).at(0, 0) == 100.0f);

    // forced ranges reproduce the brightness example through the sampler
    AugmentConfig forced;
    forced.rotation_degrees = {0.0, 0.0};
    forced.horizontal_flip = false;
    forced.brightness_factor = {1.2, 1.2};
    forced.shift_fraction = 0.0;
    forced.zoom_factor = {1.0, 1.0};
    for (float v : augment(flat, forced, rng).px) CHECK(v == doctest::Approx(120.0f));
}

TEST_CASE("augmentation samples stay in range and are seed deterministic") {
    AugmentConfig cfg;
    std::mt19937_64 a(9), b(9);
    for (int i = 0; i < 200; ++i) {
        const auto p = sample_augment(cfg, 50, 100, a);
        const auto q = sample_augment(cfg, 50, 100, b);
        CHECK(p.rotation_degrees == q.rotation_degrees);
        CHECK(std::abs(p.rotation_degrees) <= 10.0);
        CHECK(p.brightness >= 0.4);
        CHECK(p.brightness <= 1.2);
        CHECK(std::abs(p.shift_cols) <= 5);
        CHECK(std::abs(p.shift_rows) <= 3);
        CHECK(p.zoom >= 0.9);
        CHECK(p.zoom <= 1.2);
    }
    AugmentConfig bad;
    bad.shift_fraction = 0.7;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("checkpoint round trip and corruption") {
    test_util::TempDir dir;
    Model<float> m(tiny_config(), 21);
    save_checkpoint(m, dir.path);
    auto loaded = load_checkpoint(dir.path);
    CHECK(loaded.config() == m.config());
    const auto batch = random_batch<float>(3, 8, 8, 1);
    CHECK(loaded.predict(batch) == m.predict(batch));

    SUBCASE("truncated blob") {
        auto blob = read_file(dir.path / "model.bin");
        blob.resize(blob.size() - 4);
        write_file_atomic(dir.path / "model.bin", blob);
        CHECK_THROWS_AS(load_checkpoint(dir.path), CheckpointShapeError);
    }
    SUBCASE("unknown version") {
        auto header = nlohmann::json::parse(read_file(dir.path / "model.json"));
        header["version"] = 99;
        write_file_atomic(dir.path / "model.json", header.dump());
        try {
            load_checkpoint(dir.path);
            FAIL("expected CheckpointVersionError");
        } catch (const CheckpointVersionError& e) {
            CHECK(e.field() == "version");
        }
    }
    SUBCASE("tensor shape edited") {
        auto header = nlohmann::json::parse(read_file(dir.path / "model.json"));
        header["tensors"][0]["shape"][0] = 5;
        write_file_atomic(dir.path / "model.json", header.dump());
        CHECK_THROWS_AS(load_checkpoint(dir.path), CheckpointShapeError);
    }
}

TEST_CASE("early stopping rule") {
    EarlyStopping s(3);
    CHECK(s.update(1, 1.0));
    CHECK_FALSE(s.update(2, 1.0));
    CHECK_FALSE(s.update(3, 1.0));
    CHECK_FALSE(s.should_stop());
    CHECK_FALSE(s.update(4, 1.0));
    CHECK(s.should_stop());
    CHECK(s.best_epoch() == 1);

    EarlyStopping never(2);
    for (int e = 1; e <= 50; ++e) {
        never.update(e, 10.0 - 0.1 * e);
        CHECK_FALSE(never.should_stop());
    }
}

TEST_CASE("zero learning rate stops at 1 + patience") {
    auto cfg = tiny_config();
    cfg.input_rows = cfg.input_cols = 12;
    Model<float> m(cfg, 3);
    const auto set = blob_set(10, 12, 4);
    TrainConfig tc;
    tc.learning_rate = 0.0;
    tc.patience = 4;
    tc.max_epochs = 100;
    tc.batch_size = 4;
    tc.augmentation.enabled = false;
    const auto before = std::vector<float>(m.params().begin(), m.params().end());
    const auto r = train(m, set, set, tc);
    CHECK(r.epochs_run == 5);
    CHECK(r.history.size() == 5);
    CHECK(r.best_epoch == 1);
    CHECK(std::equal(before.begin(), before.end(), m.params().begin()));
}

TEST_CASE("toy separable set is learned and training is reproducible") {
    ModelConfig cfg;
    cfg.input_rows = cfg.input_cols = 16;
    cfg.block_channels = {4, 8};
    cfg.convs_per_block = {1, 1};
    cfg.dense_sizes = {8};
    const auto train_set = blob_set(40, 16, 1);
    const auto val_set = blob_set(20, 16, 2);
    TrainConfig tc;
    tc.learning_rate = 1e-2;
    tc.max_epochs = 50;
    tc.patience = 50;
    tc.batch_size = 8;
    tc.seed = 5;

    Model<float> a(cfg, 8), b(cfg, 8);
    const auto ra = train(a, train_set, val_set, tc);
    const auto rb = train(b, train_set, val_set, tc);
    CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
    CHECK(ra.best_epoch == rb.best_epoch);

    eval::ScoreSet s;
    for (float p : score_images(a, train_set.images)) s.scores.push_back(p);
    s.labels = train_set.labels;
    CHECK(eval::auroc(s) >= 0.95);

    const auto csv = history_to_csv(ra.history);
    CHECK(csv.rfind("epoch,train_loss,val_loss,train_acc,val_acc\n", 0) == 0);
}

TEST_CASE("make_batch scales to unit range") {
    const Image img(2, 3, 255.0f);
    const auto t = make_batch({&img, &img});
    CHECK(t.shape == std::vector<int>{2, 1, 2, 3});
    for (float v : t.data) CHECK(v == 1.0f);
}
