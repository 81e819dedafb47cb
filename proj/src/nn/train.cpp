#include "octroi/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "octroi/nn/optimizer.hpp"

namespace octroi::nn {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ValidationError("learning_rate must be a finite non-negative number");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
    if (patience < 1) throw ValidationError("patience must be >= 1");
    augmentation.validate();
}

Tensor<float> make_batch(const std::vector<const Image*>& images) {
    if (images.empty()) throw ValidationError("make_batch: empty batch");
    const int rows = images.front()->rows, cols = images.front()->cols;
    Tensor<float> batch({static_cast<int>(images.size()), 1, rows, cols});
    const std::size_t plane = static_cast<std::size_t>(rows) * cols;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i]->rows != rows || images[i]->cols != cols)
            throw ValidationError("make_batch: images of different sizes in one batch");
        std::transform(images[i]->px.begin(), images[i]->px.end(), batch.data.begin() + i * plane,
                       [](float v) { return v / 255.0f; });
    }
    return batch;
}

std::vector<float> score_images(Model<float>& model, const std::vector<Image>& images, int batch_size) {
    std::vector<float> out;
    out.reserve(images.size());
    for (std::size_t start = 0; start < images.size(); start += batch_size) {
        const std::size_t end = std::min(images.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<const Image*> ptrs;
        for (std::size_t i = start; i < end; ++i) ptrs.push_back(&images[i]);
        const auto p = model.predict(make_batch(ptrs));
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

namespace {

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

Evaluation evaluate(Model<float>& model, const ImageSet& set, int batch_size) {
    const auto p = score_images(model, set.images, std::max(batch_size, 64));
    Evaluation e;
    e.loss = binary_cross_entropy<float>(p, set.labels);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < p.size(); ++i) correct += ((p[i] >= 0.5f ? 1 : 0) == set.labels[i]);
    e.accuracy = static_cast<double>(correct) / static_cast<double>(p.size());
    return e;
}

}  // namespace

TrainResult train(Model<float>& model, const ImageSet& train_set, const ImageSet& val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    config.validate();
    if (train_set.size() == 0 || val_set.size() == 0) throw ValidationError("train: training and validation sets must be nonempty");
    if (train_set.labels.size() != train_set.size() || val_set.labels.size() != val_set.size())
        throw ValidationError("train: one label per image required");

    const std::size_t n = train_set.size();
    std::vector<float> velocity(model.param_count(), 0.0f);
    std::vector<float> best_params(model.params().begin(), model.params().end());
    EarlyStopping stopper(config.patience);
    TrainResult result;

    const std::uint64_t shuffle_seed = mix_seed(config.seed, "shuffle");
    const std::uint64_t augment_seed = mix_seed(config.seed, "augment");
    const auto lr = static_cast<float>(config.learning_rate);
    const auto momentum = static_cast<float>(config.momentum);

    std::vector<std::size_t> order(n);
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 shuffle_rng(mix_seed(shuffle_seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
            std::vector<Image> augmented;
            augmented.reserve(end - start);
            std::vector<int> labels;
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                std::mt19937_64 rng(mix_seed(augment_seed, static_cast<std::uint64_t>(epoch) * n + i));
                augmented.push_back(augment(train_set.images[i], config.augmentation, rng));
                labels.push_back(train_set.labels[i]);
            }
            std::vector<const Image*> ptrs;
            for (const auto& img : augmented) ptrs.push_back(&img);

            LossAndGrad<float> lg;
            try {
                lg = model.loss_and_grad(make_batch(ptrs), labels);
            } catch (const NonFiniteLossError&) {
                throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch), epoch);
            }
            sgd_nesterov_step<float>(model.params(), lg.gradients, velocity, lr, momentum);
            loss_sum += static_cast<double>(lg.loss) * static_cast<double>(labels.size());
            for (std::size_t k = 0; k < labels.size(); ++k)
                correct += ((lg.probabilities[k] >= 0.5f ? 1 : 0) == labels[k]);
        }

        const auto val = evaluate(model, val_set, config.batch_size);
        if (!std::isfinite(val.loss))
            throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch), epoch);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n);
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
        rec.val_loss = val.loss;
        rec.val_acc = val.accuracy;
        result.history.push_back(rec);
        result.epochs_run = epoch;
        if (on_epoch) on_epoch(rec);

        if (stopper.update(epoch, val.loss)) best_params.assign(model.params().begin(), model.params().end());
        if (stopper.should_stop()) break;
    }
    std::copy(best_params.begin(), best_params.end(), model.params().begin());
    result.best_epoch = stopper.best_epoch();
    return result;
}

std::string history_to_csv(const std::vector<EpochRecord>& history) {
    std::ostringstream os;
    os.precision(9);
    os << "epoch,train_loss,val_loss,train_acc,val_acc\n";
    for (const auto& r : history)
        os << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.train_acc << ',' << r.val_acc << '\n';
    return os.str();
}

}  // namespace octroi::nn
