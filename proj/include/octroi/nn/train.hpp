#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "octroi/core.hpp"
#include "octroi/nn/augment.hpp"
#include "octroi/nn/model.hpp"

namespace octroi::nn {

struct TrainConfig {
    double learning_rate = 1e-3;
    double momentum = 0.9;
    int batch_size = 32;
    int max_epochs = 2500;
    int patience = 20;
    std::uint64_t seed = 0;
    AugmentConfig augmentation;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

/// Images at model input size with intensities in [0, 255]; labels 0/1.
struct ImageSet {
    std::vector<Image> images;
    std::vector<int> labels;

    std::size_t size() const { return images.size(); }
};

struct EpochRecord {
    int epoch = 0;  ///< 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    int epochs_run = 0;
};

class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

/// Patience-based stopping on validation loss. An epoch improves when its loss
/// is below the best so far by more than 1e-9.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience) : patience_(patience) {}

    /// Returns true when this epoch is the new best.
    bool update(int epoch, double val_loss) {
        if (val_loss < best_ - 1e-9) {
            best_ = val_loss;
            best_epoch_ = epoch;
            wait_ = 0;
            return true;
        }
        ++wait_;
        return false;
    }
    bool should_stop() const { return wait_ >= patience_; }
    int best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_; }

private:
    int patience_;
    int wait_ = 0;
    int best_epoch_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

/// Packs images into an [N, 1, rows, cols] batch scaled to [0, 1].
Tensor<float> make_batch(const std::vector<const Image*>& images);

/// Probabilities for every image, in order. No augmentation.
std::vector<float> score_images(Model<float>& model, const std::vector<Image>& images, int batch_size = 64);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Leaves the best-validation-loss weights in `model`.
TrainResult train(Model<float>& model, const ImageSet& train_set, const ImageSet& val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

std::string history_to_csv(const std::vector<EpochRecord>& history);

}  // namespace octroi::nn
