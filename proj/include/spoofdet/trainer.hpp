#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spoofdet/data.hpp"
#include "spoofdet/eval.hpp"
#include "spoofdet/model.hpp"

namespace spoofdet {

/// In-memory training/eval split: preprocessed images (uint8, N x side x
/// side x 3) plus cached descriptor vectors, in manifest order.
struct Dataset {
    int side = 0;
    int feature_len = 0;
    std::vector<std::uint8_t> images;   // N * side * side * 3
    std::vector<float> features;        // N * feature_len
    std::vector<int> labels;
    std::vector<std::string> ids;
    std::vector<std::string> groups;

    int size() const { return static_cast<int>(labels.size()); }
};

/// Loads every record of the given split, preprocessing images to `side`
/// and pulling descriptor vectors from the cache (missing cache entries are
/// an error).
Dataset load_dataset(const std::vector<ManifestRecord>& records, const std::string& split,
                     const std::string& image_root, const std::string& cache_path,
                     const PreprocessSpec& prep);

struct TrainConfig {
    int batch_size = 32;
    int epochs = 10;
    float lr = 1e-3f;
    float decay = 1e-3f;
    float momentum = 0.9f;
    std::uint32_t seed = 1;
    /// Stop after the first epoch whose eval EER is at or below this; off
    /// when negative.
    double target_eer = -1.0;
    std::string loss_log_path;  // CSV epoch,step,loss,lr when non-empty
};

struct TrainResult {
    int epochs_run = 0;
    double final_eval_eer = -1.0;
    double final_loss = 0.0;
};

/// Minibatch SGD over the train set; when eval has both labels the model is
/// scored on it after every epoch (infer mode) for early stopping.
TrainResult train_model(Model& model, SgdOptimizer& opt, const Dataset& train,
                        const Dataset* eval_set, const TrainConfig& cfg);

/// Infer-mode scores for every record.
ScoreSet score_dataset(Model& model, const Dataset& data, int batch_size = 32);

}  // namespace spoofdet
