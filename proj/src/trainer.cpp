#include "spoofdet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

namespace spoofdet {

Dataset load_dataset(const std::vector<ManifestRecord>& records, const std::string& split,
                     const std::string& image_root, const std::string& cache_path,
                     const PreprocessSpec& prep) {
    std::vector<ManifestRecord> wanted = filter_split(records, split);
    if (wanted.empty()) {
        throw ValidationError("manifest has no records in split '" + split + "'");
    }
    std::vector<CacheEntry> cache = read_feature_cache(cache_path);
    std::unordered_map<std::string, const CacheEntry*> by_id;
    for (const auto& e : cache) by_id[e.id] = &e;

    Dataset ds;
    ds.side = prep.output_side;
    std::size_t img_len = static_cast<std::size_t>(ds.side) * ds.side * 3;
    for (const auto& r : wanted) {
        auto it = by_id.find(r.path);
        if (it == by_id.end()) {
            throw ValidationError("no cached features for '" + r.path + "' in " + cache_path);
        }
        const DescriptorVector& feat = it->second->features;
        if (ds.feature_len == 0) {
            ds.feature_len = static_cast<int>(feat.values.size());
        } else if (ds.feature_len != static_cast<int>(feat.values.size())) {
            throw ValidationError("inconsistent feature length in cache for '" + r.path + "'");
        }
        Raster raw = read_ppm(join_path(image_root, r.path));
        FaceImage face = preprocess(raw, prep);
        ds.images.insert(ds.images.end(), face.rgb.begin(), face.rgb.end());
        ds.features.insert(ds.features.end(), feat.values.begin(), feat.values.end());
        ds.labels.push_back(r.label);
        ds.ids.push_back(r.path);
        ds.groups.push_back(r.subject);
        if (face.rgb.size() != img_len) {
            throw ShapeError("preprocessed image size mismatch for '" + r.path + "'");
        }
    }
    return ds;
}

namespace {

void fill_batch(const Dataset& ds, const std::vector<int>& order, int start, int count,
                Tensor& images, Tensor& features) {
    int side = ds.side;
    std::size_t img_len = static_cast<std::size_t>(side) * side * 3;
    images = Tensor({count, side, side, 3}, 0.0f);
    features = Tensor({count, ds.feature_len}, 0.0f);
    for (int b = 0; b < count; ++b) {
        int idx = order[static_cast<std::size_t>(start + b)];
        const std::uint8_t* src = ds.images.data() + static_cast<std::size_t>(idx) * img_len;
        float* dst = images.ptr() + static_cast<std::size_t>(b) * img_len;
        for (std::size_t i = 0; i < img_len; ++i) dst[i] = src[i] / 255.0f;
        const float* fsrc = ds.features.data() + static_cast<std::size_t>(idx) * ds.feature_len;
        std::copy(fsrc, fsrc + ds.feature_len,
                  features.ptr() + static_cast<std::size_t>(b) * ds.feature_len);
    }
}

}  // namespace

ScoreSet score_dataset(Model& model, const Dataset& data, int batch_size) {
    ScoreSet scores;
    scores.reserve(static_cast<std::size_t>(data.size()));
    std::vector<int> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), 0);
    for (int start = 0; start < data.size(); start += batch_size) {
        int count = std::min(batch_size, data.size() - start);
        Tensor images, features;
        fill_batch(data, order, start, count, images, features);
        Tensor probs = model.forward(images, features, Mode::kInfer);
        for (int b = 0; b < count; ++b) {
            int idx = start + b;
            scores.push_back({data.ids[static_cast<std::size_t>(idx)],
                              data.groups[static_cast<std::size_t>(idx)],
                              data.labels[static_cast<std::size_t>(idx)],
                              static_cast<double>(probs.at2(b, 0))});
        }
    }
    return scores;
}

TrainResult train_model(Model& model, SgdOptimizer& opt, const Dataset& train,
                        const Dataset* eval_set, const TrainConfig& cfg) {
    if (train.size() < 1) throw ValidationError("empty training set");
    opt.lr0 = cfg.lr;
    opt.decay = cfg.decay;
    opt.momentum = cfg.momentum;
    std::vector<NamedParam> params = model.trainable_params();
    opt.attach(params);
    model.reseed_dropout(cfg.seed ^ 0x51f15eedu);

    std::ofstream log;
    if (!cfg.loss_log_path.empty()) {
        log.open(cfg.loss_log_path, std::ios::trunc);
        if (!log) throw IoError("cannot open loss log " + cfg.loss_log_path);
        log << "epoch,step,loss,lr\n";
    }

    TrainResult result;
    std::vector<int> order(static_cast<std::size_t>(train.size()));
    std::iota(order.begin(), order.end(), 0);
    int global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937 shuffle_rng(cfg.seed + static_cast<std::uint32_t>(epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        int epoch_batches = 0;
        for (int start = 0; start < train.size(); start += cfg.batch_size) {
            int count = std::min(cfg.batch_size, train.size() - start);
            Tensor images, features;
            fill_batch(train, order, start, count, images, features);
            Tensor probs = model.forward(images, features, Mode::kTrain);

            double loss = 0.0;
            Tensor grad({count, 1}, 0.0f);
            for (int b = 0; b < count; ++b) {
                int label = train.labels[static_cast<std::size_t>(order[
                    static_cast<std::size_t>(start + b)])];
                double p = probs.at2(b, 0);
                loss += bce_loss(p, label);
                grad.at2(b, 0) = static_cast<float>(bce_grad(p, label) / count);
            }
            loss /= count;

            model.zero_grad();
            model.backward(grad);
            double lr_used = opt.current_lr();
            opt.update(params);

            epoch_loss += loss;
            ++epoch_batches;
            ++global_step;
            if (log.is_open()) {
                log << epoch << "," << global_step << "," << loss << "," << lr_used << "\n";
            }
            result.final_loss = loss;
        }
        result.epochs_run = epoch + 1;
        if (log.is_open()) log.flush();

        if (eval_set != nullptr && eval_set->size() > 0) {
            ScoreSet scores = score_dataset(model, *eval_set, cfg.batch_size);
            bool has_both = false;
            {
                bool g = false, s = false;
                for (const auto& r : scores) (r.label ? s : g) = true;
                has_both = g && s;
            }
            if (has_both) {
                result.final_eval_eer = eer(scores).eer;
                if (cfg.target_eer >= 0.0 && result.final_eval_eer <= cfg.target_eer) break;
            }
        }
    }
    return result;
}

}  // namespace spoofdet
