#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "spoofdet/nn.hpp"
#include "spoofdet/tensor.hpp"

namespace spoofdet {

enum class Variant { kDual, kDeepOnly, kWideOnly };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ConvBlockConfig {
    int kernel1 = 3, filters1 = 32;
    int kernel2 = 3, filters2 = 32;
};

struct ModelConfig {
    int input_side = 160;
    std::vector<ConvBlockConfig> blocks = {{3, 32, 3, 32}, {3, 64, 3, 64}, {5, 128, 5, 128}};
    int dense_units = 512;
    int embedding = 512;
    int wide_input = 8034;
    int wide_hidden = 512;
    int wide_embedding = 512;
    int fusion_hidden1 = 512;
    int fusion_hidden2 = 256;
    float dropout_rate = 0.1f;
    /// Batchnorm after each wide dense layer. Off by default (the published
    /// wide channel is two plain dense layers); useful when the L1-normalized
    /// descriptor histograms are too small-scale to train the channel well.
    bool wide_batchnorm = false;
    std::uint32_t seed = 0;
    Variant variant = Variant::kDual;

    /// Desk-scale preset for gradient checks: 16x16 input, widths divided
    /// by 8. The 5x5 block cannot fit a 16x16 chain, so the preset keeps
    /// the first two block shapes only.
    static ModelConfig tiny();

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

struct LayerRow {
    std::string name;
    std::string size_in;
    std::string size_out;
    std::string details;
    std::int64_t params = 0;
};

/// Spatial dims after each stage; throws ShapeError when the chain breaks.
struct ShapeChain {
    std::vector<LayerRow> rows;  // size strings only, params unset
    int flatten_len = 0;
};
ShapeChain deep_shape_chain(const ModelConfig& cfg);

std::vector<LayerRow> deep_layer_table(const ModelConfig& cfg);
std::vector<LayerRow> fusion_layer_table(const ModelConfig& cfg);
std::vector<LayerRow> wide_layer_table(const ModelConfig& cfg);
std::int64_t table_total(const std::vector<LayerRow>& rows);

struct ConvBlock {
    Conv2dLayer conv1, conv2;
    BatchNormLayer bn;
    DropoutLayer drop;
    MaxPoolLayer pool;
};

/// The dual-channel network. All forwards are batched; backward() walks the
/// whole graph that the last forward() used.
class Model {
public:
    explicit Model(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }

    /// images: N x side x side x 3, already normalized to [0,1].
    Tensor deep_forward(const Tensor& images, Mode mode);
    /// features: N x wide_input.
    Tensor wide_forward(const Tensor& features, Mode mode);
    /// embeddings: N x embedding each -> N x 1 spoof probabilities.
    Tensor fuse_and_classify(const Tensor& deep_emb, const Tensor& wide_emb, Mode mode);

    /// Variant-aware full pass -> N x 1 probabilities.
    Tensor forward(const Tensor& images, const Tensor& features, Mode mode);
    /// grad_prob: dL/dprobability, N x 1. Accumulates parameter gradients.
    void backward(const Tensor& grad_prob);

    void zero_grad();
    std::vector<NamedParam> trainable_params();
    /// Trainable parameters plus batchnorm running statistics.
    std::vector<NamedParam> all_tensors();

    void reseed_dropout(std::uint32_t seed);
    std::mt19937& dropout_rng() { return dropout_rng_; }

    /// Hash of every ReLU mask and max-pool argmax from the last forward().
    /// Probes whose signature differs on the two sides of a finite-difference
    /// step crossed a kink and are not comparable against the analytic value.
    std::uint64_t routing_signature() const;

    int flatten_len() const { return flatten_len_; }

private:
    ModelConfig cfg_;
    int flatten_len_ = 0;

    std::vector<ConvBlock> blocks_;
    DenseLayer dense1_;
    ReluLayer dense1_relu_;
    BatchNormLayer bn_dense_;
    DenseLayer embed_;
    ReluLayer embed_relu_;

    DenseLayer wide1_, wide2_;
    ReluLayer wide1_relu_, wide2_relu_;
    BatchNormLayer wide_bn1_, wide_bn2_;

    DenseLayer fusion1_, fusion2_, head_;
    ReluLayer fusion1_relu_, fusion2_relu_;
    BatchNormLayer fusion_bn_;
    SigmoidLayer head_sigmoid_;

    std::mt19937 dropout_rng_;

    // Backward bookkeeping for the last forward().
    int last_batch_ = 0;
    bool ran_deep_ = false, ran_wide_ = false;

    Tensor fusion_backward(const Tensor& grad_prob, Tensor& grad_deep_emb, Tensor& grad_wide_emb);
    void deep_backward(const Tensor& grad_emb);
    void wide_backward(const Tensor& grad_emb);
};

/// Checkpoint: "SPFC" magic, version byte, u32 little-endian JSON header
/// length, JSON header (config + tensor directory), then contiguous
/// little-endian float32 payload. Round-trips bit-exactly.
void save_checkpoint(Model& model, const std::string& path, const SgdOptimizer* opt = nullptr);
std::unique_ptr<Model> load_checkpoint(const std::string& path, SgdOptimizer* opt = nullptr);

}  // namespace spoofdet
