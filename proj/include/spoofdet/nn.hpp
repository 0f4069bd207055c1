#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "spoofdet/tensor.hpp"

namespace spoofdet {

enum class Mode { kTrain, kInfer };

// ---------------------------------------------------------------------------
// Single-image kernels. Layout conventions:
//   image           H x W x C
//   conv kernels    k x k x C x F
//   dense weights   n x m
// ---------------------------------------------------------------------------

/// Valid-padding convolution. Output (H-k)/stride+1 x (W-k)/stride+1 x F.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride);

/// Gradients for conv2d_forward. grad_kernels/grad_bias are accumulated into.
void conv2d_backward(const Tensor& input, const Tensor& kernels, int stride,
                     const Tensor& grad_out, Tensor& grad_input, Tensor& grad_kernels,
                     Tensor& grad_bias);

/// 2x2 stride-2 valid max-pool. argmax (optional) records the flat input
/// index feeding each output, first occurrence winning ties.
Tensor maxpool2_forward(const Tensor& input, std::vector<std::int64_t>* argmax = nullptr);

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

/// Binary cross-entropy with the prediction clamped to [eps, 1-eps], eps=1e-7.
double bce_loss(double prediction, int label);
/// dL/dp at the clamped prediction.
double bce_grad(double prediction, int label);

// ---------------------------------------------------------------------------
// Batched layers. Spatial tensors are N x H x W x C, vectors N x n.
// Each layer caches what its backward needs; backward returns grad wrt input
// and fills parameter gradients (summed over the batch, averaged by the loss).
// ---------------------------------------------------------------------------

struct NamedParam {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

struct Conv2dLayer {
    std::string name;
    int ksize = 3, in_ch = 0, out_ch = 0, stride = 1;
    Tensor w, b, gw, gb;

    Conv2dLayer() = default;
    Conv2dLayer(std::string name, int ksize, int in_ch, int out_ch, std::mt19937& rng);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void zero_grad();
    std::vector<NamedParam> params();
    std::int64_t param_count() const;

private:
    Tensor last_in_;
    std::vector<float> col_;   // im2col scratch, one image at a time
    std::vector<double> acc_;  // double row accumulator for the forward gemm
};

struct DenseLayer {
    std::string name;
    int in_n = 0, out_n = 0;
    Tensor w, b, gw, gb;

    DenseLayer() = default;
    DenseLayer(std::string name, int in_n, int out_n, std::mt19937& rng);

    Tensor forward(const Tensor& x);  // x: N x in_n
    Tensor backward(const Tensor& gy);
    void zero_grad();
    std::vector<NamedParam> params();
    std::int64_t param_count() const { return static_cast<std::int64_t>(in_n + 1) * out_n; }

private:
    Tensor last_in_;
};

/// Per-channel batch normalization. Spatial inputs normalize over (N,H,W),
/// vector inputs over N. Running statistics updated in train mode only.
struct BatchNormLayer {
    std::string name;
    int channels = 0;
    float eps = 1e-5f;
    float momentum = 0.9f;  // running = momentum*running + (1-momentum)*batch
    Tensor gamma, beta, running_mean, running_var, ggamma, gbeta;

    BatchNormLayer() = default;
    BatchNormLayer(std::string name, int channels);

    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& gy);
    void zero_grad();
    std::vector<NamedParam> params();  // trainable only (gamma, beta)
    std::int64_t param_count() const { return 4LL * channels; }  // incl. running stats

private:
    Tensor xhat_;
    std::vector<double> inv_std_;
    std::int64_t per_channel_ = 0;
    Mode last_mode_ = Mode::kInfer;
};

/// Inverted dropout: train mode zeroes with probability rate and scales
/// survivors by 1/(1-rate); infer mode is the identity.
struct DropoutLayer {
    std::string name;
    float rate = 0.1f;

    DropoutLayer() = default;
    DropoutLayer(std::string name, float rate);

    Tensor forward(const Tensor& x, Mode mode, std::mt19937& rng);
    Tensor backward(const Tensor& gy);

private:
    std::vector<float> mask_;
    bool identity_ = true;
};

struct MaxPoolLayer {
    std::string name;

    Tensor forward(const Tensor& x);  // N x H x W x C
    Tensor backward(const Tensor& gy);
    /// Winning input index per output from the last forward.
    const std::vector<std::int64_t>& argmax() const { return argmax_; }

private:
    std::vector<std::int64_t> argmax_;
    std::vector<int> in_shape_;
};

struct ReluLayer {
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    /// Active-unit mask from the last forward.
    const std::vector<char>& mask() const { return active_; }

private:
    std::vector<char> active_;
};

struct SigmoidLayer {
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

private:
    Tensor last_out_;
};

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

/// SGD with momentum and inverse-time learning-rate decay:
///   v <- momentum*v - lr*g;  p <- p + v;  lr(step) = lr0 / (1 + decay*step).
struct SgdOptimizer {
    float lr0 = 1e-3f;
    float decay = 1e-3f;
    float momentum = 0.9f;
    std::int64_t step = 0;
    std::vector<Tensor> velocity;

    void attach(const std::vector<NamedParam>& params);
    void update(const std::vector<NamedParam>& params);
    double current_lr() const;  // rate the next update will use
};

// ---------------------------------------------------------------------------
// Parameter counting
// ---------------------------------------------------------------------------

enum class LayerKind { kConv, kDense, kBatchNorm, kDropout, kMaxPool, kActivation };

struct LayerSpec {
    LayerKind kind = LayerKind::kActivation;
    std::string name;
    int kernel = 0;
    int stride = 1;
    int in_ch = 0;   // conv input channels / dense input width
    int units = 0;   // conv filters / dense units / batchnorm channels
    float rate = 0.0f;
};

struct LayerCount {
    std::string name;
    std::int64_t params = 0;
};

/// conv = (k*k*C+1)*F; dense = (n+1)*m; batchnorm = 4*channels; rest = 0.
std::vector<LayerCount> count_params(const std::vector<LayerSpec>& specs);
std::int64_t total_params(const std::vector<LayerSpec>& specs);

}  // namespace spoofdet
