#include "spoofdet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spoofdet {

namespace {

constexpr double kBceEps = 1e-7;

void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

int conv_out_dim(int in, int k, int stride, const std::string& where) {
    int span = in - k;
    if (span < 0 || span % stride != 0) {
        throw ShapeError(where + ": input dim " + std::to_string(in) +
                         " incompatible with kernel " + std::to_string(k) + " stride " +
                         std::to_string(stride));
    }
    return span / stride + 1;
}

// col: [H'*W', k*k*C] patches of one image (H x W x C, flat base pointer).
void im2col(const float* img, int h, int w, int c, int k, int stride, int oh, int ow,
            float* col) {
    const int patch = k * k * c;
    for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
            float* dst = col + (static_cast<std::size_t>(i) * ow + j) * patch;
            for (int ky = 0; ky < k; ++ky) {
                const float* src = img + ((static_cast<std::size_t>(i * stride + ky) * w) +
                                          j * stride) * c;
                std::copy(src, src + static_cast<std::size_t>(k) * c, dst + ky * k * c);
            }
        }
    }
}

// out[r][f] += sum_k col[r][k] * w[k][f]
// Row sums run in double via `acc` (caller-provided, >= cols): accumulating
// thousands of float terms directly would leave ~1e-6 relative noise in the
// activations, enough to swamp finite-difference gradient checks.
void gemm_accumulate(const float* col, const float* w, int rows, int inner, int cols,
                     float* out, double* acc) {
    for (int r = 0; r < rows; ++r) {
        const float* a = col + static_cast<std::size_t>(r) * inner;
        float* o = out + static_cast<std::size_t>(r) * cols;
        for (int f = 0; f < cols; ++f) acc[f] = o[f];
        for (int k = 0; k < inner; ++k) {
            float av = a[k];
            if (av == 0.0f) continue;
            const float* wr = w + static_cast<std::size_t>(k) * cols;
            for (int f = 0; f < cols; ++f) acc[f] += static_cast<double>(av) * wr[f];
        }
        for (int f = 0; f < cols; ++f) o[f] = static_cast<float>(acc[f]);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Single-image kernels
// ---------------------------------------------------------------------------

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      int stride) {
    require(input.ndim() == 3, "conv2d: input must be HxWxC, got " +
                                   shape_to_string(input.shape));
    require(kernels.ndim() == 4, "conv2d: kernels must be kxkxCxF");
    require(stride >= 1, "conv2d: stride must be >= 1");
    int h = input.dim(0), w = input.dim(1), c = input.dim(2);
    int k = kernels.dim(0);
    require(kernels.dim(1) == k, "conv2d: kernel must be square");
    require(kernels.dim(2) == c, "conv2d: kernel channels " + std::to_string(kernels.dim(2)) +
                                     " != input channels " + std::to_string(c));
    int f = kernels.dim(3);
    require(bias.ndim() == 1 && bias.dim(0) == f, "conv2d: bias length must equal filters");

    int oh = conv_out_dim(h, k, stride, "conv2d");
    int ow = conv_out_dim(w, k, stride, "conv2d");
    Tensor out({oh, ow, f}, 0.0f);
    for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
            for (int ff = 0; ff < f; ++ff) out.at3(i, j, ff) = bias.data[ff];
        }
    }
    std::vector<float> col(static_cast<std::size_t>(oh) * ow * k * k * c);
    std::vector<double> acc(static_cast<std::size_t>(f));
    im2col(input.ptr(), h, w, c, k, stride, oh, ow, col.data());
    gemm_accumulate(col.data(), kernels.ptr(), oh * ow, k * k * c, f, out.ptr(), acc.data());
    return out;
}

void conv2d_backward(const Tensor& input, const Tensor& kernels, int stride,
                     const Tensor& grad_out, Tensor& grad_input, Tensor& grad_kernels,
                     Tensor& grad_bias) {
    int h = input.dim(0), w = input.dim(1), c = input.dim(2);
    int k = kernels.dim(0), f = kernels.dim(3);
    int oh = grad_out.dim(0), ow = grad_out.dim(1);
    require(grad_out.dim(2) == f, "conv2d backward: grad filters mismatch");
    const int patch = k * k * c;
    const int rows = oh * ow;

    if (!grad_input.same_shape(input)) grad_input = Tensor::zeros(input.shape);
    if (!grad_kernels.same_shape(kernels)) grad_kernels = Tensor::zeros(kernels.shape);
    if (grad_bias.shape != std::vector<int>{f}) grad_bias = Tensor::zeros({f});

    std::vector<float> col(static_cast<std::size_t>(rows) * patch);
    im2col(input.ptr(), h, w, c, k, stride, oh, ow, col.data());

    // bias
    for (int r = 0; r < rows; ++r) {
        const float* g = grad_out.ptr() + static_cast<std::size_t>(r) * f;
        for (int ff = 0; ff < f; ++ff) grad_bias.data[ff] += g[ff];
    }
    // kernels: gW[k][f] += sum_r col[r][k] * gy[r][f]
    for (int r = 0; r < rows; ++r) {
        const float* a = col.data() + static_cast<std::size_t>(r) * patch;
        const float* g = grad_out.ptr() + static_cast<std::size_t>(r) * f;
        for (int kk = 0; kk < patch; ++kk) {
            float av = a[kk];
            if (av == 0.0f) continue;
            float* gw = grad_kernels.ptr() + static_cast<std::size_t>(kk) * f;
            for (int ff = 0; ff < f; ++ff) gw[ff] += av * g[ff];
        }
    }
    // input: gcol[r][k] = sum_f gy[r][f] * W[k][f], then col2im scatter-add
    std::vector<float> gcol(static_cast<std::size_t>(rows) * patch, 0.0f);
    for (int r = 0; r < rows; ++r) {
        const float* g = grad_out.ptr() + static_cast<std::size_t>(r) * f;
        float* gc = gcol.data() + static_cast<std::size_t>(r) * patch;
        for (int kk = 0; kk < patch; ++kk) {
            const float* wr = kernels.ptr() + static_cast<std::size_t>(kk) * f;
            float acc = 0.0f;
            for (int ff = 0; ff < f; ++ff) acc += g[ff] * wr[ff];
            gc[kk] = acc;
        }
    }
    for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
            const float* gc = gcol.data() + (static_cast<std::size_t>(i) * ow + j) * patch;
            for (int ky = 0; ky < k; ++ky) {
                float* dst = grad_input.ptr() +
                             ((static_cast<std::size_t>(i * stride + ky) * w) + j * stride) * c;
                const float* src = gc + ky * k * c;
                for (int t = 0; t < k * c; ++t) dst[t] += src[t];
            }
        }
    }
}

Tensor maxpool2_forward(const Tensor& input, std::vector<std::int64_t>* argmax) {
    require(input.ndim() == 3, "maxpool: input must be HxWxC");
    int h = input.dim(0), w = input.dim(1), c = input.dim(2);
    if (h < 2 || w < 2) {
        throw ShapeError("maxpool: input dims " + std::to_string(h) + "x" + std::to_string(w) +
                         " smaller than 2x2 window");
    }
    int oh = (h - 2) / 2 + 1;
    int ow = (w - 2) / 2 + 1;
    Tensor out({oh, ow, c}, 0.0f);
    if (argmax) argmax->assign(static_cast<std::size_t>(oh) * ow * c, -1);
    for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
            for (int ch = 0; ch < c; ++ch) {
                float best = -std::numeric_limits<float>::infinity();
                std::int64_t best_idx = -1;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        std::int64_t idx =
                            ((static_cast<std::int64_t>(2 * i + dy) * w) + 2 * j + dx) * c + ch;
                        float v = input.data[static_cast<std::size_t>(idx)];
                        if (v > best) {
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                out.at3(i, j, ch) = best;
                if (argmax) {
                    (*argmax)[(static_cast<std::size_t>(i) * ow + j) * c + ch] = best_idx;
                }
            }
        }
    }
    return out;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    require(weights.ndim() == 2, "dense: weights must be n x m");
    int n = weights.dim(0), m = weights.dim(1);
    require(input.numel() == n, "dense: input length " + std::to_string(input.numel()) +
                                    " != weight rows " + std::to_string(n));
    require(bias.numel() == m, "dense: bias length mismatch");
    Tensor out({m}, 0.0f);
    for (int f = 0; f < m; ++f) out.data[f] = bias.data[f];
    for (int k = 0; k < n; ++k) {
        float xv = input.data[k];
        if (xv == 0.0f) continue;
        const float* wr = weights.ptr() + static_cast<std::size_t>(k) * m;
        for (int f = 0; f < m; ++f) out.data[f] += xv * wr[f];
    }
    return out;
}

double bce_loss(double prediction, int label) {
    if (label != 0 && label != 1) {
        throw InputError("invalid-label: bce label must be 0 or 1, got " + std::to_string(label));
    }
    double p = std::clamp(prediction, kBceEps, 1.0 - kBceEps);
    return -(label * std::log(p) + (1 - label) * std::log(1.0 - p));
}

double bce_grad(double prediction, int label) {
    if (label != 0 && label != 1) {
        throw InputError("invalid-label: bce label must be 0 or 1, got " + std::to_string(label));
    }
    double p = std::clamp(prediction, kBceEps, 1.0 - kBceEps);
    return -(label / p) + (1 - label) / (1.0 - p);
}

// ---------------------------------------------------------------------------
// Batched layers
// ---------------------------------------------------------------------------

Conv2dLayer::Conv2dLayer(std::string name_, int ksize_, int in_ch_, int out_ch_,
                         std::mt19937& rng)
    : name(std::move(name_)), ksize(ksize_), in_ch(in_ch_), out_ch(out_ch_) {
    int fan_in = ksize * ksize * in_ch;
    w = Tensor::he_uniform({ksize, ksize, in_ch, out_ch}, fan_in, rng);
    b = Tensor::zeros({out_ch});
    gw = Tensor::zeros(w.shape);
    gb = Tensor::zeros(b.shape);
}

Tensor Conv2dLayer::forward(const Tensor& x) {
    require(x.ndim() == 4, name + ": expected NxHxWxC input, got " + shape_to_string(x.shape));
    require(x.dim(3) == in_ch, name + ": input channels " + std::to_string(x.dim(3)) +
                                   " != " + std::to_string(in_ch));
    int n = x.dim(0), h = x.dim(1), wd = x.dim(2);
    int oh = conv_out_dim(h, ksize, stride, name);
    int ow = conv_out_dim(wd, ksize, stride, name);
    last_in_ = x;
    const int patch = ksize * ksize * in_ch;
    const int rows = oh * ow;
    col_.resize(static_cast<std::size_t>(rows) * patch);
    acc_.resize(static_cast<std::size_t>(out_ch));

    Tensor out({n, oh, ow, out_ch}, 0.0f);
    const std::size_t in_stride = static_cast<std::size_t>(h) * wd * in_ch;
    const std::size_t out_stride = static_cast<std::size_t>(rows) * out_ch;
    for (int im = 0; im < n; ++im) {
        float* o = out.ptr() + im * out_stride;
        for (int r = 0; r < rows; ++r) {
            for (int f = 0; f < out_ch; ++f) o[static_cast<std::size_t>(r) * out_ch + f] = b.data[f];
        }
        im2col(x.ptr() + im * in_stride, h, wd, in_ch, ksize, stride, oh, ow, col_.data());
        gemm_accumulate(col_.data(), w.ptr(), rows, patch, out_ch, o, acc_.data());
    }
    return out;
}

Tensor Conv2dLayer::backward(const Tensor& gy) {
    int n = last_in_.dim(0), h = last_in_.dim(1), wd = last_in_.dim(2);
    int oh = gy.dim(1), ow = gy.dim(2);
    Tensor gx = Tensor::zeros(last_in_.shape);
    const std::size_t in_stride = static_cast<std::size_t>(h) * wd * in_ch;
    const std::size_t out_stride = static_cast<std::size_t>(oh) * ow * out_ch;
    for (int im = 0; im < n; ++im) {
        Tensor in_view({h, wd, in_ch}, 0.0f);
        std::copy(last_in_.ptr() + im * in_stride, last_in_.ptr() + (im + 1) * in_stride,
                  in_view.ptr());
        Tensor gy_view({oh, ow, out_ch}, 0.0f);
        std::copy(gy.ptr() + im * out_stride, gy.ptr() + (im + 1) * out_stride, gy_view.ptr());
        Tensor gx_view = Tensor::zeros({h, wd, in_ch});
        conv2d_backward(in_view, w, stride, gy_view, gx_view, gw, gb);
        std::copy(gx_view.ptr(), gx_view.ptr() + in_stride, gx.ptr() + im * in_stride);
    }
    return gx;
}

void Conv2dLayer::zero_grad() {
    gw.fill(0.0f);
    gb.fill(0.0f);
}

std::vector<NamedParam> Conv2dLayer::params() {
    return {{name + ".w", &w, &gw}, {name + ".b", &b, &gb}};
}

std::int64_t Conv2dLayer::param_count() const {
    return (static_cast<std::int64_t>(ksize) * ksize * in_ch + 1) * out_ch;
}

DenseLayer::DenseLayer(std::string name_, int in_n_, int out_n_, std::mt19937& rng)
    : name(std::move(name_)), in_n(in_n_), out_n(out_n_) {
    w = Tensor::he_uniform({in_n, out_n}, in_n, rng);
    b = Tensor::zeros({out_n});
    gw = Tensor::zeros(w.shape);
    gb = Tensor::zeros(b.shape);
}

Tensor DenseLayer::forward(const Tensor& x) {
    require(x.ndim() == 2 && x.dim(1) == in_n,
            name + ": expected Nx" + std::to_string(in_n) + " input, got " +
                shape_to_string(x.shape));
    last_in_ = x;
    int n = x.dim(0);
    Tensor out({n, out_n}, 0.0f);
    std::vector<double> acc(static_cast<std::size_t>(out_n));
    for (int i = 0; i < n; ++i) {
        float* o = out.ptr() + static_cast<std::size_t>(i) * out_n;
        for (int f = 0; f < out_n; ++f) acc[static_cast<std::size_t>(f)] = b.data[f];
        const float* xi = x.ptr() + static_cast<std::size_t>(i) * in_n;
        for (int k = 0; k < in_n; ++k) {
            float xv = xi[k];
            if (xv == 0.0f) continue;
            const float* wr = w.ptr() + static_cast<std::size_t>(k) * out_n;
            for (int f = 0; f < out_n; ++f) acc[static_cast<std::size_t>(f)] += static_cast<double>(xv) * wr[f];
        }
        for (int f = 0; f < out_n; ++f) o[f] = static_cast<float>(acc[static_cast<std::size_t>(f)]);
    }
    return out;
}

Tensor DenseLayer::backward(const Tensor& gy) {
    int n = last_in_.dim(0);
    Tensor gx = Tensor::zeros(last_in_.shape);
    for (int i = 0; i < n; ++i) {
        const float* g = gy.ptr() + static_cast<std::size_t>(i) * out_n;
        const float* xi = last_in_.ptr() + static_cast<std::size_t>(i) * in_n;
        for (int f = 0; f < out_n; ++f) gb.data[f] += g[f];
        float* gxi = gx.ptr() + static_cast<std::size_t>(i) * in_n;
        for (int k = 0; k < in_n; ++k) {
            const float* wr = w.ptr() + static_cast<std::size_t>(k) * out_n;
            float* gwr = gw.ptr() + static_cast<std::size_t>(k) * out_n;
            float xv = xi[k];
            float acc = 0.0f;
            for (int f = 0; f < out_n; ++f) {
                acc += g[f] * wr[f];
                gwr[f] += xv * g[f];
            }
            gxi[k] = acc;
        }
    }
    return gx;
}

void DenseLayer::zero_grad() {
    gw.fill(0.0f);
    gb.fill(0.0f);
}

std::vector<NamedParam> DenseLayer::params() {
    return {{name + ".w", &w, &gw}, {name + ".b", &b, &gb}};
}

BatchNormLayer::BatchNormLayer(std::string name_, int channels_)
    : name(std::move(name_)), channels(channels_) {
    gamma = Tensor::full({channels}, 1.0f);
    beta = Tensor::zeros({channels});
    running_mean = Tensor::zeros({channels});
    running_var = Tensor::full({channels}, 1.0f);
    ggamma = Tensor::zeros({channels});
    gbeta = Tensor::zeros({channels});
}

Tensor BatchNormLayer::forward(const Tensor& x, Mode mode) {
    require(x.ndim() == 2 || x.ndim() == 4,
            name + ": expected NxC or NxHxWxC input, got " + shape_to_string(x.shape));
    require(x.dim(x.ndim() - 1) == channels, name + ": channel count mismatch");
    int n = x.dim(0);
    if (n < 1) throw InputError("invalid-batch: " + name + " got empty batch in train mode");
    std::int64_t rows = x.numel() / channels;  // N*H*W (or N)
    per_channel_ = rows;
    last_mode_ = mode;

    Tensor out = Tensor::zeros(x.shape);
    inv_std_.assign(static_cast<std::size_t>(channels), 0.0);
    if (mode == Mode::kTrain) {
        std::vector<double> mean(channels, 0.0), var(channels, 0.0);
        for (std::int64_t r = 0; r < rows; ++r) {
            const float* xr = x.ptr() + r * channels;
            for (int c = 0; c < channels; ++c) mean[c] += xr[c];
        }
        for (int c = 0; c < channels; ++c) mean[c] /= static_cast<double>(rows);
        for (std::int64_t r = 0; r < rows; ++r) {
            const float* xr = x.ptr() + r * channels;
            for (int c = 0; c < channels; ++c) {
                double d = xr[c] - mean[c];
                var[c] += d * d;
            }
        }
        for (int c = 0; c < channels; ++c) var[c] /= static_cast<double>(rows);
        xhat_ = Tensor::zeros(x.shape);
        for (int c = 0; c < channels; ++c) {
            inv_std_[c] = 1.0 / std::sqrt(var[c] + eps);
        }
        for (std::int64_t r = 0; r < rows; ++r) {
            const float* xr = x.ptr() + r * channels;
            float* hr = xhat_.ptr() + r * channels;
            float* orow = out.ptr() + r * channels;
            for (int c = 0; c < channels; ++c) {
                float h = static_cast<float>((xr[c] - mean[c]) * inv_std_[c]);
                hr[c] = h;
                orow[c] = gamma.data[c] * h + beta.data[c];
            }
        }
        for (int c = 0; c < channels; ++c) {
            running_mean.data[c] = momentum * running_mean.data[c] +
                                   (1.0f - momentum) * static_cast<float>(mean[c]);
            running_var.data[c] = momentum * running_var.data[c] +
                                  (1.0f - momentum) * static_cast<float>(var[c]);
        }
    } else {
        for (int c = 0; c < channels; ++c) {
            inv_std_[c] = 1.0 / std::sqrt(static_cast<double>(running_var.data[c]) + eps);
        }
        xhat_ = Tensor::zeros(x.shape);
        for (std::int64_t r = 0; r < rows; ++r) {
            const float* xr = x.ptr() + r * channels;
            float* hr = xhat_.ptr() + r * channels;
            float* orow = out.ptr() + r * channels;
            for (int c = 0; c < channels; ++c) {
                float h = static_cast<float>((xr[c] - running_mean.data[c]) * inv_std_[c]);
                hr[c] = h;
                orow[c] = gamma.data[c] * h + beta.data[c];
            }
        }
    }
    return out;
}

Tensor BatchNormLayer::backward(const Tensor& gy) {
    std::int64_t rows = per_channel_;
    Tensor gx = Tensor::zeros(gy.shape);
    if (last_mode_ == Mode::kInfer) {
        for (std::int64_t r = 0; r < rows; ++r) {
            const float* g = gy.ptr() + r * channels;
            const float* h = xhat_.ptr() + r * channels;
            float* gxr = gx.ptr() + r * channels;
            for (int c = 0; c < channels; ++c) {
                ggamma.data[c] += g[c] * h[c];
                gbeta.data[c] += g[c];
                gxr[c] = static_cast<float>(g[c] * gamma.data[c] * inv_std_[c]);
            }
        }
        return gx;
    }
    std::vector<double> sum_g(channels, 0.0), sum_gh(channels, 0.0);
    for (std::int64_t r = 0; r < rows; ++r) {
        const float* g = gy.ptr() + r * channels;
        const float* h = xhat_.ptr() + r * channels;
        for (int c = 0; c < channels; ++c) {
            sum_g[c] += g[c];
            sum_gh[c] += static_cast<double>(g[c]) * h[c];
        }
    }
    for (int c = 0; c < channels; ++c) {
        ggamma.data[c] += static_cast<float>(sum_gh[c]);
        gbeta.data[c] += static_cast<float>(sum_g[c]);
    }
    double inv_rows = 1.0 / static_cast<double>(rows);
    for (std::int64_t r = 0; r < rows; ++r) {
        const float* g = gy.ptr() + r * channels;
        const float* h = xhat_.ptr() + r * channels;
        float* gxr = gx.ptr() + r * channels;
        for (int c = 0; c < channels; ++c) {
            double t = g[c] - sum_g[c] * inv_rows - h[c] * sum_gh[c] * inv_rows;
            gxr[c] = static_cast<float>(gamma.data[c] * inv_std_[c] * t);
        }
    }
    return gx;
}

void BatchNormLayer::zero_grad() {
    ggamma.fill(0.0f);
    gbeta.fill(0.0f);
}

std::vector<NamedParam> BatchNormLayer::params() {
    return {{name + ".gamma", &gamma, &ggamma}, {name + ".beta", &beta, &gbeta}};
}

DropoutLayer::DropoutLayer(std::string name_, float rate_) : name(std::move(name_)), rate(rate_) {
    if (!(rate >= 0.0f && rate < 1.0f)) {
        throw InputError(name + ": dropout rate " + std::to_string(rate) + " outside [0,1)");
    }
}

Tensor DropoutLayer::forward(const Tensor& x, Mode mode, std::mt19937& rng) {
    if (mode == Mode::kInfer || rate == 0.0f) {
        identity_ = true;
        return x;
    }
    identity_ = false;
    float scale = 1.0f / (1.0f - rate);
    mask_.resize(x.data.size());
    Tensor out = Tensor::zeros(x.shape);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        float m = dist(rng) < rate ? 0.0f : scale;
        mask_[i] = m;
        out.data[i] = x.data[i] * m;
    }
    return out;
}

Tensor DropoutLayer::backward(const Tensor& gy) {
    if (identity_) return gy;
    Tensor gx = Tensor::zeros(gy.shape);
    for (std::size_t i = 0; i < gy.data.size(); ++i) gx.data[i] = gy.data[i] * mask_[i];
    return gx;
}

Tensor MaxPoolLayer::forward(const Tensor& x) {
    require(x.ndim() == 4, name + ": expected NxHxWxC input");
    int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (h < 2 || w < 2) throw ShapeError(name + ": input smaller than pooling window");
    in_shape_ = x.shape;
    int oh = (h - 2) / 2 + 1, ow = (w - 2) / 2 + 1;
    Tensor out({n, oh, ow, c}, 0.0f);
    argmax_.assign(out.data.size(), -1);
    const std::size_t in_stride = static_cast<std::size_t>(h) * w * c;
    const std::size_t out_stride = static_cast<std::size_t>(oh) * ow * c;
    for (int im = 0; im < n; ++im) {
        Tensor view({h, w, c}, 0.0f);
        std::copy(x.ptr() + im * in_stride, x.ptr() + (im + 1) * in_stride, view.ptr());
        std::vector<std::int64_t> am;
        Tensor o = maxpool2_forward(view, &am);
        std::copy(o.ptr(), o.ptr() + out_stride, out.ptr() + im * out_stride);
        for (std::size_t i = 0; i < am.size(); ++i) {
            argmax_[im * out_stride + i] = static_cast<std::int64_t>(im * in_stride) + am[i];
        }
    }
    return out;
}

Tensor MaxPoolLayer::backward(const Tensor& gy) {
    Tensor gx = Tensor::zeros(in_shape_);
    for (std::size_t i = 0; i < gy.data.size(); ++i) {
        gx.data[static_cast<std::size_t>(argmax_[i])] += gy.data[i];
    }
    return gx;
}

Tensor ReluLayer::forward(const Tensor& x) {
    active_.resize(x.data.size());
    Tensor out = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        bool on = x.data[i] > 0.0f;
        active_[i] = on ? 1 : 0;
        out.data[i] = on ? x.data[i] : 0.0f;
    }
    return out;
}

Tensor ReluLayer::backward(const Tensor& gy) {
    Tensor gx = Tensor::zeros(gy.shape);
    for (std::size_t i = 0; i < gy.data.size(); ++i) {
        gx.data[i] = active_[i] ? gy.data[i] : 0.0f;
    }
    return gx;
}

Tensor SigmoidLayer::forward(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        out.data[i] = 1.0f / (1.0f + std::exp(-x.data[i]));
    }
    last_out_ = out;
    return out;
}

Tensor SigmoidLayer::backward(const Tensor& gy) {
    Tensor gx = Tensor::zeros(gy.shape);
    for (std::size_t i = 0; i < gy.data.size(); ++i) {
        float p = last_out_.data[i];
        gx.data[i] = gy.data[i] * p * (1.0f - p);
    }
    return gx;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

void SgdOptimizer::attach(const std::vector<NamedParam>& params) {
    velocity.clear();
    velocity.reserve(params.size());
    for (const auto& p : params) velocity.push_back(Tensor::zeros(p.value->shape));
    step = 0;
}

double SgdOptimizer::current_lr() const {
    return static_cast<double>(lr0) / (1.0 + static_cast<double>(decay) * step);
}

void SgdOptimizer::update(const std::vector<NamedParam>& params) {
    if (velocity.size() != params.size()) {
        throw ShapeError("optimizer not attached to this parameter set");
    }
    float lr = static_cast<float>(current_lr());
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& v = velocity[i];
        Tensor& p = *params[i].value;
        const Tensor& g = *params[i].grad;
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            if (!std::isfinite(g.data[j])) {
                throw NumericError("non-finite gradient in parameter " + params[i].name);
            }
            v.data[j] = momentum * v.data[j] - lr * g.data[j];
            p.data[j] += v.data[j];
        }
    }
    ++step;
}

// ---------------------------------------------------------------------------
// Parameter counting
// ---------------------------------------------------------------------------

std::vector<LayerCount> count_params(const std::vector<LayerSpec>& specs) {
    std::vector<LayerCount> counts;
    counts.reserve(specs.size());
    for (const auto& s : specs) {
        std::int64_t p = 0;
        switch (s.kind) {
            case LayerKind::kConv:
                p = (static_cast<std::int64_t>(s.kernel) * s.kernel * s.in_ch + 1) * s.units;
                break;
            case LayerKind::kDense:
                p = (static_cast<std::int64_t>(s.in_ch) + 1) * s.units;
                break;
            case LayerKind::kBatchNorm:
                p = 4LL * s.units;
                break;
            default:
                p = 0;
        }
        counts.push_back({s.name, p});
    }
    return counts;
}

std::int64_t total_params(const std::vector<LayerSpec>& specs) {
    std::int64_t t = 0;
    for (const auto& c : count_params(specs)) t += c.params;
    return t;
}

}  // namespace spoofdet
