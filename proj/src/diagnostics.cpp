#include "spoofdet/diagnostics.hpp"

#include <cmath>

#include "spoofdet/gradcheck.hpp"
#include "spoofdet/nn.hpp"

namespace spoofdet {

namespace {

double sum_tensor(const Tensor& t) {
    double s = 0.0;
    for (float v : t.data) s += v;
    return s;
}

// Checks d(loss)/d(storage) against `analytic` by temporarily swapping the
// buffer that `loss` reads from.
template <typename Loss>
LayerCheck check_buffer(const std::string& name, std::vector<float>& storage, Loss&& loss,
                        const std::vector<float>& analytic, int max_probes = 0,
                        double epsilon = 1e-3) {
    auto f = [&](const std::vector<float>& v) {
        std::vector<float> saved = storage;
        storage = v;
        double out = loss();
        storage = saved;
        return out;
    };
    GradCheckResult r = grad_check_fn(f, analytic, storage, epsilon, max_probes);
    return {name, r.max_rel_error, r.checked};
}

}  // namespace

std::vector<LayerCheck> layer_gradient_battery(std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::vector<LayerCheck> out;

    {
        Conv2dLayer conv("conv", 3, 2, 3, rng);
        Tensor x = Tensor::uniform({2, 5, 5, 2}, -1.0f, 1.0f, rng);
        auto loss = [&]() { return sum_tensor(conv.forward(x)); };
        loss();
        conv.zero_grad();
        Tensor gx = conv.backward(Tensor({2, 3, 3, 3}, 1.0f));
        out.push_back(check_buffer("conv2d.input", x.data, loss, gx.data));
        out.push_back(check_buffer("conv2d.weights", conv.w.data, loss, conv.gw.data));
        out.push_back(check_buffer("conv2d.bias", conv.b.data, loss, conv.gb.data));
    }
    {
        DenseLayer dense("dense", 7, 4, rng);
        Tensor x = Tensor::uniform({3, 7}, -1.0f, 1.0f, rng);
        auto loss = [&]() { return sum_tensor(dense.forward(x)); };
        loss();
        dense.zero_grad();
        Tensor gx = dense.backward(Tensor({3, 4}, 1.0f));
        out.push_back(check_buffer("dense.input", x.data, loss, gx.data));
        out.push_back(check_buffer("dense.weights", dense.w.data, loss, dense.gw.data));
        out.push_back(check_buffer("dense.bias", dense.b.data, loss, dense.gb.data));
    }
    {
        BatchNormLayer bn("bn", 3);
        bn.gamma.data = {1.2f, 0.8f, 1.1f};
        bn.beta.data = {0.1f, -0.2f, 0.3f};
        Tensor x = Tensor::uniform({6, 3}, -1.0f, 1.0f, rng);
        Tensor up = Tensor::uniform({6, 3}, -1.0f, 1.0f, rng);
        auto loss = [&]() {
            Tensor y = bn.forward(x, Mode::kTrain);
            double s = 0.0;
            for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * up.data[i];
            return s;
        };
        loss();
        bn.zero_grad();
        Tensor gx = bn.backward(up);
        out.push_back(check_buffer("batchnorm.input", x.data, loss, gx.data));
        out.push_back(check_buffer("batchnorm.gamma", bn.gamma.data, loss, bn.ggamma.data));
        out.push_back(check_buffer("batchnorm.beta", bn.beta.data, loss, bn.gbeta.data));
    }
    {
        // spread values so no pooling window has a near-tie at the 1e-3 scale
        MaxPoolLayer pool;
        Tensor x({1, 4, 4, 2}, 0.0f);
        std::uniform_real_distribution<float> dist(0.0f, 1.0f);
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            x.data[i] = dist(rng) + 0.05f * static_cast<float>(i % 7);
        }
        auto loss = [&]() { return sum_tensor(pool.forward(x)); };
        loss();
        Tensor gx = pool.backward(Tensor({1, 2, 2, 2}, 1.0f));
        out.push_back(check_buffer("maxpool.input", x.data, loss, gx.data));
    }
    {
        ReluLayer relu;
        Tensor x = Tensor::uniform({3, 5}, -1.0f, 1.0f, rng);
        for (float& v : x.data) {
            if (std::abs(v) < 0.05f) v = 0.1f;  // keep clear of the kink
        }
        auto loss = [&]() { return sum_tensor(relu.forward(x)); };
        loss();
        Tensor gx = relu.backward(Tensor({3, 5}, 1.0f));
        out.push_back(check_buffer("relu.input", x.data, loss, gx.data));
    }
    {
        SigmoidLayer sig;
        Tensor x = Tensor::uniform({4, 1}, -2.0f, 2.0f, rng);
        auto loss = [&]() { return sum_tensor(sig.forward(x)); };
        loss();
        Tensor gx = sig.backward(Tensor({4, 1}, 1.0f));
        out.push_back(check_buffer("sigmoid.input", x.data, loss, gx.data));
    }
    {
        LayerCheck row{"bce.prediction", 0.0, 0};
        for (int label = 0; label <= 1; ++label) {
            for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
                double eps = 1e-5;
                double central = (bce_loss(p + eps, label) - bce_loss(p - eps, label)) / (2 * eps);
                double err = std::abs(bce_grad(p, label) - central) / std::max(1.0, std::abs(central));
                row.max_rel_error = std::max(row.max_rel_error, err);
                ++row.checked;
            }
        }
        out.push_back(row);
    }
    {
        // dropout: backward must scale exactly by the surviving mask
        DropoutLayer drop("drop", 0.3f);
        Tensor x = Tensor::uniform({6, 10}, 0.5f, 1.5f, rng);
        Tensor y = drop.forward(x, Mode::kTrain, rng);
        Tensor g = drop.backward(Tensor({6, 10}, 1.0f));
        LayerCheck row{"dropout.mask", 0.0, static_cast<std::int64_t>(x.data.size())};
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            double want = y.data[i] == 0.0f ? 0.0 : 1.0 / 0.7;
            row.max_rel_error =
                std::max(row.max_rel_error, std::abs(g.data[i] - want) / std::max(1.0, want));
        }
        out.push_back(row);
    }
    return out;
}

std::vector<LayerCheck> model_gradient_check(const ModelConfig& cfg, int max_probes,
                                             std::uint32_t seed) {
    Model model(cfg);
    std::mt19937 rng(seed);
    // Small batches make the train-mode batchnorm statistics twitchy (huge
    // third derivatives), which poisons the secant; 16 keeps them stable.
    const int batch = 16;
    Tensor images = Tensor::uniform({batch, cfg.input_side, cfg.input_side, 3}, 0.0f, 1.0f, rng);
    Tensor features = Tensor::uniform({batch, cfg.wide_input}, -1.0f, 1.0f, rng);
    std::vector<int> labels(batch);
    for (int b = 0; b < batch; ++b) labels[static_cast<std::size_t>(b)] = b % 2;

    // returns the loss and the ReLU/pool routing signature of that forward
    auto loss = [&](std::uint64_t& sig) {
        model.reseed_dropout(0xd5ea5eedu);  // identical masks on every evaluation
        Tensor p = model.forward(images, features, Mode::kTrain);
        sig = model.routing_signature();
        double l = 0.0;
        for (int b = 0; b < batch; ++b) {
            l += bce_loss(p.at2(b, 0), labels[static_cast<std::size_t>(b)]);
        }
        return l / batch;
    };

    model.zero_grad();
    std::uint64_t base_sig = 0;
    loss(base_sig);
    model.reseed_dropout(0xd5ea5eedu);
    Tensor p = model.forward(images, features, Mode::kTrain);
    Tensor grad({batch, 1}, 0.0f);
    for (int b = 0; b < batch; ++b) {
        grad.at2(b, 0) = static_cast<float>(bce_grad(p.at2(b, 0), labels[static_cast<std::size_t>(b)]) / batch);
    }
    model.backward(grad);

    // Small steps drown the signal in float32 roundoff, large steps pick up
    // truncation error and routing flips: for each probe accept the best
    // secant among the steps whose routing stayed intact. Probes sitting
    // within 3e-4 of a ReLU/pooling boundary are skipped outright — every
    // usable step there is noise-dominated, so no secant can verify them.
    const double eps_ladder[5] = {3e-4, 5e-4, 7e-4, 1e-3, 2e-3};
    std::vector<LayerCheck> out;
    for (auto& prm : model.trainable_params()) {
        std::vector<float>& x = prm.value->data;
        const std::vector<float>& analytic = prm.grad->data;
        std::size_t n = x.size();
        std::size_t stride = 1;
        if (max_probes > 0 && n > static_cast<std::size_t>(max_probes)) {
            stride = n / static_cast<std::size_t>(max_probes);
        }
        LayerCheck row{prm.name, 0.0, 0};
        for (std::size_t i = 0; i < n; i += stride) {
            float orig = x[i];
            double best_err = -1.0;
            for (double eps : eps_ladder) {
                std::uint64_t sig_up = 0, sig_down = 0;
                x[i] = orig + static_cast<float>(eps);
                double up = loss(sig_up);
                x[i] = orig - static_cast<float>(eps);
                double down = loss(sig_down);
                x[i] = orig;
                // a step across a ReLU or pooling decision boundary makes the
                // secant incomparable to the one-sided analytic value
                if (sig_up != sig_down || sig_up != base_sig) continue;
                double central = (up - down) / (2.0 * eps);
                double err = std::abs(analytic[i] - central) / std::max(1.0, std::abs(central));
                if (best_err < 0.0 || err < best_err) best_err = err;
                if (best_err < 1e-4) break;
            }
            if (best_err < 0.0) continue;  // kink at every step size
            if (best_err > row.max_rel_error) row.max_rel_error = best_err;
            ++row.checked;
        }
        out.push_back(row);
    }
    return out;
}

}  // namespace spoofdet
