#include "spoofdet/model.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace spoofdet {

using nlohmann::json;

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::kDual: return "dual";
        case Variant::kDeepOnly: return "deep";
        case Variant::kWideOnly: return "wide";
    }
    return "dual";
}

Variant variant_from_name(const std::string& name) {
    if (name == "dual") return Variant::kDual;
    if (name == "deep") return Variant::kDeepOnly;
    if (name == "wide") return Variant::kWideOnly;
    throw ValidationError("unknown model variant '" + name + "'");
}

ModelConfig ModelConfig::tiny() {
    ModelConfig cfg;
    cfg.input_side = 16;
    cfg.blocks = {{3, 4, 3, 4}, {3, 8, 3, 8}};
    cfg.dense_units = 64;
    cfg.embedding = 64;
    cfg.wide_input = 64;
    cfg.wide_hidden = 64;
    cfg.wide_embedding = 64;
    cfg.fusion_hidden1 = 64;
    cfg.fusion_hidden2 = 32;
    return cfg;
}

namespace {

json config_to_json_obj(const ModelConfig& cfg) {
    json blocks = json::array();
    for (const auto& b : cfg.blocks) {
        blocks.push_back({{"kernel1", b.kernel1},
                          {"filters1", b.filters1},
                          {"kernel2", b.kernel2},
                          {"filters2", b.filters2}});
    }
    return json{{"input_side", cfg.input_side},
                {"blocks", blocks},
                {"dense_units", cfg.dense_units},
                {"embedding", cfg.embedding},
                {"wide_input", cfg.wide_input},
                {"wide_hidden", cfg.wide_hidden},
                {"wide_embedding", cfg.wide_embedding},
                {"fusion_hidden1", cfg.fusion_hidden1},
                {"fusion_hidden2", cfg.fusion_hidden2},
                {"dropout_rate", cfg.dropout_rate},
                {"wide_batchnorm", cfg.wide_batchnorm},
                {"seed", cfg.seed},
                {"variant", variant_name(cfg.variant)}};
}

ModelConfig config_from_json_obj(const json& j) {
    ModelConfig cfg;
    cfg.input_side = j.at("input_side").get<int>();
    cfg.blocks.clear();
    for (const auto& b : j.at("blocks")) {
        cfg.blocks.push_back({b.at("kernel1").get<int>(), b.at("filters1").get<int>(),
                              b.at("kernel2").get<int>(), b.at("filters2").get<int>()});
    }
    cfg.dense_units = j.at("dense_units").get<int>();
    cfg.embedding = j.at("embedding").get<int>();
    cfg.wide_input = j.at("wide_input").get<int>();
    cfg.wide_hidden = j.at("wide_hidden").get<int>();
    cfg.wide_embedding = j.at("wide_embedding").get<int>();
    cfg.fusion_hidden1 = j.at("fusion_hidden1").get<int>();
    cfg.fusion_hidden2 = j.at("fusion_hidden2").get<int>();
    cfg.dropout_rate = j.at("dropout_rate").get<float>();
    cfg.wide_batchnorm = j.value("wide_batchnorm", false);
    cfg.seed = j.at("seed").get<std::uint32_t>();
    cfg.variant = variant_from_name(j.at("variant").get<std::string>());
    return cfg;
}

std::string size3(int h, int w, int c) {
    std::ostringstream os;
    os << h << "x" << w << "x" << c;
    return os.str();
}

std::string size1(int n) { return std::to_string(n) + "x1"; }

int conv_out(int in, int k) {
    int out = in - k + 1;
    if (out < 1) {
        throw ShapeError("conv output dim " + std::to_string(out) + " for input " +
                         std::to_string(in) + " kernel " + std::to_string(k));
    }
    return out;
}

int pool_out(int in) {
    if (in < 2) throw ShapeError("pool input dim " + std::to_string(in) + " < window 2");
    return (in - 2) / 2 + 1;
}

}  // namespace

std::string ModelConfig::to_json() const { return config_to_json_obj(*this).dump(); }

ModelConfig ModelConfig::from_json(const std::string& text) {
    return config_from_json_obj(json::parse(text));
}

ShapeChain deep_shape_chain(const ModelConfig& cfg) {
    ShapeChain chain;
    int side = cfg.input_side;
    int ch = 3;
    int conv_idx = 1;
    int block_idx = 1;
    for (const auto& b : cfg.blocks) {
        int s1 = conv_out(side, b.kernel1);
        chain.rows.push_back({"Conv" + std::to_string(conv_idx), size3(side, side, ch),
                              size3(s1, s1, b.filters1),
                              "(" + std::to_string(b.kernel1) + "," + std::to_string(b.kernel1) +
                                  "), S=1, P=valid",
                              0});
        ++conv_idx;
        int s2 = conv_out(s1, b.kernel2);
        chain.rows.push_back({"Conv" + std::to_string(conv_idx), size3(s1, s1, b.filters1),
                              size3(s2, s2, b.filters2),
                              "(" + std::to_string(b.kernel2) + "," + std::to_string(b.kernel2) +
                                  "), S=1, P=valid",
                              0});
        ++conv_idx;
        chain.rows.push_back({"Batch norm" + std::to_string(block_idx),
                              size3(s2, s2, b.filters2), size3(s2, s2, b.filters2), "", 0});
        std::ostringstream rate;
        rate << "Rate=" << cfg.dropout_rate;
        chain.rows.push_back({"Dropout" + std::to_string(block_idx), size3(s2, s2, b.filters2),
                              size3(s2, s2, b.filters2), rate.str(), 0});
        int sp = pool_out(s2);
        chain.rows.push_back({"Max pool" + std::to_string(block_idx), size3(s2, s2, b.filters2),
                              size3(sp, sp, b.filters2), "(2,2), S=2, P=valid", 0});
        side = sp;
        ch = b.filters2;
        ++block_idx;
    }
    chain.flatten_len = side * side * ch;
    chain.rows.push_back({"Dense1", size1(chain.flatten_len), size1(cfg.dense_units),
                          std::to_string(cfg.dense_units) + " neurons (relu)", 0});
    chain.rows.push_back({"Batch norm" + std::to_string(block_idx), size1(cfg.dense_units),
                          size1(cfg.dense_units), "", 0});
    chain.rows.push_back({"Embedding", size1(cfg.dense_units), size1(cfg.embedding),
                          std::to_string(cfg.embedding) + " neurons (relu)", 0});
    return chain;
}

std::vector<LayerRow> deep_layer_table(const ModelConfig& cfg) {
    ShapeChain chain = deep_shape_chain(cfg);
    std::vector<LayerSpec> specs;
    int ch = 3;
    int conv_idx = 1, block_idx = 1;
    for (const auto& b : cfg.blocks) {
        specs.push_back({LayerKind::kConv, "Conv" + std::to_string(conv_idx++), b.kernel1, 1, ch,
                         b.filters1, 0.0f});
        specs.push_back({LayerKind::kConv, "Conv" + std::to_string(conv_idx++), b.kernel2, 1,
                         b.filters1, b.filters2, 0.0f});
        specs.push_back({LayerKind::kBatchNorm, "Batch norm" + std::to_string(block_idx), 0, 1, 0,
                         b.filters2, 0.0f});
        specs.push_back({LayerKind::kDropout, "Dropout" + std::to_string(block_idx), 0, 1, 0, 0,
                         cfg.dropout_rate});
        specs.push_back({LayerKind::kMaxPool, "Max pool" + std::to_string(block_idx), 2, 2, 0, 0,
                         0.0f});
        ch = b.filters2;
        ++block_idx;
    }
    specs.push_back({LayerKind::kDense, "Dense1", 0, 1, chain.flatten_len, cfg.dense_units, 0.0f});
    specs.push_back({LayerKind::kBatchNorm, "Batch norm" + std::to_string(block_idx), 0, 1, 0,
                     cfg.dense_units, 0.0f});
    specs.push_back({LayerKind::kDense, "Embedding", 0, 1, cfg.dense_units, cfg.embedding, 0.0f});

    std::vector<LayerCount> counts = count_params(specs);
    std::vector<LayerRow> rows = chain.rows;
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].params = counts[i].params;
    return rows;
}

std::vector<LayerRow> fusion_layer_table(const ModelConfig& cfg) {
    int concat = cfg.embedding + cfg.wide_embedding;
    std::vector<LayerRow> rows;
    rows.push_back({"Concat", "2x" + std::to_string(cfg.embedding), size1(concat), "", 0});
    rows.push_back({"Dense3", size1(concat), size1(cfg.fusion_hidden1),
                    std::to_string(cfg.fusion_hidden1) + " neurons (relu)",
                    (static_cast<std::int64_t>(concat) + 1) * cfg.fusion_hidden1});
    rows.push_back({"Batch norm4", size1(cfg.fusion_hidden1), size1(cfg.fusion_hidden1), "",
                    4LL * cfg.fusion_hidden1});
    rows.push_back({"Dense4", size1(cfg.fusion_hidden1), size1(cfg.fusion_hidden2),
                    std::to_string(cfg.fusion_hidden2) + " neurons (relu)",
                    (static_cast<std::int64_t>(cfg.fusion_hidden1) + 1) * cfg.fusion_hidden2});
    rows.push_back({"Classification", size1(cfg.fusion_hidden2), "1", "Sigmoid",
                    static_cast<std::int64_t>(cfg.fusion_hidden2) + 1});
    return rows;
}

std::vector<LayerRow> wide_layer_table(const ModelConfig& cfg) {
    std::vector<LayerRow> rows;
    rows.push_back({"Wide dense1", size1(cfg.wide_input), size1(cfg.wide_hidden),
                    std::to_string(cfg.wide_hidden) + " neurons (relu)",
                    (static_cast<std::int64_t>(cfg.wide_input) + 1) * cfg.wide_hidden});
    if (cfg.wide_batchnorm) {
        rows.push_back({"Wide bn1", size1(cfg.wide_hidden), size1(cfg.wide_hidden), "batchnorm",
                        static_cast<std::int64_t>(4) * cfg.wide_hidden});
    }
    rows.push_back({"Wide dense2", size1(cfg.wide_hidden), size1(cfg.wide_embedding),
                    std::to_string(cfg.wide_embedding) + " neurons (relu)",
                    (static_cast<std::int64_t>(cfg.wide_hidden) + 1) * cfg.wide_embedding});
    if (cfg.wide_batchnorm) {
        rows.push_back({"Wide bn2", size1(cfg.wide_embedding), size1(cfg.wide_embedding),
                        "batchnorm", static_cast<std::int64_t>(4) * cfg.wide_embedding});
    }
    return rows;
}

std::int64_t table_total(const std::vector<LayerRow>& rows) {
    std::int64_t t = 0;
    for (const auto& r : rows) t += r.params;
    return t;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    ShapeChain chain = deep_shape_chain(cfg);
    flatten_len_ = chain.flatten_len;

    std::mt19937 rng(cfg.seed);
    bool deep = cfg.variant != Variant::kWideOnly;
    bool wide = cfg.variant != Variant::kDeepOnly;

    if (deep) {
        int ch = 3;
        int conv_idx = 1, block_idx = 1;
        for (const auto& b : cfg.blocks) {
            ConvBlock block;
            block.conv1 = Conv2dLayer("deep.conv" + std::to_string(conv_idx++), b.kernel1, ch,
                                      b.filters1, rng);
            block.conv2 = Conv2dLayer("deep.conv" + std::to_string(conv_idx++), b.kernel2,
                                      b.filters1, b.filters2, rng);
            block.bn = BatchNormLayer("deep.bn" + std::to_string(block_idx), b.filters2);
            block.drop = DropoutLayer("deep.drop" + std::to_string(block_idx), cfg.dropout_rate);
            block.pool.name = "deep.pool" + std::to_string(block_idx);
            blocks_.push_back(std::move(block));
            ch = b.filters2;
            ++block_idx;
        }
        dense1_ = DenseLayer("deep.dense1", flatten_len_, cfg.dense_units, rng);
        bn_dense_ = BatchNormLayer("deep.bn_dense", cfg.dense_units);
        embed_ = DenseLayer("deep.embed", cfg.dense_units, cfg.embedding, rng);
    }
    if (wide) {
        wide1_ = DenseLayer("wide.dense1", cfg.wide_input, cfg.wide_hidden, rng);
        wide2_ = DenseLayer("wide.dense2", cfg.wide_hidden, cfg.wide_embedding, rng);
        if (cfg.wide_batchnorm) {
            wide_bn1_ = BatchNormLayer("wide.bn1", cfg.wide_hidden);
            wide_bn2_ = BatchNormLayer("wide.bn2", cfg.wide_embedding);
        }
    }
    if (cfg.variant == Variant::kDual) {
        int concat = cfg.embedding + cfg.wide_embedding;
        fusion1_ = DenseLayer("fusion.dense3", concat, cfg.fusion_hidden1, rng);
        fusion_bn_ = BatchNormLayer("fusion.bn", cfg.fusion_hidden1);
        fusion2_ = DenseLayer("fusion.dense4", cfg.fusion_hidden1, cfg.fusion_hidden2, rng);
        head_ = DenseLayer("head", cfg.fusion_hidden2, 1, rng);
    } else {
        int emb = cfg.variant == Variant::kDeepOnly ? cfg.embedding : cfg.wide_embedding;
        head_ = DenseLayer("head", emb, 1, rng);
    }
    dropout_rng_.seed(cfg.seed ^ 0x9e3779b9u);
}

void Model::reseed_dropout(std::uint32_t seed) { dropout_rng_.seed(seed); }

std::uint64_t Model::routing_signature() const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    auto mix = [&](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ULL;
    };
    auto mix_mask = [&](const std::vector<char>& m) {
        for (char c : m) mix(static_cast<std::uint64_t>(c) + 1);
    };
    auto mix_idx = [&](const std::vector<std::int64_t>& m) {
        for (std::int64_t v : m) mix(static_cast<std::uint64_t>(v) + 0x9e37u);
    };
    for (const auto& b : blocks_) mix_idx(b.pool.argmax());
    mix_mask(dense1_relu_.mask());
    mix_mask(embed_relu_.mask());
    mix_mask(wide1_relu_.mask());
    mix_mask(wide2_relu_.mask());
    mix_mask(fusion1_relu_.mask());
    mix_mask(fusion2_relu_.mask());
    return h;
}

Tensor Model::deep_forward(const Tensor& images, Mode mode) {
    if (cfg_.variant == Variant::kWideOnly) {
        throw ValidationError("deep channel disabled in wide-only variant");
    }
    if (images.ndim() != 4 || images.dim(1) != cfg_.input_side ||
        images.dim(2) != cfg_.input_side || images.dim(3) != 3) {
        throw ShapeError("deep_forward: expected Nx" + std::to_string(cfg_.input_side) + "x" +
                         std::to_string(cfg_.input_side) + "x3, got " +
                         shape_to_string(images.shape));
    }
    Tensor x = images;
    for (auto& b : blocks_) {
        x = b.conv1.forward(x);
        x = b.conv2.forward(x);
        x = b.bn.forward(x, mode);
        x = b.drop.forward(x, mode, dropout_rng_);
        x = b.pool.forward(x);
    }
    // flatten
    x.shape = {x.dim(0), flatten_len_};
    x = dense1_.forward(x);
    x = dense1_relu_.forward(x);
    x = bn_dense_.forward(x, mode);
    x = embed_.forward(x);
    x = embed_relu_.forward(x);
    ran_deep_ = true;
    last_batch_ = x.dim(0);
    return x;
}

Tensor Model::wide_forward(const Tensor& features, Mode mode) {
    if (cfg_.variant == Variant::kDeepOnly) {
        throw ValidationError("wide channel disabled in deep-only variant");
    }
    if (features.ndim() != 2 || features.dim(1) != cfg_.wide_input) {
        throw ShapeError("wide_forward: expected Nx" + std::to_string(cfg_.wide_input) +
                         ", got " + shape_to_string(features.shape));
    }
    Tensor x = wide1_.forward(features);
    x = wide1_relu_.forward(x);
    if (cfg_.wide_batchnorm) x = wide_bn1_.forward(x, mode);
    x = wide2_.forward(x);
    x = wide2_relu_.forward(x);
    if (cfg_.wide_batchnorm) x = wide_bn2_.forward(x, mode);
    ran_wide_ = true;
    last_batch_ = x.dim(0);
    return x;
}

Tensor Model::fuse_and_classify(const Tensor& deep_emb, const Tensor& wide_emb, Mode mode) {
    if (cfg_.variant != Variant::kDual) {
        throw ValidationError("fusion block only exists in the dual variant");
    }
    if (deep_emb.ndim() != 2 || wide_emb.ndim() != 2 || deep_emb.dim(0) != wide_emb.dim(0) ||
        deep_emb.dim(1) != cfg_.embedding || wide_emb.dim(1) != cfg_.wide_embedding) {
        throw ShapeError("fuse_and_classify: embedding shapes " +
                         shape_to_string(deep_emb.shape) + " / " +
                         shape_to_string(wide_emb.shape) + " invalid");
    }
    int n = deep_emb.dim(0);
    int concat = cfg_.embedding + cfg_.wide_embedding;
    Tensor x({n, concat}, 0.0f);
    for (int i = 0; i < n; ++i) {
        std::copy(deep_emb.ptr() + static_cast<std::size_t>(i) * cfg_.embedding,
                  deep_emb.ptr() + static_cast<std::size_t>(i + 1) * cfg_.embedding,
                  x.ptr() + static_cast<std::size_t>(i) * concat);
        std::copy(wide_emb.ptr() + static_cast<std::size_t>(i) * cfg_.wide_embedding,
                  wide_emb.ptr() + static_cast<std::size_t>(i + 1) * cfg_.wide_embedding,
                  x.ptr() + static_cast<std::size_t>(i) * concat + cfg_.embedding);
    }
    x = fusion1_.forward(x);
    x = fusion1_relu_.forward(x);
    x = fusion_bn_.forward(x, mode);
    x = fusion2_.forward(x);
    x = fusion2_relu_.forward(x);
    x = head_.forward(x);
    return head_sigmoid_.forward(x);
}

Tensor Model::forward(const Tensor& images, const Tensor& features, Mode mode) {
    ran_deep_ = ran_wide_ = false;
    switch (cfg_.variant) {
        case Variant::kDual: {
            Tensor ed = deep_forward(images, mode);
            Tensor ew = wide_forward(features, mode);
            return fuse_and_classify(ed, ew, mode);
        }
        case Variant::kDeepOnly: {
            Tensor ed = deep_forward(images, mode);
            Tensor logits = head_.forward(ed);
            return head_sigmoid_.forward(logits);
        }
        case Variant::kWideOnly: {
            Tensor ew = wide_forward(features, mode);
            Tensor logits = head_.forward(ew);
            return head_sigmoid_.forward(logits);
        }
    }
    throw ValidationError("unreachable variant");
}

Tensor Model::fusion_backward(const Tensor& grad_prob, Tensor& grad_deep_emb,
                              Tensor& grad_wide_emb) {
    Tensor g = head_sigmoid_.backward(grad_prob);
    g = head_.backward(g);
    g = fusion2_relu_.backward(g);
    g = fusion2_.backward(g);
    g = fusion_bn_.backward(g);
    g = fusion1_relu_.backward(g);
    g = fusion1_.backward(g);
    int n = g.dim(0);
    grad_deep_emb = Tensor::zeros({n, cfg_.embedding});
    grad_wide_emb = Tensor::zeros({n, cfg_.wide_embedding});
    int concat = cfg_.embedding + cfg_.wide_embedding;
    for (int i = 0; i < n; ++i) {
        std::copy(g.ptr() + static_cast<std::size_t>(i) * concat,
                  g.ptr() + static_cast<std::size_t>(i) * concat + cfg_.embedding,
                  grad_deep_emb.ptr() + static_cast<std::size_t>(i) * cfg_.embedding);
        std::copy(g.ptr() + static_cast<std::size_t>(i) * concat + cfg_.embedding,
                  g.ptr() + static_cast<std::size_t>(i + 1) * concat,
                  grad_wide_emb.ptr() + static_cast<std::size_t>(i) * cfg_.wide_embedding);
    }
    return g;
}

void Model::deep_backward(const Tensor& grad_emb) {
    Tensor g = embed_relu_.backward(grad_emb);
    g = embed_.backward(g);
    g = bn_dense_.backward(g);
    g = dense1_relu_.backward(g);
    g = dense1_.backward(g);
    // unflatten to the last pooled spatial shape
    const auto& last = cfg_.blocks.back();
    int side = cfg_.input_side;
    for (const auto& b : cfg_.blocks) {
        side = pool_out(conv_out(conv_out(side, b.kernel1), b.kernel2));
    }
    g.shape = {g.dim(0), side, side, last.filters2};
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
        g = it->pool.backward(g);
        g = it->drop.backward(g);
        g = it->bn.backward(g);
        g = it->conv2.backward(g);
        g = it->conv1.backward(g);
    }
}

void Model::wide_backward(const Tensor& grad_emb) {
    Tensor g = grad_emb;
    if (cfg_.wide_batchnorm) g = wide_bn2_.backward(g);
    g = wide2_relu_.backward(g);
    g = wide2_.backward(g);
    if (cfg_.wide_batchnorm) g = wide_bn1_.backward(g);
    g = wide1_relu_.backward(g);
    wide1_.backward(g);
}

void Model::backward(const Tensor& grad_prob) {
    switch (cfg_.variant) {
        case Variant::kDual: {
            Tensor gd, gw;
            fusion_backward(grad_prob, gd, gw);
            deep_backward(gd);
            wide_backward(gw);
            break;
        }
        case Variant::kDeepOnly: {
            Tensor g = head_sigmoid_.backward(grad_prob);
            g = head_.backward(g);
            deep_backward(g);
            break;
        }
        case Variant::kWideOnly: {
            Tensor g = head_sigmoid_.backward(grad_prob);
            g = head_.backward(g);
            wide_backward(g);
            break;
        }
    }
}

void Model::zero_grad() {
    for (auto& p : trainable_params()) p.grad->fill(0.0f);
}

std::vector<NamedParam> Model::trainable_params() {
    std::vector<NamedParam> out;
    auto add = [&](std::vector<NamedParam>&& ps) {
        for (auto& p : ps) out.push_back(p);
    };
    if (cfg_.variant != Variant::kWideOnly) {
        for (auto& b : blocks_) {
            add(b.conv1.params());
            add(b.conv2.params());
            add(b.bn.params());
        }
        add(dense1_.params());
        add(bn_dense_.params());
        add(embed_.params());
    }
    if (cfg_.variant != Variant::kDeepOnly) {
        add(wide1_.params());
        add(wide2_.params());
        if (cfg_.wide_batchnorm) {
            add(wide_bn1_.params());
            add(wide_bn2_.params());
        }
    }
    if (cfg_.variant == Variant::kDual) {
        add(fusion1_.params());
        add(fusion_bn_.params());
        add(fusion2_.params());
    }
    add(head_.params());
    return out;
}

std::vector<NamedParam> Model::all_tensors() {
    std::vector<NamedParam> out = trainable_params();
    auto add_stats = [&](BatchNormLayer& bn) {
        out.push_back({bn.name + ".running_mean", &bn.running_mean, nullptr});
        out.push_back({bn.name + ".running_var", &bn.running_var, nullptr});
    };
    if (cfg_.variant != Variant::kWideOnly) {
        for (auto& b : blocks_) add_stats(b.bn);
        add_stats(bn_dense_);
    }
    if (cfg_.variant != Variant::kDeepOnly && cfg_.wide_batchnorm) {
        add_stats(wide_bn1_);
        add_stats(wide_bn2_);
    }
    if (cfg_.variant == Variant::kDual) add_stats(fusion_bn_);
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'P', 'F', 'C'};
constexpr std::uint8_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>((v >> 8) & 0xff),
                            static_cast<unsigned char>((v >> 16) & 0xff),
                            static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    if (is.gcount() != 4) throw CheckpointHeaderError("file ends inside header length field");
    return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
           (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

}  // namespace

void save_checkpoint(Model& model, const std::string& path, const SgdOptimizer* opt) {
    std::vector<NamedParam> tensors = model.all_tensors();
    std::vector<NamedParam> trainable = model.trainable_params();

    json dir = json::array();
    std::uint64_t offset = 0;
    std::vector<const Tensor*> payload;
    auto add_tensor = [&](const std::string& name, const Tensor& t) {
        if (!t.all_finite()) {
            throw NumericError("non-finite values in tensor " + name + " at checkpoint save");
        }
        std::uint64_t bytes = static_cast<std::uint64_t>(t.numel()) * 4;
        dir.push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}, {"length", bytes}});
        payload.push_back(&t);
        offset += bytes;
    };
    for (const auto& p : tensors) add_tensor(p.name, *p.value);

    json header{{"config", json::parse(model.config().to_json())}, {"tensors", dir}};
    if (opt != nullptr) {
        if (opt->velocity.size() != trainable.size()) {
            throw ValidationError("optimizer state does not match model parameters");
        }
        header["optimizer"] = {{"lr0", opt->lr0},
                               {"decay", opt->decay},
                               {"momentum", opt->momentum},
                               {"step", opt->step}};
        json vdir = json::array();
        for (std::size_t i = 0; i < trainable.size(); ++i) {
            const Tensor& v = opt->velocity[i];
            std::uint64_t bytes = static_cast<std::uint64_t>(v.numel()) * 4;
            vdir.push_back({{"name", "opt." + trainable[i].name + ".v"},
                            {"shape", v.shape},
                            {"offset", offset},
                            {"length", bytes}});
            payload.push_back(&v);
            offset += bytes;
        }
        header["optimizer"]["velocities"] = vdir;
    }

    std::string header_text = header.dump();
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os.write(kMagic, 4);
        os.put(static_cast<char>(kVersion));
        write_u32(os, static_cast<std::uint32_t>(header_text.size()));
        os.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
        for (const Tensor* t : payload) {
            os.write(reinterpret_cast<const char*>(t->ptr()),
                     static_cast<std::streamsize>(t->numel() * 4));
        }
        if (!os) throw IoError("write failure on " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

std::unique_ptr<Model> load_checkpoint(const std::string& path, SgdOptimizer* opt) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint " + path);
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        throw CheckpointHeaderError("bad magic in " + path);
    }
    int version = is.get();
    if (version != kVersion) {
        throw CheckpointHeaderError("unsupported checkpoint version " + std::to_string(version));
    }
    std::uint32_t header_len = read_u32(is);
    std::string header_text(header_len, '\0');
    is.read(header_text.data(), header_len);
    if (is.gcount() != static_cast<std::streamsize>(header_len)) {
        throw CheckpointHeaderError("file ends inside JSON header");
    }
    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::exception& e) {
        throw CheckpointHeaderError(std::string("malformed JSON header: ") + e.what());
    }

    ModelConfig cfg = config_from_json_obj(header.at("config"));
    auto model = std::make_unique<Model>(cfg);

    std::string payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

    auto read_into = [&](const json& entry, Tensor& t) {
        std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        if (shape != t.shape) {
            throw ShapeError("checkpoint tensor " + entry.at("name").get<std::string>() +
                             " shape " + shape_to_string(shape) + " does not match config shape " +
                             shape_to_string(t.shape));
        }
        std::uint64_t off = entry.at("offset").get<std::uint64_t>();
        std::uint64_t len = entry.at("length").get<std::uint64_t>();
        if (len != static_cast<std::uint64_t>(t.numel()) * 4 || off + len > payload.size()) {
            throw TruncatedPayloadError("tensor " + entry.at("name").get<std::string>() +
                                        " extends past end of payload");
        }
        std::memcpy(t.ptr(), payload.data() + off, len);
    };

    std::vector<NamedParam> tensors = model->all_tensors();
    const json& dir = header.at("tensors");
    if (dir.size() != tensors.size()) {
        throw ShapeError("checkpoint tensor count " + std::to_string(dir.size()) +
                         " does not match model (" + std::to_string(tensors.size()) + ")");
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (dir[i].at("name").get<std::string>() != tensors[i].name) {
            throw ShapeError("checkpoint tensor order mismatch at " + tensors[i].name);
        }
        read_into(dir[i], *tensors[i].value);
    }

    if (opt != nullptr && header.contains("optimizer")) {
        const json& o = header.at("optimizer");
        opt->lr0 = o.at("lr0").get<float>();
        opt->decay = o.at("decay").get<float>();
        opt->momentum = o.at("momentum").get<float>();
        opt->step = o.at("step").get<std::int64_t>();
        std::vector<NamedParam> trainable = model->trainable_params();
        opt->attach(trainable);
        opt->step = o.at("step").get<std::int64_t>();
        const json& vdir = o.at("velocities");
        for (std::size_t i = 0; i < trainable.size(); ++i) {
            read_into(vdir.at(i), opt->velocity[i]);
        }
    }
    return model;
}

}  // namespace spoofdet
