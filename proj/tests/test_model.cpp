#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "spoofdet/model.hpp"

using namespace spoofdet;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Tensor rand_images(const ModelConfig& cfg, int n, std::uint64_t seed) {
    Tensor t = tensor_create_random({n, cfg.input_side, cfg.input_side, 3}, seed);
    for (float& v : t.data) v = 0.5f * (v + 1.0f);  // into [0,1)
    return t;
}

}  // namespace

TEST_CASE("default shape chain walks the published architecture") {
    ModelConfig cfg;
    ShapeChain chain = deep_shape_chain(cfg);
    REQUIRE(chain.rows.size() == 18);
    CHECK(chain.rows[0].name == "Conv1");
    CHECK(chain.rows[0].size_in == "160x160x3");
    CHECK(chain.rows[0].size_out == "158x158x32");
    CHECK(chain.rows[1].size_out == "156x156x32");
    CHECK(chain.rows[4].name == "Max pool1");
    CHECK(chain.rows[4].size_out == "78x78x32");
    CHECK(chain.rows[9].size_out == "37x37x64");
    CHECK(chain.rows[10].size_out == "33x33x128");
    CHECK(chain.rows[11].size_out == "29x29x128");
    CHECK(chain.rows[14].name == "Max pool3");
    CHECK(chain.rows[14].size_out == "14x14x128");
    CHECK(chain.flatten_len == 25088);
    CHECK(chain.rows[15].name == "Dense1");
    CHECK(chain.rows[15].size_in == "25088x1");
    CHECK(chain.rows[15].size_out == "512x1");
    CHECK(chain.rows[17].name == "Embedding");
    CHECK(chain.rows[17].size_out == "512x1");

    // a 5x5 block cannot fit a 16x16 input: the chain must break loudly
    ModelConfig bad = ModelConfig::tiny();
    bad.blocks.push_back({5, 8, 5, 8});
    CHECK_THROWS_AS(deep_shape_chain(bad), ShapeError);
}

TEST_CASE("deep layer table reproduces the published parameter counts") {
    ModelConfig cfg;
    std::vector<LayerRow> rows = deep_layer_table(cfg);
    REQUIRE(rows.size() == 18);
    const std::int64_t want[18] = {896, 9248,   128, 0, 0, 18496,    36928, 256,  0,
                                   0,   204928, 409728, 512, 0, 0, 12845568, 2048, 262656};
    for (int i = 0; i < 18; ++i) CHECK(rows[static_cast<std::size_t>(i)].params == want[i]);
    CHECK(table_total(rows) == 13791392);
}

TEST_CASE("fusion and wide tables") {
    ModelConfig cfg;
    std::vector<LayerRow> fusion = fusion_layer_table(cfg);
    REQUIRE(fusion.size() == 5);
    CHECK(fusion[0].params == 0);        // concat
    CHECK(fusion[1].params == 524800);   // 1025 * 512
    CHECK(fusion[2].params == 2048);     // batchnorm on 512
    CHECK(fusion[3].params == 131328);   // 513 * 256
    CHECK(fusion[4].params == 257);      // 256 -> 1 head, truthful count

    std::vector<LayerRow> wide = wide_layer_table(cfg);
    REQUIRE(wide.size() == 2);
    CHECK(wide[0].params == 4113920);  // (8034+1) * 512
    CHECK(wide[1].params == 262656);
}

TEST_CASE("config json round trip") {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.seed = 42;
    cfg.variant = Variant::kWideOnly;
    ModelConfig back = ModelConfig::from_json(cfg.to_json());
    CHECK(back.input_side == cfg.input_side);
    CHECK(back.blocks.size() == cfg.blocks.size());
    CHECK(back.seed == 42);
    CHECK(back.variant == Variant::kWideOnly);
    CHECK(variant_from_name("dual") == Variant::kDual);
    CHECK_THROWS_AS(variant_from_name("both"), ValidationError);
}

TEST_CASE("tiny model forward produces probabilities, deterministically") {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.seed = 5;
    Model a(cfg), b(cfg);
    Tensor imgs = rand_images(cfg, 3, 9);
    Tensor feats = tensor_create_random({3, cfg.wide_input}, 10);

    Tensor pa = a.forward(imgs, feats, Mode::kInfer);
    Tensor pb = b.forward(imgs, feats, Mode::kInfer);
    CHECK(pa.shape == std::vector<int>{3, 1});
    for (float v : pa.data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
    CHECK(pa.data == pb.data);

    ModelConfig other = cfg;
    other.seed = 6;
    Model c(other);
    Tensor pc = c.forward(imgs, feats, Mode::kInfer);
    CHECK(pa.data != pc.data);
}

TEST_CASE("wide batchnorm flag adds the wide bn tensors and round-trips") {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.seed = 8;
    cfg.wide_batchnorm = true;
    Model m(cfg);

    auto names = [](std::vector<NamedParam> ps) {
        std::vector<std::string> out;
        for (const auto& p : ps) out.push_back(p.name);
        return out;
    };
    auto trainable = names(m.trainable_params());
    CHECK(std::count(trainable.begin(), trainable.end(), "wide.bn1.gamma") == 1);
    CHECK(std::count(trainable.begin(), trainable.end(), "wide.bn2.beta") == 1);
    auto all = names(m.all_tensors());
    CHECK(std::count(all.begin(), all.end(), "wide.bn1.running_mean") == 1);

    Tensor imgs = rand_images(cfg, 2, 30);
    Tensor feats = tensor_create_random({2, cfg.wide_input}, 31);
    Tensor p = m.forward(imgs, feats, Mode::kInfer);
    CHECK(p.shape == std::vector<int>{2, 1});

    const std::string path = "test_model_widebn.spfc";
    save_checkpoint(m, path);
    auto loaded = load_checkpoint(path);
    CHECK(loaded->config().wide_batchnorm);
    Tensor p2 = loaded->forward(imgs, feats, Mode::kInfer);
    CHECK(p.data == p2.data);
    std::remove(path.c_str());
}

TEST_CASE("zeroed model predicts 0.5 everywhere") {
    ModelConfig cfg = ModelConfig::tiny();
    Model m(cfg);
    for (auto& p : m.trainable_params()) p.value->fill(0.0f);
    Tensor imgs = rand_images(cfg, 2, 3);
    Tensor feats = tensor_create_random({2, cfg.wide_input}, 4);
    Tensor p = m.forward(imgs, feats, Mode::kInfer);
    for (float v : p.data) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("single-channel variants") {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.variant = Variant::kWideOnly;
    Model wide(cfg);
    Tensor feats = tensor_create_random({2, cfg.wide_input}, 11);
    Tensor imgs1 = rand_images(cfg, 2, 12);
    Tensor imgs2 = rand_images(cfg, 2, 13);
    // pixel input is ignored entirely
    Tensor p1 = wide.forward(imgs1, feats, Mode::kInfer);
    Tensor p2 = wide.forward(imgs2, feats, Mode::kInfer);
    CHECK(p1.data == p2.data);
    CHECK_THROWS_AS(wide.deep_forward(imgs1, Mode::kInfer), ValidationError);

    cfg.variant = Variant::kDeepOnly;
    Model deep(cfg);
    Tensor p3 = deep.forward(imgs1, feats, Mode::kInfer);
    CHECK(p3.shape == std::vector<int>{2, 1});
    CHECK_THROWS_AS(deep.wide_forward(feats, Mode::kInfer), ValidationError);
    CHECK_THROWS_AS(deep.fuse_and_classify(feats, feats, Mode::kInfer), ValidationError);
    // head sits on the embedding: (embedding + 1) * 1 parameters
    bool found = false;
    for (auto& p : deep.trainable_params()) {
        if (p.name == "head.w") {
            CHECK(p.value->shape == std::vector<int>{cfg.embedding, 1});
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("checkpoint round trip is bitwise lossless") {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.seed = 21;
    Model m(cfg);
    const std::string path = "test_model_ckpt.spfc";
    save_checkpoint(m, path);

    auto loaded = load_checkpoint(path);
    auto orig = m.all_tensors();
    auto back = loaded->all_tensors();
    REQUIRE(orig.size() == back.size());
    for (std::size_t i = 0; i < orig.size(); ++i) {
        CHECK(orig[i].name == back[i].name);
        CHECK(orig[i].value->data == back[i].value->data);
    }

    // saving the loaded model reproduces the file byte for byte
    const std::string path2 = "test_model_ckpt2.spfc";
    save_checkpoint(*loaded, path2);
    CHECK(slurp(path) == slurp(path2));
    std::remove(path2.c_str());
    std::remove(path.c_str());
}

TEST_CASE("checkpoint with optimizer state round trips") {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.seed = 22;
    Model m(cfg);
    SgdOptimizer opt;
    auto params = m.trainable_params();
    opt.attach(params);

    // one real training step so velocities are non-trivial
    Tensor imgs = rand_images(cfg, 2, 30);
    Tensor feats = tensor_create_random({2, cfg.wide_input}, 31);
    m.zero_grad();
    Tensor p = m.forward(imgs, feats, Mode::kTrain);
    Tensor g({2, 1}, 0.0f);
    g.data[0] = static_cast<float>(bce_grad(p.data[0], 1) / 2.0);
    g.data[1] = static_cast<float>(bce_grad(p.data[1], 0) / 2.0);
    m.backward(g);
    opt.update(params);

    const std::string path = "test_model_opt.spfc";
    save_checkpoint(m, path, &opt);
    SgdOptimizer opt2;
    auto loaded = load_checkpoint(path, &opt2);
    CHECK(opt2.step == opt.step);
    CHECK(opt2.lr0 == opt.lr0);
    REQUIRE(opt2.velocity.size() == opt.velocity.size());
    for (std::size_t i = 0; i < opt.velocity.size(); ++i) {
        CHECK(opt2.velocity[i].data == opt.velocity[i].data);
    }
    std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints raise the specified errors") {
    ModelConfig cfg = ModelConfig::tiny();
    Model m(cfg);
    const std::string path = "test_model_bad.spfc";
    save_checkpoint(m, path);
    std::string bytes = slurp(path);

    // truncated payload
    spit(path, bytes.substr(0, bytes.size() - 1));
    CHECK_THROWS_AS(load_checkpoint(path), TruncatedPayloadError);

    // bad magic
    std::string magic = bytes;
    magic[0] = 'X';
    spit(path, magic);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointHeaderError);

    // file ends inside the JSON header
    spit(path, bytes.substr(0, 20));
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointHeaderError);

    CHECK_THROWS_AS(load_checkpoint("no_such_file.spfc"), IoError);
    std::remove(path.c_str());
}

TEST_CASE("gradients flow through every trainable parameter") {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.seed = 77;
    cfg.dropout_rate = 0.0f;  // keep the whole graph active
    Model m(cfg);
    Tensor imgs = rand_images(cfg, 4, 40);
    Tensor feats = tensor_create_random({4, cfg.wide_input}, 41);
    m.zero_grad();
    Tensor p = m.forward(imgs, feats, Mode::kTrain);
    Tensor g({4, 1}, 0.0f);
    for (int i = 0; i < 4; ++i) {
        g.data[static_cast<std::size_t>(i)] =
            static_cast<float>(bce_grad(p.data[static_cast<std::size_t>(i)], i % 2) / 4.0);
    }
    m.backward(g);
    for (auto& prm : m.trainable_params()) {
        double mag = 0.0;
        for (float v : prm.grad->data) mag += std::abs(v);
        INFO(prm.name);
        CHECK(mag > 0.0);
    }
}
