// spoofdet: face presentation-attack detection toolkit.
//
// Subcommands wire the pipeline together through files only:
//   synth -> dataset + manifest      extract -> feature cache
//   train -> checkpoint + loss log   eval/crosseval -> reports
//   predict -> score file            gradcheck/inspect -> diagnostics
//
// Every artifact embeds (or carries a .config.json sidecar with) the fully
// resolved configuration that produced it.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spoofdet/data.hpp"
#include "spoofdet/diagnostics.hpp"
#include "spoofdet/eval.hpp"
#include "spoofdet/model.hpp"
#include "spoofdet/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spoofdet;

namespace {

void write_text_atomic(const std::string& path, const std::string& text) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc | std::ios::binary);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os << text;
        if (!os) throw IoError("write failure on " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

void write_sidecar(const std::string& artifact, const json& cfg) {
    write_text_atomic(artifact + ".config.json", cfg.dump(2) + "\n");
}

std::string default_root(const std::string& manifest, const std::string& given) {
    if (!given.empty()) return given;
    return fs::path(manifest).parent_path().string();
}

void require_readable(const std::string& path, const char* what) {
    std::ifstream is(path);
    if (!is) throw InputError(std::string(what) + " '" + path + "' is not readable");
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOpts {
    std::string out;
    SynthSpec spec;
};

void run_synth(const SynthOpts& o) {
    auto records = synth_dataset(o.spec, o.out);
    std::string manifest = (fs::path(o.out) / "manifest.csv").string();
    save_manifest(records, manifest);
    json cfg{{"command", "synth"},
             {"out", o.out},
             {"train_genuine", o.spec.train_genuine},
             {"train_spoof", o.spec.train_spoof},
             {"dev_genuine", o.spec.dev_genuine},
             {"dev_spoof", o.spec.dev_spoof},
             {"test_genuine", o.spec.test_genuine},
             {"test_spoof", o.spec.test_spoof},
             {"side", o.spec.side},
             {"seed", o.spec.seed},
             {"style", o.spec.style}};
    write_sidecar(manifest, cfg);
    std::cout << "wrote " << records.size() << " images and " << manifest << "\n";
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

struct ExtractOpts {
    std::string manifest, image_root, out;
    PreprocessSpec prep;
    DescriptorParams params;
};

void run_extract(const ExtractOpts& o) {
    require_readable(o.manifest, "manifest");
    auto records = load_manifest(o.manifest);
    std::string root = default_root(o.manifest, o.image_root);
    CacheReport rep = build_feature_cache(records, root, o.out, o.prep, o.params);
    for (const auto& [path, err] : rep.failures) {
        std::cerr << "skip " << path << ": " << err << "\n";
    }
    if (rep.written == 0 && !records.empty()) {
        throw ValidationError("no features extracted; every record failed");
    }
    json cfg{{"command", "extract"},
             {"manifest", o.manifest},
             {"image_root", root},
             {"out", o.out},
             {"margin", o.prep.margin},
             {"output_side", o.prep.output_side},
             {"include_gray", o.params.include_gray},
             {"lpq_whitening", o.params.lpq_whitening},
             {"coalbp_interval", o.params.coalbp_interval},
             {"vector_length", descriptor_vector_length(o.params)}};
    write_sidecar(o.out, cfg);
    std::cout << "wrote " << rep.written << " feature vectors to " << o.out << " ("
              << rep.failures.size() << " failures)\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
    std::string manifest, image_root, cache, out;
    TrainConfig tcfg;
    std::string variant = "dual";
    int input_side = 160;
    float dropout = 0.1f;
    bool tiny = false;
    bool wide_batchnorm = false;
    int margin = 44;
};

json train_cfg_json(const TrainOpts& o, const ModelConfig& mc) {
    return json{{"command", "train"},
                {"manifest", o.manifest},
                {"cache", o.cache},
                {"out", o.out},
                {"batch_size", o.tcfg.batch_size},
                {"epochs", o.tcfg.epochs},
                {"lr", o.tcfg.lr},
                {"decay", o.tcfg.decay},
                {"momentum", o.tcfg.momentum},
                {"seed", o.tcfg.seed},
                {"target_eer", o.tcfg.target_eer},
                {"model", json::parse(mc.to_json())}};
}

void run_train(const TrainOpts& o) {
    require_readable(o.manifest, "manifest");
    require_readable(o.cache, "feature cache");
    auto records = load_manifest(o.manifest);
    std::string root = default_root(o.manifest, o.image_root);

    PreprocessSpec prep;
    prep.margin = o.margin;
    prep.output_side = o.tiny ? ModelConfig::tiny().input_side : o.input_side;

    Dataset train_ds = load_dataset(records, "train", root, o.cache, prep);
    Dataset dev_ds;
    bool has_dev = !filter_split(records, "dev").empty();
    if (has_dev) dev_ds = load_dataset(records, "dev", root, o.cache, prep);

    ModelConfig mc = o.tiny ? ModelConfig::tiny() : ModelConfig{};
    if (!o.tiny) mc.input_side = o.input_side;
    mc.wide_input = train_ds.feature_len;
    mc.dropout_rate = o.dropout;
    mc.wide_batchnorm = o.wide_batchnorm;
    mc.seed = o.tcfg.seed;
    mc.variant = variant_from_name(o.variant);

    Model model(mc);
    SgdOptimizer opt;
    TrainResult res = train_model(model, opt, train_ds, has_dev ? &dev_ds : nullptr, o.tcfg);
    save_checkpoint(model, o.out, &opt);
    write_sidecar(o.out, train_cfg_json(o, mc));

    std::cout << "trained " << res.epochs_run << " epoch(s), final batch loss "
              << res.final_loss;
    if (res.final_eval_eer >= 0.0) std::cout << ", dev EER " << res.final_eval_eer;
    std::cout << "\ncheckpoint: " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// predict / eval / crosseval
// ---------------------------------------------------------------------------

ScoreSet scores_for_split(Model& model, const std::vector<ManifestRecord>& records,
                          const std::string& split, const std::string& root,
                          const std::string& cache, int margin, int batch, bool aggregate) {
    PreprocessSpec prep;
    prep.margin = margin;
    prep.output_side = model.config().input_side;
    Dataset ds = load_dataset(records, split, root, cache, prep);
    ScoreSet scores = score_dataset(model, ds, batch);
    return aggregate ? aggregate_by_group(scores) : scores;
}

struct PredictOpts {
    std::string checkpoint, manifest, image_root, cache, out;
    std::string split = "test";
    int batch = 32;
    int margin = 44;
    bool aggregate = false;
};

void run_predict(const PredictOpts& o) {
    require_readable(o.manifest, "manifest");
    auto model = load_checkpoint(o.checkpoint);
    auto records = load_manifest(o.manifest);
    std::string root = default_root(o.manifest, o.image_root);
    ScoreSet scores = scores_for_split(*model, records, o.split, root, o.cache, o.margin,
                                       o.batch, o.aggregate);
    save_scores(scores, o.out);
    json cfg{{"command", "predict"},      {"checkpoint", o.checkpoint},
             {"manifest", o.manifest},    {"cache", o.cache},
             {"split", o.split},          {"aggregate", o.aggregate},
             {"margin", o.margin},        {"out", o.out},
             {"model", json::parse(model->config().to_json())}};
    write_sidecar(o.out, cfg);
    std::cout << "wrote " << scores.size() << " scores to " << o.out << "\n";
}

struct EvalOpts {
    std::string checkpoint, manifest, image_root, cache, report;
    std::string scores_out, roc_out;
    std::string dev_split = "dev", test_split = "test";
    int batch = 32;
    int margin = 44;
    bool aggregate = false;
};

void print_report(const EvalReport& rep) {
    std::cout << std::fixed << std::setprecision(4);
    std::cout << "test EER   " << 100.0 * rep.eer << "%  (threshold " << rep.eer_threshold
              << ")\n";
    std::cout << "HTER       " << 100.0 * rep.hter << "%  at dev threshold "
              << rep.applied_threshold << "\n";
    std::cout << "FAR / FRR  " << 100.0 * rep.far << "% / " << 100.0 * rep.frr << "%\n";
    std::cout << "counts     " << rep.counts.genuine << " genuine, " << rep.counts.spoof
              << " spoof\n";
    std::cout.unsetf(std::ios::fixed);
}

void run_eval(const EvalOpts& o) {
    require_readable(o.manifest, "manifest");
    auto model = load_checkpoint(o.checkpoint);
    auto records = load_manifest(o.manifest);
    std::string root = default_root(o.manifest, o.image_root);

    ScoreSet dev = scores_for_split(*model, records, o.dev_split, root, o.cache, o.margin,
                                    o.batch, o.aggregate);
    ScoreSet test = scores_for_split(*model, records, o.test_split, root, o.cache, o.margin,
                                     o.batch, o.aggregate);
    EvalReport rep = evaluate(dev, test);

    json cfg{{"command", "eval"},        {"checkpoint", o.checkpoint},
             {"manifest", o.manifest},   {"cache", o.cache},
             {"dev_split", o.dev_split}, {"test_split", o.test_split},
             {"aggregate", o.aggregate}, {"margin", o.margin},
             {"model", json::parse(model->config().to_json())}};
    json out = json::parse(rep.to_json());
    out["effective_config"] = cfg;
    write_text_atomic(o.report, out.dump(2) + "\n");

    if (!o.scores_out.empty()) {
        save_scores(test, o.scores_out);
        write_sidecar(o.scores_out, cfg);
    }
    if (!o.roc_out.empty()) save_roc_csv(rep.roc, o.roc_out);
    print_report(rep);
    std::cout << "report: " << o.report << "\n";
}

struct CrossOpts {
    std::string checkpoint, manifest, image_root, cache, out;
    std::vector<std::string> eval_names, eval_manifests, eval_caches, eval_roots;
    int batch = 32;
    int margin = 44;
    bool aggregate = false;
};

void run_crosseval(const CrossOpts& o) {
    if (o.eval_names.size() != o.eval_manifests.size() ||
        o.eval_names.size() != o.eval_caches.size() ||
        (!o.eval_roots.empty() && o.eval_roots.size() != o.eval_names.size())) {
        throw InputError("--eval-name/--eval-manifest/--eval-cache/--eval-root must repeat "
                         "in lockstep");
    }
    require_readable(o.manifest, "manifest");
    auto model = load_checkpoint(o.checkpoint);
    auto records = load_manifest(o.manifest);
    std::string root = default_root(o.manifest, o.image_root);

    // operating threshold: the training dataset's dev-set EER point
    ScoreSet dev = scores_for_split(*model, records, "dev", root, o.cache, o.margin, o.batch,
                                    o.aggregate);
    EerResult dev_point = eer(dev);

    json matrix = json::array();
    std::cout << std::left << std::setw(16) << "dataset" << std::setw(12) << "EER%"
              << "HTER%\n";
    auto eval_one = [&](const std::string& name, const std::vector<ManifestRecord>& recs,
                        const std::string& r, const std::string& cache) {
        ScoreSet test = scores_for_split(*model, recs, "test", r, cache, o.margin, o.batch,
                                         o.aggregate);
        double far = 0.0, frr = 0.0;
        rates_at_threshold(test, dev_point.threshold, far, frr);
        double hter = (far + frr) / 2.0;
        double test_eer = eer(test).eer;
        matrix.push_back({{"dataset", name},
                          {"eer", test_eer},
                          {"hter", hter},
                          {"far", far},
                          {"frr", frr}});
        std::cout << std::left << std::setw(16) << name << std::setw(12)
                  << 100.0 * test_eer << 100.0 * hter << "\n";
    };

    eval_one("train-dataset", records, root, o.cache);
    for (std::size_t i = 0; i < o.eval_names.size(); ++i) {
        auto recs = load_manifest(o.eval_manifests[i]);
        std::string r = o.eval_roots.empty()
                            ? default_root(o.eval_manifests[i], "")
                            : o.eval_roots[i];
        eval_one(o.eval_names[i], recs, r, o.eval_caches[i]);
    }

    if (!o.out.empty()) {
        json cfg{{"command", "crosseval"},
                 {"checkpoint", o.checkpoint},
                 {"manifest", o.manifest},
                 {"cache", o.cache},
                 {"aggregate", o.aggregate},
                 {"model", json::parse(model->config().to_json())}};
        json doc{{"threshold", dev_point.threshold},
                 {"dev_eer", dev_point.eer},
                 {"matrix", matrix},
                 {"effective_config", cfg}};
        write_text_atomic(o.out, doc.dump(2) + "\n");
        std::cout << "matrix: " << o.out << "\n";
    }
}

// ---------------------------------------------------------------------------
// gradcheck / inspect
// ---------------------------------------------------------------------------

struct GradOpts {
    double tolerance = 1e-3;
    int probes = 120;
    std::uint32_t seed = 1;
};

void run_gradcheck(const GradOpts& o) {
    std::vector<LayerCheck> rows = layer_gradient_battery(o.seed);
    ModelConfig tiny = ModelConfig::tiny();
    tiny.seed = o.seed;
    std::vector<LayerCheck> model_rows = model_gradient_check(tiny, o.probes, o.seed);
    rows.insert(rows.end(), model_rows.begin(), model_rows.end());

    bool ok = true;
    std::cout << std::left << std::setw(28) << "layer" << std::setw(16) << "max_rel_error"
              << "checked\n";
    for (const auto& r : rows) {
        std::cout << std::left << std::setw(28) << r.name << std::setw(16)
                  << std::scientific << r.max_rel_error << std::defaultfloat << r.checked
                  << "\n";
        if (r.max_rel_error > o.tolerance) ok = false;
    }
    if (!ok) {
        throw NumericError("gradient check exceeded tolerance " +
                           std::to_string(o.tolerance));
    }
    std::cout << "all gradients within " << o.tolerance << "\n";
}

struct InspectOpts {
    std::string variant = "dual";
    int input_side = 160;
    bool tiny = false;
    std::string json_out;
};

void print_rows(const std::string& title, const std::vector<LayerRow>& rows) {
    std::cout << title << "\n";
    std::cout << std::left << std::setw(16) << "layer" << std::setw(14) << "size-in"
              << std::setw(14) << "size-out" << std::setw(22) << "details"
              << "params\n";
    for (const auto& r : rows) {
        std::cout << std::left << std::setw(16) << r.name << std::setw(14) << r.size_in
                  << std::setw(14) << r.size_out << std::setw(22) << r.details << r.params
                  << "\n";
    }
}

void run_inspect(const InspectOpts& o) {
    ModelConfig mc = o.tiny ? ModelConfig::tiny() : ModelConfig{};
    if (!o.tiny) mc.input_side = o.input_side;
    mc.variant = variant_from_name(o.variant);

    auto deep = deep_layer_table(mc);
    auto wide = wide_layer_table(mc);
    auto fusion = fusion_layer_table(mc);
    std::int64_t deep_total = table_total(deep);
    std::int64_t wide_total = table_total(wide);
    std::int64_t fusion_total = table_total(fusion);

    print_rows("deep channel", deep);
    std::cout << "deep channel total: " << deep_total << "\n\n";
    print_rows("wide channel", wide);
    std::cout << "wide channel total: " << wide_total << "\n\n";
    print_rows("fusion", fusion);
    std::cout << "fusion total: " << fusion_total << "\n";
    std::cout << "grand total: " << deep_total + wide_total + fusion_total << "\n";

    if (!o.json_out.empty()) {
        auto rows_json = [](const std::vector<LayerRow>& rows) {
            json out = json::array();
            for (const auto& r : rows) {
                out.push_back({{"name", r.name},
                               {"size_in", r.size_in},
                               {"size_out", r.size_out},
                               {"details", r.details},
                               {"params", r.params}});
            }
            return out;
        };
        json doc{{"deep", rows_json(deep)},
                 {"wide", rows_json(wide)},
                 {"fusion", rows_json(fusion)},
                 {"deep_total", deep_total},
                 {"wide_total", wide_total},
                 {"fusion_total", fusion_total},
                 {"grand_total", deep_total + wide_total + fusion_total},
                 {"effective_config", json::parse(mc.to_json())}};
        write_text_atomic(o.json_out, doc.dump(2) + "\n");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"face presentation-attack detection toolkit"};
    app.require_subcommand(1);

    SynthOpts so;
    auto* synth = app.add_subcommand("synth", "generate a procedural dataset");
    synth->set_config("--config");
    synth->add_option("--out", so.out, "output directory")->required();
    synth->add_option("--train-genuine", so.spec.train_genuine);
    synth->add_option("--train-spoof", so.spec.train_spoof);
    synth->add_option("--dev-genuine", so.spec.dev_genuine);
    synth->add_option("--dev-spoof", so.spec.dev_spoof);
    synth->add_option("--test-genuine", so.spec.test_genuine);
    synth->add_option("--test-spoof", so.spec.test_spoof);
    synth->add_option("--side", so.spec.side, "image side length");
    synth->add_option("--seed", so.spec.seed)->envname("SPOOFDET_SEED");
    synth->add_option("--style", so.spec.style, "artifact distribution style (0 or 1)");
    synth->callback([&] { run_synth(so); });

    ExtractOpts xo;
    auto* extract = app.add_subcommand("extract", "build the descriptor feature cache");
    extract->set_config("--config");
    extract->add_option("--manifest", xo.manifest)->required();
    extract->add_option("--image-root", xo.image_root, "default: manifest directory");
    extract->add_option("--out", xo.out, "cache file to write")->required();
    extract->add_option("--side", xo.prep.output_side, "face crop side");
    extract->add_option("--margin", xo.prep.margin, "crop margin in pixels");
    extract->add_flag("--include-gray", xo.params.include_gray, "append grayscale plane");
    bool no_whitening = false;
    extract->add_flag("--no-whitening", no_whitening, "disable LPQ decorrelation");
    extract->callback([&] {
        xo.params.lpq_whitening = !no_whitening;
        run_extract(xo);
    });

    TrainOpts to;
    auto* train = app.add_subcommand("train", "train a model on a manifest");
    train->set_config("--config");
    train->add_option("--manifest", to.manifest)->required();
    train->add_option("--image-root", to.image_root);
    train->add_option("--cache", to.cache, "feature cache from extract")->required();
    train->add_option("--out", to.out, "checkpoint to write")->required();
    train->add_option("--epochs", to.tcfg.epochs);
    train->add_option("--batch", to.tcfg.batch_size);
    train->add_option("--lr", to.tcfg.lr);
    train->add_option("--decay", to.tcfg.decay);
    train->add_option("--momentum", to.tcfg.momentum);
    train->add_option("--seed", to.tcfg.seed)->envname("SPOOFDET_SEED");
    train->add_option("--variant", to.variant, "dual | deep | wide");
    train->add_option("--input-side", to.input_side);
    train->add_option("--margin", to.margin);
    train->add_option("--dropout", to.dropout);
    train->add_option("--target-eer", to.tcfg.target_eer, "stop once dev EER reaches this");
    train->add_option("--loss-log", to.tcfg.loss_log_path, "CSV epoch,step,loss,lr");
    train->add_flag("--tiny", to.tiny, "desk-scale architecture preset");
    train->add_flag("--wide-batchnorm", to.wide_batchnorm,
                    "batchnorm after each wide dense layer");
    train->callback([&] { run_train(to); });

    PredictOpts po;
    auto* predict = app.add_subcommand("predict", "score a manifest split");
    predict->set_config("--config");
    predict->add_option("--checkpoint", po.checkpoint)->required();
    predict->add_option("--manifest", po.manifest)->required();
    predict->add_option("--image-root", po.image_root);
    predict->add_option("--cache", po.cache)->required();
    predict->add_option("--split", po.split);
    predict->add_option("--out", po.out, "score CSV to write")->required();
    predict->add_option("--batch", po.batch);
    predict->add_option("--margin", po.margin);
    predict->add_flag("--aggregate", po.aggregate, "mean score per group");
    predict->callback([&] { run_predict(po); });

    EvalOpts eo;
    auto* evalc = app.add_subcommand("eval", "dev-thresholded evaluation of a test split");
    evalc->set_config("--config");
    evalc->add_option("--checkpoint", eo.checkpoint)->required();
    evalc->add_option("--manifest", eo.manifest)->required();
    evalc->add_option("--image-root", eo.image_root);
    evalc->add_option("--cache", eo.cache)->required();
    evalc->add_option("--report", eo.report, "JSON report to write")->required();
    evalc->add_option("--scores-out", eo.scores_out);
    evalc->add_option("--roc-out", eo.roc_out);
    evalc->add_option("--dev-split", eo.dev_split);
    evalc->add_option("--test-split", eo.test_split);
    evalc->add_option("--batch", eo.batch);
    evalc->add_option("--margin", eo.margin);
    evalc->add_flag("--aggregate", eo.aggregate, "mean score per group");
    evalc->callback([&] { run_eval(eo); });

    CrossOpts co;
    auto* cross = app.add_subcommand("crosseval", "evaluate one checkpoint across datasets");
    cross->set_config("--config");
    cross->add_option("--checkpoint", co.checkpoint)->required();
    cross->add_option("--manifest", co.manifest, "training dataset manifest")->required();
    cross->add_option("--image-root", co.image_root);
    cross->add_option("--cache", co.cache)->required();
    cross->add_option("--out", co.out, "JSON matrix to write");
    cross->add_option("--eval-name", co.eval_names, "cross-dataset name (repeatable)");
    cross->add_option("--eval-manifest", co.eval_manifests);
    cross->add_option("--eval-cache", co.eval_caches);
    cross->add_option("--eval-root", co.eval_roots);
    cross->add_option("--batch", co.batch);
    cross->add_option("--margin", co.margin);
    cross->add_flag("--aggregate", co.aggregate);
    cross->callback([&] { run_crosseval(co); });

    GradOpts go;
    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    grad->set_config("--config");
    grad->add_option("--tolerance", go.tolerance);
    grad->add_option("--probes", go.probes, "probes per parameter tensor");
    grad->add_option("--seed", go.seed)->envname("SPOOFDET_SEED");
    grad->callback([&] { run_gradcheck(go); });

    InspectOpts io;
    auto* inspect = app.add_subcommand("inspect", "print per-layer parameter tables");
    inspect->set_config("--config");
    inspect->add_option("--variant", io.variant, "dual | deep | wide");
    inspect->add_option("--input-side", io.input_side);
    inspect->add_option("--json-out", io.json_out);
    inspect->add_flag("--tiny", io.tiny);
    inspect->callback([&] { run_inspect(io); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error internal-failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
