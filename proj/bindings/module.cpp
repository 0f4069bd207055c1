#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spoofdet/color_texture.hpp"
#include "spoofdet/diagnostics.hpp"
#include "spoofdet/eval.hpp"
#include "spoofdet/model.hpp"

namespace py = pybind11;
using namespace spoofdet;

namespace {

std::vector<std::uint8_t> plane_from_array(const py::array_t<std::uint8_t>& plane, int& w,
                                           int& h) {
    auto buf = plane.request();
    if (buf.ndim != 2) throw ShapeError("plane must be a 2-d uint8 array");
    h = static_cast<int>(buf.shape[0]);
    w = static_cast<int>(buf.shape[1]);
    auto view = plane.unchecked<2>();
    std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) out[static_cast<std::size_t>(y) * w + x] = view(y, x);
    }
    return out;
}

py::array_t<float> to_array(const std::vector<float>& v) {
    py::array_t<float> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

ScoreSet make_scores(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size()) {
        throw InputError("labels and scores must have equal length");
    }
    ScoreSet s;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        s.push_back({"r" + std::to_string(i), "", labels[i], scores[i]});
    }
    return s;
}

py::list table_to_list(const std::vector<LayerRow>& rows) {
    py::list out;
    for (const auto& r : rows) {
        py::dict d;
        d["name"] = r.name;
        d["size_in"] = r.size_in;
        d["size_out"] = r.size_out;
        d["details"] = r.details;
        d["params"] = r.params;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "spoofdet core: color-texture descriptors, architecture tables, PAD metrics";

    py::register_exception<Error>(m, "SpoofdetError");

    m.def(
        "descriptor_vector",
        [](py::array_t<std::uint8_t> image, bool whitening) {
            auto buf = image.request();
            if (buf.ndim != 3 || buf.shape[2] != 3) {
                throw ShapeError("image must be an HxWx3 uint8 array");
            }
            FaceImage face;
            face.height = static_cast<int>(buf.shape[0]);
            face.width = static_cast<int>(buf.shape[1]);
            auto view = image.unchecked<3>();
            face.rgb.resize(static_cast<std::size_t>(face.width) * face.height * 3);
            std::size_t i = 0;
            for (int y = 0; y < face.height; ++y) {
                for (int x = 0; x < face.width; ++x) {
                    for (int c = 0; c < 3; ++c) face.rgb[i++] = view(y, x, c);
                }
            }
            DescriptorParams params;
            params.lpq_whitening = whitening;
            DescriptorVector vec = extract_descriptor_vector(rgb_to_planes(face), params);
            py::list layout;
            for (const auto& s : vec.layout) {
                layout.append(py::make_tuple(s.descriptor, s.plane, s.offset, s.length));
            }
            return py::make_tuple(to_array(vec.values), layout);
        },
        py::arg("image"), py::arg("whitening") = true,
        "Full color-texture descriptor of an RGB face crop -> (values, layout)");

    m.def(
        "lbp_histogram",
        [](py::array_t<std::uint8_t> plane) {
            int w = 0, h = 0;
            auto p = plane_from_array(plane, w, h);
            return to_array(lbp_histogram(p.data(), w, h));
        },
        py::arg("plane"), "Uniform-pattern LBP histogram (59 bins) of a uint8 plane");

    m.def(
        "coalbp_histogram",
        [](py::array_t<std::uint8_t> plane, int radius, int interval) {
            int w = 0, h = 0;
            auto p = plane_from_array(plane, w, h);
            return to_array(coalbp_histogram(p.data(), w, h, radius, interval));
        },
        py::arg("plane"), py::arg("radius") = 1, py::arg("interval") = 2,
        "CoALBP co-occurrence histogram (1024 bins)");

    m.def(
        "lpq_histogram",
        [](py::array_t<std::uint8_t> plane, int window, float alpha, bool whitening, float rho) {
            int w = 0, h = 0;
            auto p = plane_from_array(plane, w, h);
            return to_array(lpq_histogram(p.data(), w, h, window, alpha, whitening, rho));
        },
        py::arg("plane"), py::arg("window") = 3, py::arg("alpha") = 1.0f / 7.0f,
        py::arg("whitening") = true, py::arg("rho") = 0.9f,
        "LPQ histogram (256 bins)");

    m.def("descriptor_length", [] { return descriptor_vector_length(); },
          "Length of the full descriptor vector (8034 with defaults)");

    m.def(
        "eer",
        [](const std::vector<int>& labels, const std::vector<double>& scores) {
            EerResult r = eer(make_scores(labels, scores));
            return py::make_tuple(r.eer, r.threshold);
        },
        py::arg("labels"), py::arg("scores"),
        "Equal error rate -> (eer, threshold); label 1 = spoof, higher score = more spoof");

    m.def(
        "evaluate",
        [](const std::vector<int>& dev_labels, const std::vector<double>& dev_scores,
           const std::vector<int>& test_labels, const std::vector<double>& test_scores) {
            EvalReport rep = evaluate(make_scores(dev_labels, dev_scores),
                                      make_scores(test_labels, test_scores));
            py::dict d;
            d["eer"] = rep.eer;
            d["eer_threshold"] = rep.eer_threshold;
            d["hter"] = rep.hter;
            d["applied_threshold"] = rep.applied_threshold;
            d["far"] = rep.far;
            d["frr"] = rep.frr;
            return d;
        },
        py::arg("dev_labels"), py::arg("dev_scores"), py::arg("test_labels"),
        py::arg("test_scores"),
        "HTER on test at the dev EER threshold, plus test EER");

    m.def("deep_layer_table", [] { return table_to_list(deep_layer_table(ModelConfig{})); },
          "Deep-channel layer table with parameter counts");
    m.def("wide_layer_table", [] { return table_to_list(wide_layer_table(ModelConfig{})); });
    m.def("fusion_layer_table", [] { return table_to_list(fusion_layer_table(ModelConfig{})); });
    m.def("deep_channel_total",
          [] { return table_total(deep_layer_table(ModelConfig{})); });

    m.def(
        "gradient_battery",
        [](std::uint32_t seed) {
            py::list out;
            for (const auto& r : layer_gradient_battery(seed)) {
                out.append(py::make_tuple(r.name, r.max_rel_error, r.checked));
            }
            return out;
        },
        py::arg("seed") = 1, "Per-layer finite-difference check -> [(name, max_rel_error, n)]");

    m.attr("__version__") = "1.0.0";
}
