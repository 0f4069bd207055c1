#include "spoofdet/gradcheck.hpp"

#include <cmath>
#include <string>

namespace spoofdet {

namespace {

void check_epsilon(double epsilon) {
    if (!(epsilon >= 1e-6 && epsilon <= 1e-2)) {
        throw InputError("grad_check epsilon " + std::to_string(epsilon) +
                         " outside [1e-6, 1e-2]");
    }
}

double sum_all(const Tensor& t) {
    double s = 0.0;
    for (float v : t.data) s += v;
    if (!std::isfinite(s)) {
        throw NumericError("non-finite forward sum during gradient check");
    }
    return s;
}

}  // namespace

GradCheckResult grad_check(DiffOp& op, const Tensor& input, double epsilon) {
    check_epsilon(epsilon);
    Tensor out = op.forward(input);
    Tensor ones = Tensor::full(out.shape, 1.0f);
    Tensor analytic = op.backward(input, ones);
    if (!analytic.same_shape(input)) {
        throw ShapeError("backward gradient shape " + shape_to_string(analytic.shape) +
                         " does not match input " + shape_to_string(input.shape));
    }

    GradCheckResult result;
    Tensor probe = input;
    for (std::int64_t i = 0; i < input.numel(); ++i) {
        if (op.at_kink(input, i)) continue;
        float orig = probe.data[static_cast<std::size_t>(i)];
        probe.data[static_cast<std::size_t>(i)] = orig + static_cast<float>(epsilon);
        double up = sum_all(op.forward(probe));
        probe.data[static_cast<std::size_t>(i)] = orig - static_cast<float>(epsilon);
        double down = sum_all(op.forward(probe));
        probe.data[static_cast<std::size_t>(i)] = orig;

        double central = (up - down) / (2.0 * epsilon);
        double a = analytic.data[static_cast<std::size_t>(i)];
        if (!std::isfinite(a) || !std::isfinite(central)) {
            throw NumericError("non-finite gradient at flat index " + std::to_string(i));
        }
        double err = std::abs(a - central) / std::max(1.0, std::abs(central));
        if (err > result.max_rel_error) {
            result.max_rel_error = err;
            result.worst_index = i;
        }
        ++result.checked;
    }
    return result;
}

GradCheckResult grad_check_fn(const std::function<double(const std::vector<float>&)>& f,
                              const std::vector<float>& analytic, std::vector<float> x,
                              double epsilon, int max_probes) {
    check_epsilon(epsilon);
    if (analytic.size() != x.size()) {
        throw ShapeError("analytic gradient length mismatch");
    }
    std::size_t n = x.size();
    std::size_t stride = 1;
    if (max_probes > 0 && n > static_cast<std::size_t>(max_probes)) {
        stride = n / static_cast<std::size_t>(max_probes);
        if (stride == 0) stride = 1;
    }

    GradCheckResult result;
    for (std::size_t i = 0; i < n; i += stride) {
        float orig = x[i];
        x[i] = orig + static_cast<float>(epsilon);
        double up = f(x);
        x[i] = orig - static_cast<float>(epsilon);
        double down = f(x);
        x[i] = orig;

        double central = (up - down) / (2.0 * epsilon);
        double a = analytic[i];
        if (!std::isfinite(a) || !std::isfinite(central)) {
            throw NumericError("non-finite gradient at flat index " + std::to_string(i));
        }
        double err = std::abs(a - central) / std::max(1.0, std::abs(central));
        if (err > result.max_rel_error) {
            result.max_rel_error = err;
            result.worst_index = static_cast<std::int64_t>(i);
        }
        ++result.checked;
    }
    return result;
}

}  // namespace spoofdet
