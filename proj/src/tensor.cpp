#include "spoofdet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace spoofdet {

std::int64_t checked_numel(const std::vector<int>& shape) {
    if (shape.empty()) {
        throw ShapeError("empty shape");
    }
    std::int64_t n = 1;
    for (int d : shape) {
        if (d < 1) {
            throw ShapeError("non-positive dimension " + std::to_string(d) + " in shape " +
                             shape_to_string(shape));
        }
        n *= d;
    }
    return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> shape_, float fill_v) : shape(std::move(shape_)) {
    data.assign(static_cast<std::size_t>(checked_numel(shape)), fill_v);
}

bool Tensor::all_finite() const {
    for (float v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(float v) { std::fill(data.begin(), data.end(), v); }

Tensor Tensor::zeros(const std::vector<int>& shape) { return Tensor(shape, 0.0f); }

Tensor Tensor::full(const std::vector<int>& shape, float v) { return Tensor(shape, v); }

Tensor Tensor::uniform(const std::vector<int>& shape, float lo, float hi, std::mt19937& rng) {
    Tensor t(shape, 0.0f);
    std::uniform_real_distribution<float> dist(lo, hi);
    for (float& v : t.data) v = dist(rng);
    return t;
}

Tensor Tensor::he_uniform(const std::vector<int>& shape, int fan_in, std::mt19937& rng) {
    float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    return uniform(shape, -bound, bound, rng);
}

Tensor tensor_create(const std::vector<int>& shape, float fill) { return Tensor(shape, fill); }

Tensor tensor_create_random(const std::vector<int>& shape, std::uint64_t seed) {
    std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
    return Tensor::uniform(shape, -1.0f, 1.0f, rng);
}

}  // namespace spoofdet
