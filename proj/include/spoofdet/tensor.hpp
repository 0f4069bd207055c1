#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "spoofdet/errors.hpp"

namespace spoofdet {

/// Dense n-dimensional float32 array, row-major.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<int> shape_, float fill);

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    float* ptr() { return data.data(); }
    const float* ptr() const { return data.data(); }

    // Row-major index helpers for the common ranks.
    float& at2(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
    float at2(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
    float& at3(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    float at3(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    float& at4(int n, int i, int j, int k) {
        return data[((static_cast<std::size_t>(n) * shape[1] + i) * shape[2] + j) * shape[3] + k];
    }
    float at4(int n, int i, int j, int k) const {
        return data[((static_cast<std::size_t>(n) * shape[1] + i) * shape[2] + j) * shape[3] + k];
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
    void fill(float v);

    static Tensor zeros(const std::vector<int>& shape);
    static Tensor full(const std::vector<int>& shape, float v);
    /// Uniform in [lo, hi), drawn in row-major order from rng.
    static Tensor uniform(const std::vector<int>& shape, float lo, float hi, std::mt19937& rng);
    /// He-uniform: bound = sqrt(6 / fan_in).
    static Tensor he_uniform(const std::vector<int>& shape, int fan_in, std::mt19937& rng);
};

/// Validates that every dimension is >= 1 and returns the element count.
std::int64_t checked_numel(const std::vector<int>& shape);

std::string shape_to_string(const std::vector<int>& shape);

/// tensor_create: constant fill.
Tensor tensor_create(const std::vector<int>& shape, float fill);
/// tensor_create: seeded uniform fill in [-1, 1).
Tensor tensor_create_random(const std::vector<int>& shape, std::uint64_t seed);

}  // namespace spoofdet
