#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spoofdet/model.hpp"

namespace spoofdet {

struct LayerCheck {
    std::string name;
    double max_rel_error = 0.0;
    std::int64_t checked = 0;
};

/// Finite-difference checks for every layer kind on small random fixtures.
std::vector<LayerCheck> layer_gradient_battery(std::uint32_t seed);

/// End-to-end check of the full model: mean BCE loss against backward()'s
/// parameter gradients, probing at most max_probes elements per parameter.
std::vector<LayerCheck> model_gradient_check(const ModelConfig& cfg, int max_probes,
                                             std::uint32_t seed);

}  // namespace spoofdet
