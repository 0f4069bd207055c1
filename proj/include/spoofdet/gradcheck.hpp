#pragma once

#include <functional>
#include <vector>

#include "spoofdet/tensor.hpp"

namespace spoofdet {

/// Fixed-topology differentiable operation: forward plus a backward that
/// maps an upstream gradient to the input gradient.
struct DiffOp {
    virtual ~DiffOp() = default;
    virtual Tensor forward(const Tensor& input) = 0;
    virtual Tensor backward(const Tensor& input, const Tensor& grad_out) = 0;
    /// Inputs this close to a non-differentiable point are skipped by the checker.
    virtual bool at_kink(const Tensor& /*input*/, std::int64_t /*index*/) const { return false; }
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::int64_t worst_index = -1;
    std::int64_t checked = 0;
};

/// Central-difference check of op.backward against d(sum(forward))/d(input).
/// Per-element error is |analytic - central| / max(1, |central|).
/// epsilon must lie in [1e-6, 1e-2].
GradCheckResult grad_check(DiffOp& op, const Tensor& input, double epsilon);

/// Scalar-function variant used by layer tests: f evaluates a loss at x,
/// analytic is the full gradient at x. Checks at most max_probes elements
/// (all of them when max_probes <= 0), probing in a fixed stride pattern.
GradCheckResult grad_check_fn(const std::function<double(const std::vector<float>&)>& f,
                              const std::vector<float>& analytic, std::vector<float> x,
                              double epsilon, int max_probes = 0);

}  // namespace spoofdet
