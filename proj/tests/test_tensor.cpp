#include <doctest.h>

#include <random>

#include "spoofdet/gradcheck.hpp"
#include "spoofdet/tensor.hpp"

using namespace spoofdet;

TEST_CASE("tensor_create zero fill") {
    Tensor t = tensor_create({2, 2}, 0.0f);
    CHECK(t.numel() == 4);
    for (float v : t.data) CHECK(v == 0.0f);

    Tensor big = tensor_create({160, 160, 3}, 0.0f);
    CHECK(big.numel() == 76800);
}

TEST_CASE("tensor_create rejects bad shapes") {
    CHECK_THROWS_AS(tensor_create({0, 3}, 1.0f), ShapeError);
    CHECK_THROWS_AS(tensor_create({2, -1}, 1.0f), ShapeError);
    CHECK_THROWS_AS(tensor_create({}, 1.0f), ShapeError);
}

TEST_CASE("seeded random fill is deterministic") {
    Tensor a = tensor_create_random({3}, 7);
    Tensor b = tensor_create_random({3}, 7);
    CHECK(a.data == b.data);
    Tensor c = tensor_create_random({3}, 8);
    CHECK(a.data != c.data);
}

TEST_CASE("row-major indexing matches a naive nested-loop indexer") {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> dim(1, 5);
    for (int trial = 0; trial < 50; ++trial) {
        int a = dim(rng), b = dim(rng), c = dim(rng);
        Tensor t({a, b, c}, 0.0f);
        float counter = 0.0f;
        // naive fill walking dims in order
        std::size_t flat = 0;
        for (int i = 0; i < a; ++i) {
            for (int j = 0; j < b; ++j) {
                for (int k = 0; k < c; ++k) {
                    t.data[flat++] = counter++;
                }
            }
        }
        for (int i = 0; i < a; ++i) {
            for (int j = 0; j < b; ++j) {
                for (int k = 0; k < c; ++k) {
                    CHECK(t.at3(i, j, k) ==
                          static_cast<float>((i * b + j) * c + k));
                }
            }
        }
    }
}

namespace {

struct IdentityOp : DiffOp {
    Tensor forward(const Tensor& x) override { return x; }
    Tensor backward(const Tensor& x, const Tensor& g) override {
        (void)x;
        return g;
    }
};

struct SquareOp : DiffOp {
    Tensor forward(const Tensor& x) override {
        Tensor out = x;
        for (float& v : out.data) v = v * v;
        return out;
    }
    Tensor backward(const Tensor& x, const Tensor& g) override {
        Tensor out = g;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= 2.0f * x.data[i];
        return out;
    }
};

struct ReluOp : DiffOp {
    Tensor forward(const Tensor& x) override {
        Tensor out = x;
        for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
        return out;
    }
    Tensor backward(const Tensor& x, const Tensor& g) override {
        Tensor out = g;
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            if (x.data[i] <= 0.0f) out.data[i] = 0.0f;
        }
        return out;
    }
    bool at_kink(const Tensor& x, std::int64_t i) const override {
        return std::abs(x.data[static_cast<std::size_t>(i)]) < 1e-2f;
    }
};

}  // namespace

TEST_CASE("grad_check: identity is exact") {
    IdentityOp op;
    Tensor x = tensor_create_random({4, 3}, 3);
    GradCheckResult r = grad_check(op, x, 1e-3);
    // error floor is float32 rounding inside the central difference
    CHECK(r.max_rel_error < 1e-4);
    CHECK(r.checked == 12);
}

TEST_CASE("grad_check: elementwise square at x=3") {
    SquareOp op;
    Tensor x({1}, 3.0f);
    GradCheckResult r = grad_check(op, x, 1e-3);
    // analytic 6 vs ((3+e)^2-(3-e)^2)/2e = 6
    CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("grad_check: relu kink at exactly zero is skipped") {
    ReluOp op;
    Tensor x({3}, 0.0f);
    x.data = {0.0f, 1.0f, -1.0f};
    GradCheckResult r = grad_check(op, x, 1e-3);
    CHECK(r.checked == 2);  // the kink element is excluded
    CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("grad_check rejects out-of-range epsilon") {
    IdentityOp op;
    Tensor x({2}, 1.0f);
    CHECK_THROWS_AS(grad_check(op, x, 1e-7), InputError);
    CHECK_THROWS_AS(grad_check(op, x, 0.5), InputError);
}
