#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spoofdet/errors.hpp"

namespace spoofdet {

/// Cropped, aligned face: square 8-bit RGB raster plus provenance.
struct FaceImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, interleaved R,G,B
    std::string source;
};

/// Plane order is fixed: H, S, V, Y, Cb, Cr. Grayscale rides along
/// separately and only enters the descriptor vector when asked for.
struct ColorPlanes {
    static constexpr int kCount = 6;
    static const std::array<const char*, kCount> kNames;

    int width = 0;
    int height = 0;
    std::array<std::vector<std::uint8_t>, kCount> planes;
    std::vector<std::uint8_t> gray;
};

struct SliceInfo {
    std::string descriptor;
    std::string plane;
    int offset = 0;
    int length = 0;
};

struct DescriptorVector {
    std::vector<float> values;
    std::vector<SliceInfo> layout;
};

struct DescriptorParams {
    int lbp_radius = 1;
    int lbp_neighbors = 8;
    int coalbp_radius = 1;
    int coalbp_interval = 2;
    int lpq_window = 3;
    float lpq_alpha = 1.0f / 7.0f;
    bool lpq_whitening = true;
    float lpq_rho = 0.9f;
    bool include_gray = false;
};

/// HSV via the hexcone model scaled to [0,255]; YCbCr and grayscale via
/// full-range BT.601.
ColorPlanes rgb_to_planes(const FaceImage& image);

/// Uniform-pattern (u2) LBP, 59 bins, L1-normalized.
std::vector<float> lbp_histogram(const std::uint8_t* plane, int width, int height,
                                 int radius = 1);

/// CoALBP over the 4-neighbor plus-shaped LBP (16 patterns): one 16x16
/// co-occurrence histogram per displacement direction, 4*256 = 1024 bins.
std::vector<float> coalbp_histogram(const std::uint8_t* plane, int width, int height,
                                    int radius = 1, int interval = 2);

/// LPQ: signs of real/imag parts of four low-frequency STFT coefficients
/// over an MxM window, 256 bins. Whitening decorrelates the 8-vector under
/// a Gaussian image model with correlation rho before binarization.
std::vector<float> lpq_histogram(const std::uint8_t* plane, int width, int height,
                                 int window = 3, float alpha = 1.0f / 7.0f,
                                 bool whitening = true, float rho = 0.9f);

/// Concatenation order: for each descriptor (LBP, CoALBP, LPQ), for each
/// plane (H, S, V, Y, Cb, Cr [, gray]), append that plane's histogram.
DescriptorVector extract_descriptor_vector(const ColorPlanes& planes,
                                           const DescriptorParams& params = {});

int descriptor_vector_length(const DescriptorParams& params = {});

/// 256-entry LBP code -> u2 bin table: 58 uniform codes in ascending order
/// plus bin 58 for the rest.
const std::array<int, 256>& lbp_uniform_table();

}  // namespace spoofdet
