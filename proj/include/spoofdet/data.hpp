#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spoofdet/color_texture.hpp"

namespace spoofdet {

/// Arbitrary-size 8-bit RGB raster (pre-crop input).
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;
};

/// Binary PPM (P6), the lossless container all image paths refer to.
Raster read_ppm(const std::string& path);
void write_ppm(const Raster& img, const std::string& path);

struct ManifestRecord {
    std::string path;
    int label = 0;  // genuine=0, spoof=1
    std::string subject;
    std::string attack_type;  // print|replay|mask|synthetic-moire|synthetic-recapture|none|...
    std::string split;        // train|dev|test
};

/// CSV with header path,label,subject,attack_type,split. Duplicate paths
/// and label/attack-type inconsistencies are rejected.
std::vector<ManifestRecord> load_manifest(const std::string& path);
void save_manifest(const std::vector<ManifestRecord>& records, const std::string& path);
std::vector<ManifestRecord> filter_split(const std::vector<ManifestRecord>& records,
                                         const std::string& split);

struct PreprocessSpec {
    int margin = 44;
    int output_side = 160;
};

/// Margin-aware center square crop plus bilinear resize (corner-aligned).
/// Equal sizes pass through bitwise.
FaceImage preprocess(const Raster& img, const PreprocessSpec& spec);

/// Pluggable face-region locator. The shipped fallback returns the whole
/// raster; real detectors (MTCNN etc.) live outside this toolkit.
struct FaceBox {
    int x = 0, y = 0, width = 0, height = 0;
};
class FaceDetector {
public:
    virtual ~FaceDetector() = default;
    virtual FaceBox locate(const Raster& img) = 0;
};
class CenterCropDetector : public FaceDetector {
public:
    FaceBox locate(const Raster& img) override { return {0, 0, img.width, img.height}; }
};

struct SynthSpec {
    int train_genuine = 0, train_spoof = 0;
    int dev_genuine = 0, dev_spoof = 0;
    int test_genuine = 0, test_spoof = 0;
    int side = 64;
    std::uint32_t seed = 1;
    /// Distribution style: shifts artifact parameter ranges so two fixtures
    /// (style 0 vs 1) behave like related but distinct datasets.
    int style = 0;
};

/// Deterministic procedural dataset: smooth-shaded genuine textures, spoofs
/// with moire, recapture, or posterization artifacts. Images are written as
/// PPM under out_dir; the manifest references them by relative path.
std::vector<ManifestRecord> synth_dataset(const SynthSpec& spec, const std::string& out_dir);

// ---------------------------------------------------------------------------
// Feature cache: "SPFV" magic, version byte, u32 record count; per record
// the image identifier, layout table and raw little-endian float32 values.
// ---------------------------------------------------------------------------

struct CacheEntry {
    std::string id;
    DescriptorVector features;
};

void write_feature_cache(const std::vector<CacheEntry>& entries, const std::string& path);
std::vector<CacheEntry> read_feature_cache(const std::string& path);

struct CacheReport {
    int written = 0;
    std::vector<std::pair<std::string, std::string>> failures;  // (path, error)
};

/// Extracts descriptors for every record (image root + record path), writing
/// the cache in manifest order. Unreadable images are reported and skipped.
CacheReport build_feature_cache(const std::vector<ManifestRecord>& records,
                                const std::string& image_root, const std::string& cache_path,
                                const PreprocessSpec& prep, const DescriptorParams& params = {});

std::string join_path(const std::string& root, const std::string& rel);

}  // namespace spoofdet
