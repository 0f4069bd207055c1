#include "spoofdet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <random>
#include <fstream>
#include <set>
#include <sstream>

namespace spoofdet {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

const std::set<std::string> kSplits = {"train", "dev", "test"};
const std::set<std::string> kAttackTypes = {"print",           "replay",
                                            "mask",            "synthetic-moire",
                                            "synthetic-recapture", "synthetic-posterize",
                                            "none"};

std::uint32_t mix_seed(std::uint32_t seed, std::uint32_t index) {
    std::uint64_t h = (static_cast<std::uint64_t>(seed) << 32) | (index + 1u);
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    h *= 0xc4ceb9fe1a85ec53ULL;
    h ^= h >> 33;
    return static_cast<std::uint32_t>(h);
}

std::uint8_t clamp_u8i(double v) {
    long r = std::lround(v);
    return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

}  // namespace

std::string join_path(const std::string& root, const std::string& rel) {
    if (root.empty()) return rel;
    return (fs::path(root) / rel).string();
}

// ---------------------------------------------------------------------------
// PPM
// ---------------------------------------------------------------------------

Raster read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open image " + path);
    std::string magic;
    is >> magic;
    if (magic != "P6") throw ParseError(path + ": not a binary PPM (P6)");
    int w = 0, h = 0, maxval = 0;
    is >> w >> h >> maxval;
    if (!is || w < 1 || h < 1 || maxval != 255) {
        throw ParseError(path + ": unsupported PPM header");
    }
    is.get();  // single whitespace after header
    Raster img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
    is.read(reinterpret_cast<char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
    if (is.gcount() != static_cast<std::streamsize>(img.rgb.size())) {
        throw ParseError(path + ": truncated pixel data");
    }
    return img;
}

void write_ppm(const Raster& img, const std::string& path) {
    if (img.width < 1 || img.height < 1 ||
        img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
        throw InputError("write_ppm: malformed raster");
    }
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os << "P6\n" << img.width << " " << img.height << "\n255\n";
        os.write(reinterpret_cast<const char*>(img.rgb.data()),
                 static_cast<std::streamsize>(img.rgb.size()));
        if (!os) throw IoError("write failure on " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::vector<ManifestRecord> load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest " + path);
    std::string line;
    if (!std::getline(is, line)) throw ParseError(path + ": empty file, expected header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "path,label,subject,attack_type,split") {
        throw ParseError(path + ":1: bad header '" + line + "'");
    }

    std::vector<ManifestRecord> records;
    std::set<std::string> seen;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 5) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 5 fields, got " +
                             std::to_string(fields.size()));
        }
        ManifestRecord r;
        r.path = fields[0];
        if (fields[1] != "0" && fields[1] != "1") {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": label '" + fields[1] +
                                  "' must be 0 or 1");
        }
        r.label = fields[1] == "1" ? 1 : 0;
        r.subject = fields[2];
        r.attack_type = fields[3];
        r.split = fields[4];
        if (kSplits.count(r.split) == 0) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": unknown split '" +
                                  r.split + "'");
        }
        if (kAttackTypes.count(r.attack_type) == 0) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": unknown attack type '" +
                                  r.attack_type + "'");
        }
        if ((r.label == 0) != (r.attack_type == "none")) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": label/attack-type mismatch (genuine <=> none)");
        }
        if (!seen.insert(r.path).second) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": duplicate path '" +
                                  r.path + "'");
        }
        records.push_back(std::move(r));
    }
    return records;
}

void save_manifest(const std::vector<ManifestRecord>& records, const std::string& path) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os << "path,label,subject,attack_type,split\n";
        for (const auto& r : records) {
            os << r.path << "," << r.label << "," << r.subject << "," << r.attack_type << ","
               << r.split << "\n";
        }
        if (!os) throw IoError("write failure on " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

std::vector<ManifestRecord> filter_split(const std::vector<ManifestRecord>& records,
                                         const std::string& split) {
    std::vector<ManifestRecord> out;
    for (const auto& r : records) {
        if (r.split == split) out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Preprocess
// ---------------------------------------------------------------------------

FaceImage preprocess(const Raster& img, const PreprocessSpec& spec) {
    if (img.width < 1 || img.height < 1 ||
        img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
        throw InputError("preprocess: degenerate raster");
    }
    if (spec.output_side < 16) throw InputError("preprocess: output side must be >= 16");
    if (spec.margin < 0) throw InputError("preprocess: margin must be >= 0");

    CenterCropDetector detector;
    FaceBox box = detector.locate(img);
    // Expand by the margin, clamped to the raster.
    int x0 = std::max(0, box.x - spec.margin);
    int y0 = std::max(0, box.y - spec.margin);
    int x1 = std::min(img.width, box.x + box.width + spec.margin);
    int y1 = std::min(img.height, box.y + box.height + spec.margin);
    // Center square crop of the expanded box.
    int side = std::min(x1 - x0, y1 - y0);
    int cx0 = x0 + ((x1 - x0) - side) / 2;
    int cy0 = y0 + ((y1 - y0) - side) / 2;

    FaceImage out;
    out.width = out.height = spec.output_side;
    out.rgb.resize(static_cast<std::size_t>(spec.output_side) * spec.output_side * 3);

    if (side == spec.output_side) {
        for (int y = 0; y < side; ++y) {
            const std::uint8_t* src =
                img.rgb.data() + (static_cast<std::size_t>(cy0 + y) * img.width + cx0) * 3;
            std::copy(src, src + static_cast<std::size_t>(side) * 3,
                      out.rgb.data() + static_cast<std::size_t>(y) * side * 3);
        }
        return out;
    }

    // Corner-aligned bilinear resize of the cropped square.
    int d = spec.output_side;
    double scale = d > 1 ? static_cast<double>(side - 1) / (d - 1) : 0.0;
    for (int y = 0; y < d; ++y) {
        double sy = y * scale;
        int iy = std::min(static_cast<int>(sy), side - 2);
        if (side == 1) iy = 0;
        double fy = sy - iy;
        for (int x = 0; x < d; ++x) {
            double sx = x * scale;
            int ix = std::min(static_cast<int>(sx), side - 2);
            if (side == 1) ix = 0;
            double fx = sx - ix;
            for (int c = 0; c < 3; ++c) {
                auto px = [&](int yy, int xx) -> double {
                    yy = std::min(yy, side - 1);
                    xx = std::min(xx, side - 1);
                    return img.rgb[(static_cast<std::size_t>(cy0 + yy) * img.width + cx0 + xx) * 3 +
                                   c];
                };
                double v = px(iy, ix) * (1 - fx) * (1 - fy) + px(iy, ix + 1) * fx * (1 - fy) +
                           px(iy + 1, ix) * (1 - fx) * fy + px(iy + 1, ix + 1) * fx * fy;
                out.rgb[(static_cast<std::size_t>(y) * d + x) * 3 + c] = clamp_u8i(v);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic dataset
// ---------------------------------------------------------------------------

namespace {

Raster synth_genuine(int side, std::mt19937& rng) {
    Raster img;
    img.width = img.height = side;
    img.rgb.resize(static_cast<std::size_t>(side) * side * 3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Skin-like base with smooth low-frequency shading.
    double base[3] = {150 + 70 * unit(rng), 100 + 60 * unit(rng), 80 + 50 * unit(rng)};
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves;
    for (int i = 0; i < 3; ++i) {
        double angle = 2 * kPi * unit(rng);
        double freq = (0.3 + 1.2 * unit(rng)) / side;  // under ~1.5 cycles across the image
        waves.push_back({freq * std::cos(angle), freq * std::sin(angle), 2 * kPi * unit(rng),
                         10 + 20 * unit(rng)});
    }
    double cx = side * (0.35 + 0.3 * unit(rng));
    double cy = side * (0.35 + 0.3 * unit(rng));
    std::uniform_int_distribution<int> noise(-4, 4);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            double shade = 0.0;
            for (const auto& w : waves) {
                shade += w.amp * std::sin(2 * kPi * (w.fx * x + w.fy * y) + w.phase);
            }
            double dx = (x - cx) / side, dy = (y - cy) / side;
            shade -= 60.0 * (dx * dx + dy * dy);  // soft radial falloff
            for (int c = 0; c < 3; ++c) {
                img.rgb[(static_cast<std::size_t>(y) * side + x) * 3 + c] =
                    clamp_u8i(base[c] + shade + noise(rng));
            }
        }
    }
    return img;
}

void apply_moire(Raster& img, std::mt19937& rng, int style) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double amp = style == 0 ? 0.15 + 0.15 * unit(rng) : 0.20 + 0.20 * unit(rng);
    double freq = style == 0 ? 0.18 + 0.14 * unit(rng) : 0.28 + 0.14 * unit(rng);
    double angle = 2 * kPi * unit(rng);
    double fx = freq * std::cos(angle), fy = freq * std::sin(angle);
    double phase = 2 * kPi * unit(rng);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double m = 1.0 + amp * std::sin(2 * kPi * (fx * x + fy * y) + phase);
            for (int c = 0; c < 3; ++c) {
                std::uint8_t& p = img.rgb[(static_cast<std::size_t>(y) * img.width + x) * 3 + c];
                p = clamp_u8i(p * m);
            }
        }
    }
}

void apply_recapture(Raster& img, std::mt19937& rng, int style) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // 3x3 box blur
    Raster blurred = img;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                int sum = 0, cnt = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) continue;
                        sum += img.rgb[(static_cast<std::size_t>(yy) * img.width + xx) * 3 + c];
                        ++cnt;
                    }
                }
                blurred.rgb[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] =
                    static_cast<std::uint8_t>(sum / cnt);
            }
        }
    }
    double spread = style == 0 ? 0.15 : 0.25;
    double gain[3], bias[3];
    for (int c = 0; c < 3; ++c) {
        gain[c] = 1.0 + spread * (2 * unit(rng) - 1);
        bias[c] = 16.0 * (2 * unit(rng) - 1);
    }
    std::uniform_int_distribution<int> noise(-6, 6);
    for (std::size_t i = 0; i < blurred.rgb.size(); ++i) {
        int c = static_cast<int>(i % 3);
        blurred.rgb[i] = clamp_u8i(blurred.rgb[i] * gain[c] + bias[c] + noise(rng));
    }
    img = std::move(blurred);
}

void apply_posterize(Raster& img, std::mt19937& rng, int style) {
    std::uniform_int_distribution<int> levels_dist(style == 0 ? 8 : 5, style == 0 ? 16 : 10);
    int levels = levels_dist(rng);
    double step = 255.0 / (levels - 1);
    for (std::uint8_t& p : img.rgb) {
        p = clamp_u8i(std::round(p / step) * step);
    }
}

}  // namespace

std::vector<ManifestRecord> synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
    if (spec.side < 16) throw InputError("synth: side must be >= 16");
    fs::create_directories(out_dir);

    std::vector<ManifestRecord> records;
    std::uint32_t index = 0;
    const char* attack_names[3] = {"synthetic-moire", "synthetic-recapture",
                                   "synthetic-posterize"};

    auto emit = [&](const std::string& split, int n_genuine, int n_spoof, int subject_base) {
        if (n_genuine < 0 || n_spoof < 0) throw InputError("synth: negative count");
        for (int i = 0; i < n_genuine + n_spoof; ++i) {
            bool spoof = i >= n_genuine;
            std::mt19937 rng(mix_seed(spec.seed, index));
            Raster img = synth_genuine(spec.side, rng);
            std::string attack = "none";
            if (spoof) {
                std::uniform_int_distribution<int> pick(0, 2);
                int a = pick(rng);
                attack = attack_names[a];
                switch (a) {
                    case 0: apply_moire(img, rng, spec.style); break;
                    case 1: apply_recapture(img, rng, spec.style); break;
                    default: apply_posterize(img, rng, spec.style); break;
                }
            }
            char name[64];
            std::snprintf(name, sizeof(name), "%s_%s_%05u.ppm", split.c_str(),
                          spoof ? "spoof" : "genuine", index);
            write_ppm(img, (fs::path(out_dir) / name).string());

            ManifestRecord r;
            r.path = name;
            r.label = spoof ? 1 : 0;
            r.subject = split + "_subj" + std::to_string(subject_base + i % 20);
            r.attack_type = attack;
            r.split = split;
            records.push_back(std::move(r));
            ++index;
        }
    };

    emit("train", spec.train_genuine, spec.train_spoof, 0);
    emit("dev", spec.dev_genuine, spec.dev_spoof, 100);
    emit("test", spec.test_genuine, spec.test_spoof, 200);
    return records;
}

// ---------------------------------------------------------------------------
// Feature cache
// ---------------------------------------------------------------------------

namespace {

constexpr char kCacheMagic[4] = {'S', 'P', 'F', 'V'};
constexpr std::uint8_t kCacheVersion = 1;

void w_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t r_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() != 4) throw TruncatedPayloadError(path + ": unexpected end of cache");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void w_str(std::ostream& os, const std::string& s) {
    w_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string r_str(std::istream& is, const std::string& path) {
    std::uint32_t len = r_u32(is, path);
    if (len > (1u << 20)) throw ParseError(path + ": implausible string length in cache");
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (is.gcount() != static_cast<std::streamsize>(len)) {
        throw TruncatedPayloadError(path + ": unexpected end of cache");
    }
    return s;
}

}  // namespace

void write_feature_cache(const std::vector<CacheEntry>& entries, const std::string& path) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os.write(kCacheMagic, 4);
        os.put(static_cast<char>(kCacheVersion));
        w_u32(os, static_cast<std::uint32_t>(entries.size()));
        for (const auto& e : entries) {
            w_str(os, e.id);
            w_u32(os, static_cast<std::uint32_t>(e.features.values.size()));
            w_u32(os, static_cast<std::uint32_t>(e.features.layout.size()));
            for (const auto& s : e.features.layout) {
                w_str(os, s.descriptor);
                w_str(os, s.plane);
                w_u32(os, static_cast<std::uint32_t>(s.offset));
                w_u32(os, static_cast<std::uint32_t>(s.length));
            }
            os.write(reinterpret_cast<const char*>(e.features.values.data()),
                     static_cast<std::streamsize>(e.features.values.size() * 4));
        }
        if (!os) throw IoError("write failure on " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

std::vector<CacheEntry> read_feature_cache(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open feature cache " + path);
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kCacheMagic, 4) != 0) {
        throw CheckpointHeaderError(path + ": bad feature-cache magic");
    }
    int version = is.get();
    if (version != kCacheVersion) {
        throw CheckpointHeaderError(path + ": unsupported cache version " +
                                    std::to_string(version));
    }
    std::uint32_t count = r_u32(is, path);
    std::vector<CacheEntry> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        CacheEntry e;
        e.id = r_str(is, path);
        std::uint32_t vec_len = r_u32(is, path);
        std::uint32_t layout_count = r_u32(is, path);
        int expected = 0;
        for (std::uint32_t s = 0; s < layout_count; ++s) {
            SliceInfo info;
            info.descriptor = r_str(is, path);
            info.plane = r_str(is, path);
            info.offset = static_cast<int>(r_u32(is, path));
            info.length = static_cast<int>(r_u32(is, path));
            expected += info.length;
            e.features.layout.push_back(std::move(info));
        }
        if (expected != static_cast<int>(vec_len)) {
            throw ParseError(path + ": layout lengths do not sum to vector length for '" + e.id +
                             "'");
        }
        e.features.values.resize(vec_len);
        is.read(reinterpret_cast<char*>(e.features.values.data()),
                static_cast<std::streamsize>(vec_len) * 4);
        if (is.gcount() != static_cast<std::streamsize>(vec_len) * 4) {
            throw TruncatedPayloadError(path + ": unexpected end of cache payload");
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

CacheReport build_feature_cache(const std::vector<ManifestRecord>& records,
                                const std::string& image_root, const std::string& cache_path,
                                const PreprocessSpec& prep, const DescriptorParams& params) {
    CacheReport report;
    std::vector<CacheEntry> entries;
    entries.reserve(records.size());
    for (const auto& r : records) {
        try {
            Raster raw = read_ppm(join_path(image_root, r.path));
            FaceImage face = preprocess(raw, prep);
            face.source = r.path;
            ColorPlanes planes = rgb_to_planes(face);
            CacheEntry e;
            e.id = r.path;
            e.features = extract_descriptor_vector(planes, params);
            entries.push_back(std::move(e));
            ++report.written;
        } catch (const Error& err) {
            report.failures.emplace_back(r.path, err.what());
        }
    }
    write_feature_cache(entries, cache_path);
    return report;
}

}  // namespace spoofdet
