#include "spoofdet/color_texture.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spoofdet {

const std::array<const char*, ColorPlanes::kCount> ColorPlanes::kNames = {"H", "S", "V",
                                                                          "Y", "Cb", "Cr"};

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint8_t clamp_u8(double v) {
    long r = std::lround(v);
    if (r < 0) r = 0;
    if (r > 255) r = 255;
    return static_cast<std::uint8_t>(r);
}

int transitions(int code) {
    int t = 0;
    for (int i = 0; i < 8; ++i) {
        int a = (code >> i) & 1;
        int b = (code >> ((i + 1) % 8)) & 1;
        if (a != b) ++t;
    }
    return t;
}

void l1_normalize(std::vector<float>& h) {
    double s = std::accumulate(h.begin(), h.end(), 0.0);
    if (s > 0.0) {
        for (float& v : h) v = static_cast<float>(v / s);
    }
}

void check_plane(const std::uint8_t* plane, int width, int height, int min_side,
                 const char* what) {
    if (plane == nullptr || width < min_side || height < min_side) {
        throw InputError(std::string(what) + ": plane " + std::to_string(width) + "x" +
                         std::to_string(height) + " smaller than required " +
                         std::to_string(min_side) + "x" + std::to_string(min_side));
    }
}

// Cyclic Jacobi eigendecomposition of a symmetric n x n matrix (row-major).
// Eigenvectors come back as columns of v.
void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& eigvals,
                  std::vector<double>& v) {
    v.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += std::abs(a[static_cast<std::size_t>(p) * n + q]);
        if (off < 1e-14) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = a[static_cast<std::size_t>(p) * n + q];
                if (std::abs(apq) < 1e-18) continue;
                double app = a[static_cast<std::size_t>(p) * n + p];
                double aqq = a[static_cast<std::size_t>(q) * n + q];
                double theta = (aqq - app) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = a[static_cast<std::size_t>(k) * n + p];
                    double akq = a[static_cast<std::size_t>(k) * n + q];
                    a[static_cast<std::size_t>(k) * n + p] = c * akp - s * akq;
                    a[static_cast<std::size_t>(k) * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a[static_cast<std::size_t>(p) * n + k];
                    double aqk = a[static_cast<std::size_t>(q) * n + k];
                    a[static_cast<std::size_t>(p) * n + k] = c * apk - s * aqk;
                    a[static_cast<std::size_t>(q) * n + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = v[static_cast<std::size_t>(k) * n + p];
                    double vkq = v[static_cast<std::size_t>(k) * n + q];
                    v[static_cast<std::size_t>(k) * n + p] = c * vkp - s * vkq;
                    v[static_cast<std::size_t>(k) * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    eigvals.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) eigvals[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i) * n + i];
}

}  // namespace

const std::array<int, 256>& lbp_uniform_table() {
    static const std::array<int, 256> table = [] {
        std::array<int, 256> t{};
        int next = 0;
        for (int code = 0; code < 256; ++code) {
            t[static_cast<std::size_t>(code)] = transitions(code) <= 2 ? next++ : -1;
        }
        for (int code = 0; code < 256; ++code) {
            if (t[static_cast<std::size_t>(code)] < 0) t[static_cast<std::size_t>(code)] = 58;
        }
        return t;
    }();
    return table;
}

ColorPlanes rgb_to_planes(const FaceImage& image) {
    if (image.width < 1 || image.height < 1 ||
        image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
        throw InputError("rgb_to_planes: malformed RGB raster");
    }
    ColorPlanes out;
    out.width = image.width;
    out.height = image.height;
    std::size_t n = static_cast<std::size_t>(image.width) * image.height;
    for (auto& p : out.planes) p.resize(n);
    out.gray.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        int r = image.rgb[i * 3];
        int g = image.rgb[i * 3 + 1];
        int b = image.rgb[i * 3 + 2];
        int maxc = std::max({r, g, b});
        int minc = std::min({r, g, b});
        int delta = maxc - minc;

        double hue = 0.0;  // degrees
        if (delta != 0) {
            if (maxc == r) {
                hue = 60.0 * std::fmod((g - b) / static_cast<double>(delta), 6.0);
            } else if (maxc == g) {
                hue = 60.0 * ((b - r) / static_cast<double>(delta) + 2.0);
            } else {
                hue = 60.0 * ((r - g) / static_cast<double>(delta) + 4.0);
            }
            if (hue < 0.0) hue += 360.0;
        }
        out.planes[0][i] = clamp_u8(hue * 255.0 / 360.0);
        out.planes[1][i] = maxc == 0 ? 0 : clamp_u8(255.0 * delta / maxc);
        out.planes[2][i] = static_cast<std::uint8_t>(maxc);

        double y = 0.299 * r + 0.587 * g + 0.114 * b;
        double cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
        double cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
        out.planes[3][i] = clamp_u8(y);
        out.planes[4][i] = clamp_u8(cb);
        out.planes[5][i] = clamp_u8(cr);
        out.gray[i] = clamp_u8(y);
    }
    return out;
}

std::vector<float> lbp_histogram(const std::uint8_t* plane, int width, int height, int radius) {
    check_plane(plane, width, height, 2 * radius + 1, "lbp");
    // Neighbor n (1-based) sits at angle 2*pi*(n-1)/8, counter-clockwise from east.
    static const int dx8[8] = {1, 1, 0, -1, -1, -1, 0, 1};
    static const int dy8[8] = {0, -1, -1, -1, 0, 1, 1, 1};
    const auto& table = lbp_uniform_table();

    std::vector<float> hist(59, 0.0f);
    for (int y = radius; y < height - radius; ++y) {
        for (int x = radius; x < width - radius; ++x) {
            int center = plane[static_cast<std::size_t>(y) * width + x];
            int code = 0;
            for (int n = 0; n < 8; ++n) {
                int nb = plane[static_cast<std::size_t>(y + radius * dy8[n]) * width +
                               (x + radius * dx8[n])];
                if (nb - center >= 0) code |= 1 << n;
            }
            hist[static_cast<std::size_t>(table[static_cast<std::size_t>(code)])] += 1.0f;
        }
    }
    l1_normalize(hist);
    return hist;
}

std::vector<float> coalbp_histogram(const std::uint8_t* plane, int width, int height, int radius,
                                    int interval) {
    check_plane(plane, width, height, 2 * radius + 1 + interval, "coalbp");
    // Sparse plus-shaped LBP: neighbors N, E, S, W at the given radius.
    static const int dxp[4] = {0, 1, 0, -1};
    static const int dyp[4] = {-1, 0, 1, 0};
    // Displacement directions between adjacent patterns.
    const int dirs[4][2] = {{0, interval}, {interval, 0}, {interval, interval},
                            {-interval, interval}};

    std::vector<std::uint8_t> codes(static_cast<std::size_t>(width) * height, 0);
    for (int y = radius; y < height - radius; ++y) {
        for (int x = radius; x < width - radius; ++x) {
            int center = plane[static_cast<std::size_t>(y) * width + x];
            int code = 0;
            for (int n = 0; n < 4; ++n) {
                int nb = plane[static_cast<std::size_t>(y + radius * dyp[n]) * width +
                               (x + radius * dxp[n])];
                if (nb - center >= 0) code |= 1 << n;
            }
            codes[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint8_t>(code);
        }
    }

    std::vector<float> hist(4 * 256, 0.0f);
    for (int d = 0; d < 4; ++d) {
        int dx = dirs[d][0], dy = dirs[d][1];
        for (int y = radius; y < height - radius; ++y) {
            int y2 = y + dy;
            if (y2 < radius || y2 >= height - radius) continue;
            for (int x = radius; x < width - radius; ++x) {
                int x2 = x + dx;
                if (x2 < radius || x2 >= width - radius) continue;
                int a = codes[static_cast<std::size_t>(y) * width + x];
                int b = codes[static_cast<std::size_t>(y2) * width + x2];
                hist[static_cast<std::size_t>(d) * 256 + a * 16 + b] += 1.0f;
            }
        }
    }
    l1_normalize(hist);
    return hist;
}

std::vector<float> lpq_histogram(const std::uint8_t* plane, int width, int height, int window,
                                 float alpha, bool whitening, float rho) {
    check_plane(plane, width, height, window, "lpq");
    const int r = (window - 1) / 2;
    const int wlen = window * window;
    // Four low frequencies at 0, 90, 45 and 135 degrees.
    const double freqs[4][2] = {{alpha, 0.0}, {0.0, alpha}, {alpha, alpha}, {alpha, -alpha}};

    // Basis rows: 4 real then 4 imaginary components per window position.
    std::vector<double> basis(8 * static_cast<std::size_t>(wlen));
    std::vector<int> offx(static_cast<std::size_t>(wlen)), offy(static_cast<std::size_t>(wlen));
    {
        int idx = 0;
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx, ++idx) {
                offx[static_cast<std::size_t>(idx)] = dx;
                offy[static_cast<std::size_t>(idx)] = dy;
                for (int u = 0; u < 4; ++u) {
                    double phase = -2.0 * kPi * (freqs[u][0] * dx + freqs[u][1] * dy);
                    basis[static_cast<std::size_t>(u) * wlen + idx] = std::cos(phase);
                    basis[static_cast<std::size_t>(u + 4) * wlen + idx] = std::sin(phase);
                }
            }
        }
    }

    // Optional decorrelation: Gaussian image model with covariance
    // rho^distance between window positions, transform = eigenvectors of
    // the 8x8 coefficient covariance (descending eigenvalue, sign-fixed).
    std::vector<double> white;  // 8x8, row-major; applied as W * f
    if (whitening) {
        std::vector<double> cov(static_cast<std::size_t>(wlen) * wlen);
        for (int i = 0; i < wlen; ++i) {
            for (int j = 0; j < wlen; ++j) {
                double ddx = offx[static_cast<std::size_t>(i)] - offx[static_cast<std::size_t>(j)];
                double ddy = offy[static_cast<std::size_t>(i)] - offy[static_cast<std::size_t>(j)];
                cov[static_cast<std::size_t>(i) * wlen + j] =
                    std::pow(rho, std::sqrt(ddx * ddx + ddy * ddy));
            }
        }
        std::vector<double> d(64, 0.0);  // basis * cov * basis^T
        for (int a = 0; a < 8; ++a) {
            for (int b = 0; b < 8; ++b) {
                double acc = 0.0;
                for (int i = 0; i < wlen; ++i) {
                    double t = 0.0;
                    for (int j = 0; j < wlen; ++j) {
                        t += cov[static_cast<std::size_t>(i) * wlen + j] *
                             basis[static_cast<std::size_t>(b) * wlen + j];
                    }
                    acc += basis[static_cast<std::size_t>(a) * wlen + i] * t;
                }
                d[static_cast<std::size_t>(a) * 8 + b] = acc;
            }
        }
        std::vector<double> eigvals, v;
        jacobi_eigen(d, 8, eigvals, v);
        std::vector<int> order(8);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return eigvals[static_cast<std::size_t>(a)] >
                                                    eigvals[static_cast<std::size_t>(b)]; });
        white.assign(64, 0.0);
        for (int row = 0; row < 8; ++row) {
            int col = order[static_cast<std::size_t>(row)];
            // Sign convention: largest-magnitude component positive.
            int arg = 0;
            double best = 0.0;
            for (int k = 0; k < 8; ++k) {
                double m = std::abs(v[static_cast<std::size_t>(k) * 8 + col]);
                if (m > best) {
                    best = m;
                    arg = k;
                }
            }
            double sign = v[static_cast<std::size_t>(arg) * 8 + col] >= 0.0 ? 1.0 : -1.0;
            for (int k = 0; k < 8; ++k) {
                white[static_cast<std::size_t>(row) * 8 + k] =
                    sign * v[static_cast<std::size_t>(k) * 8 + col];
            }
        }
    }

    std::vector<float> hist(256, 0.0f);
    std::vector<double> f(8);
    std::vector<double> g(8);
    for (int y = r; y < height - r; ++y) {
        for (int x = r; x < width - r; ++x) {
            for (int u = 0; u < 8; ++u) f[static_cast<std::size_t>(u)] = 0.0;
            for (int idx = 0; idx < wlen; ++idx) {
                double pix = plane[static_cast<std::size_t>(y + offy[static_cast<std::size_t>(idx)]) * width +
                                   (x + offx[static_cast<std::size_t>(idx)])];
                for (int u = 0; u < 8; ++u) {
                    f[static_cast<std::size_t>(u)] += pix * basis[static_cast<std::size_t>(u) * wlen + idx];
                }
            }
            const std::vector<double>* vec = &f;
            if (whitening) {
                for (int a = 0; a < 8; ++a) {
                    double acc = 0.0;
                    for (int k = 0; k < 8; ++k) {
                        acc += white[static_cast<std::size_t>(a) * 8 + k] * f[static_cast<std::size_t>(k)];
                    }
                    g[static_cast<std::size_t>(a)] = acc;
                }
                vec = &g;
            }
            int code = 0;
            for (int u = 0; u < 8; ++u) {
                if ((*vec)[static_cast<std::size_t>(u)] >= 0.0) code |= 1 << u;
            }
            hist[static_cast<std::size_t>(code)] += 1.0f;
        }
    }
    l1_normalize(hist);
    return hist;
}

int descriptor_vector_length(const DescriptorParams& params) {
    int planes = ColorPlanes::kCount + (params.include_gray ? 1 : 0);
    return planes * (59 + 1024 + 256);
}

DescriptorVector extract_descriptor_vector(const ColorPlanes& planes,
                                           const DescriptorParams& params) {
    for (int p = 0; p < ColorPlanes::kCount; ++p) {
        if (planes.planes[static_cast<std::size_t>(p)].size() !=
            static_cast<std::size_t>(planes.width) * planes.height) {
            throw InputError(std::string("extract: missing or malformed plane ") +
                             ColorPlanes::kNames[static_cast<std::size_t>(p)]);
        }
    }
    if (params.include_gray &&
        planes.gray.size() != static_cast<std::size_t>(planes.width) * planes.height) {
        throw InputError("extract: grayscale plane requested but missing");
    }

    std::vector<std::pair<std::string, const std::uint8_t*>> sources;
    for (int p = 0; p < ColorPlanes::kCount; ++p) {
        sources.emplace_back(ColorPlanes::kNames[static_cast<std::size_t>(p)],
                             planes.planes[static_cast<std::size_t>(p)].data());
    }
    if (params.include_gray) sources.emplace_back("gray", planes.gray.data());

    DescriptorVector out;
    auto append = [&](const std::string& descriptor, const std::string& plane,
                      std::vector<float>&& hist) {
        SliceInfo info;
        info.descriptor = descriptor;
        info.plane = plane;
        info.offset = static_cast<int>(out.values.size());
        info.length = static_cast<int>(hist.size());
        out.values.insert(out.values.end(), hist.begin(), hist.end());
        out.layout.push_back(std::move(info));
    };

    for (const auto& [name, data] : sources) {
        append("lbp", name, lbp_histogram(data, planes.width, planes.height, params.lbp_radius));
    }
    for (const auto& [name, data] : sources) {
        append("coalbp", name,
               coalbp_histogram(data, planes.width, planes.height, params.coalbp_radius,
                                params.coalbp_interval));
    }
    for (const auto& [name, data] : sources) {
        append("lpq", name,
               lpq_histogram(data, planes.width, planes.height, params.lpq_window,
                             params.lpq_alpha, params.lpq_whitening, params.lpq_rho));
    }
    return out;
}

}  // namespace spoofdet
