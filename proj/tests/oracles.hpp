// Independent reference implementations used only by the test suites.
// Everything here is deliberately written as plain nested loops with no
// shared code paths into the library being tested.
#ifndef RAS_TESTS_ORACLES_HPP
#define RAS_TESTS_ORACLES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ras/tensor.hpp"

namespace oracles {

using ras::Shape4;
using ras::Tensord;

// stride-1 same-padding convolution, direct quadruple loop
inline Tensord conv2d_ref(const Tensord& x, const Tensord& w, const std::vector<double>& bias) {
    const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
    const int K = w.n(), kh = w.h(), kw = w.w();
    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    Tensord out({N, K, H, W});
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k)
            for (int oh = 0; oh < H; ++oh)
                for (int ow = 0; ow < W; ++ow) {
                    double acc = bias[std::size_t(k)];
                    for (int c = 0; c < C; ++c)
                        for (int ki = 0; ki < kh; ++ki)
                            for (int kj = 0; kj < kw; ++kj) {
                                const int ih = oh - ph + ki, iw = ow - pw + kj;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                acc += x.at(n, c, ih, iw) * w.at(k, c, ki, kj);
                            }
                    out.at(n, k, oh, ow) = acc;
                }
    return out;
}

inline Tensord maxpool2_ref(const Tensord& x) {
    Tensord out({x.n(), x.c(), x.h() / 2, x.w() / 2});
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int oh = 0; oh < out.h(); ++oh)
                for (int ow = 0; ow < out.w(); ++ow) {
                    double m = x.at(n, c, 2 * oh, 2 * ow);
                    for (int di = 0; di < 2; ++di)
                        for (int dj = 0; dj < 2; ++dj)
                            m = std::max(m, x.at(n, c, 2 * oh + di, 2 * ow + dj));
                    out.at(n, c, oh, ow) = m;
                }
    return out;
}

// direct evaluation of the half-pixel sampling formula
inline Tensord bilinear_ref(const Tensord& x, int f) {
    const int H = x.h(), W = x.w();
    Tensord out({x.n(), x.c(), H * f, W * f});
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int i = 0; i < H * f; ++i)
                for (int j = 0; j < W * f; ++j) {
                    double sy = std::clamp((i + 0.5) / f - 0.5, 0.0, double(H - 1));
                    double sx = std::clamp((j + 0.5) / f - 0.5, 0.0, double(W - 1));
                    const int y0 = int(std::floor(sy)), x0 = int(std::floor(sx));
                    const int y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
                    const double fy = sy - y0, fx = sx - x0;
                    out.at(n, c, i, j) = (1 - fy) * ((1 - fx) * x.at(n, c, y0, x0) +
                                                     fx * x.at(n, c, y0, x1)) +
                                         fy * ((1 - fx) * x.at(n, c, y1, x0) +
                                               fx * x.at(n, c, y1, x1));
                }
    return out;
}

inline double sigmoid_ref(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// one side-output stage, straight-line, no graph machinery
struct ResidualUnitParams {
    Tensord reduce_w;
    std::vector<double> reduce_b;
    std::vector<Tensord> res_w;
    std::vector<std::vector<double>> res_b;
    Tensord predict_w;
    std::vector<double> predict_b;
};

inline Tensord residual_unit_ref(const Tensord& tap, const Tensord& s_next_up,
                                 const ResidualUnitParams& p, bool attention) {
    Tensord f = conv2d_ref(tap, p.reduce_w, p.reduce_b);
    if (attention) {
        for (int c = 0; c < f.c(); ++c)
            for (int y = 0; y < f.h(); ++y)
                for (int x = 0; x < f.w(); ++x)
                    f.at(0, c, y, x) *= 1.0 - sigmoid_ref(s_next_up.at(0, 0, y, x));
    }
    for (std::size_t d = 0; d < p.res_w.size(); ++d) {
        f = conv2d_ref(f, p.res_w[d], p.res_b[d]);
        for (std::int64_t i = 0; i < f.numel(); ++i) f.data()[i] = std::max(0.0, f.data()[i]);
    }
    Tensord r = conv2d_ref(f, p.predict_w, p.predict_b);
    Tensord out(s_next_up.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i)
        out.data()[i] = s_next_up.data()[i] + r.data()[i];
    return out;
}

// per-threshold confusion counts by brute-force pixel scan
struct PrCounts {
    std::int64_t tp = 0, fp = 0, fn = 0;
};

inline std::array<PrCounts, 256> pr_counts_ref(
    const std::vector<std::pair<std::vector<double>, std::vector<std::uint8_t>>>& pairs) {
    std::array<PrCounts, 256> counts{};
    for (const auto& [s, g] : pairs) {
        std::int64_t pos = 0;
        for (auto v : g) pos += v;
        if (pos == 0) continue;
        for (int t = 0; t < 256; ++t)
            for (std::size_t p = 0; p < s.size(); ++p) {
                const bool pred = s[p] >= t / 255.0;
                if (pred && g[p]) ++counts[std::size_t(t)].tp;
                if (pred && !g[p]) ++counts[std::size_t(t)].fp;
                if (!pred && g[p]) ++counts[std::size_t(t)].fn;
            }
    }
    return counts;
}

} // namespace oracles

#endif
