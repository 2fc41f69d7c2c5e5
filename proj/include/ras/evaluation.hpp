#ifndef RAS_EVALUATION_HPP
#define RAS_EVALUATION_HPP

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ras/pnm.hpp"

namespace ras {

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kNumThresholds = 256;
inline constexpr double kDefaultBeta2 = 0.3;

struct SaliencyMap {
    int width = 0;
    int height = 0;
    Eigen::ArrayXd values; // row-major, in [0,1]

    double at(int y, int x) const { return values[std::int64_t(y) * width + x]; }
};

struct GroundTruthMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values; // {0,1}

    std::uint8_t at(int y, int x) const { return values[std::size_t(y) * width + x]; }
    std::int64_t positives() const {
        std::int64_t n = 0;
        for (auto v : values) n += v;
        return n;
    }
};

inline SaliencyMap saliency_from_pgm(const ImageU8& img) {
    if (img.channels != 1) throw EvalError("saliency maps must be single-channel");
    SaliencyMap s;
    s.width = img.width;
    s.height = img.height;
    s.values.resize(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) s.values[i] = img.pixels[i] / 255.0;
    return s;
}

inline GroundTruthMask mask_from_pgm(const ImageU8& img) {
    if (img.channels != 1) throw EvalError("masks must be single-channel");
    GroundTruthMask m;
    m.width = img.width;
    m.height = img.height;
    m.values.resize(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) m.values[i] = img.pixels[i] >= 128 ? 1 : 0;
    return m;
}

struct PrPair {
    double precision = 1;
    double recall = 0;
};

using PrCurve = std::array<PrPair, kNumThresholds>;

// PR pairs for thresholds t in [0,255]: a pixel is predicted positive iff
// S >= t/255 (real-valued S, no 8-bit requantization). Aggregate mode sums
// TP/FP/FN over the dataset; per-image mode averages per-image P and R.
// Images with empty ground truth are skipped (recall undefined there).
inline PrCurve pr_curve(const std::vector<std::pair<SaliencyMap, GroundTruthMask>>& pairs,
                        bool per_image_average = false,
                        std::vector<std::size_t>* skipped = nullptr) {
    if (pairs.empty()) throw EvalError("pr_curve needs at least one image");
    struct Counts {
        std::int64_t tp = 0, fp = 0, fn = 0;
    };
    std::array<Counts, kNumThresholds> agg{};
    std::array<double, kNumThresholds> psum{}, rsum{};
    std::int64_t used = 0;

    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& [s, g] = pairs[i];
        if (s.width != g.width || s.height != g.height)
            throw EvalError("prediction/mask dimension mismatch at image " + std::to_string(i));
        if (g.positives() == 0) {
            if (skipped) skipped->push_back(i);
            continue;
        }
        ++used;
        std::array<Counts, kNumThresholds> c{};
        for (int t = 0; t < kNumThresholds; ++t) {
            const double thr = t / 255.0;
            auto& ct = c[t];
            for (std::int64_t p = 0; p < s.values.size(); ++p) {
                const bool pos = s.values[p] >= thr;
                const bool gt = g.values[std::size_t(p)] != 0;
                ct.tp += pos && gt;
                ct.fp += pos && !gt;
                ct.fn += !pos && gt;
            }
        }
        for (int t = 0; t < kNumThresholds; ++t) {
            agg[t].tp += c[t].tp;
            agg[t].fp += c[t].fp;
            agg[t].fn += c[t].fn;
            psum[t] += c[t].tp + c[t].fp == 0 ? 1.0 : double(c[t].tp) / double(c[t].tp + c[t].fp);
            rsum[t] += c[t].tp + c[t].fn == 0 ? 0.0 : double(c[t].tp) / double(c[t].tp + c[t].fn);
        }
    }
    if (used == 0) throw EvalError("every mask is empty; PR curve undefined");

    PrCurve curve;
    for (int t = 0; t < kNumThresholds; ++t) {
        if (per_image_average) {
            curve[t] = {psum[t] / double(used), rsum[t] / double(used)};
        } else {
            const auto& a = agg[t];
            curve[t].precision = a.tp + a.fp == 0 ? 1.0 : double(a.tp) / double(a.tp + a.fp);
            curve[t].recall = a.tp + a.fn == 0 ? 0.0 : double(a.tp) / double(a.tp + a.fn);
        }
    }
    return curve;
}

// F_beta maximized over the 256 thresholds; returns the smallest argmax.
inline std::pair<double, int> max_f_measure(const PrCurve& pr, double beta2 = kDefaultBeta2) {
    double best = 0;
    int best_t = 0;
    for (int t = 0; t < kNumThresholds; ++t) {
        const double denom = beta2 * pr[t].precision + pr[t].recall;
        const double f = denom == 0 ? 0 : (1 + beta2) * pr[t].precision * pr[t].recall / denom;
        if (f > best) {
            best = f;
            best_t = t;
        }
    }
    return {best, best_t};
}

inline double mae(const SaliencyMap& s, const GroundTruthMask& g) {
    if (s.width != g.width || s.height != g.height)
        throw EvalError("mae dimension mismatch");
    double acc = 0;
    for (std::int64_t p = 0; p < s.values.size(); ++p)
        acc += std::abs(s.values[p] - double(g.values[std::size_t(p)]));
    return acc / double(s.values.size());
}

struct EvalReport {
    double max_f = 0;
    int argmax_threshold = 0;
    double mean_mae = 0;
    double beta2 = kDefaultBeta2;
    int num_images = 0;
    PrCurve pr{};
    std::vector<std::pair<std::string, double>> per_image_mae;
    std::vector<std::string> skipped_empty_gt;

    nlohmann::json to_json() const {
        return {{"max_f_measure", max_f},
                {"argmax_threshold", argmax_threshold},
                {"mae", mean_mae},
                {"num_images", num_images},
                {"beta2", beta2}};
    }
};

inline void write_pr_csv(const PrCurve& pr, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw EvalError("cannot open " + path + " for writing");
    os << "threshold,precision,recall\n";
    os.precision(17);
    for (int t = 0; t < kNumThresholds; ++t)
        os << t << "," << pr[t].precision << "," << pr[t].recall << "\n";
}

// Pairs predictions and masks by filename stem (sorted), then computes the
// aggregate PR curve, max F and mean MAE. Empty-GT images are excluded from
// the PR curve but contribute to MAE.
inline EvalReport evaluate_dataset(const std::string& pred_dir, const std::string& gt_dir,
                                   double beta2 = kDefaultBeta2, bool per_image_average = false) {
    namespace fs = std::filesystem;
    auto stems_of = [](const std::string& dir) {
        if (!fs::is_directory(dir)) throw EvalError(dir + " is not a directory");
        std::vector<std::string> stems;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".pgm") stems.push_back(e.path().stem().string());
        std::sort(stems.begin(), stems.end());
        return stems;
    };
    const auto pred_stems = stems_of(pred_dir);
    const auto gt_stems = stems_of(gt_dir);
    if (pred_stems != gt_stems) {
        std::string orphans;
        for (const auto& s : pred_stems)
            if (!std::binary_search(gt_stems.begin(), gt_stems.end(), s)) orphans += " " + s;
        for (const auto& s : gt_stems)
            if (!std::binary_search(pred_stems.begin(), pred_stems.end(), s)) orphans += " " + s;
        throw EvalError("unmatched filename stems:" + orphans);
    }
    if (pred_stems.empty()) throw EvalError("no .pgm files to evaluate");

    EvalReport rep;
    rep.beta2 = beta2;
    rep.num_images = int(pred_stems.size());
    std::vector<std::pair<SaliencyMap, GroundTruthMask>> pairs;
    pairs.reserve(pred_stems.size());
    double mae_sum = 0;
    for (const auto& stem : pred_stems) {
        auto s = saliency_from_pgm(read_pnm((fs::path(pred_dir) / (stem + ".pgm")).string()));
        auto g = mask_from_pgm(read_pnm((fs::path(gt_dir) / (stem + ".pgm")).string()));
        const double m = mae(s, g);
        rep.per_image_mae.emplace_back(stem, m);
        mae_sum += m;
        pairs.emplace_back(std::move(s), std::move(g));
    }
    rep.mean_mae = mae_sum / double(rep.num_images);

    std::vector<std::size_t> skipped;
    rep.pr = pr_curve(pairs, per_image_average, &skipped);
    for (auto i : skipped) rep.skipped_empty_gt.push_back(pred_stems[i]);
    std::tie(rep.max_f, rep.argmax_threshold) = max_f_measure(rep.pr, beta2);
    return rep;
}

} // namespace ras

#endif
