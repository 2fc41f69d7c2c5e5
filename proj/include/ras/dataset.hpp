#ifndef RAS_DATASET_HPP
#define RAS_DATASET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ras/pnm.hpp"
#include "ras/rng.hpp"
#include "ras/tensor.hpp"

namespace ras {

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ImageNet channel means; inputs are scaled to [0,1] then mean-centered.
inline constexpr double kChannelMean[3] = {0.485, 0.456, 0.406};

template <typename Scalar>
struct Sample {
    Tensor<Scalar> image; // [1,3,H,W], mean-centered
    Tensor<Scalar> mask;  // [1,1,H,W], values in {0,1}
    std::string stem;
};

using Sampled = Sample<double>;

template <typename Scalar>
Sample<Scalar> load_sample(const std::string& image_path, const std::string& mask_path) {
    ImageU8 img = read_pnm(image_path);
    if (img.channels != 3) throw DatasetError(image_path + ": expected a P6 color image");
    ImageU8 msk = read_pnm(mask_path);
    if (msk.channels != 1) throw DatasetError(mask_path + ": expected a P5 gray mask");
    if (img.width != msk.width || img.height != msk.height)
        throw DatasetError(image_path + " and " + mask_path + " have mismatched dimensions");
    if (img.width % 32 != 0 || img.height % 32 != 0)
        throw DatasetError(image_path + ": dimensions " + std::to_string(img.width) + "x" +
                           std::to_string(img.height) + " are not divisible by 32");

    Sample<Scalar> s;
    s.image = Tensor<Scalar>({1, 3, img.height, img.width});
    s.mask = Tensor<Scalar>({1, 1, img.height, img.width});
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c)
                s.image.at(0, c, y, x) =
                    Scalar(img.at(y, x, c) / 255.0 - kChannelMean[c]);
            s.mask.at(0, 0, y, x) = Scalar(msk.at(y, x) >= 128 ? 1 : 0);
        }
    s.stem = std::filesystem::path(image_path).stem().string();
    return s;
}

template <typename Scalar>
Sample<Scalar> flip_horizontal(const Sample<Scalar>& in) {
    Sample<Scalar> out;
    out.stem = in.stem + "_flip";
    out.image = Tensor<Scalar>(in.image.shape());
    out.mask = Tensor<Scalar>(in.mask.shape());
    const int H = in.image.h(), W = in.image.w();
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                out.image.at(0, c, y, x) = in.image.at(0, c, y, W - 1 - x);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) out.mask.at(0, 0, y, x) = in.mask.at(0, 0, y, W - 1 - x);
    return out;
}

// ---- synthetic shape dataset ----------------------------------------------

struct SyntheticSpec {
    int count = 1;
    int size = 64; // H = W, divisible by 32
    std::uint64_t seed = 0;
    int min_shapes = 1;
    int max_shapes = 3;
    double min_contrast = 0.3;
    double max_contrast = 0.6;
    double noise_amplitude = 0.04;

    void validate() const {
        if (count < 1) throw DatasetError("count must be >= 1");
        if (size < 64) throw DatasetError("size must be >= 64");
        if (size % 32 != 0)
            throw DatasetError("size " + std::to_string(size) + " is not divisible by 32");
        if (min_shapes < 1 || max_shapes < min_shapes)
            throw DatasetError("invalid shapes-per-image range");
        if (min_contrast <= 0 || max_contrast < min_contrast)
            throw DatasetError("invalid contrast range");
    }
};

namespace detail {

enum class ShapeKind { ellipse, rectangle, triangle };

struct ShapeMask {
    // rasterizes one random shape into `mask` (logical OR)
    static void draw(std::vector<std::uint8_t>& mask, int size, Rng& rng) {
        const auto kind = ShapeKind(rng.below(3));
        const double cx = rng.uniform(0.2, 0.8) * size;
        const double cy = rng.uniform(0.2, 0.8) * size;
        switch (kind) {
        case ShapeKind::ellipse: {
            const double rx = rng.uniform(0.08, 0.25) * size;
            const double ry = rng.uniform(0.08, 0.25) * size;
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
                    if (dx * dx + dy * dy <= 1.0) mask[std::size_t(y) * size + x] = 1;
                }
            break;
        }
        case ShapeKind::rectangle: {
            const double hw = rng.uniform(0.06, 0.22) * size;
            const double hh = rng.uniform(0.06, 0.22) * size;
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    if (std::abs(x + 0.5 - cx) <= hw && std::abs(y + 0.5 - cy) <= hh)
                        mask[std::size_t(y) * size + x] = 1;
            break;
        }
        case ShapeKind::triangle: {
            double vx[3], vy[3];
            for (int k = 0; k < 3; ++k) {
                const double ang = rng.uniform(0, 6.283185307179586);
                const double rad = rng.uniform(0.1, 0.3) * size;
                vx[k] = cx + rad * std::cos(ang);
                vy[k] = cy + rad * std::sin(ang);
            }
            auto edge = [&](int a, int b, double px, double py) {
                return (vx[b] - vx[a]) * (py - vy[a]) - (vy[b] - vy[a]) * (px - vx[a]);
            };
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    const double px = x + 0.5, py = y + 0.5;
                    const double e0 = edge(0, 1, px, py), e1 = edge(1, 2, px, py),
                                 e2 = edge(2, 0, px, py);
                    const bool inside = (e0 >= 0 && e1 >= 0 && e2 >= 0) ||
                                        (e0 <= 0 && e1 <= 0 && e2 <= 0);
                    if (inside) mask[std::size_t(y) * size + x] = 1;
                }
            break;
        }
        }
    }
};

inline std::uint8_t quantize(double v) {
    return std::uint8_t(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

} // namespace detail

// Writes <out_dir>/images/<stem>.ppm and <out_dir>/masks/<stem>.pgm.
// Each image is keyed by seed ^ fnv1a(stem), so generation is deterministic
// and parallelizable per file. Masks are rejection-resampled until the
// positive fraction lands in [1%, 60%].
inline void generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
    spec.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "images", ec);
    fs::create_directories(fs::path(out_dir) / "masks", ec);
    if (!fs::is_directory(fs::path(out_dir) / "images") ||
        !fs::is_directory(fs::path(out_dir) / "masks"))
        throw DatasetError("cannot create output directories under " + out_dir);

    const int S = spec.size;
    const std::size_t npix = std::size_t(S) * S;
    for (int idx = 0; idx < spec.count; ++idx) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "sample_%05d", idx);
        Rng rng(spec.seed ^ fnv1a(std::string_view(stem)));

        std::vector<std::uint8_t> mask(npix);
        const double lo = 0.01, hi = 0.60;
        for (int attempt = 0;; ++attempt) {
            std::fill(mask.begin(), mask.end(), 0);
            const int nshapes =
                spec.min_shapes + int(rng.below(std::uint64_t(spec.max_shapes - spec.min_shapes + 1)));
            for (int k = 0; k < nshapes; ++k) detail::ShapeMask::draw(mask, S, rng);
            std::size_t pos = 0;
            for (auto v : mask) pos += v;
            const double frac = double(pos) / double(npix);
            if (frac >= lo && frac <= hi) break;
            if (attempt > 200)
                throw DatasetError("shape coverage never reached [1%,60%] for " +
                                   std::string(stem));
        }

        const double bg = rng.uniform(0.15, 0.45);
        const double contrast = rng.uniform(spec.min_contrast, spec.max_contrast);
        double fg[3], bgc[3];
        for (int c = 0; c < 3; ++c) {
            bgc[c] = std::clamp(bg + rng.uniform(-0.03, 0.03), 0.0, 1.0);
            fg[c] = std::clamp(bg + contrast + rng.uniform(-0.03, 0.03), 0.0, 1.0);
        }

        ImageU8 img;
        img.width = img.height = S;
        img.channels = 3;
        img.pixels.resize(npix * 3);
        ImageU8 msk;
        msk.width = msk.height = S;
        msk.channels = 1;
        msk.pixels.resize(npix);
        for (std::size_t p = 0; p < npix; ++p) {
            const bool on = mask[p] != 0;
            for (int c = 0; c < 3; ++c) {
                const double noise = rng.uniform(-spec.noise_amplitude, spec.noise_amplitude);
                img.pixels[p * 3 + c] = detail::quantize((on ? fg[c] : bgc[c]) + noise);
            }
            msk.pixels[p] = on ? 255 : 0;
        }
        write_pnm((fs::path(out_dir) / "images" / (std::string(stem) + ".ppm")).string(), img);
        write_pnm((fs::path(out_dir) / "masks" / (std::string(stem) + ".pgm")).string(), msk);
    }
}

// Sorted stems of a <root>/images + <root>/masks layout; every image must
// have a mask and vice versa.
inline std::vector<std::string> dataset_stems(const std::string& root) {
    namespace fs = std::filesystem;
    const fs::path images = fs::path(root) / "images";
    const fs::path masks = fs::path(root) / "masks";
    if (!fs::is_directory(images) || !fs::is_directory(masks))
        throw DatasetError(root + " must contain images/ and masks/");
    std::vector<std::string> stems;
    for (const auto& e : fs::directory_iterator(images))
        if (e.path().extension() == ".ppm") stems.push_back(e.path().stem().string());
    std::sort(stems.begin(), stems.end());
    for (const auto& s : stems)
        if (!fs::exists(masks / (s + ".pgm")))
            throw DatasetError("image " + s + ".ppm has no matching mask");
    std::size_t nmasks = 0;
    for (const auto& e : fs::directory_iterator(masks))
        if (e.path().extension() == ".pgm") ++nmasks;
    if (nmasks != stems.size())
        throw DatasetError(root + ": image/mask counts differ (" + std::to_string(stems.size()) +
                           " vs " + std::to_string(nmasks) + ")");
    if (stems.empty()) throw DatasetError(root + ": empty dataset");
    return stems;
}

template <typename Scalar>
Sample<Scalar> load_dataset_sample(const std::string& root, const std::string& stem) {
    namespace fs = std::filesystem;
    return load_sample<Scalar>((fs::path(root) / "images" / (stem + ".ppm")).string(),
                               (fs::path(root) / "masks" / (stem + ".pgm")).string());
}

} // namespace ras

#endif
