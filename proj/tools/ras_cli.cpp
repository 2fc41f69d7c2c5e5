// ras: command-line front end for the reverse-attention saliency network.
//
// Subcommands: gen-data, train, predict, eval, grad-check, param-count.
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ras/dataset.hpp"
#include "ras/evaluation.hpp"
#include "ras/graph.hpp"
#include "ras/network.hpp"
#include "ras/training.hpp"
#include "ras/weights.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// thrown for problems the operator can fix in flags/config (exit 1, not 2)
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    ras::NetworkSpec network;
    ras::TrainConfig train;
};

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open config file " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw UsageError(path + ": invalid JSON: " + e.what());
    }
    RunConfig cfg;
    try {
        if (j.contains("network")) cfg.network = ras::NetworkSpec::from_json(j.at("network"));
        if (j.contains("train")) cfg.train = ras::TrainConfig::from_json(j.at("train"));
    } catch (const std::exception& e) {
        throw UsageError(path + ": " + e.what());
    }
    return cfg;
}

ras::Tensord image_to_tensor(const ras::ImageU8& img) {
    if (img.channels != 3) throw UsageError("input must be a P6 color image");
    ras::Tensord t({1, 3, img.height, img.width});
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                t.at(0, c, y, x) = img.at(y, x, c) / 255.0 - ras::kChannelMean[c];
    return t;
}

// mirror-pad (without repeating the border pixel) to the next multiple of 32
ras::Tensord reflect_pad32(const ras::Tensord& t) {
    const int H = t.h(), W = t.w();
    const int H2 = (H + 31) / 32 * 32, W2 = (W + 31) / 32 * 32;
    if (H2 == H && W2 == W) return t;
    auto reflect = [](int i, int n) {
        if (i < n) return i;
        const int r = 2 * n - 2 - i;
        return r < 0 ? 0 : r;
    };
    ras::Tensord out({1, 3, H2, W2});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < H2; ++y)
            for (int x = 0; x < W2; ++x)
                out.at(0, c, y, x) = t.at(0, c, reflect(y, H), reflect(x, W));
    return out;
}

void write_saliency_pgm(const ras::Tensord& prob, const std::string& path, int crop_h, int crop_w) {
    ras::ImageU8 img;
    img.width = crop_w;
    img.height = crop_h;
    img.channels = 1;
    img.pixels.resize(std::size_t(crop_h) * crop_w);
    for (int y = 0; y < crop_h; ++y)
        for (int x = 0; x < crop_w; ++x)
            img.pixels[std::size_t(y) * crop_w + x] = ras::detail::quantize(prob.at(0, 0, y, x));
    ras::write_pnm(path, img);
}

int cmd_gen_data(const std::string& out, int count, int size, std::uint64_t seed) {
    ras::SyntheticSpec spec;
    spec.count = count;
    spec.size = size;
    spec.seed = seed;
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    ras::generate_synthetic(spec, out);
    std::cout << "wrote " << count << " image/mask pairs to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_path, const std::string& loss_csv, bool no_attention,
              std::int64_t seed_override, int iters_override) {
    RunConfig cfg = load_run_config(config_path);
    if (no_attention) cfg.network.attention_enabled = false;
    if (seed_override >= 0) cfg.train.seed = std::uint64_t(seed_override);
    if (iters_override >= 0) cfg.train.max_iterations = iters_override;
    try {
        cfg.network.validate();
        cfg.train.validate();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }

    std::vector<ras::Sampled> data;
    for (const auto& stem : ras::dataset_stems(data_dir))
        data.push_back(ras::load_dataset_sample<double>(data_dir, stem));
    if (cfg.train.augment_flip) data = ras::augment_with_flips(std::move(data));
    std::cout << "training on " << data.size() << " samples ("
              << (cfg.train.augment_flip ? "with" : "without") << " flip augmentation)\n";

    auto model = ras::build_network<double>(cfg.network, cfg.train.seed);
    std::function<void(int, const ras::Modeld&)> checkpoint_cb;
    if (cfg.train.checkpoint_interval > 0) {
        checkpoint_cb = [&](int step, const ras::Modeld& m) {
            char suffix[32];
            std::snprintf(suffix, sizeof suffix, ".ckpt%06d", step);
            ras::save_weights(m, out_path + suffix);
        };
    }
    auto log = ras::train(model, data, cfg.train, checkpoint_cb);

    ras::save_weights(model, out_path);
    const std::string csv = loss_csv.empty() ? out_path + ".loss.csv" : loss_csv;
    ras::write_loss_csv(log, csv);
    if (!log.empty())
        std::cout << "final loss " << log.back().loss << " after " << log.size()
                  << " iterations (lr " << log.back().lr << ")\n";
    std::cout << "weights: " << out_path << "\nloss log: " << csv << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& image_path,
                const std::string& out_path, const std::string& dump_dir, bool pad) {
    auto model = ras::load_weights<double>(model_path);
    ras::Tensord image = image_to_tensor(ras::read_pnm(image_path));
    const int H = image.h(), W = image.w();
    if (H % 32 != 0 || W % 32 != 0) {
        if (!pad)
            throw UsageError("image dimensions " + std::to_string(W) + "x" + std::to_string(H) +
                             " are not divisible by 32 (rerun with --pad to mirror-pad)");
        image = reflect_pad32(image);
    }

    ras::Graphd g;
    auto bound = ras::bind(g, model, false);
    auto preds = ras::forward(g, bound, g.constant(image));
    write_saliency_pgm(g.value(g.sigmoid(preds.s[0])), out_path, H, W);

    if (!dump_dir.empty()) {
        fs::create_directories(dump_dir);
        auto dump = [&](ras::Var pred, int stride, const std::string& name) {
            ras::Var full = stride == 1 ? pred : g.upsample_bilinear(pred, stride);
            write_saliency_pgm(g.value(g.sigmoid(full)), (fs::path(dump_dir) / name).string(), H,
                               W);
        };
        dump(preds.s_global, 32, "global.pgm");
        for (int i = 1; i <= ras::kNumStages; ++i)
            dump(preds.s[i - 1], 1 << (i - 1), "side" + std::to_string(i) + ".pgm");
    }
    std::cout << "prediction: " << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& report,
             const std::string& pr_csv, double beta2, bool per_image) {
    auto rep = ras::evaluate_dataset(pred_dir, gt_dir, beta2, per_image);
    if (!report.empty()) {
        std::ofstream os(report);
        if (!os) throw ras::EvalError("cannot open " + report + " for writing");
        os << rep.to_json().dump(2) << "\n";
    }
    if (!pr_csv.empty()) ras::write_pr_csv(rep.pr, pr_csv);
    std::cout << "images: " << rep.num_images << "\nmax F: " << rep.max_f << " (threshold "
              << rep.argmax_threshold << ")\nMAE: " << rep.mean_mae << "\n";
    if (!rep.skipped_empty_gt.empty())
        std::cout << rep.skipped_empty_gt.size() << " empty-GT images excluded from the PR curve\n";
    return 0;
}

int cmd_grad_check(double tolerance) {
    ras::Rng rng(20240811);
    auto rand_t = [&](ras::Shape4 s, double lo, double hi) {
        ras::Tensord t(s);
        for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
        return t;
    };
    // relu inputs bounded away from 0, where the subgradient is ambiguous
    auto rand_nonzero = [&](ras::Shape4 s) {
        ras::Tensord t(s);
        for (std::int64_t i = 0; i < t.numel(); ++i) {
            const double v = rng.uniform(0.2, 1.0);
            t.data()[i] = rng.uniform() < 0.5 ? -v : v;
        }
        return t;
    };
    ras::Tensord target({1, 1, 6, 6});
    for (std::int64_t i = 0; i < target.numel(); ++i) target.data()[i] = rng.below(2) ? 1.0 : 0.0;

    struct Check {
        std::string name;
        double err;
    };
    std::vector<Check> checks;
    auto add = [&](const std::string& name, auto build, std::vector<ras::Tensord> inputs) {
        checks.push_back({name, ras::grad_check(build, inputs)});
    };

    add("conv2d", [](ras::Graphd& g, const std::vector<ras::Var>& in) {
        return g.sum(g.conv2d(in[0], in[1], in[2]));
    }, {rand_t({1, 2, 6, 6}, -1, 1), rand_t({3, 2, 3, 3}, -1, 1), rand_t({1, 3, 1, 1}, -1, 1)});
    add("relu", [](ras::Graphd& g, const std::vector<ras::Var>& in) {
        return g.sum(g.relu(in[0]));
    }, {rand_nonzero({1, 2, 5, 5})});
    add("sigmoid", [](ras::Graphd& g, const std::vector<ras::Var>& in) {
        return g.sum(g.sigmoid(in[0]));
    }, {rand_t({1, 2, 4, 4}, -3, 3)});
    add("maxpool2", [](ras::Graphd& g, const std::vector<ras::Var>& in) {
        return g.sum(g.maxpool2(in[0]));
    }, {rand_t({1, 2, 6, 6}, -1, 1)});
    add("upsample_bilinear", [](ras::Graphd& g, const std::vector<ras::Var>& in) {
        return g.sum(g.upsample_bilinear(in[0], 2));
    }, {rand_t({1, 2, 4, 4}, -1, 1)});
    add("mul_broadcast", [](ras::Graphd& g, const std::vector<ras::Var>& in) {
        return g.sum(g.mul(in[0], in[1]));
    }, {rand_t({1, 3, 4, 4}, -1, 1), rand_t({1, 1, 4, 4}, -1, 1)});
    add("bce_from_logits", [&](ras::Graphd& g, const std::vector<ras::Var>& in) {
        return g.bce_from_logits(in[0], target, true);
    }, {rand_t({1, 1, 6, 6}, -2, 2)});

    bool all_ok = true;
    for (const auto& c : checks) {
        const bool ok = c.err < tolerance;
        all_ok = all_ok && ok;
        std::cout << (ok ? "pass" : "FAIL") << "  " << c.name << "  max rel err " << c.err << "\n";
    }
    if (!all_ok) {
        std::cerr << "gradient check failed (tolerance " << tolerance << ")\n";
        return 2;
    }
    return 0;
}

int cmd_param_count(const std::string& config_path) {
    std::ifstream is(config_path);
    if (!is) throw UsageError("cannot open config file " + config_path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw UsageError(config_path + ": invalid JSON: " + e.what());
    }
    ras::NetworkSpec spec;
    try {
        spec = ras::NetworkSpec::from_json(j.contains("network") ? j.at("network") : j);
    } catch (const std::exception& e) {
        throw UsageError(config_path + ": " + e.what());
    }
    auto model = ras::build_network<double>(spec, 0);
    const std::int64_t n = model.param_count();
    std::printf("parameters: %lld\n", static_cast<long long>(n));
    std::printf("size: %.2f MB (float32)\n", double(n) * 4.0 / (1024.0 * 1024.0));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"reverse-attention saliency network tools"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic shape dataset");
    std::string gen_out;
    int gen_count = 10, gen_size = 64;
    std::uint64_t gen_seed = 0;
    gen->add_option("--out", gen_out, "output dataset root")->required();
    gen->add_option("--count", gen_count, "number of image/mask pairs");
    gen->add_option("--size", gen_size, "square image size, divisible by 32");
    gen->add_option("--seed", gen_seed, "generator seed");

    auto* tr = app.add_subcommand("train", "train a model");
    std::string tr_config, tr_data, tr_out, tr_loss_csv;
    bool tr_no_attention = false;
    std::int64_t tr_seed = -1;
    int tr_iters = -1;
    tr->add_option("--config", tr_config, "run config JSON ({\"network\":{},\"train\":{}})")
        ->required();
    tr->add_option("--data", tr_data, "dataset root (images/ + masks/)")->required();
    tr->add_option("--out", tr_out, "output weight file (.rasw)")->required();
    tr->add_option("--loss-csv", tr_loss_csv, "loss log path (default <out>.loss.csv)");
    tr->add_flag("--no-attention", tr_no_attention, "disable reverse attention (ablation)");
    tr->add_option("--seed", tr_seed, "override the config seed");
    tr->add_option("--iterations", tr_iters, "override max_iterations");

    auto* pr = app.add_subcommand("predict", "run inference on one image");
    std::string pr_model, pr_image, pr_out, pr_dump;
    bool pr_pad = false;
    pr->add_option("--model", pr_model, "weight file (.rasw)")->required();
    pr->add_option("--image", pr_image, "input PPM image")->required();
    pr->add_option("--out", pr_out, "output saliency PGM")->required();
    pr->add_option("--dump-sides", pr_dump, "also write all six per-side maps to this directory");
    pr->add_flag("--pad", pr_pad, "mirror-pad inputs whose dimensions are not divisible by 32");

    auto* ev = app.add_subcommand("eval", "score predictions against ground truth");
    std::string ev_pred, ev_gt, ev_report, ev_pr;
    double ev_beta2 = ras::kDefaultBeta2;
    bool ev_per_image = false;
    ev->add_option("--pred", ev_pred, "directory of prediction PGMs")->required();
    ev->add_option("--gt", ev_gt, "directory of ground-truth PGMs")->required();
    ev->add_option("--report", ev_report, "output report JSON");
    ev->add_option("--pr", ev_pr, "output PR curve CSV");
    ev->add_option("--beta2", ev_beta2, "beta^2 for the F-measure");
    ev->add_flag("--per-image", ev_per_image, "average precision/recall per image");

    auto* gc = app.add_subcommand("grad-check", "finite-difference check of every operator");
    double gc_tol = 1e-4;
    gc->add_option("--tolerance", gc_tol, "max relative error allowed");

    auto* pc = app.add_subcommand("param-count", "report model size for a config");
    std::string pc_config;
    pc->add_option("--config", pc_config, "config JSON with a network section")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_out, gen_count, gen_size, gen_seed);
        if (tr->parsed())
            return cmd_train(tr_config, tr_data, tr_out, tr_loss_csv, tr_no_attention, tr_seed,
                             tr_iters);
        if (pr->parsed()) return cmd_predict(pr_model, pr_image, pr_out, pr_dump, pr_pad);
        if (ev->parsed()) return cmd_eval(ev_pred, ev_gt, ev_report, ev_pr, ev_beta2, ev_per_image);
        if (gc->parsed()) return cmd_grad_check(gc_tol);
        if (pc->parsed()) return cmd_param_count(pc_config);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
