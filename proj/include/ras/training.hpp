#ifndef RAS_TRAINING_HPP
#define RAS_TRAINING_HPP

#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ras/dataset.hpp"
#include "ras/network.hpp"
#include "ras/tensor.hpp"

namespace ras {

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    double learning_rate = 1e-3; // loss is a pixel sum, so useful rates are small
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int iter_size = 10;
    int batch_size = 1;
    int max_iterations = 10000;
    double lr_decay_factor = 0.1;
    int plateau_window = 100;
    std::uint64_t seed = 0;
    bool balanced_loss = true;
    bool detach_attention = false;
    bool augment_flip = true;
    int checkpoint_interval = 0; // optimizer steps between checkpoints, 0 = off

    void validate() const {
        if (learning_rate <= 0) throw TrainError("learning_rate must be > 0");
        if (iter_size < 1) throw TrainError("iter_size must be >= 1");
        if (batch_size < 1) throw TrainError("batch_size must be >= 1");
        if (momentum < 0 || momentum >= 1) throw TrainError("momentum must be in [0,1)");
        if (max_iterations < 0) throw TrainError("max_iterations must be >= 0");
        if (plateau_window < 1) throw TrainError("plateau_window must be >= 1");
        if (lr_decay_factor <= 0 || lr_decay_factor > 1)
            throw TrainError("lr_decay_factor must be in (0,1]");
    }

    nlohmann::json to_json() const {
        return {{"learning_rate", learning_rate},
                {"momentum", momentum},
                {"weight_decay", weight_decay},
                {"iter_size", iter_size},
                {"batch_size", batch_size},
                {"max_iterations", max_iterations},
                {"lr_decay_factor", lr_decay_factor},
                {"plateau_window", plateau_window},
                {"seed", seed},
                {"balanced_loss", balanced_loss},
                {"detach_attention", detach_attention},
                {"augment_flip", augment_flip},
                {"checkpoint_interval", checkpoint_interval}};
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.momentum = j.value("momentum", c.momentum);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.iter_size = j.value("iter_size", c.iter_size);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.max_iterations = j.value("max_iterations", c.max_iterations);
        c.lr_decay_factor = j.value("lr_decay_factor", c.lr_decay_factor);
        c.plateau_window = j.value("plateau_window", c.plateau_window);
        c.seed = j.value("seed", c.seed);
        c.balanced_loss = j.value("balanced_loss", c.balanced_loss);
        c.detach_attention = j.value("detach_attention", c.detach_attention);
        c.augment_flip = j.value("augment_flip", c.augment_flip);
        c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
        c.validate();
        return c;
    }
};

// Deep-supervision loss: each of the six maps {S_global, S_5..S_1} is
// upsampled by its stride to full resolution and scored against G; the six
// terms are summed with equal weight.
template <typename Scalar>
Var total_loss(Graph<Scalar>& g, const SidePredictions<Scalar>& preds,
               const Tensor<Scalar>& target, bool balanced) {
    Var loss;
    for (const auto& [pred, stride] : preds.supervised()) {
        Var full = stride == 1 ? pred : g.upsample_bilinear(pred, stride);
        const auto& shape = g.value(full).shape();
        if (!(shape == target.shape()))
            throw TrainError("supervision resolution mismatch: prediction " + shape.str() +
                             " vs ground truth " + target.shape().str());
        Var term = g.bce_from_logits(full, target, balanced);
        loss = loss.valid() ? g.add(loss, term) : term;
    }
    return loss;
}

template <typename Scalar>
struct OptimizerState {
    std::vector<Tensor<Scalar>> velocity; // aligned with model params
    std::vector<Tensor<Scalar>> grad_accum;
    int accum_count = 0;
    double lr = 0;
    int iteration = 0;
    std::deque<double> loss_window; // losses since the window anchor
    int decay_events = 0;

    static OptimizerState init(const Model<Scalar>& m, const TrainConfig& cfg) {
        OptimizerState st;
        st.lr = cfg.learning_rate;
        st.velocity.reserve(m.num_params());
        st.grad_accum.reserve(m.num_params());
        for (const auto& p : m.params()) {
            st.velocity.emplace_back(p.value.shape());
            st.grad_accum.emplace_back(p.value.shape());
        }
        return st;
    }

    void reset_accum() {
        for (auto& t : grad_accum) t.array().setZero();
        accum_count = 0;
    }
};

// One SGD step with momentum and weight decay on grads averaged over
// iter_size passes: g = acc/iter_size + wd*w; v = mu*v + g; w -= lr*v.
template <typename Scalar>
void sgd_step(Model<Scalar>& m, OptimizerState<Scalar>& st, const TrainConfig& cfg) {
    for (std::size_t i = 0; i < m.params().size(); ++i) {
        auto& w = m.params()[i].value.array();
        auto& v = st.velocity[i].array();
        auto g = st.grad_accum[i].array() / Scalar(cfg.iter_size) +
                 Scalar(cfg.weight_decay) * w;
        v = Scalar(cfg.momentum) * v + g;
        w -= Scalar(st.lr) * v;
    }
    st.reset_accum();
    ++st.iteration;
}

// Plateau detector: once 2*plateau_window losses are gathered, compare the
// mean of the two halves; an improvement under 1% relative decays the lr and
// restarts the window, so decays are at least a window apart.
template <typename Scalar>
bool lr_schedule(OptimizerState<Scalar>& st, const TrainConfig& cfg) {
    const std::size_t W = std::size_t(cfg.plateau_window);
    if (st.loss_window.size() < 2 * W) return false;
    while (st.loss_window.size() > 2 * W) st.loss_window.pop_front();
    const double prev = std::accumulate(st.loss_window.begin(), st.loss_window.begin() + W, 0.0) / W;
    const double cur = std::accumulate(st.loss_window.begin() + W, st.loss_window.end(), 0.0) / W;
    if (prev - cur < 0.01 * prev) {
        st.lr *= cfg.lr_decay_factor;
        st.loss_window.clear();
        ++st.decay_events;
        return true;
    }
    st.loss_window.pop_front();
    return false;
}

struct LossLogRow {
    int iteration;
    double lr;
    double loss;
};

inline void write_loss_csv(const std::vector<LossLogRow>& log, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw TrainError("cannot open " + path + " for writing");
    os << "iteration,lr,loss\n";
    os.precision(17);
    for (const auto& row : log) os << row.iteration << "," << row.lr << "," << row.loss << "\n";
}

namespace detail {

template <typename Scalar>
Tensor<Scalar> stack_batch(const std::vector<const Tensor<Scalar>*>& parts) {
    const Shape4 s0 = parts.front()->shape();
    Tensor<Scalar> out({int(parts.size()) * s0.n, s0.c, s0.h, s0.w});
    std::int64_t off = 0;
    for (const auto* p : parts) {
        if (!(p->shape() == s0))
            throw TrainError("cannot batch samples of differing shapes: " + s0.str() + " vs " +
                             p->shape().str());
        out.array().segment(off, p->numel()) = p->array();
        off += p->numel();
    }
    return out;
}

} // namespace detail

// Full training loop. Sample order is an epoch-wise Fisher-Yates shuffle
// driven by cfg.seed, so a fixed seed fixes the loss log bit-for-bit.
template <typename Scalar>
std::vector<LossLogRow> train(
    Model<Scalar>& model, const std::vector<Sample<Scalar>>& data, const TrainConfig& cfg,
    const std::function<void(int, const Model<Scalar>&)>& checkpoint_cb = nullptr) {
    cfg.validate();
    if (data.empty()) throw TrainError("training dataset is empty");

    auto st = OptimizerState<Scalar>::init(model, cfg);
    Rng order_rng(cfg.seed ^ 0x5a17u);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size(); // forces a shuffle before the first sample

    auto next_sample = [&]() -> const Sample<Scalar>& {
        if (cursor >= order.size()) {
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[order_rng.below(i)]);
            cursor = 0;
        }
        return data[order[cursor++]];
    };

    std::vector<LossLogRow> log;
    log.reserve(std::size_t(cfg.max_iterations));

    for (int step = 1; step <= cfg.max_iterations; ++step) {
        double step_loss = 0;
        for (int pass = 0; pass < cfg.iter_size; ++pass) {
            std::vector<const Tensor<Scalar>*> imgs, msks;
            for (int bi = 0; bi < cfg.batch_size; ++bi) {
                const auto& s = next_sample();
                imgs.push_back(&s.image);
                msks.push_back(&s.mask);
            }
            Tensor<Scalar> image =
                cfg.batch_size == 1 ? *imgs[0] : detail::stack_batch<Scalar>(imgs);
            Tensor<Scalar> mask = cfg.batch_size == 1 ? *msks[0] : detail::stack_batch<Scalar>(msks);

            Graph<Scalar> g;
            auto bound = bind(g, model, true);
            auto preds = forward(g, bound, g.constant(image), cfg.detach_attention);
            Var loss = total_loss(g, preds, mask, cfg.balanced_loss);
            const double lv = double(g.value(loss).data()[0]);
            if (!std::isfinite(lv)) {
                double norm2 = 0;
                for (const auto& p : model.params())
                    norm2 += double((p.value.array() * p.value.array()).sum());
                throw TrainError("non-finite loss at iteration " + std::to_string(step) +
                                 " (parameter L2 norm " + std::to_string(std::sqrt(norm2)) + ")");
            }
            step_loss += lv;
            g.backward(loss);
            for (std::size_t i = 0; i < model.params().size(); ++i)
                st.grad_accum[i].array() += g.grad(bound.leaves[i]).array();
        }
        step_loss /= cfg.iter_size;

        const double lr_used = st.lr;
        sgd_step(model, st, cfg);
        st.loss_window.push_back(step_loss);
        lr_schedule(st, cfg);
        log.push_back({step, lr_used, step_loss});

        if (checkpoint_cb && cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0)
            checkpoint_cb(step, model);
    }
    return log;
}

// Doubles a dataset with horizontally flipped copies.
template <typename Scalar>
std::vector<Sample<Scalar>> augment_with_flips(std::vector<Sample<Scalar>> data) {
    const std::size_t n = data.size();
    data.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) data.push_back(flip_horizontal(data[i]));
    return data;
}

} // namespace ras

#endif
