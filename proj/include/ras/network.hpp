#ifndef RAS_NETWORK_HPP
#define RAS_NETWORK_HPP

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ras/graph.hpp"
#include "ras/rng.hpp"
#include "ras/tensor.hpp"

namespace ras {

struct NetworkError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kNumStages = 5;
inline constexpr int kNumSideOutputs = 6; // 5 side-outputs + global saliency

// Declarative architecture description. The vgg16 backbone follows the
// standard stage list; the toy backbone keeps the 5-stage stride ladder
// {1,2,4,8,16} with one conv per stage so the wiring can be exercised
// without pretrained weights.
struct NetworkSpec {
    std::string backbone = "toy"; // "vgg16" or "toy"
    std::array<int, kNumStages> stage_channels{16, 32, 64, 64, 64};
    int residual_depth = 2; // D
    bool attention_enabled = true;
    int global_channels = 256;
    int side_channels = 64;

    std::array<int, kNumStages> convs_per_stage() const {
        if (backbone == "vgg16") return {2, 2, 3, 3, 3};
        return {1, 1, 1, 1, 1};
    }

    static NetworkSpec vgg16() {
        NetworkSpec s;
        s.backbone = "vgg16";
        s.stage_channels = {64, 128, 256, 512, 512};
        return s;
    }

    void validate() const {
        if (backbone != "vgg16" && backbone != "toy")
            throw NetworkError("unknown backbone '" + backbone + "'");
        if (residual_depth < 1) throw NetworkError("residual_depth must be >= 1");
        if (global_channels < 1 || side_channels < 1)
            throw NetworkError("channel counts must be >= 1");
        for (int c : stage_channels)
            if (c < 1) throw NetworkError("stage channels must be >= 1");
        if (backbone == "vgg16") {
            const std::array<int, kNumStages> want{64, 128, 256, 512, 512};
            if (stage_channels != want)
                throw NetworkError("vgg16 backbone has fixed stage channels (64,128,256,512,512)");
        }
    }

    nlohmann::json to_json() const {
        return {{"backbone", backbone},
                {"stage_channels", stage_channels},
                {"residual_depth", residual_depth},
                {"attention_enabled", attention_enabled},
                {"global_channels", global_channels},
                {"side_channels", side_channels}};
    }

    static NetworkSpec from_json(const nlohmann::json& j) {
        NetworkSpec s;
        s.backbone = j.value("backbone", s.backbone);
        if (j.contains("stage_channels")) {
            auto v = j.at("stage_channels").get<std::vector<int>>();
            if (v.size() != kNumStages)
                throw NetworkError("stage_channels must have 5 entries");
            std::copy(v.begin(), v.end(), s.stage_channels.begin());
        } else if (s.backbone == "vgg16") {
            s.stage_channels = {64, 128, 256, 512, 512};
        }
        s.residual_depth = j.value("residual_depth", s.residual_depth);
        s.attention_enabled = j.value("attention_enabled", s.attention_enabled);
        s.global_channels = j.value("global_channels", s.global_channels);
        s.side_channels = j.value("side_channels", s.side_channels);
        s.validate();
        return s;
    }

    bool operator==(const NetworkSpec&) const = default;
};

// Ordered named parameter store.
template <typename Scalar>
class Model {
public:
    struct Param {
        std::string name;
        Tensor<Scalar> value;
    };

    explicit Model(NetworkSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

    const NetworkSpec& spec() const { return spec_; }

    void add(std::string name, Tensor<Scalar> value) {
        if (index_.count(name)) throw NetworkError("duplicate parameter name " + name);
        index_[name] = params_.size();
        params_.push_back({std::move(name), std::move(value)});
    }

    Tensor<Scalar>& operator[](const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw NetworkError("unknown parameter " + name);
        return params_[it->second].value;
    }
    const Tensor<Scalar>& operator[](const std::string& name) const {
        return const_cast<Model*>(this)->operator[](name);
    }
    bool has(const std::string& name) const { return index_.count(name) > 0; }

    std::vector<Param>& params() { return params_; }
    const std::vector<Param>& params() const { return params_; }
    std::size_t num_params() const { return params_.size(); }

    std::int64_t param_count() const {
        std::int64_t n = 0;
        for (const auto& p : params_) n += p.value.numel();
        return n;
    }

private:
    NetworkSpec spec_;
    std::vector<Param> params_;
    std::map<std::string, std::size_t> index_;
};

using Modeld = Model<double>;

namespace detail {

template <typename Scalar>
Tensor<Scalar> he_init(Shape4 s, Rng& rng) {
    Tensor<Scalar> t(s);
    const double scale = std::sqrt(2.0 / (double(s.c) * s.h * s.w));
    for (std::int64_t i = 0; i < t.numel(); ++i)
        t.data()[i] = Scalar(scale * rng.normal());
    return t;
}

template <typename Scalar>
void add_conv(Model<Scalar>& m, Rng& rng, const std::string& prefix, int cin, int cout, int k,
              bool zero_init) {
    Shape4 ws{cout, cin, k, k};
    m.add(prefix + ".weight", zero_init ? Tensor<Scalar>(ws) : he_init<Scalar>(ws, rng));
    m.add(prefix + ".bias", Tensor<Scalar>({1, cout, 1, 1}));
}

} // namespace detail

// Builds the full parameter store. Layer order is fixed, so a given seed
// yields bit-identical parameters. The per-side 1-channel output convs and
// the global branch's final 1x1 conv start at zero: the network begins at
// the zero-residual identity.
template <typename Scalar>
Model<Scalar> build_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Model<Scalar> m(spec);
    Rng rng(seed);
    const auto convs = spec.convs_per_stage();

    int cin = 3;
    for (int s = 0; s < kNumStages; ++s) {
        for (int k = 0; k < convs[s]; ++k) {
            detail::add_conv(m, rng,
                             "backbone.stage" + std::to_string(s + 1) + ".conv" + std::to_string(k),
                             cin, spec.stage_channels[s], 3, false);
            cin = spec.stage_channels[s];
        }
    }

    detail::add_conv(m, rng, "global.reduce", spec.stage_channels[kNumStages - 1],
                     spec.global_channels, 1, false);
    for (int k = 0; k < 3; ++k)
        detail::add_conv(m, rng, "global.conv" + std::to_string(k), spec.global_channels,
                         spec.global_channels, 5, false);
    detail::add_conv(m, rng, "global.predict", spec.global_channels, 1, 1, true);

    for (int i = 1; i <= kNumStages; ++i) {
        const std::string side = "side" + std::to_string(i);
        detail::add_conv(m, rng, side + ".reduce", spec.stage_channels[i - 1], spec.side_channels,
                         1, false);
        for (int d = 0; d < spec.residual_depth; ++d)
            detail::add_conv(m, rng, side + ".res" + std::to_string(d), spec.side_channels,
                             spec.side_channels, 3, false);
        detail::add_conv(m, rng, side + ".predict", spec.side_channels, 1, 3, true);
    }
    return m;
}

// Per-parameter graph leaves for one forward pass.
template <typename Scalar>
struct BoundModel {
    const Model<Scalar>* model = nullptr;
    std::vector<Var> leaves; // aligned with model->params()

    Var operator[](const std::string& name) const {
        const auto& ps = model->params();
        for (std::size_t i = 0; i < ps.size(); ++i)
            if (ps[i].name == name) return leaves[i];
        throw NetworkError("unknown parameter " + name);
    }
};

template <typename Scalar>
BoundModel<Scalar> bind(Graph<Scalar>& g, const Model<Scalar>& m, bool requires_grad) {
    BoundModel<Scalar> b;
    b.model = &m;
    b.leaves.reserve(m.num_params());
    for (const auto& p : m.params()) b.leaves.push_back(g.leaf(p.value, requires_grad));
    return b;
}

template <typename Scalar>
struct SidePredictions {
    Var s_global;                              // stride 32
    std::array<Var, kNumStages> s;             // s[i-1] = S_i at stride 2^(i-1)
    std::array<Var, kNumStages> attention;     // A_i, valid only with attention enabled
    bool has_attention = false;

    // {S_global, S_5, ..., S_1} with the stride each map carries
    std::vector<std::pair<Var, int>> supervised() const {
        std::vector<std::pair<Var, int>> out;
        out.emplace_back(s_global, 32);
        for (int i = kNumStages; i >= 1; --i) out.emplace_back(s[i - 1], 1 << (i - 1));
        return out;
    }
};

// A = 1 - sigmoid(S_next_up)
template <typename Scalar>
Var reverse_attention(Graph<Scalar>& g, Var s_next_up) {
    return g.one_minus(g.sigmoid(s_next_up));
}

namespace detail {

template <typename Scalar>
Var conv(Graph<Scalar>& g, const BoundModel<Scalar>& b, const std::string& prefix, Var x) {
    return g.conv2d(x, b[prefix + ".weight"], b[prefix + ".bias"]);
}

} // namespace detail

// One side-output stage: channel reduction, optional reverse-attention
// gating, D conv+ReLU residual layers, 1-channel projection, then the
// residual shortcut S_i = S_next_up + R_i.
template <typename Scalar>
Var residual_unit(Graph<Scalar>& g, const BoundModel<Scalar>& b, int side_index, Var tap,
                  Var s_next_up, bool attention_enabled, Var* attention_out = nullptr,
                  bool detach_attention = false) {
    const auto& t = g.value(tap);
    const auto& s = g.value(s_next_up);
    if (t.h() != s.h() || t.w() != s.w() || t.n() != s.n())
        throw NetworkError("residual_unit spatial mismatch: tap " + t.shape().str() +
                           " vs prediction " + s.shape().str());
    const std::string side = "side" + std::to_string(side_index);
    Var f = detail::conv(g, b, side + ".reduce", tap);
    if (attention_enabled) {
        // detach_attention stops the gradient from flowing into S_{i+1}
        // through the attention map; the default keeps it differentiable
        Var gate = detach_attention ? g.constant(g.value(s_next_up)) : s_next_up;
        Var a = reverse_attention(g, gate);
        if (attention_out) *attention_out = a;
        f = g.mul(f, a);
    }
    for (int d = 0; d < b.model->spec().residual_depth; ++d)
        f = g.relu(detail::conv(g, b, side + ".res" + std::to_string(d), f));
    Var r = detail::conv(g, b, side + ".predict", f);
    return g.add(s_next_up, r);
}

template <typename Scalar>
SidePredictions<Scalar> forward(Graph<Scalar>& g, const BoundModel<Scalar>& b, Var image,
                                bool detach_attention = false) {
    const NetworkSpec& spec = b.model->spec();
    const auto& img = g.value(image);
    if (img.c() != 3)
        throw NetworkError("forward expects a 3-channel image, got " + img.shape().str());
    if (img.h() % 32 != 0 || img.w() % 32 != 0)
        throw NetworkError("input dims must be divisible by 32, got " + img.shape().str() +
                           "; pad to " + std::to_string((img.h() + 31) / 32 * 32) + "x" +
                           std::to_string((img.w() + 31) / 32 * 32));

    const auto convs = spec.convs_per_stage();
    std::array<Var, kNumStages> taps;
    Var x = image;
    for (int s = 0; s < kNumStages; ++s) {
        if (s > 0) x = g.maxpool2(x);
        for (int k = 0; k < convs[s]; ++k)
            x = g.relu(detail::conv(g, b, "backbone.stage" + std::to_string(s + 1) + ".conv" +
                                              std::to_string(k),
                                    x));
        taps[s] = x;
    }

    // global saliency branch runs on pool5 (stride 32)
    Var gfeat = detail::conv(g, b, "global.reduce", g.maxpool2(x));
    for (int k = 0; k < 3; ++k)
        gfeat = g.relu(detail::conv(g, b, "global.conv" + std::to_string(k), gfeat));

    SidePredictions<Scalar> preds;
    preds.has_attention = spec.attention_enabled;
    preds.s_global = detail::conv(g, b, "global.predict", gfeat);

    Var deeper = preds.s_global;
    for (int i = kNumStages; i >= 1; --i) {
        Var up = g.upsample_bilinear(deeper, 2);
        Var attn;
        preds.s[i - 1] = residual_unit(g, b, i, taps[i - 1], up, spec.attention_enabled, &attn,
                                       detach_attention);
        if (spec.attention_enabled) preds.attention[i - 1] = attn;
        deeper = preds.s[i - 1];
    }
    return preds;
}

// Inference helper: full-resolution saliency probability map sigmoid(S_1).
template <typename Scalar>
Tensor<Scalar> predict(const Model<Scalar>& m, const Tensor<Scalar>& image) {
    Graph<Scalar> g;
    auto b = bind(g, m, false);
    auto preds = forward(g, b, g.constant(image));
    return g.value(g.sigmoid(preds.s[0]));
}

} // namespace ras

#endif
