#ifndef RAS_GRAPH_HPP
#define RAS_GRAPH_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ras/tensor.hpp"

namespace ras {

struct GraphError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

namespace detail {

// im2col for stride-1 "same" convolution with zero padding.
// Column p = oh*W + ow holds the receptive field of output pixel (oh, ow),
// rows ordered as (c, ki, kj) row-major, matching the weight layout.
template <typename Scalar>
void im2col(const Scalar* src, int C, int H, int W, int kh, int kw,
            Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& cols) {
    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    cols.resize(std::int64_t(C) * kh * kw, std::int64_t(H) * W);
    for (int oh = 0; oh < H; ++oh) {
        for (int ow = 0; ow < W; ++ow) {
            Scalar* col = cols.col(std::int64_t(oh) * W + ow).data();
            std::int64_t r = 0;
            for (int c = 0; c < C; ++c) {
                const Scalar* plane = src + std::int64_t(c) * H * W;
                for (int ki = 0; ki < kh; ++ki) {
                    const int ih = oh - ph + ki;
                    if (ih < 0 || ih >= H) {
                        for (int kj = 0; kj < kw; ++kj) col[r++] = Scalar(0);
                        continue;
                    }
                    for (int kj = 0; kj < kw; ++kj) {
                        const int iw = ow - pw + kj;
                        col[r++] = (iw < 0 || iw >= W) ? Scalar(0) : plane[std::int64_t(ih) * W + iw];
                    }
                }
            }
        }
    }
}

template <typename Scalar>
void col2im_add(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& cols,
                int C, int H, int W, int kh, int kw, Scalar* dst) {
    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    for (int oh = 0; oh < H; ++oh) {
        for (int ow = 0; ow < W; ++ow) {
            const Scalar* col = cols.col(std::int64_t(oh) * W + ow).data();
            std::int64_t r = 0;
            for (int c = 0; c < C; ++c) {
                Scalar* plane = dst + std::int64_t(c) * H * W;
                for (int ki = 0; ki < kh; ++ki) {
                    const int ih = oh - ph + ki;
                    if (ih < 0 || ih >= H) {
                        r += kw;
                        continue;
                    }
                    for (int kj = 0; kj < kw; ++kj, ++r) {
                        const int iw = ow - pw + kj;
                        if (iw >= 0 && iw < W) plane[std::int64_t(ih) * W + iw] += col[r];
                    }
                }
            }
        }
    }
}

// Half-pixel-aligned source coordinates for one output axis.
struct AxisSample {
    std::vector<int> lo, hi;
    std::vector<double> frac; // weight of hi
};

inline AxisSample bilinear_axis(int in_len, int factor) {
    AxisSample a;
    const int out_len = in_len * factor;
    a.lo.resize(out_len);
    a.hi.resize(out_len);
    a.frac.resize(out_len);
    for (int i = 0; i < out_len; ++i) {
        double s = (i + 0.5) / factor - 0.5;
        s = std::clamp(s, 0.0, double(in_len - 1));
        int lo = int(std::floor(s));
        int hi = std::min(lo + 1, in_len - 1);
        a.lo[i] = lo;
        a.hi[i] = hi;
        a.frac[i] = s - lo;
    }
    return a;
}

} // namespace detail

// Reverse-mode tape. Nodes are appended in execution order, which is a
// topological order by construction; backward walks it once in reverse.
template <typename Scalar>
class Graph {
public:
    using T = Tensor<Scalar>;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using MapRM = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using ConstMapRM =
        Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    Var leaf(T value, bool requires_grad) {
        Node node;
        node.value = std::move(value);
        node.is_leaf = true;
        node.requires_grad = requires_grad;
        node.needs_grad = requires_grad;
        nodes_.push_back(std::move(node));
        return Var{int(nodes_.size()) - 1};
    }

    Var constant(T value) { return leaf(std::move(value), false); }

    const T& value(Var v) const { return node(v).value; }

    // Accumulated gradient of a requires_grad leaf; zero tensor before any backward.
    const T& grad(Var v) const {
        const Node& nd = node(v);
        if (!nd.is_leaf || !nd.requires_grad)
            throw GraphError("grad() is only available on requires_grad leaves");
        if (nd.grad.numel() == 0) const_cast<Node&>(nd).grad = T(nd.value.shape());
        return nd.grad;
    }

    void zero_grad() {
        for (Node& nd : nodes_)
            if (nd.grad.numel() > 0) nd.grad.array().setZero();
    }

    // ---- ops -------------------------------------------------------------

    Var conv2d(Var input, Var weight, Var bias) {
        const T& x = value(input);
        const T& k = value(weight);
        const T& b = value(bias);
        if (k.h() % 2 == 0 || k.w() % 2 == 0)
            throw GraphError("conv2d requires odd kernel dims, got " + k.shape().str());
        if (x.c() != k.c())
            throw GraphError("conv2d channel mismatch: input " + x.shape().str() + " vs weight " +
                             k.shape().str());
        if (b.numel() != k.n())
            throw GraphError("conv2d bias length " + std::to_string(b.numel()) +
                             " does not match output channels " + std::to_string(k.n()));
        const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
        const int K = k.n(), kh = k.h(), kw = k.w();
        const std::int64_t HW = std::int64_t(H) * W;
        const std::int64_t R = std::int64_t(C) * kh * kw;

        T out({N, K, H, W});
        ConstMapRM wmat(k.data(), K, R);
        auto cols = std::make_shared<std::vector<Mat>>(N);
        for (int in = 0; in < N; ++in) {
            detail::im2col(x.data() + std::int64_t(in) * C * HW, C, H, W, kh, kw, (*cols)[in]);
            MapRM omat(out.data() + std::int64_t(in) * K * HW, K, HW);
            omat.noalias() = wmat * (*cols)[in];
            for (int oc = 0; oc < K; ++oc) omat.row(oc).array() += b.data()[oc];
        }

        return add_node(std::move(out), {input.id, weight.id, bias.id},
                        [cols, N, C, H, W, K, kh, kw, HW, R](Graph& g, int self) {
                            Node& nd = g.nodes_[self];
                            const T& go = g.pass_[self];
                            const T& kk = g.nodes_[nd.parents[1]].value;
                            ConstMapRM wmat(kk.data(), K, R);
                            for (int in = 0; in < N; ++in) {
                                ConstMapRM gmat(go.data() + std::int64_t(in) * K * HW, K, HW);
                                if (g.wants(nd.parents[0])) {
                                    Mat dcols = wmat.transpose() * gmat;
                                    detail::col2im_add(dcols, C, H, W, kh, kw,
                                                       g.pgrad(nd.parents[0]).data() +
                                                           std::int64_t(in) * C * HW);
                                }
                                if (g.wants(nd.parents[1])) {
                                    MapRM dw(g.pgrad(nd.parents[1]).data(), K, R);
                                    dw.noalias() += gmat * (*cols)[in].transpose();
                                }
                                if (g.wants(nd.parents[2])) {
                                    T& db = g.pgrad(nd.parents[2]);
                                    for (int oc = 0; oc < K; ++oc)
                                        db.data()[oc] += gmat.row(oc).sum();
                                }
                            }
                        });
    }

    Var maxpool2(Var input) {
        const T& x = value(input);
        if (x.h() % 2 != 0 || x.w() % 2 != 0)
            throw GraphError("maxpool2 requires even spatial dims, got " + x.shape().str());
        const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
        const int OH = H / 2, OW = W / 2;
        T out({N, C, OH, OW});
        auto argmax = std::make_shared<std::vector<std::int64_t>>(out.numel());
        std::int64_t o = 0;
        for (int in = 0; in < N; ++in)
            for (int ic = 0; ic < C; ++ic)
                for (int oh = 0; oh < OH; ++oh)
                    for (int ow = 0; ow < OW; ++ow, ++o) {
                        // ties go to the first cell in row-major window order
                        std::int64_t best = x.index(in, ic, 2 * oh, 2 * ow);
                        Scalar bv = x.data()[best];
                        for (int di = 0; di < 2; ++di)
                            for (int dj = 0; dj < 2; ++dj) {
                                std::int64_t idx = x.index(in, ic, 2 * oh + di, 2 * ow + dj);
                                if (x.data()[idx] > bv) {
                                    bv = x.data()[idx];
                                    best = idx;
                                }
                            }
                        out.data()[o] = bv;
                        (*argmax)[o] = best;
                    }
        return add_node(std::move(out), {input.id}, [argmax](Graph& g, int self) {
            Node& nd = g.nodes_[self];
            if (!g.wants(nd.parents[0])) return;
            const T& go = g.pass_[self];
            T& gx = g.pgrad(nd.parents[0]);
            for (std::int64_t i = 0; i < go.numel(); ++i)
                gx.data()[(*argmax)[i]] += go.data()[i];
        });
    }

    Var relu(Var input) {
        const T& x = value(input);
        T out(x.shape());
        out.array() = x.array().max(Scalar(0));
        return add_node(std::move(out), {input.id}, [](Graph& g, int self) {
            Node& nd = g.nodes_[self];
            if (!g.wants(nd.parents[0])) return;
            const T& x = g.nodes_[nd.parents[0]].value;
            // subgradient 0 at x == 0
            g.pgrad(nd.parents[0]).array() +=
                g.pass_[self].array() * (x.array() > Scalar(0)).template cast<Scalar>();
        });
    }

    Var sigmoid(Var input) {
        const T& x = value(input);
        T out(x.shape());
        // stable in both tails
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            const Scalar v = x.data()[i];
            out.data()[i] = v >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-v))
                                   : std::exp(v) / (Scalar(1) + std::exp(v));
        }
        return add_node(std::move(out), {input.id}, [](Graph& g, int self) {
            Node& nd = g.nodes_[self];
            if (!g.wants(nd.parents[0])) return;
            const auto& y = nd.value.array();
            g.pgrad(nd.parents[0]).array() += g.pass_[self].array() * y * (Scalar(1) - y);
        });
    }

    Var add(Var a, Var b) {
        const T& x = value(a);
        const T& y = value(b);
        if (!(x.shape() == y.shape()))
            throw GraphError("add shape mismatch: " + x.shape().str() + " vs " + y.shape().str());
        T out(x.shape());
        out.array() = x.array() + y.array();
        return add_node(std::move(out), {a.id, b.id}, [](Graph& g, int self) {
            Node& nd = g.nodes_[self];
            for (int p : nd.parents)
                if (g.wants(p)) g.pgrad(p).array() += g.pass_[self].array();
        });
    }

    // Elementwise product. b may be single-channel and is then broadcast
    // across a's channels (attention map times feature stack).
    Var mul(Var a, Var b) {
        const T& x = value(a);
        const T& y = value(b);
        const bool bcast = y.c() == 1 && x.c() > 1;
        if (!bcast && !(x.shape() == y.shape()))
            throw GraphError("mul shape mismatch: " + x.shape().str() + " vs " + y.shape().str());
        if (bcast && !(x.n() == y.n() && x.h() == y.h() && x.w() == y.w()))
            throw GraphError("mul broadcast mismatch: " + x.shape().str() + " vs " + y.shape().str());
        const std::int64_t plane = std::int64_t(x.h()) * x.w();
        T out(x.shape());
        if (bcast) {
            for (int in = 0; in < x.n(); ++in)
                for (int ic = 0; ic < x.c(); ++ic) {
                    const std::int64_t off = (std::int64_t(in) * x.c() + ic) * plane;
                    const std::int64_t boff = std::int64_t(in) * plane;
                    for (std::int64_t p = 0; p < plane; ++p)
                        out.data()[off + p] = x.data()[off + p] * y.data()[boff + p];
                }
        } else {
            out.array() = x.array() * y.array();
        }
        return add_node(std::move(out), {a.id, b.id}, [bcast, plane](Graph& g, int self) {
            Node& nd = g.nodes_[self];
            const T& go = g.pass_[self];
            const T& x = g.nodes_[nd.parents[0]].value;
            const T& y = g.nodes_[nd.parents[1]].value;
            if (!bcast) {
                if (g.wants(nd.parents[0]))
                    g.pgrad(nd.parents[0]).array() += go.array() * y.array();
                if (g.wants(nd.parents[1]))
                    g.pgrad(nd.parents[1]).array() += go.array() * x.array();
                return;
            }
            for (int in = 0; in < x.n(); ++in)
                for (int ic = 0; ic < x.c(); ++ic) {
                    const std::int64_t off = (std::int64_t(in) * x.c() + ic) * plane;
                    const std::int64_t boff = std::int64_t(in) * plane;
                    if (g.wants(nd.parents[0])) {
                        T& gx = g.pgrad(nd.parents[0]);
                        for (std::int64_t p = 0; p < plane; ++p)
                            gx.data()[off + p] += go.data()[off + p] * y.data()[boff + p];
                    }
                    if (g.wants(nd.parents[1])) {
                        // broadcast grad sums over the channel axis
                        T& gy = g.pgrad(nd.parents[1]);
                        for (std::int64_t p = 0; p < plane; ++p)
                            gy.data()[boff + p] += go.data()[off + p] * x.data()[off + p];
                    }
                }
        });
    }

    // reverse(x) = 1 - x
    Var one_minus(Var input) {
        const T& x = value(input);
        T out(x.shape());
        out.array() = Scalar(1) - x.array();
        return add_node(std::move(out), {input.id}, [](Graph& g, int self) {
            Node& nd = g.nodes_[self];
            if (g.wants(nd.parents[0])) g.pgrad(nd.parents[0]).array() -= g.pass_[self].array();
        });
    }

    Var scale(Var input, Scalar k) {
        const T& x = value(input);
        T out(x.shape());
        out.array() = x.array() * k;
        return add_node(std::move(out), {input.id}, [k](Graph& g, int self) {
            Node& nd = g.nodes_[self];
            if (g.wants(nd.parents[0]))
                g.pgrad(nd.parents[0]).array() += g.pass_[self].array() * k;
        });
    }

    Var upsample_bilinear(Var input, int factor) {
        if (factor != 2 && factor != 4 && factor != 8 && factor != 16 && factor != 32)
            throw GraphError("upsample factor must be in {2,4,8,16,32}, got " +
                             std::to_string(factor));
        const T& x = value(input);
        const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
        const int OH = H * factor, OW = W * factor;
        auto ay = std::make_shared<detail::AxisSample>(detail::bilinear_axis(H, factor));
        auto ax = std::make_shared<detail::AxisSample>(detail::bilinear_axis(W, factor));
        T out({N, C, OH, OW});
        for (int in = 0; in < N; ++in)
            for (int ic = 0; ic < C; ++ic) {
                const Scalar* src = x.data() + x.index(in, ic, 0, 0);
                Scalar* dst = out.data() + out.index(in, ic, 0, 0);
                for (int oh = 0; oh < OH; ++oh) {
                    const Scalar fy = Scalar(ay->frac[oh]);
                    const Scalar* r0 = src + std::int64_t(ay->lo[oh]) * W;
                    const Scalar* r1 = src + std::int64_t(ay->hi[oh]) * W;
                    for (int ow = 0; ow < OW; ++ow) {
                        const Scalar fx = Scalar(ax->frac[ow]);
                        const int x0 = ax->lo[ow], x1 = ax->hi[ow];
                        dst[std::int64_t(oh) * OW + ow] =
                            (Scalar(1) - fy) * ((Scalar(1) - fx) * r0[x0] + fx * r0[x1]) +
                            fy * ((Scalar(1) - fx) * r1[x0] + fx * r1[x1]);
                    }
                }
            }
        return add_node(std::move(out), {input.id},
                        [ay, ax, N, C, H, W, OH, OW](Graph& g, int self) {
                            Node& nd = g.nodes_[self];
                            if (!g.wants(nd.parents[0])) return;
                            const T& go = g.pass_[self];
                            T& gx = g.pgrad(nd.parents[0]);
                            for (int in = 0; in < N; ++in)
                                for (int ic = 0; ic < C; ++ic) {
                                    Scalar* dst = gx.data() + gx.index(in, ic, 0, 0);
                                    const Scalar* src = go.data() + go.index(in, ic, 0, 0);
                                    for (int oh = 0; oh < OH; ++oh) {
                                        const Scalar fy = Scalar(ay->frac[oh]);
                                        Scalar* r0 = dst + std::int64_t(ay->lo[oh]) * W;
                                        Scalar* r1 = dst + std::int64_t(ay->hi[oh]) * W;
                                        for (int ow = 0; ow < OW; ++ow) {
                                            const Scalar fx = Scalar(ax->frac[ow]);
                                            const Scalar gv = src[std::int64_t(oh) * OW + ow];
                                            r0[ax->lo[ow]] += (Scalar(1) - fy) * (Scalar(1) - fx) * gv;
                                            r0[ax->hi[ow]] += (Scalar(1) - fy) * fx * gv;
                                            r1[ax->lo[ow]] += fy * (Scalar(1) - fx) * gv;
                                            r1[ax->hi[ow]] += fy * fx * gv;
                                        }
                                    }
                                }
                        });
    }

    // Class-balanced binary cross entropy from pre-sigmoid logits, summed over
    // all pixels. Balancing weights are computed per image: positives weighted
    // by |G-|/|G|, negatives by |G+|/|G|.
    Var bce_from_logits(Var logits, const T& target, bool balanced) {
        const T& x = value(logits);
        if (!(x.shape() == target.shape()))
            throw GraphError("bce shape mismatch: logits " + x.shape().str() + " vs target " +
                             target.shape().str());
        if (x.c() != 1)
            throw GraphError("bce expects single-channel logits, got " + x.shape().str());
        for (std::int64_t i = 0; i < target.numel(); ++i)
            if (target.data()[i] != Scalar(0) && target.data()[i] != Scalar(1))
                throw GraphError("bce target must be binary, found " +
                                 std::to_string(double(target.data()[i])));

        const int N = x.n();
        const std::int64_t plane = std::int64_t(x.h()) * x.w();
        auto weights = std::make_shared<T>(x.shape());
        for (int in = 0; in < N; ++in) {
            Scalar wp = Scalar(1), wn = Scalar(1);
            if (balanced) {
                std::int64_t pos = 0;
                for (std::int64_t p = 0; p < plane; ++p)
                    pos += target.data()[in * plane + p] == Scalar(1);
                wp = Scalar(plane - pos) / Scalar(plane);
                wn = Scalar(pos) / Scalar(plane);
            }
            for (std::int64_t p = 0; p < plane; ++p)
                weights->data()[in * plane + p] =
                    target.data()[in * plane + p] == Scalar(1) ? wp : wn;
        }

        Scalar loss = 0;
        auto tgt = std::make_shared<T>(target);
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            const Scalar v = x.data()[i];
            const Scalar g = tgt->data()[i];
            // max(v,0) - v*g + log1p(exp(-|v|)), stable up to |v| ~ 700
            loss += weights->data()[i] *
                    (std::max(v, Scalar(0)) - v * g + std::log1p(std::exp(-std::abs(v))));
        }
        return add_node(T::scalar(loss), {logits.id}, [weights, tgt](Graph& g, int self) {
            Node& nd = g.nodes_[self];
            if (!g.wants(nd.parents[0])) return;
            const Scalar up = g.pass_[self].data()[0];
            const T& x = g.nodes_[nd.parents[0]].value;
            T& gx = g.pgrad(nd.parents[0]);
            for (std::int64_t i = 0; i < x.numel(); ++i) {
                const Scalar v = x.data()[i];
                const Scalar p = v >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-v))
                                        : std::exp(v) / (Scalar(1) + std::exp(v));
                gx.data()[i] += up * weights->data()[i] * (p - tgt->data()[i]);
            }
        });
    }

    Var sum(Var input) {
        const T& x = value(input);
        return add_node(T::scalar(x.array().sum()), {input.id}, [](Graph& g, int self) {
            Node& nd = g.nodes_[self];
            if (g.wants(nd.parents[0]))
                g.pgrad(nd.parents[0]).array() += g.pass_[self].data()[0];
        });
    }

    // ---- backward ---------------------------------------------------------

    void backward(Var root) {
        const Node& r = node(root);
        if (r.value.numel() != 1)
            throw GraphError("backward requires a scalar root, got shape " + r.value.shape().str());
        pass_.assign(nodes_.size(), T());
        pgrad(root.id).data()[0] = Scalar(1);
        for (int id = root.id; id >= 0; --id) {
            Node& nd = nodes_[id];
            if (nd.backward && nd.needs_grad && pass_[id].numel() > 0) nd.backward(*this, id);
        }
        for (std::size_t id = 0; id < nodes_.size(); ++id) {
            Node& nd = nodes_[id];
            if (nd.is_leaf && nd.requires_grad && pass_[id].numel() > 0) {
                if (nd.grad.numel() == 0) nd.grad = T(nd.value.shape());
                nd.grad.array() += pass_[id].array();
            }
        }
        pass_.clear();
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        T value;
        T grad;
        std::vector<int> parents;
        std::function<void(Graph&, int)> backward;
        bool is_leaf = false;
        bool requires_grad = false;
        bool needs_grad = false;
    };

    Node& node(Var v) {
        if (!v.valid() || v.id >= int(nodes_.size())) throw GraphError("invalid Var");
        return nodes_[v.id];
    }
    const Node& node(Var v) const { return const_cast<Graph*>(this)->node(v); }

    Var add_node(T value, std::vector<int> parents, std::function<void(Graph&, int)> bw) {
        Node nd;
        nd.value = std::move(value);
        nd.parents = std::move(parents);
        for (int p : nd.parents)
            if (nodes_[p].needs_grad) nd.needs_grad = true;
        if (nd.needs_grad) nd.backward = std::move(bw);
        nodes_.push_back(std::move(nd));
        return Var{int(nodes_.size()) - 1};
    }

    bool wants(int id) const { return nodes_[id].needs_grad; }

    T& pgrad(int id) {
        if (pass_[id].numel() == 0) pass_[id] = T(nodes_[id].value.shape());
        return pass_[id];
    }

    std::deque<Node> nodes_; // deque keeps value() references stable as nodes are appended
    std::vector<T> pass_;
};

using Graphd = Graph<double>;

// Central finite-difference check. `build` wires a scalar loss from freshly
// created leaves; returns the max relative error over all input elements.
template <typename Build>
double grad_check(Build&& build, const std::vector<Tensord>& inputs, double step = 1e-3) {
    auto eval = [&](const std::vector<Tensord>& ins, bool with_grad,
                    std::vector<Tensord>* grads) -> double {
        Graphd g;
        std::vector<Var> leaves;
        leaves.reserve(ins.size());
        for (const auto& t : ins) leaves.push_back(g.leaf(t, with_grad));
        Var loss = build(g, leaves);
        const double v = g.value(loss).data()[0];
        if (with_grad) {
            g.backward(loss);
            grads->clear();
            for (Var l : leaves) grads->push_back(g.grad(l));
        }
        return v;
    };

    std::vector<Tensord> analytic;
    eval(inputs, true, &analytic);

    double max_err = 0;
    std::vector<Tensord> work = inputs;
    for (std::size_t t = 0; t < work.size(); ++t) {
        for (std::int64_t i = 0; i < work[t].numel(); ++i) {
            const double orig = work[t].data()[i];
            work[t].data()[i] = orig + step;
            const double fp = eval(work, false, nullptr);
            work[t].data()[i] = orig - step;
            const double fm = eval(work, false, nullptr);
            work[t].data()[i] = orig;
            const double numeric = (fp - fm) / (2 * step);
            const double a = analytic[t].data()[i];
            const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

} // namespace ras

#endif
