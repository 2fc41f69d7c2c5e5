#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "ras/network.hpp"
#include "ras/rng.hpp"
#include "ras/training.hpp"

using namespace ras;

namespace {

NetworkSpec tiny_spec() {
    NetworkSpec s;
    s.stage_channels = {8, 8, 16, 16, 16};
    s.side_channels = 8;
    s.global_channels = 8;
    return s;
}

Sampled make_sample(int size, Rng& rng) {
    Sampled s;
    s.image = Tensord({1, 3, size, size});
    s.mask = Tensord({1, 1, size, size});
    // a filled disc with noisy contrast, like the synthetic generator's output
    const double cy = rng.uniform(0.3, 0.7) * size, cx = rng.uniform(0.3, 0.7) * size;
    const double r = rng.uniform(0.15, 0.3) * size;
    const double bg = rng.uniform(-0.3, 0.0), fg = bg + rng.uniform(0.3, 0.6);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const bool on = (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
            s.mask.at(0, 0, y, x) = on ? 1 : 0;
            for (int c = 0; c < 3; ++c)
                s.image.at(0, c, y, x) = (on ? fg : bg) + rng.uniform(-0.05, 0.05);
        }
    s.stem = "mem";
    return s;
}

// model with non-zero predict convs so every path carries gradient
Modeld nontrivial_model(std::uint64_t seed) {
    auto m = build_network<double>(tiny_spec(), seed);
    Rng rng(seed ^ 0xabcd);
    for (auto& p : m.params())
        if (p.name.find("predict") != std::string::npos)
            for (std::int64_t i = 0; i < p.value.numel(); ++i)
                p.value.data()[i] = rng.uniform(-0.2, 0.2);
    return m;
}

} // namespace

TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.learning_rate = 0;
    CHECK_THROWS_AS(c.validate(), TrainError);
    c = TrainConfig{};
    c.iter_size = 0;
    CHECK_THROWS_AS(c.validate(), TrainError);
    c = TrainConfig{};
    c.momentum = 1.0;
    CHECK_THROWS_AS(c.validate(), TrainError);
    TrainConfig r = TrainConfig::from_json(TrainConfig{}.to_json());
    CHECK(r.iter_size == 10);
    CHECK(r.momentum == 0.9);
    CHECK(r.weight_decay == 5e-4);
}

TEST_CASE("total_loss") {
    const int S = 64;
    Rng rng(1);

    SUBCASE("confident correct logits give a near-zero loss") {
        Graphd g;
        SidePredictions<double> preds;
        preds.s_global = g.constant(Tensord::constant({1, 1, S / 32, S / 32}, 100));
        for (int i = 1; i <= 5; ++i)
            preds.s[i - 1] =
                g.constant(Tensord::constant({1, 1, S / (1 << (i - 1)), S / (1 << (i - 1))}, 100));
        Tensord mask = Tensord::constant({1, 1, S, S}, 1);
        Var loss = total_loss(g, preds, mask, false);
        CHECK(g.value(loss).data()[0] < 1e-4);
    }

    SUBCASE("all-zero logits give 6 * P * ln2") {
        Graphd g;
        SidePredictions<double> preds;
        preds.s_global = g.constant(Tensord({1, 1, S / 32, S / 32}));
        for (int i = 1; i <= 5; ++i)
            preds.s[i - 1] = g.constant(Tensord({1, 1, S / (1 << (i - 1)), S / (1 << (i - 1))}));
        Tensord mask({1, 1, S, S});
        for (std::int64_t i = 0; i < mask.numel(); ++i) mask.data()[i] = rng.uniform() < 0.4;
        Var loss = total_loss(g, preds, mask, false);
        CHECK(g.value(loss).data()[0] ==
              doctest::Approx(6.0 * S * S * std::log(2.0)).epsilon(1e-12));
    }

    SUBCASE("resolution mismatch rejected") {
        Graphd g;
        SidePredictions<double> preds;
        preds.s_global = g.constant(Tensord({1, 1, 2, 2}));
        for (int i = 1; i <= 5; ++i)
            preds.s[i - 1] = g.constant(Tensord({1, 1, S / (1 << (i - 1)), S / (1 << (i - 1))}));
        Tensord mask({1, 1, 2 * S, 2 * S});
        CHECK_THROWS_AS(total_loss(g, preds, mask, false), TrainError);
    }

    SUBCASE("equals the sum of six per-side terms recomputed independently") {
        auto m = nontrivial_model(4);
        auto s = make_sample(S, rng);
        Graphd g;
        auto b = bind(g, m, false);
        auto preds = forward(g, b, g.constant(s.image));
        const double total = g.value(total_loss(g, preds, s.mask, true)).data()[0];
        double sum = 0;
        for (const auto& [pred, stride] : preds.supervised()) {
            Graphd g2;
            Var full = g2.constant(g.value(pred));
            if (stride > 1) full = g2.upsample_bilinear(full, stride);
            sum += g2.value(g2.bce_from_logits(full, s.mask, true)).data()[0];
        }
        CHECK(total == doctest::Approx(sum).epsilon(1e-12));
    }
}

TEST_CASE("sgd_step") {
    auto m = build_network<double>(tiny_spec(), 9);
    TrainConfig cfg;
    cfg.iter_size = 1;

    SUBCASE("pure weight decay") {
        cfg.learning_rate = 0.1;
        cfg.momentum = 0;
        cfg.weight_decay = 0.01;
        auto st = OptimizerState<double>::init(m, cfg);
        st.lr = cfg.learning_rate;
        Tensord before = m.params()[0].value;
        sgd_step(m, st, cfg);
        const auto& after = m.params()[0].value;
        for (std::int64_t i = 0; i < before.numel(); ++i)
            CHECK(after.data()[i] ==
                  doctest::Approx(before.data()[i] * (1 - 0.1 * 0.01)).epsilon(1e-15));
    }

    SUBCASE("vanilla SGD with momentum and decay off") {
        cfg.learning_rate = 0.5;
        cfg.momentum = 0;
        cfg.weight_decay = 0;
        auto st = OptimizerState<double>::init(m, cfg);
        st.lr = cfg.learning_rate;
        st.grad_accum[0].array().setConstant(2.0);
        Tensord before = m.params()[0].value;
        sgd_step(m, st, cfg);
        for (std::int64_t i = 0; i < before.numel(); ++i)
            CHECK(m.params()[0].value.data()[i] == before.data()[i] - 0.5 * 2.0);
    }

    SUBCASE("iter_size accumulation equals one step on the averaged gradient, bitwise") {
        Rng rng(33);
        auto m1 = build_network<double>(tiny_spec(), 9);
        auto m2 = build_network<double>(tiny_spec(), 9);

        std::vector<Tensord> g1, g2;
        for (const auto& p : m1.params()) {
            Tensord a(p.value.shape()), b(p.value.shape());
            for (std::int64_t i = 0; i < a.numel(); ++i) {
                a.data()[i] = rng.uniform(-1, 1);
                b.data()[i] = rng.uniform(-1, 1);
            }
            g1.push_back(a);
            g2.push_back(b);
        }

        TrainConfig c2 = cfg;
        c2.iter_size = 2;
        auto st2 = OptimizerState<double>::init(m1, c2);
        st2.lr = c2.learning_rate;
        for (std::size_t i = 0; i < g1.size(); ++i)
            st2.grad_accum[i].array() = g1[i].array() + g2[i].array();
        sgd_step(m1, st2, c2);

        TrainConfig c1 = cfg;
        c1.iter_size = 1;
        auto st1 = OptimizerState<double>::init(m2, c1);
        st1.lr = c1.learning_rate;
        for (std::size_t i = 0; i < g1.size(); ++i)
            st1.grad_accum[i].array() = (g1[i].array() + g2[i].array()) / 2.0;
        sgd_step(m2, st1, c1);

        for (std::size_t i = 0; i < m1.num_params(); ++i)
            CHECK(std::memcmp(m1.params()[i].value.data(), m2.params()[i].value.data(),
                              std::size_t(m1.params()[i].value.numel()) * 8) == 0);
    }
}

TEST_CASE("lr_schedule plateau detection") {
    auto m = build_network<double>(tiny_spec(), 9);
    TrainConfig cfg;
    cfg.plateau_window = 5;
    cfg.learning_rate = 1.0;

    SUBCASE("steadily decreasing loss keeps the lr") {
        auto st = OptimizerState<double>::init(m, cfg);
        for (int i = 0; i < 40; ++i) {
            st.loss_window.push_back(100.0 * std::pow(0.9, i));
            lr_schedule(st, cfg);
        }
        CHECK(st.lr == 1.0);
        CHECK(st.decay_events == 0);
    }

    SUBCASE("constant loss across two windows decays once by the configured factor") {
        auto st = OptimizerState<double>::init(m, cfg);
        for (int i = 0; i < 10; ++i) {
            st.loss_window.push_back(5.0);
            lr_schedule(st, cfg);
        }
        CHECK(st.lr == doctest::Approx(0.1).epsilon(1e-15));
        CHECK(st.decay_events == 1);
    }

    SUBCASE("scripted sequence with one plateau decays exactly once") {
        auto st = OptimizerState<double>::init(m, cfg);
        std::vector<double> losses;
        for (int i = 0; i < 10; ++i) losses.push_back(100.0 - 10.0 * i); // steep descent
        for (int i = 0; i < 10; ++i) losses.push_back(10.0);             // flat
        for (double l : losses) {
            st.loss_window.push_back(l);
            lr_schedule(st, cfg);
        }
        CHECK(st.decay_events == 1);
        CHECK(st.lr == doctest::Approx(0.1).epsilon(1e-15));
    }
}

TEST_CASE("train loop") {
    Rng rng(77);
    std::vector<Sampled> data;
    for (int i = 0; i < 6; ++i) data.push_back(make_sample(64, rng));

    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.iter_size = 2;
    cfg.max_iterations = 4;
    cfg.seed = 5;

    SUBCASE("zero iterations leave the model unchanged") {
        auto m = build_network<double>(tiny_spec(), 3);
        auto ref = build_network<double>(tiny_spec(), 3);
        TrainConfig c0 = cfg;
        c0.max_iterations = 0;
        auto log = train(m, data, c0);
        CHECK(log.empty());
        for (std::size_t i = 0; i < m.num_params(); ++i)
            CHECK(std::memcmp(m.params()[i].value.data(), ref.params()[i].value.data(),
                              std::size_t(m.params()[i].value.numel()) * 8) == 0);
    }

    SUBCASE("identical seeds give identical loss logs and weights") {
        auto m1 = build_network<double>(tiny_spec(), 3);
        auto m2 = build_network<double>(tiny_spec(), 3);
        auto l1 = train(m1, data, cfg);
        auto l2 = train(m2, data, cfg);
        REQUIRE(l1.size() == l2.size());
        for (std::size_t i = 0; i < l1.size(); ++i) {
            CHECK(l1[i].loss == l2[i].loss);
            CHECK(l1[i].lr == l2[i].lr);
        }
        for (std::size_t i = 0; i < m1.num_params(); ++i)
            CHECK(std::memcmp(m1.params()[i].value.data(), m2.params()[i].value.data(),
                              std::size_t(m1.params()[i].value.numel()) * 8) == 0);
    }

    SUBCASE("empty dataset rejected") {
        auto m = build_network<double>(tiny_spec(), 3);
        CHECK_THROWS_AS(train(m, std::vector<Sampled>{}, cfg), TrainError);
    }

    SUBCASE("non-finite loss aborts with the iteration index") {
        auto m = build_network<double>(tiny_spec(), 3);
        m.params()[0].value.data()[0] = std::nan("");
        CHECK_THROWS_WITH_AS(train(m, data, cfg), doctest::Contains("iteration 1"), TrainError);
    }
}

TEST_CASE("one small-lr step on a fixed sample strictly decreases its loss") {
    Rng rng(123);
    for (int seed = 0; seed < 10; ++seed) {
        CAPTURE(seed);
        auto m = nontrivial_model(std::uint64_t(seed));
        auto s = make_sample(64, rng);

        auto loss_of = [&](const Modeld& model) {
            Graphd g;
            auto b = bind(g, model, false);
            auto preds = forward(g, b, g.constant(s.image));
            return g.value(total_loss(g, preds, s.mask, true)).data()[0];
        };

        const double before = loss_of(m);
        TrainConfig cfg;
        cfg.learning_rate = 1e-4;
        cfg.momentum = 0;
        cfg.weight_decay = 0;
        cfg.iter_size = 1;
        cfg.max_iterations = 1;
        train(m, {s}, cfg);
        const double after = loss_of(m);
        CHECK(after < before);
    }
}

TEST_CASE("flip augmentation doubles the dataset") {
    Rng rng(9);
    std::vector<Sampled> data;
    for (int i = 0; i < 3; ++i) data.push_back(make_sample(64, rng));
    auto aug = augment_with_flips(data);
    REQUIRE(aug.size() == 6);
    // mirrored copy pairs with its source
    auto back = flip_horizontal(aug[3]);
    CHECK(std::memcmp(back.image.data(), aug[0].image.data(),
                      std::size_t(back.image.numel()) * 8) == 0);
}
