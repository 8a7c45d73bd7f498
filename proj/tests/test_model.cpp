#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctt/common.hpp"
#include "ctt/model.hpp"
#include "ctt/rng.hpp"

using namespace ctt;

namespace {

BackboneConfig toy_config() {
    BackboneConfig cfg;
    cfg.feature_dim = 8;
    cfg.stride = 4;
    cfg.widths = {3, 4, 5, 6};
    cfg.num_classes = 3;
    cfg.init_seed = 11;
    return cfg;
}

Tensor random_images(int n, int h, int w, std::uint64_t seed) {
    Tensor t{n, 3, h, w};
    Rng rng(seed);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.next_double();
    return t;
}

}  // namespace

TEST_CASE("init is deterministic and seed-sensitive") {
    BackboneConfig cfg;
    cfg.init_seed = 1;
    const auto a = init_model(cfg);
    const auto b = init_model(cfg);
    REQUIRE(a.tensors.size() == b.tensors.size());
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        CHECK(a.tensors[i].name == b.tensors[i].name);
        REQUIRE(a.tensors[i].value.same_shape(b.tensors[i].value));
        for (std::size_t j = 0; j < a.tensors[i].value.numel(); ++j) {
            CHECK(a.tensors[i].value[j] == b.tensors[i].value[j]);
        }
    }

    cfg.init_seed = 2;
    const auto c = init_model(cfg);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        for (std::size_t j = 0; j < a.tensors[i].value.numel(); ++j) {
            any_diff |= (a.tensors[i].value[j] != c.tensors[i].value[j]);
        }
    }
    CHECK(any_diff);
}

TEST_CASE("invalid configs are rejected") {
    BackboneConfig cfg;
    cfg.num_classes = 1;
    CHECK_THROWS_WITH_AS(init_model(cfg), doctest::Contains("num_classes"), ConfigError);

    cfg = BackboneConfig{};
    cfg.stride = 3;
    CHECK_THROWS_WITH_AS(init_model(cfg), doctest::Contains("stride"), ConfigError);

    cfg = BackboneConfig{};
    cfg.feature_dim = 4;
    CHECK_THROWS_WITH_AS(init_model(cfg), doctest::Contains("feature_dim"), ConfigError);

    cfg = BackboneConfig{};
    cfg.widths = {8, 16};  // stride 4 needs 4 entries
    CHECK_THROWS_WITH_AS(init_model(cfg), doctest::Contains("widths"), ConfigError);
}

TEST_CASE("forward shapes and softmax normalization") {
    BackboneConfig cfg;  // defaults: d=64, s=4, |C|=4
    cfg.init_seed = 3;
    Network net(cfg);
    const auto params = net.init_params();
    const auto images = random_images(2, 64, 64, 5);
    const auto out = net.forward(params, images);

    CHECK(out.features.dims() == std::vector<int>{2, 64, 16, 16});
    CHECK(out.logits.dims() == std::vector<int>{2, 4, 16, 16});
    CHECK(out.probs.dims() == std::vector<int>{2, 4, 16, 16});
    CHECK(out.confidence.dims() == std::vector<int>{2, 16, 16});

    for (int n = 0; n < 2; ++n) {
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                double sum = 0;
                for (int c = 0; c < 4; ++c) sum += out.probs.at4(n, c, y, x);
                CHECK(std::abs(sum - 1.0) < 1e-5);
                const double conf = out.confidence.at3(n, y, x);
                CHECK(conf >= 0.25);
                CHECK(conf <= 1.0);
                // hard_labels indexes the maximal prob entry.
                const int hl = out.hard_labels.at(n, y, x);
                for (int c = 0; c < 4; ++c) {
                    CHECK(out.probs.at4(n, c, y, x) <= out.probs.at4(n, hl, y, x) + 1e-15);
                }
            }
        }
    }
}

TEST_CASE("forward is a pure function") {
    Network net(toy_config());
    const auto params = net.init_params();
    const auto images = random_images(1, 16, 16, 9);
    const auto a = net.forward(params, images);
    const auto b = net.forward(params, images);
    for (std::size_t i = 0; i < a.logits.numel(); ++i) CHECK(a.logits[i] == b.logits[i]);
    for (std::size_t i = 0; i < a.features.numel(); ++i) CHECK(a.features[i] == b.features[i]);
}

TEST_CASE("equal logits give uniform confidence and lowest-index argmax") {
    Network net(toy_config());
    auto params = net.init_params();
    // Zero parameters: every logit is the (zero) classifier bias.
    for (auto& t : params.tensors) t.value.zero();
    const auto images = random_images(1, 16, 16, 1);
    const auto out = net.forward(params, images);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            CHECK(out.confidence.at3(0, y, x) == doctest::Approx(1.0 / 3).epsilon(1e-12));
            CHECK(out.hard_labels.at(0, y, x) == 0);
        }
    }
}

TEST_CASE("dims not divisible by stride are rejected") {
    Network net(toy_config());
    const auto params = net.init_params();
    CHECK_THROWS_AS(net.forward(params, random_images(1, 18, 16, 1)), ShapeError);
    CHECK_THROWS_AS(net.forward(params, random_images(1, 16, 30, 1)), ShapeError);
}

TEST_CASE("ema_update identity cases and scalar rule") {
    BackboneConfig cfg = toy_config();
    StudentTeacherPair pair;
    pair.student = init_model(cfg);
    cfg.init_seed = 99;
    pair.teacher = init_model(cfg);

    SUBCASE("tau = 1 leaves teacher unchanged") {
        const auto before = pair.teacher;
        pair.ema_decay = 1.0;
        ema_update(pair);
        for (std::size_t i = 0; i < before.tensors.size(); ++i) {
            for (std::size_t j = 0; j < before.tensors[i].value.numel(); ++j) {
                CHECK(pair.teacher.tensors[i].value[j] == before.tensors[i].value[j]);
            }
        }
    }
    SUBCASE("tau = 0 copies the student") {
        pair.ema_decay = 0.0;
        ema_update(pair);
        for (std::size_t i = 0; i < pair.student.tensors.size(); ++i) {
            for (std::size_t j = 0; j < pair.student.tensors[i].value.numel(); ++j) {
                CHECK(pair.teacher.tensors[i].value[j] == pair.student.tensors[i].value[j]);
            }
        }
    }
    SUBCASE("teacher 0, student 1, tau 0.99 gives 0.01") {
        for (auto& t : pair.teacher.tensors) t.value.zero();
        for (auto& t : pair.student.tensors) t.value.fill(1.0);
        pair.ema_decay = 0.99;
        ema_update(pair);
        for (const auto& t : pair.teacher.tensors) {
            for (std::size_t j = 0; j < t.value.numel(); ++j) {
                CHECK(t.value[j] == doctest::Approx(0.01).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("ema_update is linear in (student, teacher)") {
    const BackboneConfig cfg = toy_config();
    Rng rng(7);
    auto randomize = [&](ModelParams& p) {
        for (auto& t : p.tensors) {
            for (std::size_t j = 0; j < t.value.numel(); ++j) t.value[j] = rng.next_normal();
        }
    };
    StudentTeacherPair p1, p2, mix;
    p1.student = init_model(cfg);
    p1.teacher = init_model(cfg);
    p2.student = init_model(cfg);
    p2.teacher = init_model(cfg);
    randomize(p1.student);
    randomize(p1.teacher);
    randomize(p2.student);
    randomize(p2.teacher);
    const double a = 0.3, b = 0.7;
    mix.student = init_model(cfg);
    mix.teacher = init_model(cfg);
    for (std::size_t i = 0; i < mix.student.tensors.size(); ++i) {
        for (std::size_t j = 0; j < mix.student.tensors[i].value.numel(); ++j) {
            mix.student.tensors[i].value[j] =
                a * p1.student.tensors[i].value[j] + b * p2.student.tensors[i].value[j];
            mix.teacher.tensors[i].value[j] =
                a * p1.teacher.tensors[i].value[j] + b * p2.teacher.tensors[i].value[j];
        }
    }
    p1.ema_decay = p2.ema_decay = mix.ema_decay = 0.99;
    ema_update(p1);
    ema_update(p2);
    ema_update(mix);
    for (std::size_t i = 0; i < mix.teacher.tensors.size(); ++i) {
        for (std::size_t j = 0; j < mix.teacher.tensors[i].value.numel(); ++j) {
            const double expect =
                a * p1.teacher.tensors[i].value[j] + b * p2.teacher.tensors[i].value[j];
            CHECK(mix.teacher.tensors[i].value[j] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("ema_update rejects mismatched pairs") {
    StudentTeacherPair pair;
    pair.student = init_model(toy_config());
    BackboneConfig other = toy_config();
    other.feature_dim = 16;
    pair.teacher = init_model(other);
    CHECK_THROWS_AS(ema_update(pair), StateError);
}

// Finite-difference oracle over every parameter of a ~1.2k-parameter config.
TEST_CASE("backward matches central finite differences") {
    const BackboneConfig cfg = toy_config();
    Network net(cfg);
    auto params = net.init_params();
    CHECK(params.scalar_count() > 1000);
    CHECK(params.scalar_count() < 2000);
    const auto images = random_images(1, 8, 8, 21);

    // Loss: fixed random projection of logits and features, exercising both
    // upstream gradient paths at once.
    Rng proj_rng(4242);
    ForwardCache cache;
    const auto out0 = net.forward(params, images, cache);
    Tensor a{out0.logits.dims()}, b{out0.features.dims()};
    for (std::size_t i = 0; i < a.numel(); ++i) a[i] = proj_rng.next_double(-1.0, 1.0);
    for (std::size_t i = 0; i < b.numel(); ++i) b[i] = proj_rng.next_double(-1.0, 1.0);

    auto loss_at = [&](const ModelParams& p) {
        const auto o = net.forward(p, images);
        double s = 0;
        for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * o.logits[i];
        for (std::size_t i = 0; i < b.numel(); ++i) s += b[i] * o.features[i];
        return s;
    };

    ModelParams grads = zeros_like(params);
    net.backward(params, cache, a, b, grads);

    const double h = 1e-5;
    int checked = 0, worst_reported = 0;
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        for (std::size_t j = 0; j < params.tensors[t].value.numel(); ++j) {
            const double orig = params.tensors[t].value[j];
            params.tensors[t].value[j] = orig + h;
            const double lp = loss_at(params);
            params.tensors[t].value[j] = orig - h;
            const double lm = loss_at(params);
            params.tensors[t].value[j] = orig;
            const double fd = (lp - lm) / (2 * h);
            const double an = grads.tensors[t].value[j];
            const double rel = std::abs(an - fd) / std::max(1e-4, std::abs(an) + std::abs(fd));
            if (rel >= 1e-3 && worst_reported < 5) {
                ++worst_reported;
                CAPTURE(params.tensors[t].name);
                CAPTURE(j);
                CAPTURE(an);
                CAPTURE(fd);
                CHECK(rel < 1e-3);
            } else {
                REQUIRE(rel < 1e-3);
            }
            ++checked;
        }
    }
    CHECK(checked == static_cast<int>(params.scalar_count()));
}

TEST_CASE("backward with only dlogits matches mean-logit finite differences") {
    const BackboneConfig cfg = toy_config();
    Network net(cfg);
    auto params = net.init_params();
    const auto images = random_images(1, 8, 8, 33);

    ForwardCache cache;
    const auto out0 = net.forward(params, images, cache);
    Tensor dlogits{out0.logits.dims()};
    const double inv = 1.0 / static_cast<double>(dlogits.numel());
    dlogits.fill(inv);

    ModelParams grads = zeros_like(params);
    net.backward(params, cache, dlogits, Tensor{}, grads);

    auto mean_logit = [&](const ModelParams& p) {
        const auto o = net.forward(p, images);
        double s = 0;
        for (std::size_t i = 0; i < o.logits.numel(); ++i) s += o.logits[i];
        return s * inv;
    };

    // Spot-check a deterministic stratified subset; the full sweep runs above.
    const double h = 1e-5;
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        const std::size_t n = params.tensors[t].value.numel();
        for (std::size_t j = 0; j < n; j += std::max<std::size_t>(1, n / 7)) {
            const double orig = params.tensors[t].value[j];
            params.tensors[t].value[j] = orig + h;
            const double lp = mean_logit(params);
            params.tensors[t].value[j] = orig - h;
            const double lm = mean_logit(params);
            params.tensors[t].value[j] = orig;
            const double fd = (lp - lm) / (2 * h);
            const double an = grads.tensors[t].value[j];
            CHECK(std::abs(an - fd) / std::max(1e-4, std::abs(an) + std::abs(fd)) < 1e-3);
        }
    }
}

TEST_CASE("bilinear upsample against a hand-computed grid") {
    Tensor probs{1, 1, 2, 2};
    probs.at4(0, 0, 0, 0) = 0.0;
    probs.at4(0, 0, 0, 1) = 1.0;
    probs.at4(0, 0, 1, 0) = 0.0;
    probs.at4(0, 0, 1, 1) = 1.0;
    const Tensor up = upsample_probs_bilinear(probs, 4, 4);
    REQUIRE(up.dims() == std::vector<int>{1, 1, 4, 4});
    // Half-pixel alignment: column weights 0, 0.25, 0.75, 1; rows constant.
    const double expect[4] = {0.0, 0.25, 0.75, 1.0};
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            CHECK(up.at4(0, 0, y, x) == doctest::Approx(expect[x]).epsilon(1e-12));
        }
    }
}

TEST_CASE("bilinear upsample preserves per-pixel probability sums") {
    Network net(toy_config());
    const auto params = net.init_params();
    const auto images = random_images(2, 16, 16, 77);
    const auto out = net.forward(params, images);
    const Tensor up = upsample_probs_bilinear(out.probs, 16, 16);
    for (int n = 0; n < 2; ++n) {
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                double s = 0;
                for (int c = 0; c < 3; ++c) s += up.at4(n, c, y, x);
                CHECK(std::abs(s - 1.0) < 1e-9);
            }
        }
    }
}

TEST_CASE("odd feature grids upsample and fuse without shape faults") {
    // 24x24 at stride 4 gives a 6x6 feature grid with a 3x3 deepest stage.
    BackboneConfig cfg = toy_config();
    Network net(cfg);
    const auto params = net.init_params();
    const auto out = net.forward(params, random_images(1, 24, 24, 2));
    CHECK(out.logits.dims() == std::vector<int>{1, 3, 6, 6});
}
