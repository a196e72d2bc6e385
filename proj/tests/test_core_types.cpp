#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "oasis/core/types.hpp"

using namespace oasis;

namespace {

IdMask make_mask(int h, int w, std::vector<int32_t> labels, std::vector<int> ids) {
    IdMask m;
    m.h = h;
    m.w = w;
    m.labels = std::move(labels);
    m.object_ids = std::move(ids);
    m.validate();
    return m;
}

}  // namespace

TEST_CASE("id_mask_to_onehot on the 2x2 checker") {
    IdMask m = make_mask(2, 2, {0, 1, 1, 0}, {1});
    Tensor oh = id_mask_to_onehot(m, m.object_ids);
    REQUIRE(oh.shape() == std::vector<int>({2, 2, 2}));
    const float* p = oh.data();
    CHECK(p[0] == 1);  // background channel
    CHECK(p[1] == 0);
    CHECK(p[2] == 0);
    CHECK(p[3] == 1);
    CHECK(p[4] == 0);  // object channel
    CHECK(p[5] == 1);
    CHECK(p[6] == 1);
    CHECK(p[7] == 0);
}

TEST_CASE("id_mask_to_onehot on an all-background mask") {
    IdMask m = make_mask(2, 3, {0, 0, 0, 0, 0, 0}, {1});
    Tensor oh = id_mask_to_onehot(m, m.object_ids);
    const float* p = oh.data();
    for (int i = 0; i < 6; ++i) CHECK(p[i] == 1);
    for (int i = 6; i < 12; ++i) CHECK(p[i] == 0);
}

TEST_CASE("id_mask_to_onehot matches a per-pixel loop oracle on 3x3 two-object masks") {
    Rng rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<int32_t> labels(9);
        for (auto& l : labels) l = (int32_t)rng.uniform_int(0, 2);
        IdMask m = make_mask(3, 3, labels, {1, 2});
        Tensor oh = id_mask_to_onehot(m, m.object_ids);
        for (int i = 0; i < 9; ++i)
            for (int k = 0; k < 3; ++k) {
                const float expect =
                    (k == 0 ? labels[(size_t)i] == 0 : labels[(size_t)i] == k) ? 1.0f : 0.0f;
                CHECK(oh.data()[k * 9 + i] == expect);
            }
        // channels partition pixels
        for (int i = 0; i < 9; ++i)
            CHECK(oh.data()[i] + oh.data()[9 + i] + oh.data()[18 + i] == 1.0f);
    }
}

TEST_CASE("id_mask_to_onehot rejects unknown labels by id") {
    IdMask m;
    m.h = 1;
    m.w = 2;
    m.labels = {0, 7};
    m.object_ids = {7};
    CHECK_THROWS_WITH_AS(id_mask_to_onehot(m, {1}), doctest::Contains("7"), InputError);
}

TEST_CASE("onehot_to_id_mask tie-break and argmax") {
    ProbMask pm;
    pm.object_ids = {3, 9};
    pm.probs = Tensor::from_vector(
        {3, 1, 2},
        {1.0f / 3, 0.05f, 1.0f / 3, 0.05f, 1.0f / 3, 0.90f});
    IdMask m = onehot_to_id_mask(pm);
    CHECK(m.labels[0] == 0);  // uniform pixel -> background wins the tie
    CHECK(m.labels[1] == 9);  // channel 2 dominates -> object_ids[1]
}

TEST_CASE("onehot_to_id_mask matches a per-pixel argmax oracle on random 4x4 K=3") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor probs = Tensor::zeros({3, 4, 4});
        float* p = probs.data();
        for (int i = 0; i < 16; ++i) {
            double raw[3], sum = 0.0;
            for (auto& r : raw) {
                r = rng.uniform(0.01, 1.0);
                sum += r;
            }
            for (int k = 0; k < 3; ++k) p[k * 16 + i] = (float)(raw[(size_t)k] / sum);
        }
        // renormalize exactly in float
        for (int i = 0; i < 16; ++i) {
            float s = p[i] + p[16 + i] + p[32 + i];
            p[i] /= s;
            p[16 + i] /= s;
            p[32 + i] /= s;
        }
        ProbMask pm;
        pm.object_ids = {2, 5};
        pm.probs = probs;
        IdMask m = onehot_to_id_mask(pm);
        for (int i = 0; i < 16; ++i) {
            int best = 0;
            float bv = p[i];
            for (int k = 1; k < 3; ++k)
                if (p[k * 16 + i] > bv) {
                    bv = p[k * 16 + i];
                    best = k;
                }
            const int32_t expect = best == 0 ? 0 : pm.object_ids[(size_t)best - 1];
            CHECK(m.labels[(size_t)i] == expect);
        }
    }
}

TEST_CASE("round trip: onehot_to_id_mask(id_mask_to_onehot(m)) == m") {
    Rng rng(29);
    for (int trial = 0; trial < 30; ++trial) {
        const int h = 4 + rng.uniform_int(0, 4), w = 4 + rng.uniform_int(0, 4);
        std::vector<int32_t> labels((size_t)h * w);
        for (auto& l : labels) l = (int32_t)rng.uniform_int(0, 3);
        std::vector<int> ids = {1, 2, 3};
        IdMask m = make_mask(h, w, labels, ids);
        ProbMask pm;
        pm.probs = id_mask_to_onehot(m, ids);
        pm.object_ids = ids;
        IdMask back = onehot_to_id_mask(pm);
        CHECK(back.labels == m.labels);
        CHECK(back.h == m.h);
        CHECK(back.w == m.w);
    }
}

TEST_CASE("FrameTensor invariants") {
    FrameTensor f;
    f.pixels = Tensor::zeros({3, 32, 32});
    f.validate();
    f.pixels = Tensor::zeros({3, 8, 32});
    CHECK_THROWS_AS(f.validate(), InputError);
    f.pixels = Tensor::zeros({3, 24, 32});  // not divisible by 16
    CHECK_THROWS_AS(f.validate(), InputError);
    f.pixels = Tensor::zeros({3, 32, 32});
    f.pixels.data()[5] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(f.validate(), InputError);
}

TEST_CASE("ProbMask validation catches bad sums") {
    ProbMask pm;
    pm.object_ids = {1};
    pm.probs = Tensor::from_vector({2, 1, 1}, {0.7f, 0.7f});
    CHECK_THROWS_AS(pm.validate(), InputError);
    pm.probs = Tensor::from_vector({2, 1, 1}, {0.25f, 0.75f});
    pm.validate();
}

TEST_CASE("FeaturePyramid shape law") {
    FeaturePyramid p;
    p.levels = {Tensor::zeros({8, 16, 8}), Tensor::zeros({16, 8, 4}),
                Tensor::zeros({32, 4, 2})};
    p.validate(64, 32);
    p.levels[1] = Tensor::zeros({16, 8, 8});
    CHECK_THROWS_AS(p.validate(64, 32), InputError);
    p.levels[1] = Tensor::zeros({8, 8, 4});  // channels must increase
    CHECK_THROWS_AS(p.validate(64, 32), InputError);
}

TEST_CASE("MemoryState invariants") {
    MemoryState s;
    s.capacity = 1;
    s.global_features = {Tensor::zeros({4, 2, 2}), Tensor::zeros({4, 2, 2})};
    s.stored_frame_indices = {0, 5};
    CHECK_THROWS_AS(s.validate(), InputError);
    s.capacity = 2;
    s.object_features = Tensor::zeros({1, 8, 30, 30});
    s.validate();
    s.object_features = Tensor::zeros({1, 8, 16, 16});
    CHECK_THROWS_AS(s.validate(), InputError);
}
