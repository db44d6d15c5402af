#include "doctest.h"

#include <cmath>
#include <random>

#include "relmod/augment.hpp"
#include "testutil.hpp"

using namespace relmod;

namespace {

augment::AugmentParams tiny_augment(uint64_t seed = 3, int hidden = 6, bool bias = false) {
    std::mt19937_64 rng(seed);
    return augment::make_augment_params(rng, hidden, bias);
}

}  // namespace

TEST_CASE("plausible_hidden: zero weights give zero S, outputs stay inside (-1, 1)") {
    auto p = tiny_augment();
    std::mt19937_64 rng(9);
    auto c = testutil::random_leaf(rng, {5, 6}, -2.0, 2.0);

    std::fill(p.w1->val.begin(), p.w1->val.end(), 0.0);
    std::fill(p.b1->val.begin(), p.b1->val.end(), 0.0);
    auto hidden = augment::plausible_hidden(c, p);
    for (double v : hidden.s->val) CHECK(v == 0.0);
    for (double v : hidden.e->val) CHECK(std::abs(v) < 1.0);
}

TEST_CASE("plausible_hidden gradients vs finite differences") {
    auto p = tiny_augment(21);
    std::mt19937_64 rng(22);
    auto c = testutil::random_leaf(rng, {4, 6});
    auto forward = [&]() {
        auto hidden = augment::plausible_hidden(c, p);
        return add(frobenius_norm(hidden.s), frobenius_norm(hidden.e));
    };
    for (auto& t : {p.w1, p.b1, c}) {
        t->zero_grad();
        CHECK(testutil::gradcheck_against_fd(forward, t) < 1e-4);
    }
}

TEST_CASE("augment_context: output shape and the C-selecting projection") {
    auto p = tiny_augment();
    const int h = 6;
    std::mt19937_64 rng(5);
    for (int len : {1, 3, 9}) {
        auto c = testutil::random_leaf(rng, {len, h});
        auto hidden = augment::plausible_hidden(c, p);
        auto x = augment::augment_context(c, hidden.s, hidden.e, p);
        CHECK(x->rows() == len);
        CHECK(x->cols() == h);
    }

    // W = [I; 0; 0] picks out the C block exactly.
    std::fill(p.w->val.begin(), p.w->val.end(), 0.0);
    for (int i = 0; i < h; ++i) p.w->val[static_cast<size_t>(i) * h + i] = 1.0;
    auto c = testutil::random_leaf(rng, {4, h});
    auto hidden = augment::plausible_hidden(c, p);
    auto x = augment::augment_context(c, hidden.s, hidden.e, p);
    for (size_t i = 0; i < c->val.size(); ++i) CHECK(x->val[i] == doctest::Approx(c->val[i]));
}

TEST_CASE("augment_context is linear in its blocks (superposition)") {
    auto p = tiny_augment(33);
    std::mt19937_64 rng(34);
    const int len = 3, h = 6;
    auto c1 = testutil::random_leaf(rng, {len, h});
    auto c2 = testutil::random_leaf(rng, {len, h});
    auto s = testutil::random_leaf(rng, {len, h});
    auto e = testutil::random_leaf(rng, {len, h});
    const double a = 0.7, b = -1.3;

    auto lhs = augment::augment_context(add(scale(c1, a), scale(c2, b)), s, e, p);
    auto x1 = augment::augment_context(c1, s, e, p);
    auto x2 = augment::augment_context(c2, s, e, p);
    auto base = augment::augment_context(Tensor::zeros({len, h}), s, e, p);
    // X(aC1 + bC2, S, E) = aX(C1, S, E) + bX(C2, S, E) - (a + b - 1) X(0, S, E)
    for (size_t i = 0; i < lhs->val.size(); ++i) {
        const double rhs = a * x1->val[i] + b * x2->val[i] - (a + b - 1.0) * base->val[i];
        CHECK(std::abs(lhs->val[i] - rhs) < 1e-9);
    }
}

TEST_CASE("augment_context gradients vs finite differences") {
    auto p = tiny_augment(41, 6, true);
    std::mt19937_64 rng(42);
    auto c = testutil::random_leaf(rng, {3, 6});
    auto forward = [&]() {
        auto hidden = augment::plausible_hidden(c, p);
        return frobenius_norm(augment::augment_context(c, hidden.s, hidden.e, p));
    };
    for (auto& t : {p.w, p.w_bias, p.w2, c}) {
        t->zero_grad();
        CHECK(testutil::gradcheck_against_fd(forward, t) < 1e-4);
    }
}

TEST_CASE("augment_context rejects mismatched shapes") {
    auto p = tiny_augment();
    auto c = Tensor::zeros({3, 6});
    auto s = Tensor::zeros({4, 6});
    CHECK_THROWS_AS(augment::augment_context(c, s, c, p), std::invalid_argument);
}

TEST_CASE("plausible_span_loss: uniform logits give 2 ln L, dominated target vanishes") {
    auto p = tiny_augment();
    const int len = 5, h = 6;
    // Zero projections make every position logit equal.
    std::fill(p.s_proj->val.begin(), p.s_proj->val.end(), 0.0);
    std::fill(p.e_proj->val.begin(), p.e_proj->val.end(), 0.0);
    std::mt19937_64 rng(50);
    auto s = testutil::random_leaf(rng, {len, h});
    auto e = testutil::random_leaf(rng, {len, h});
    auto loss = augment::plausible_span_loss(s, e, Mask{}, Span{1, 3}, p);
    CHECK(loss->item() == doctest::Approx(2.0 * std::log(double(len))).epsilon(1e-12));

    // A +20 margin on the target positions saturates the softmax.
    auto s2 = Tensor::leaf({3, 1}, {20.0, 0.0, 0.0});
    auto e2 = Tensor::leaf({3, 1}, {0.0, 0.0, 20.0});
    augment::AugmentParams tiny;
    tiny.hidden_dim = 1;
    tiny.s_proj = Tensor::leaf({1, 1}, {1.0});
    tiny.e_proj = Tensor::leaf({1, 1}, {1.0});
    auto sat = augment::plausible_span_loss(s2, e2, Mask{}, Span{0, 2}, tiny);
    CHECK(sat->item() < 1e-7);
    CHECK(sat->item() > 0.0);
}

TEST_CASE("plausible_span_loss: span-free inputs contribute nothing") {
    auto p = tiny_augment();
    std::mt19937_64 rng(51);
    auto s = testutil::random_leaf(rng, {4, 6});
    auto e = testutil::random_leaf(rng, {4, 6});
    CHECK(augment::plausible_span_loss(s, e, Mask{}, std::nullopt, p) == nullptr);
    auto with_span = augment::plausible_span_loss(s, e, Mask{}, Span{0, 1}, p);
    CHECK(with_span->item() > 0.0);
}

TEST_CASE("plausible_span_loss rejects spans outside the mask or length") {
    auto p = tiny_augment();
    std::mt19937_64 rng(52);
    auto s = testutil::random_leaf(rng, {4, 6});
    auto e = testutil::random_leaf(rng, {4, 6});
    CHECK_THROWS_AS(augment::plausible_span_loss(s, e, Mask{}, Span{2, 5}, p),
                    std::invalid_argument);
    Mask m = Mask::broadcast_row({1, 1, 0, 1}, 1);
    CHECK_THROWS_AS(augment::plausible_span_loss(s, e, m, Span{2, 3}, p), std::invalid_argument);
}
