#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "relmod/objects.hpp"
#include "testutil.hpp"

using namespace relmod;

namespace {

objects::ExtractorParams tiny_extractor(uint64_t seed, int hidden, int heads) {
    std::mt19937_64 rng(seed);
    return objects::make_extractor_params(rng, hidden, heads, objects::Activation::kTanh, "ext");
}

}  // namespace

TEST_CASE("attention_matrix: single token gives an all-ones column") {
    auto p = tiny_extractor(1, 5, 4);
    std::mt19937_64 rng(2);
    auto x = testutil::random_leaf(rng, {1, 5});
    auto a = objects::attention_matrix(x, p);
    CHECK(a->rows() == 4);
    CHECK(a->cols() == 1);
    for (double v : a->val) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("attention_matrix rows sum to one; fully masked input rejected") {
    auto p = tiny_extractor(3, 6, 3);
    std::mt19937_64 rng(4);
    auto x = testutil::random_leaf(rng, {7, 6}, -2.0, 2.0);
    auto a = objects::attention_matrix(x, p);
    for (int i = 0; i < a->rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a->cols(); ++j) s += a->at(i, j);
        CHECK(std::abs(s - 1.0) < 1e-6);
    }
    CHECK_THROWS_AS(objects::attention_matrix(x, std::vector<uint8_t>(7, 0), p),
                    std::invalid_argument);
}

TEST_CASE("attention_matrix matches an independent reimplementation of the pooling") {
    // 3 tokens, 2 heads, hidden 4: direct A = softmax(W4 tanh(W3 X^T)).
    auto p = tiny_extractor(7, 4, 2);
    std::mt19937_64 rng(8);
    auto x = testutil::random_leaf(rng, {3, 4}, -1.5, 1.5);
    auto a = objects::attention_matrix(x, p);

    const int h = 4, len = 3, heads = 2;
    std::vector<std::vector<double>> hidden(h, std::vector<double>(len, 0.0));
    for (int i = 0; i < h; ++i) {
        for (int l = 0; l < len; ++l) {
            double acc = 0.0;
            for (int k = 0; k < h; ++k) acc += p.w3->at(i, k) * x->at(l, k);
            hidden[i][l] = std::tanh(acc);
        }
    }
    for (int head = 0; head < heads; ++head) {
        std::vector<double> logits(len, 0.0);
        for (int l = 0; l < len; ++l) {
            for (int k = 0; k < h; ++k) logits[l] += p.w4->at(head, k) * hidden[k][l];
        }
        double mx = *std::max_element(logits.begin(), logits.end());
        double denom = 0.0;
        for (double v : logits) denom += std::exp(v - mx);
        for (int l = 0; l < len; ++l) {
            CHECK(std::abs(a->at(head, l) - std::exp(logits[l] - mx) / denom) < 1e-12);
        }
    }
}

TEST_CASE("masking: pad tokens change neither visible attention nor objects") {
    auto p = tiny_extractor(9, 5, 3);
    std::mt19937_64 rng(10);
    auto x = testutil::random_leaf(rng, {4, 5});
    auto a = objects::attention_matrix(x, p);
    auto o = objects::extract(a, x);

    // Same content plus two junk pad rows, masked out.
    std::vector<double> padded = x->val;
    for (int i = 0; i < 10; ++i) padded.push_back(testutil::urand(rng, -50.0, 50.0));
    auto xp = Tensor::leaf({6, 5}, padded);
    auto ap = objects::attention_matrix(xp, {1, 1, 1, 1, 0, 0}, p);
    auto op = objects::extract(ap, xp);

    for (int head = 0; head < 3; ++head) {
        for (int l = 0; l < 4; ++l) CHECK(ap->at(head, l) == a->at(head, l));
        CHECK(ap->at(head, 4) == 0.0);
        CHECK(ap->at(head, 5) == 0.0);
    }
    for (size_t i = 0; i < o->val.size(); ++i) CHECK(op->val[i] == o->val[i]);
}

TEST_CASE("extract: one-hot rows select tokens, uniform rows average them") {
    std::mt19937_64 rng(11);
    auto x = testutil::random_leaf(rng, {4, 3});
    auto onehot = Tensor::constant({2, 4}, {0, 0, 1, 0, 1, 0, 0, 0});
    auto o = objects::extract(onehot, x);
    for (int k = 0; k < 3; ++k) {
        CHECK(o->at(0, k) == x->at(2, k));
        CHECK(o->at(1, k) == x->at(0, k));
    }

    auto uniform = Tensor::full({2, 4}, 0.25);
    auto om = objects::extract(uniform, x);
    for (int k = 0; k < 3; ++k) {
        double mean = 0.0;
        for (int l = 0; l < 4; ++l) mean += x->at(l, k) / 4.0;
        CHECK(om->at(0, k) == doctest::Approx(mean));
        CHECK(om->at(1, k) == doctest::Approx(mean));
    }

    CHECK_THROWS_AS(objects::extract(Tensor::zeros({2, 5}), x), std::invalid_argument);
}

TEST_CASE("extract gradients through A and X vs finite differences") {
    std::mt19937_64 rng(13);
    auto a = testutil::random_leaf(rng, {3, 4});
    auto x = testutil::random_leaf(rng, {4, 5});
    auto forward = [&]() { return frobenius_norm(objects::extract(a, x)); };
    CHECK(testutil::gradcheck_against_fd(forward, a) < 1e-4);
    a->zero_grad();
    CHECK(testutil::gradcheck_against_fd(forward, x) < 1e-4);
}

TEST_CASE("orthogonality_penalty analytic cases") {
    const double alpha = 0.0005;
    // Distinct one-hot rows: A A^T = I, penalty exactly 0.
    auto ortho = Tensor::constant({2, 4}, {1, 0, 0, 0, 0, 0, 1, 0});
    CHECK(objects::orthogonality_penalty(ortho, alpha)->item() == 0.0);

    // Both heads on the same token: A A^T is all-ones, penalty alpha * sqrt(2).
    auto dup = Tensor::constant({2, 4}, {0, 1, 0, 0, 0, 1, 0, 0});
    CHECK(objects::orthogonality_penalty(dup, alpha)->item() ==
          doctest::Approx(alpha * std::sqrt(2.0)).epsilon(1e-12));

    // Squared variant.
    CHECK(objects::orthogonality_penalty(dup, alpha, true)->item() ==
          doctest::Approx(alpha * 2.0).epsilon(1e-12));
}

TEST_CASE("orthogonality_penalty positive whenever heads coincide, zero only at identity") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + testutil::irand(rng, 4);
        const int len = n + testutil::irand(rng, 4);
        // Row-stochastic random A.
        std::vector<double> rows;
        for (int i = 0; i < n; ++i) {
            std::vector<double> row(static_cast<size_t>(len));
            double s = 0.0;
            for (auto& v : row) {
                v = testutil::urand(rng, 0.01, 1.0);
                s += v;
            }
            for (auto& v : row) rows.push_back(v / s);
        }
        auto a = Tensor::constant({n, len}, rows);
        CHECK(objects::orthogonality_penalty(a, 1.0)->item() > 0.0);

        // Duplicate the first head: strictly positive penalty.
        std::vector<double> dup_rows = rows;
        for (int j = 0; j < len; ++j) dup_rows[static_cast<size_t>(len) + j] = rows[static_cast<size_t>(j)];
        auto dup = Tensor::constant({n, len}, dup_rows);
        CHECK(objects::orthogonality_penalty(dup, 1.0)->item() > 0.0);
    }
}

TEST_CASE("orthogonality_penalty gradients on a random row-stochastic matrix") {
    std::mt19937_64 rng(19);
    std::vector<double> rows;
    for (int i = 0; i < 4; ++i) {
        std::vector<double> row(6);
        double s = 0.0;
        for (auto& v : row) {
            v = testutil::urand(rng, 0.05, 1.0);
            s += v;
        }
        for (auto& v : row) rows.push_back(v / s);
    }
    auto a = Tensor::leaf({4, 6}, rows);
    auto forward = [&]() { return objects::orthogonality_penalty(a, 0.5); };
    CHECK(testutil::gradcheck_against_fd(forward, a) < 1e-4);
}

TEST_CASE("head permutation equivariance: permuting W4 rows permutes A and O rows") {
    auto p = tiny_extractor(23, 5, 4);
    std::mt19937_64 rng(24);
    auto x = testutil::random_leaf(rng, {6, 5});
    auto a = objects::attention_matrix(x, p);
    auto o = objects::extract(a, x);

    // Swap heads 0 and 3, 1 and 2.
    const std::vector<int> perm = {3, 2, 1, 0};
    objects::ExtractorParams q = p;
    q.w4 = Tensor::leaf({4, 5}, std::vector<double>(20, 0.0));
    for (int i = 0; i < 4; ++i) {
        for (int k = 0; k < 5; ++k) q.w4->at(i, k) = p.w4->at(perm[i], k);
    }
    auto ap = objects::attention_matrix(x, q);
    auto op = objects::extract(ap, x);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 6; ++j) CHECK(ap->at(i, j) == doctest::Approx(a->at(perm[i], j)));
        for (int k = 0; k < 5; ++k) CHECK(op->at(i, k) == doctest::Approx(o->at(perm[i], k)));
    }
}
