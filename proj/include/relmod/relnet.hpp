#ifndef RELMOD_RELNET_HPP
#define RELMOD_RELNET_HPP

#include <random>
#include <vector>

#include "relmod/tensor.hpp"

namespace relmod {
namespace relnet {

struct Dims {
    int d_g = 0;  // g hidden
    int d_r = 0;  // relation vector size
    int d_f = 0;  // f hidden
    int d_z = 0;  // summary size
};

/// Pairwise scorer g, aggregator f (both two-layer tanh perceptrons), the
/// two softmax projections, and the NA head.
struct RelNetParams {
    TensorPtr g_w1, g_b1;  // 4h -> d_g
    TensorPtr g_w2, g_b2;  // d_g -> d_r
    TensorPtr w_g;         // d_r -> 1
    TensorPtr f_w1, f_b1;  // d_r -> d_f
    TensorPtr f_w2, f_b2;  // d_f -> d_z
    TensorPtr w_f;         // d_z -> 1
    TensorPtr na_w;        // (d_z [+ h]) -> 1
    TensorPtr na_b;
    Dims dims;
    int hidden_dim = 0;
    bool pooled_summary = false;
};

RelNetParams make_relnet_params(std::mt19937_64& rng, int hidden_dim, Dims dims,
                                bool pooled_summary);

struct PairScores {
    TensorPtr flat;  // n*n x d_r; row i*n + j scores the ordered pair (i, j)
    int objects = 0;
};

/// G[i, j] = g(concat(o_i, o_j, q0, q1)) for every ordered pair, diagonal
/// included. Requires exactly two question objects.
PairScores pair_scores(const TensorPtr& context_objects, const TensorPtr& question_objects,
                       const RelNetParams& p);

struct Related {
    TensorPtr omega;  // n x n row-stochastic pair weights
    TensorPtr r;      // n x d_r relation vectors
};

/// Omega_i = softmax(G_i . w_g); r_i = sum_j Omega[i, j] G[i, j, :].
Related relate(const PairScores& scores, const RelNetParams& p);

struct Summary {
    TensorPtr f;      // n x d_z per-object summaries
    TensorPtr gamma;  // 1 x n summary weights
    TensorPtr z;      // 1 x d_z
};

/// Gamma = softmax(f(r) . w_f); z = sum_i gamma_i f(r_i).
Summary summarize(const TensorPtr& r, const RelNetParams& p);

/// Linear projection of z (optionally concatenated with a pooled context
/// vector) to the scalar non-answerability logit.
TensorPtr na_logit(const TensorPtr& z, const TensorPtr& pooled_context, const RelNetParams& p);

/// Everything the relation module computes for one example.
struct RelationOutput {
    PairScores scores;
    Related related;
    Summary summary;
    TensorPtr na;
};

RelationOutput run(const TensorPtr& context_objects, const TensorPtr& question_objects,
                   const TensorPtr& pooled_context, const RelNetParams& p);

/// total = start_ce + end_ce + lambda_aux * aux + penalty_context +
/// penalty_question. Null components are treated as zero.
TensorPtr joint_loss(const TensorPtr& start_ce, const TensorPtr& end_ce, const TensorPtr& aux,
                     const TensorPtr& penalty_context, const TensorPtr& penalty_question,
                     double lambda_aux);

}  // namespace relnet
}  // namespace relmod

#endif  // RELMOD_RELNET_HPP
