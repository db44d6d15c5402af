#include "relmod/relnet.hpp"

#include <stdexcept>

#include "relmod/init.hpp"

namespace relmod {
namespace relnet {

RelNetParams make_relnet_params(std::mt19937_64& rng, int hidden_dim, Dims dims,
                                bool pooled_summary) {
    if (dims.d_g < 1 || dims.d_r < 1 || dims.d_f < 1 || dims.d_z < 1) {
        throw std::invalid_argument("relnet: all hidden sizes must be >= 1");
    }
    RelNetParams p;
    p.dims = dims;
    p.hidden_dim = hidden_dim;
    p.pooled_summary = pooled_summary;
    p.g_w1 = xavier_leaf(rng, {4 * hidden_dim, dims.d_g}, "relnet.g_w1");
    p.g_b1 = zeros_leaf({1, dims.d_g}, "relnet.g_b1");
    p.g_w2 = xavier_leaf(rng, {dims.d_g, dims.d_r}, "relnet.g_w2");
    p.g_b2 = zeros_leaf({1, dims.d_r}, "relnet.g_b2");
    p.w_g = xavier_leaf(rng, {dims.d_r, 1}, "relnet.w_g");
    p.f_w1 = xavier_leaf(rng, {dims.d_r, dims.d_f}, "relnet.f_w1");
    p.f_b1 = zeros_leaf({1, dims.d_f}, "relnet.f_b1");
    p.f_w2 = xavier_leaf(rng, {dims.d_f, dims.d_z}, "relnet.f_w2");
    p.f_b2 = zeros_leaf({1, dims.d_z}, "relnet.f_b2");
    p.w_f = xavier_leaf(rng, {dims.d_z, 1}, "relnet.w_f");
    const int na_in = dims.d_z + (pooled_summary ? hidden_dim : 0);
    p.na_w = xavier_leaf(rng, {na_in, 1}, "na.w");
    p.na_b = zeros_leaf({1, 1}, "na.b");
    return p;
}

PairScores pair_scores(const TensorPtr& context_objects, const TensorPtr& question_objects,
                       const RelNetParams& p) {
    const int n = context_objects->rows();
    const int h = context_objects->cols();
    if (question_objects->rows() != 2) {
        throw std::invalid_argument("pair_scores: expected exactly 2 question objects, got " +
                                    std::to_string(question_objects->rows()));
    }
    if (question_objects->cols() != h || h != p.hidden_dim) {
        throw std::invalid_argument("pair_scores: object width " + std::to_string(h) +
                                    " does not match the module hidden size " +
                                    std::to_string(p.hidden_dim));
    }
    // One big (n*n) x 4h input: rows ordered (o_i, o_j, q0, q1) for j fastest.
    std::vector<int> left(static_cast<size_t>(n) * n), right(left.size());
    std::vector<int> q0(left.size(), 0), q1(left.size(), 1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            left[static_cast<size_t>(i) * n + j] = i;
            right[static_cast<size_t>(i) * n + j] = j;
        }
    }
    auto pairs = concat_cols({gather_rows(context_objects, left),
                              gather_rows(context_objects, right),
                              gather_rows(question_objects, q0),
                              gather_rows(question_objects, q1)});
    auto hidden = tanh_op(add_row_broadcast(matmul(pairs, p.g_w1), p.g_b1));
    auto flat = tanh_op(add_row_broadcast(matmul(hidden, p.g_w2), p.g_b2));
    return {flat, n};
}

Related relate(const PairScores& scores, const RelNetParams& p) {
    const int n = scores.objects;
    auto proj = matmul(scores.flat, p.w_g);             // n*n x 1
    auto omega = softmax_rows(reshape(proj, {n, n}));   // weights over j per i
    std::vector<TensorPtr> r_rows(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto g_i = slice_rows(scores.flat, i * n, n);   // n x d_r
        auto w_i = slice_rows(omega, i, 1);             // 1 x n
        r_rows[static_cast<size_t>(i)] = matmul(w_i, g_i);
    }
    return {omega, concat_rows(r_rows)};
}

Summary summarize(const TensorPtr& r, const RelNetParams& p) {
    auto hidden = tanh_op(add_row_broadcast(matmul(r, p.f_w1), p.f_b1));
    auto f = tanh_op(add_row_broadcast(matmul(hidden, p.f_w2), p.f_b2));  // n x d_z
    auto gamma = softmax_rows(transpose(matmul(f, p.w_f)));               // 1 x n
    auto z = matmul(gamma, f);                                            // 1 x d_z
    return {f, gamma, z};
}

TensorPtr na_logit(const TensorPtr& z, const TensorPtr& pooled_context, const RelNetParams& p) {
    if (p.pooled_summary != (pooled_context != nullptr)) {
        throw std::invalid_argument(p.pooled_summary
                                        ? "na_logit: pooled summary enabled but no pooled context"
                                        : "na_logit: pooled context given but the flag is off");
    }
    TensorPtr input = p.pooled_summary ? concat_cols({z, pooled_context}) : z;
    return add(matmul(input, p.na_w), p.na_b);
}

RelationOutput run(const TensorPtr& context_objects, const TensorPtr& question_objects,
                   const TensorPtr& pooled_context, const RelNetParams& p) {
    RelationOutput out;
    out.scores = pair_scores(context_objects, question_objects, p);
    out.related = relate(out.scores, p);
    out.summary = summarize(out.related.r, p);
    out.na = na_logit(out.summary.z, pooled_context, p);
    return out;
}

TensorPtr joint_loss(const TensorPtr& start_ce, const TensorPtr& end_ce, const TensorPtr& aux,
                     const TensorPtr& penalty_context, const TensorPtr& penalty_question,
                     double lambda_aux) {
    std::vector<TensorPtr> terms;
    if (start_ce) terms.push_back(start_ce);
    if (end_ce) terms.push_back(end_ce);
    if (aux) terms.push_back(lambda_aux == 1.0 ? aux : scale(aux, lambda_aux));
    if (penalty_context) terms.push_back(penalty_context);
    if (penalty_question) terms.push_back(penalty_question);
    if (terms.empty()) return Tensor::scalar(0.0);
    return add_n(terms);
}

}  // namespace relnet
}  // namespace relmod
