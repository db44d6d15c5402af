#include "relmod/reader.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "relmod/init.hpp"

namespace relmod {
namespace reader {

namespace {

GruCellParams make_gru_cell(std::mt19937_64& rng, int input_dim, int hidden_dim,
                            const std::string& prefix) {
    GruCellParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.wz = xavier_leaf(rng, {input_dim, hidden_dim}, prefix + ".wz");
    p.uz = xavier_leaf(rng, {hidden_dim, hidden_dim}, prefix + ".uz");
    p.bz = zeros_leaf({1, hidden_dim}, prefix + ".bz");
    p.wr = xavier_leaf(rng, {input_dim, hidden_dim}, prefix + ".wr");
    p.ur = xavier_leaf(rng, {hidden_dim, hidden_dim}, prefix + ".ur");
    p.br = zeros_leaf({1, hidden_dim}, prefix + ".br");
    p.wh = xavier_leaf(rng, {input_dim, hidden_dim}, prefix + ".wh");
    p.uh = xavier_leaf(rng, {hidden_dim, hidden_dim}, prefix + ".uh");
    p.bh = zeros_leaf({1, hidden_dim}, prefix + ".bh");
    return p;
}

}  // namespace

ReaderParams make_reader_params(std::mt19937_64& rng, int vocab_size, int embed_dim,
                                int hidden_dim) {
    if (hidden_dim % 2 != 0) {
        throw std::invalid_argument("reader: hidden_dim must be even for the two directions");
    }
    ReaderParams p;
    p.vocab_size = vocab_size;
    p.embed_dim = embed_dim;
    p.hidden_dim = hidden_dim;
    const int hd = hidden_dim / 2;
    {
        std::vector<double> v(static_cast<size_t>(vocab_size) * embed_dim);
        for (auto& x : v) x = uniform_pm(rng, 0.1);
        p.embedding = Tensor::leaf({vocab_size, embed_dim}, std::move(v));
        p.embedding->name = "reader.embedding";
    }
    p.layer1.fw = make_gru_cell(rng, embed_dim, hd, "reader.layer1.fw");
    p.layer1.bw = make_gru_cell(rng, embed_dim, hd, "reader.layer1.bw");
    p.layer2.fw = make_gru_cell(rng, 2 * hidden_dim, hd, "reader.layer2.fw");
    p.layer2.bw = make_gru_cell(rng, 2 * hidden_dim, hd, "reader.layer2.bw");
    p.start_proj = xavier_leaf(rng, {hidden_dim, 1}, "reader.start_proj");
    p.end_proj = xavier_leaf(rng, {hidden_dim, 1}, "reader.end_proj");
    return p;
}

TensorPtr gru_cell(const TensorPtr& x, const TensorPtr& h, const GruCellParams& p) {
    const int in = p.input_dim, hd = p.hidden_dim;
    if (x->rows() != 1 || x->cols() != in || h->rows() != 1 || h->cols() != hd) {
        throw std::invalid_argument("gru_cell: got x " + x->shape_str() + ", h " + h->shape_str());
    }
    std::vector<double> az(hd, 0.0), ar(hd, 0.0), ah(hd, 0.0);
    mm_nn_acc(x->val.data(), p.wz->val.data(), az.data(), 1, in, hd);
    mm_nn_acc(h->val.data(), p.uz->val.data(), az.data(), 1, hd, hd);
    mm_nn_acc(x->val.data(), p.wr->val.data(), ar.data(), 1, in, hd);
    mm_nn_acc(h->val.data(), p.ur->val.data(), ar.data(), 1, hd, hd);

    std::vector<double> z(hd), r(hd), rh(hd), c(hd);
    for (int j = 0; j < hd; ++j) {
        z[j] = 1.0 / (1.0 + std::exp(-(az[j] + p.bz->val[j])));
        r[j] = 1.0 / (1.0 + std::exp(-(ar[j] + p.br->val[j])));
        rh[j] = r[j] * h->val[j];
    }
    mm_nn_acc(x->val.data(), p.wh->val.data(), ah.data(), 1, in, hd);
    mm_nn_acc(rh.data(), p.uh->val.data(), ah.data(), 1, hd, hd);
    for (int j = 0; j < hd; ++j) c[j] = std::tanh(ah[j] + p.bh->val[j]);

    auto out = make_op_node({1, hd}, {x, h, p.wz, p.uz, p.bz, p.wr, p.ur, p.br, p.wh, p.uh, p.bh});
    for (int j = 0; j < hd; ++j) out->val[j] = h->val[j] + z[j] * (c[j] - h->val[j]);

    if (out->requires_grad) {
        Tensor* self = out.get();
        GruCellParams pc = p;
        TensorPtr xs = x, hs = h;
        out->backprop = [self, xs, hs, pc, z, r, rh, c, in, hd]() {
            const double* g = self->grad.data();
            std::vector<double> daz(hd), dar(hd), dah(hd), dh(hd), drh(hd);
            for (int j = 0; j < hd; ++j) {
                const double dz = g[j] * (c[j] - hs->val[j]);
                const double dc = g[j] * z[j];
                dh[j] = g[j] * (1.0 - z[j]);
                dah[j] = dc * (1.0 - c[j] * c[j]);
                daz[j] = dz * z[j] * (1.0 - z[j]);
            }
            // through a_h = x.Wh + (r*h).Uh + bh
            std::fill(drh.begin(), drh.end(), 0.0);
            mm_nt_acc(dah.data(), pc.uh->val.data(), drh.data(), 1, hd, hd);
            for (int j = 0; j < hd; ++j) {
                const double dr = drh[j] * hs->val[j];
                dh[j] += drh[j] * r[j];
                dar[j] = dr * r[j] * (1.0 - r[j]);
            }
            if (xs->requires_grad) {
                mm_nt_acc(daz.data(), pc.wz->val.data(), xs->grad.data(), 1, hd, in);
                mm_nt_acc(dar.data(), pc.wr->val.data(), xs->grad.data(), 1, hd, in);
                mm_nt_acc(dah.data(), pc.wh->val.data(), xs->grad.data(), 1, hd, in);
            }
            if (hs->requires_grad) {
                mm_nt_acc(daz.data(), pc.uz->val.data(), dh.data(), 1, hd, hd);
                mm_nt_acc(dar.data(), pc.ur->val.data(), dh.data(), 1, hd, hd);
                for (int j = 0; j < hd; ++j) hs->grad[j] += dh[j];
            }
            if (pc.wz->requires_grad) {
                mm_tn_acc(xs->val.data(), daz.data(), pc.wz->grad.data(), 1, in, hd);
                mm_tn_acc(xs->val.data(), dar.data(), pc.wr->grad.data(), 1, in, hd);
                mm_tn_acc(xs->val.data(), dah.data(), pc.wh->grad.data(), 1, in, hd);
                mm_tn_acc(hs->val.data(), daz.data(), pc.uz->grad.data(), 1, hd, hd);
                mm_tn_acc(hs->val.data(), dar.data(), pc.ur->grad.data(), 1, hd, hd);
                mm_tn_acc(rh.data(), dah.data(), pc.uh->grad.data(), 1, hd, hd);
                for (int j = 0; j < hd; ++j) {
                    pc.bz->grad[j] += daz[j];
                    pc.br->grad[j] += dar[j];
                    pc.bh->grad[j] += dah[j];
                }
            }
        };
    }
    return out;
}

std::vector<TensorPtr> bigru_layer(const std::vector<TensorPtr>& inputs, const BiGruParams& p) {
    const int n = static_cast<int>(inputs.size());
    const int hd = p.fw.hidden_dim;
    std::vector<TensorPtr> fw(static_cast<size_t>(n)), bw(static_cast<size_t>(n));
    TensorPtr h = Tensor::zeros({1, hd});
    for (int t = 0; t < n; ++t) {
        h = gru_cell(inputs[static_cast<size_t>(t)], h, p.fw);
        fw[static_cast<size_t>(t)] = h;
    }
    h = Tensor::zeros({1, hd});
    for (int t = n - 1; t >= 0; --t) {
        h = gru_cell(inputs[static_cast<size_t>(t)], h, p.bw);
        bw[static_cast<size_t>(t)] = h;
    }
    std::vector<TensorPtr> out(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) {
        out[static_cast<size_t>(t)] =
            concat_cols({fw[static_cast<size_t>(t)], bw[static_cast<size_t>(t)]});
    }
    return out;
}

Encoded encode(const ReaderParams& p, const std::vector<int>& question_ids,
               const std::vector<int>& context_ids) {
    if (question_ids.empty() || context_ids.empty()) {
        throw std::invalid_argument("encode: empty token sequence");
    }
    for (int id : question_ids) {
        if (id < 0 || id >= p.vocab_size) {
            throw std::invalid_argument("encode: token id " + std::to_string(id) +
                                        " outside vocabulary of size " +
                                        std::to_string(p.vocab_size));
        }
    }
    for (int id : context_ids) {
        if (id < 0 || id >= p.vocab_size) {
            throw std::invalid_argument("encode: token id " + std::to_string(id) +
                                        " outside vocabulary of size " +
                                        std::to_string(p.vocab_size));
        }
    }
    std::vector<int> joint;
    joint.reserve(question_ids.size() + 1 + context_ids.size());
    joint.insert(joint.end(), question_ids.begin(), question_ids.end());
    joint.push_back(Vocab::kSep);
    joint.insert(joint.end(), context_ids.begin(), context_ids.end());

    auto emb = gather_rows(p.embedding, joint);
    std::vector<TensorPtr> rows(joint.size());
    for (size_t t = 0; t < joint.size(); ++t) rows[t] = slice_rows(emb, static_cast<int>(t), 1);

    auto h1 = bigru_layer(rows, p.layer1);

    const int lq = static_cast<int>(question_ids.size());
    const int lc = static_cast<int>(context_ids.size());

    // Dot-product attention over the question encodings; each position's
    // second-layer input is its own state plus the attended question summary.
    auto q1 = concat_rows(std::vector<TensorPtr>(h1.begin(), h1.begin() + lq));
    auto q1t = transpose(q1);
    std::vector<TensorPtr> attended(h1.size());
    for (size_t t = 0; t < h1.size(); ++t) {
        auto weights = softmax_rows(matmul(h1[t], q1t));
        attended[t] = concat_cols({h1[t], matmul(weights, q1)});
    }
    auto h2 = bigru_layer(attended, p.layer2);

    std::vector<TensorPtr> q_rows(h2.begin(), h2.begin() + lq);
    std::vector<TensorPtr> c_rows(h2.begin() + lq + 1, h2.begin() + lq + 1 + lc);
    return {concat_rows(q_rows), concat_rows(c_rows)};
}

SpanLogits span_logits(const TensorPtr& context, const TensorPtr& na, const ReaderParams& p) {
    if (na->size() != 1) {
        throw std::invalid_argument("span_logits: NA logit must be scalar, got " + na->shape_str());
    }
    auto start_real = transpose(matmul(context, p.start_proj));
    auto end_real = transpose(matmul(context, p.end_proj));
    return {concat_cols({start_real, na}), concat_cols({end_real, na})};
}

SpanPrediction predict_span(const std::vector<double>& start_logits,
                            const std::vector<double>& end_logits, int context_len,
                            int max_span_len, double tau) {
    if (static_cast<int>(start_logits.size()) != context_len + 1 ||
        static_cast<int>(end_logits.size()) != context_len + 1) {
        throw std::invalid_argument("predict_span: logit width must be context_len + 1");
    }
    SpanPrediction out;
    double best = -std::numeric_limits<double>::infinity();
    Span best_span{0, 0};
    for (int i = 0; i < context_len; ++i) {
        const int jmax = std::min(context_len - 1, i + max_span_len);
        for (int j = i; j <= jmax; ++j) {
            const double score = start_logits[i] + end_logits[j];
            if (score > best) {
                best = score;
                best_span = {i, j};
            }
        }
    }
    out.span = best_span;
    out.best_span_score = best;
    out.na_score = start_logits[context_len] + end_logits[context_len];
    out.no_answer = (out.na_score - out.best_span_score + tau) > 0.0;
    return out;
}

}  // namespace reader
}  // namespace relmod
