#include "relmod/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "relmod/init.hpp"

namespace relmod {

ModelConfig ModelConfig::from_run_config(const RunConfig& run, int vocab_size) {
    ModelConfig c;
    c.vocab_size = vocab_size;
    c.embed = run.embed;
    c.hidden = run.hidden;
    c.n_context_heads = run.n_context_heads;
    c.n_question_heads = run.n_question_heads;
    c.dims.d_g = run.d_g > 0 ? run.d_g : run.hidden;
    c.dims.d_r = run.d_r > 0 ? run.d_r : run.hidden;
    c.dims.d_f = run.d_f > 0 ? run.d_f : run.hidden;
    c.dims.d_z = run.d_z > 0 ? run.d_z : run.hidden;
    c.alpha = run.alpha;
    c.lambda_aux = run.lambda_aux;
    c.activation = objects::activation_from_string(run.activation);
    c.eq3_bias = run.eq3_bias;
    c.squared_frobenius = run.squared_frobenius;
    c.use_augment = run.use_augment;
    c.max_span_len = run.max_span_len;
    if (run.baseline_fc_na) c.na_mode = NaMode::kFcBaseline;
    else if (run.use_relnet) c.na_mode = NaMode::kRelnet;
    else c.na_mode = NaMode::kSpanOnly;
    c.use_pooled_summary = run.use_pooled_summary;
    return c;
}

Model::Model(ModelConfig cfg, uint64_t init_seed) : cfg_(cfg) {
    std::mt19937_64 rng(init_seed);
    reader_ = reader::make_reader_params(rng, cfg_.vocab_size, cfg_.embed, cfg_.hidden);

    auto add_params = [this](std::initializer_list<TensorPtr> ts) {
        for (const auto& t : ts) named_.emplace_back(t->name, t);
    };
    auto add_gru = [&](const reader::GruCellParams& g) {
        add_params({g.wz, g.uz, g.bz, g.wr, g.ur, g.br, g.wh, g.uh, g.bh});
    };
    add_params({reader_.embedding});
    add_gru(reader_.layer1.fw);
    add_gru(reader_.layer1.bw);
    add_gru(reader_.layer2.fw);
    add_gru(reader_.layer2.bw);
    add_params({reader_.start_proj, reader_.end_proj});

    if (has_augment()) {
        augment_ = augment::make_augment_params(rng, cfg_.hidden, cfg_.eq3_bias);
        add_params({augment_.w1, augment_.b1, augment_.w2, augment_.b2, augment_.w});
        if (cfg_.eq3_bias) add_params({augment_.w_bias});
        add_params({augment_.s_proj, augment_.e_proj});
    }
    if (has_relnet()) {
        extractor_ctx_ = objects::make_extractor_params(rng, cfg_.hidden, cfg_.n_context_heads,
                                                        cfg_.activation, "objects_ctx");
        extractor_q_ = objects::make_extractor_params(rng, cfg_.hidden, cfg_.n_question_heads,
                                                      cfg_.activation, "objects_q");
        add_params({extractor_ctx_.w3, extractor_ctx_.w4, extractor_q_.w3, extractor_q_.w4});
        relnet_ = relnet::make_relnet_params(rng, cfg_.hidden, cfg_.dims,
                                             cfg_.use_pooled_summary);
        add_params({relnet_.g_w1, relnet_.g_b1, relnet_.g_w2, relnet_.g_b2, relnet_.w_g,
                    relnet_.f_w1, relnet_.f_b1, relnet_.f_w2, relnet_.f_b2, relnet_.w_f,
                    relnet_.na_w, relnet_.na_b});
    } else if (cfg_.na_mode == NaMode::kFcBaseline) {
        baseline_w_ = xavier_leaf(rng, {cfg_.hidden, 1}, "baseline_na.w");
        baseline_b_ = zeros_leaf({1, 1}, "baseline_na.b");
        add_params({baseline_w_, baseline_b_});
    }
}

namespace {

TensorPtr pooled_mean(const TensorPtr& rows) {
    const int n = rows->rows();
    return matmul(Tensor::full({1, n}, 1.0 / static_cast<double>(n)), rows);
}

}  // namespace

ExampleOutput Model::forward(const std::vector<int>& question_ids,
                             const std::vector<int>& context_ids) const {
    ExampleOutput out;
    out.context_len = static_cast<int>(context_ids.size());
    auto enc = reader::encode(reader_, question_ids, context_ids);
    out.question_enc = enc.question;
    out.context_enc = enc.context;

    if (has_augment()) {
        out.hidden = augment::plausible_hidden(out.context_enc, augment_);
        // The fused X only feeds the object extractor; without the relation
        // module the S/E states still train through the auxiliary loss.
        out.augmented = has_relnet() ? augment::augment_context(out.context_enc, out.hidden.s,
                                                                out.hidden.e, augment_)
                                     : out.context_enc;
    } else {
        out.augmented = out.context_enc;
    }

    switch (cfg_.na_mode) {
        case NaMode::kRelnet: {
            const std::vector<uint8_t> ctx_visible(context_ids.size(), 1);
            const std::vector<uint8_t> q_visible(question_ids.size(), 1);
            auto ctx_set = objects::extract_objects(out.augmented, ctx_visible, extractor_ctx_);
            auto q_set = objects::extract_objects(out.question_enc, q_visible, extractor_q_);
            out.attention_ctx = ctx_set.attention;
            out.objects_ctx = ctx_set.objects;
            out.attention_q = q_set.attention;
            out.objects_q = q_set.objects;
            out.penalty = add(
                objects::orthogonality_penalty(ctx_set.attention, cfg_.alpha,
                                               cfg_.squared_frobenius),
                objects::orthogonality_penalty(q_set.attention, cfg_.alpha,
                                               cfg_.squared_frobenius));
            TensorPtr pooled =
                cfg_.use_pooled_summary ? pooled_mean(out.context_enc) : nullptr;
            out.relation = relnet::run(ctx_set.objects, q_set.objects, pooled, relnet_);
            out.na = out.relation.na;
            break;
        }
        case NaMode::kFcBaseline:
            out.na = add(matmul(pooled_mean(out.context_enc), baseline_w_), baseline_b_);
            break;
        case NaMode::kSpanOnly:
            out.na = Tensor::scalar(0.0);
            break;
    }

    auto logits = reader::span_logits(out.context_enc, out.na, reader_);
    out.start_logits = logits.start;
    out.end_logits = logits.end;

    return out;
}

TensorPtr Model::example_loss(const ExampleOutput& out, const ExampleLabels& labels) const {
    const int lc = out.context_len;
    int start_target = lc, end_target = lc;  // virtual no-answer slot
    if (labels.answerable) {
        if (!labels.answer) {
            throw std::invalid_argument("example_loss: answerable example without a span");
        }
        start_target = labels.answer->start;
        end_target = labels.answer->end;
    }
    auto start_ce = cross_entropy(out.start_logits, start_target);
    auto end_ce = cross_entropy(out.end_logits, end_target);

    TensorPtr aux;
    if (has_augment()) {
        aux = augment::plausible_span_loss(out.hidden.s, out.hidden.e, Mask{}, labels.plausible,
                                           augment_);
    }
    return relnet::joint_loss(start_ce, end_ce, aux, out.penalty, nullptr, cfg_.lambda_aux);
}

ExampleLabels Model::labels_from_batch(const EncodedBatch& batch, int i) {
    ExampleLabels labels;
    labels.answerable = batch.answerable[static_cast<size_t>(i)] != 0;
    if (batch.answer_start[static_cast<size_t>(i)] >= 0) {
        labels.answer = Span{batch.answer_start[static_cast<size_t>(i)],
                             batch.answer_end[static_cast<size_t>(i)]};
    }
    if (batch.plausible_start[static_cast<size_t>(i)] >= 0) {
        labels.plausible = Span{batch.plausible_start[static_cast<size_t>(i)],
                                batch.plausible_end[static_cast<size_t>(i)]};
    }
    return labels;
}

TensorPtr Model::batch_loss(const EncodedBatch& batch) const {
    if (batch.batch_size == 0) throw std::invalid_argument("batch_loss: empty batch");
    std::vector<TensorPtr> losses;
    losses.reserve(static_cast<size_t>(batch.batch_size));
    for (int i = 0; i < batch.batch_size; ++i) {
        auto out = forward(batch.question_row(i), batch.context_row(i));
        losses.push_back(example_loss(out, labels_from_batch(batch, i)));
    }
    return scale(add_n(losses), 1.0 / static_cast<double>(batch.batch_size));
}

TensorPtr Model::batch_aux_loss(const EncodedBatch& batch) const {
    if (!has_augment()) return Tensor::scalar(0.0);
    std::vector<TensorPtr> terms;
    for (int i = 0; i < batch.batch_size; ++i) {
        auto labels = labels_from_batch(batch, i);
        if (!labels.plausible) continue;
        auto out = forward(batch.question_row(i), batch.context_row(i));
        terms.push_back(augment::plausible_span_loss(out.hidden.s, out.hidden.e, Mask{},
                                                     labels.plausible, augment_));
    }
    return terms.empty() ? Tensor::scalar(0.0) : add_n(terms);
}

std::vector<TensorPtr> Model::trainable() const {
    std::vector<TensorPtr> out;
    out.reserve(named_.size());
    for (const auto& [name, t] : named_) out.push_back(t);
    return out;
}

std::vector<std::string> Model::param_groups() const {
    std::vector<std::string> groups;
    for (const auto& [name, t] : named_) {
        const std::string g = name.substr(0, name.find('.'));
        if (groups.empty() || std::find(groups.begin(), groups.end(), g) == groups.end()) {
            groups.push_back(g);
        }
    }
    return groups;
}

void Model::load_named(
    const std::vector<std::pair<std::string, std::vector<double>>>& tensors) {
    if (tensors.size() != named_.size()) {
        throw std::invalid_argument("load_named: expected " + std::to_string(named_.size()) +
                                    " tensors, got " + std::to_string(tensors.size()));
    }
    for (size_t i = 0; i < tensors.size(); ++i) {
        auto& [name, t] = named_[i];
        if (tensors[i].first != name) {
            throw std::invalid_argument("load_named: tensor '" + tensors[i].first +
                                        "' does not match expected '" + name + "'");
        }
        if (tensors[i].second.size() != t->val.size()) {
            throw std::invalid_argument("load_named: size mismatch for '" + name + "'");
        }
        t->val = tensors[i].second;
    }
}

}  // namespace relmod
