#ifndef RELMOD_READER_HPP
#define RELMOD_READER_HPP

#include <random>
#include <vector>

#include "relmod/data.hpp"
#include "relmod/tensor.hpp"

namespace relmod {
namespace reader {

struct GruCellParams {
    TensorPtr wz, uz, bz;
    TensorPtr wr, ur, br;
    TensorPtr wh, uh, bh;
    int input_dim = 0;
    int hidden_dim = 0;
};

struct BiGruParams {
    GruCellParams fw, bw;
};

/// Embedding + two stacked bidirectional GRU layers shared by question and
/// context, plus the start/end projection vectors of the base span head.
/// Between the layers every position gets a parameter-free dot-product
/// attention summary of the question encodings, so the second layer sees
/// question-conditioned inputs.
struct ReaderParams {
    TensorPtr embedding;  // V x e
    BiGruParams layer1;   // e -> h
    BiGruParams layer2;   // 2h -> h (layer-1 state + attended question)
    TensorPtr start_proj;  // h x 1
    TensorPtr end_proj;    // h x 1
    int vocab_size = 0;
    int embed_dim = 0;
    int hidden_dim = 0;
};

ReaderParams make_reader_params(std::mt19937_64& rng, int vocab_size, int embed_dim,
                                int hidden_dim);

/// One fused GRU step: inputs x (1 x in) and h (1 x hd), returns the next
/// hidden state (1 x hd) with a hand-written backward pass.
TensorPtr gru_cell(const TensorPtr& x, const TensorPtr& h, const GruCellParams& p);

/// Runs one bidirectional layer over per-position row tensors; each output
/// row is the forward/backward state concatenation.
std::vector<TensorPtr> bigru_layer(const std::vector<TensorPtr>& inputs, const BiGruParams& p);

struct Encoded {
    TensorPtr question;  // Lq x h
    TensorPtr context;   // Lc x h
};

/// Encodes question and context jointly (question ++ <sep> ++ context) so
/// the context representation is question-conditioned, then splits the
/// output rows back into Q and C.
Encoded encode(const ReaderParams& p, const std::vector<int>& question_ids,
               const std::vector<int>& context_ids);

struct SpanLogits {
    TensorPtr start;  // 1 x (Lc + 1); the last slot is the virtual no-answer
    TensorPtr end;    // position whose logit is the module's NA score
};

/// Base-reader span logits over real positions plus the virtual no-answer
/// slot. `na` is a 1x1 tensor (a trainable module output, or a constant 0
/// when no NA head is attached) shared by both distributions.
SpanLogits span_logits(const TensorPtr& context, const TensorPtr& na, const ReaderParams& p);

struct SpanPrediction {
    bool no_answer = false;
    Span span;
    double best_span_score = 0.0;
    double na_score = 0.0;
};

/// Picks the best span with start <= end <= start + max_span_len among real
/// positions and answers NO_ANSWER when the virtual-slot score beats it by
/// the margin tau (larger tau biases toward NO_ANSWER).
SpanPrediction predict_span(const std::vector<double>& start_logits,
                            const std::vector<double>& end_logits, int context_len,
                            int max_span_len, double tau);

}  // namespace reader
}  // namespace relmod

#endif  // RELMOD_READER_HPP
