#ifndef RELMOD_MODEL_HPP
#define RELMOD_MODEL_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relmod/augment.hpp"
#include "relmod/config.hpp"
#include "relmod/data.hpp"
#include "relmod/objects.hpp"
#include "relmod/reader.hpp"
#include "relmod/relnet.hpp"
#include "relmod/tensor.hpp"

namespace relmod {

/// How the virtual no-answer slot gets its logit.
enum class NaMode {
    kRelnet,      // relation module over extracted objects
    kFcBaseline,  // single linear layer on the pooled context
    kSpanOnly,    // constant zero; span logits carry the decision alone
};

struct ModelConfig {
    int vocab_size = 0;
    int embed = 32;
    int hidden = 64;
    int n_context_heads = 16;
    int n_question_heads = 2;
    relnet::Dims dims;
    double alpha = 0.0005;
    double lambda_aux = 1.0;
    objects::Activation activation = objects::Activation::kTanh;
    bool eq3_bias = false;
    bool squared_frobenius = false;
    bool use_augment = true;
    NaMode na_mode = NaMode::kRelnet;
    bool use_pooled_summary = false;
    int max_span_len = 15;

    static ModelConfig from_run_config(const RunConfig& run, int vocab_size);
};

/// Everything one forward pass produces for an example.
struct ExampleOutput {
    TensorPtr question_enc;  // Lq x h
    TensorPtr context_enc;   // Lc x h
    TensorPtr augmented;     // Lc x h (equals context_enc when augment is off)
    augment::Hidden hidden;  // S, E (null when augment is off)
    TensorPtr attention_ctx;  // n x Lc
    TensorPtr objects_ctx;    // n x h
    TensorPtr attention_q;    // nq x Lq
    TensorPtr objects_q;      // nq x h
    relnet::RelationOutput relation;
    TensorPtr na;            // 1 x 1
    TensorPtr start_logits;  // 1 x (Lc + 1)
    TensorPtr end_logits;    // 1 x (Lc + 1)
    TensorPtr aux_loss;      // null when absent
    TensorPtr penalty;       // null when absent
    int context_len = 0;
};

struct ExampleLabels {
    std::optional<Span> answer;
    std::optional<Span> plausible;
    bool answerable = false;
};

class Model {
public:
    Model(ModelConfig cfg, uint64_t init_seed);

    const ModelConfig& config() const { return cfg_; }

    ExampleOutput forward(const std::vector<int>& question_ids,
                          const std::vector<int>& context_ids) const;

    /// start CE + end CE + lambda * aux + attention penalties for one example.
    TensorPtr example_loss(const ExampleOutput& out, const ExampleLabels& labels) const;

    /// Mean of example losses over the batch.
    TensorPtr batch_loss(const EncodedBatch& batch) const;

    /// Sum of the auxiliary plausible-span losses over span-bearing examples.
    TensorPtr batch_aux_loss(const EncodedBatch& batch) const;

    static ExampleLabels labels_from_batch(const EncodedBatch& batch, int i);

    const std::vector<std::pair<std::string, TensorPtr>>& named_params() const {
        return named_;
    }
    std::vector<TensorPtr> trainable() const;
    /// Distinct name prefixes ("reader", "augment", ...), in declaration order.
    std::vector<std::string> param_groups() const;

    void load_named(const std::vector<std::pair<std::string, std::vector<double>>>& tensors);

    const reader::ReaderParams& reader_params() const { return reader_; }
    const relnet::RelNetParams& relnet_params() const { return relnet_; }

    bool has_relnet() const { return cfg_.na_mode == NaMode::kRelnet; }
    /// The S/E layers train whenever augmentation is on, even without the
    /// relation module (plausible-answer-only variant); the pooled-FC
    /// baseline runs the bare reader.
    bool has_augment() const {
        return cfg_.use_augment && cfg_.na_mode != NaMode::kFcBaseline;
    }

private:
    ModelConfig cfg_;
    reader::ReaderParams reader_;
    augment::AugmentParams augment_;
    objects::ExtractorParams extractor_ctx_;
    objects::ExtractorParams extractor_q_;
    relnet::RelNetParams relnet_;
    TensorPtr baseline_w_, baseline_b_;
    std::vector<std::pair<std::string, TensorPtr>> named_;
};

}  // namespace relmod

#endif  // RELMOD_MODEL_HPP
