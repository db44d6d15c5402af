#ifndef RELMOD_DATA_HPP
#define RELMOD_DATA_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace relmod {

/// Inclusive token span into a context.
struct Span {
    int start = 0;
    int end = 0;
    bool operator==(const Span&) const = default;
};

/// One question/context pair. Raw token strings are kept for scoring and
/// inspection; id lists are filled by `encode_examples` (or on the fly by
/// `batchify`).
struct Example {
    std::string id;
    std::vector<int> question_tokens;
    std::vector<int> context_tokens;
    std::vector<std::string> raw_question_tokens;
    std::vector<std::string> raw_context_tokens;
    std::optional<Span> answer_span;
    std::optional<Span> plausible_span;
    bool is_answerable = false;
};

struct Token {
    std::string text;
    int begin = 0;  // byte offsets into the source string
    int end = 0;
};

/// Lowercasing whitespace + punctuation tokenizer: alphanumeric runs are
/// words, every other visible character is its own token.
std::vector<Token> tokenize_with_offsets(const std::string& text);
std::vector<std::string> tokenize(const std::string& text);

/// Token-id vocabulary with reserved ids 0 = pad, 1 = unk, 2 = sep.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kSep = 2;

    Vocab();
    static Vocab build(const std::vector<Example>& examples);

    int get(const std::string& token) const;
    int add(const std::string& token);
    const std::string& token(int id) const { return id_to_token_.at(id); }
    int size() const { return static_cast<int>(id_to_token_.size()); }
    const std::vector<std::string>& tokens() const { return id_to_token_; }
    static Vocab from_tokens(const std::vector<std::string>& tokens);

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

/// Fills the id lists of every example from `vocab` (OOV -> unk).
void encode_examples(std::vector<Example>& examples, const Vocab& vocab);

struct ParseStats {
    int skipped_unalignable = 0;
    int dropped_plausible = 0;
};

/// Parses a SQuAD 2.0 JSON document. Character-offset answers are converted
/// to token spans; entries whose answer cannot be aligned are skipped with a
/// warning on stderr and counted in `stats`. Malformed documents raise
/// std::runtime_error naming the JSON path.
std::vector<Example> parse_squad_v2(const std::string& json_text, ParseStats* stats = nullptr);
std::vector<Example> parse_squad_file(const std::string& path, ParseStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Synthetic answerability task
// ---------------------------------------------------------------------------

/// Pools and knobs for the generated quantity-mismatch task. Every context
/// lists several facts ("the flash flood caused 20 million in damage .");
/// the question asks which entity matches a quantity + unit. Unanswerable
/// questions mutate exactly one of the two.
struct SyntheticConfig {
    int num_examples = 1000;
    double answerable_ratio = 0.5;
    int context_facts_per_example = 4;
    uint64_t rng_seed = 7;
    std::vector<std::string> entity_pool;    // may contain multi-word entries
    std::vector<std::string> event_pool;
    std::vector<std::string> unit_pool;
    std::vector<std::string> quantity_pool;

    static SyntheticConfig defaults();
};

std::vector<Example> generate_synthetic(const SyntheticConfig& config);

/// Line-delimited JSON with fields matching Example (documented in the
/// README): id, question_tokens, context_tokens (token strings),
/// answer_span, plausible_span, is_answerable.
void write_jsonl(const std::vector<Example>& examples, const std::string& path);
std::vector<Example> read_jsonl(const std::string& path);

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

/// Padded token-id matrices plus masks and labels. Pad id is 0; labels of
/// padded positions are never read.
struct EncodedBatch {
    int batch_size = 0;
    int max_q_len = 0;
    int max_c_len = 0;
    std::vector<int> question_ids;   // batch_size x max_q_len
    std::vector<int> context_ids;    // batch_size x max_c_len
    std::vector<uint8_t> question_mask;
    std::vector<uint8_t> context_mask;
    std::vector<int> answer_start, answer_end;        // -1 when absent
    std::vector<int> plausible_start, plausible_end;  // -1 when absent
    std::vector<uint8_t> answerable;
    std::vector<int> example_index;

    int question_len(int b) const;
    int context_len(int b) const;
    std::vector<int> question_row(int b) const;  // unpadded ids
    std::vector<int> context_row(int b) const;
};

std::vector<EncodedBatch> batchify(const std::vector<Example>& examples, int batch_size,
                                   const Vocab& vocab);

struct Dataset {
    std::vector<Example> examples;
    Vocab vocab;
};

}  // namespace relmod

#endif  // RELMOD_DATA_HPP
