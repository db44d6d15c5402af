#ifndef RELMOD_METRICS_HPP
#define RELMOD_METRICS_HPP

#include <string>
#include <vector>

namespace relmod {

/// Aggregate scores in percent.
struct Metrics {
    double em = 0.0;
    double f1 = 0.0;
    double na_accuracy = 0.0;          // unanswerable examples classified NO_ANSWER
    double answerable_accuracy = 0.0;  // answerable examples classified as having a span
    int n_examples = 0;
    int n_answerable = 0;
    int n_unanswerable = 0;

    std::string to_json_string() const;
};

/// One scored prediction: empty token vectors stand for NO_ANSWER.
struct ScoredPair {
    bool gold_answerable = false;
    std::vector<std::string> gold_tokens;
    bool pred_answerable = false;
    std::vector<std::string> pred_tokens;
};

/// Exact token-sequence match; two NO_ANSWERs agree.
bool exact_match(const ScoredPair& pair);

/// Token-overlap F1 with multiset counts. 1 when both sides are NO_ANSWER,
/// 0 when exactly one is.
double token_f1(const ScoredPair& pair);

Metrics aggregate(const std::vector<ScoredPair>& pairs);

}  // namespace relmod

#endif  // RELMOD_METRICS_HPP
