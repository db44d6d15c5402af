#include "relmod/metrics.hpp"

#include <map>

#include "json.hpp"

namespace relmod {

std::string Metrics::to_json_string() const {
    nlohmann::json j{{"em", em},
                     {"f1", f1},
                     {"na_accuracy", na_accuracy},
                     {"answerable_accuracy", answerable_accuracy},
                     {"n_examples", n_examples},
                     {"n_answerable", n_answerable},
                     {"n_unanswerable", n_unanswerable}};
    return j.dump();
}

bool exact_match(const ScoredPair& pair) {
    if (!pair.gold_answerable || !pair.pred_answerable) {
        return pair.gold_answerable == pair.pred_answerable;
    }
    return pair.gold_tokens == pair.pred_tokens;
}

double token_f1(const ScoredPair& pair) {
    const bool gold_empty = !pair.gold_answerable || pair.gold_tokens.empty();
    const bool pred_empty = !pair.pred_answerable || pair.pred_tokens.empty();
    if (gold_empty || pred_empty) return gold_empty == pred_empty ? 1.0 : 0.0;

    std::map<std::string, int> gold_counts;
    for (const auto& t : pair.gold_tokens) ++gold_counts[t];
    int same = 0;
    for (const auto& t : pair.pred_tokens) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            --it->second;
            ++same;
        }
    }
    if (same == 0) return 0.0;
    const double precision = static_cast<double>(same) / static_cast<double>(pair.pred_tokens.size());
    const double recall = static_cast<double>(same) / static_cast<double>(pair.gold_tokens.size());
    return 2.0 * precision * recall / (precision + recall);
}

Metrics aggregate(const std::vector<ScoredPair>& pairs) {
    Metrics m;
    m.n_examples = static_cast<int>(pairs.size());
    double em_sum = 0.0, f1_sum = 0.0;
    int ans_correct = 0, na_correct = 0;
    for (const auto& pair : pairs) {
        em_sum += exact_match(pair) ? 1.0 : 0.0;
        f1_sum += token_f1(pair);
        if (pair.gold_answerable) {
            ++m.n_answerable;
            if (pair.pred_answerable) ++ans_correct;
        } else {
            ++m.n_unanswerable;
            if (!pair.pred_answerable) ++na_correct;
        }
    }
    if (m.n_examples > 0) {
        m.em = 100.0 * em_sum / m.n_examples;
        m.f1 = 100.0 * f1_sum / m.n_examples;
    }
    m.answerable_accuracy =
        m.n_answerable > 0 ? 100.0 * ans_correct / m.n_answerable : 100.0;
    m.na_accuracy = m.n_unanswerable > 0 ? 100.0 * na_correct / m.n_unanswerable : 100.0;
    return m;
}

}  // namespace relmod
