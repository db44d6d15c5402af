#include "relmod/inspect.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace relmod {

namespace {

std::vector<HeadTopK> dump_side(const TensorPtr& attention, const std::string& side,
                                const std::vector<std::string>& tokens, int k) {
    std::vector<HeadTopK> out;
    for (int head = 0; head < attention->rows(); ++head) {
        HeadTopK entry;
        entry.side = side;
        entry.head = head;
        std::vector<TokenWeight> all;
        for (int pos = 0; pos < attention->cols(); ++pos) {
            all.push_back({pos, tokens[static_cast<size_t>(pos)], attention->at(head, pos)});
        }
        std::stable_sort(all.begin(), all.end(), [](const TokenWeight& a, const TokenWeight& b) {
            return a.weight > b.weight;
        });
        all.resize(std::min<size_t>(all.size(), static_cast<size_t>(k)));
        entry.top = std::move(all);
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace

std::vector<HeadTopK> inspect_example(const Model& model, const Vocab& vocab, const Example& ex,
                                      int k) {
    if (!model.has_relnet()) {
        throw std::invalid_argument("inspect: this checkpoint has no object extractor");
    }
    if (k < 1) throw std::invalid_argument("inspect: k must be >= 1");
    std::vector<int> q_ids, c_ids;
    for (const auto& t : ex.raw_question_tokens) q_ids.push_back(vocab.get(t));
    for (const auto& t : ex.raw_context_tokens) c_ids.push_back(vocab.get(t));

    NoGradGuard ng;
    auto out = model.forward(q_ids, c_ids);
    auto result = dump_side(out.attention_ctx, "context", ex.raw_context_tokens, k);
    auto q = dump_side(out.attention_q, "question", ex.raw_question_tokens, k);
    result.insert(result.end(), q.begin(), q.end());
    return result;
}

std::string inspection_to_json_lines(const std::string& example_id,
                                     const std::vector<HeadTopK>& heads) {
    std::ostringstream os;
    for (const auto& head : heads) {
        nlohmann::json top = nlohmann::json::array();
        for (const auto& tw : head.top) {
            top.push_back({{"position", tw.position}, {"token", tw.token}, {"weight", tw.weight}});
        }
        nlohmann::json line{
            {"example_id", example_id}, {"side", head.side}, {"head", head.head}, {"top", top}};
        os << line.dump() << "\n";
    }
    return os.str();
}

}  // namespace relmod
