#include "relmod/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

using nlohmann::json;

namespace relmod {

namespace {

bool is_word_char(unsigned char c) {
    return std::isalnum(c) != 0 || c >= 0x80;
}

// Deterministic helpers on top of mt19937_64; std::uniform_int_distribution
// is implementation-defined and would break cross-platform reproducibility.
int irand(std::mt19937_64& rng, int n) {
    return static_cast<int>(rng() % static_cast<uint64_t>(n));
}

template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[static_cast<size_t>(irand(rng, static_cast<int>(i)))]);
    }
}

[[noreturn]] void squad_error(const std::string& path, const std::string& what) {
    throw std::runtime_error("squad: " + path + ": " + what);
}

const json& require_field(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) {
        squad_error(path, std::string("missing '") + key + "'");
    }
    return obj.at(key);
}

std::optional<Span> char_span_to_token_span(const std::vector<Token>& tokens, int begin, int len) {
    if (len <= 0) return std::nullopt;
    const int end = begin + len;
    int first = -1, last = -1;
    for (size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t].begin < end && tokens[t].end > begin) {
            if (first < 0) first = static_cast<int>(t);
            last = static_cast<int>(t);
        }
    }
    if (first < 0) return std::nullopt;
    return Span{first, last};
}

}  // namespace

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

std::vector<Token> tokenize_with_offsets(const std::string& text) {
    std::vector<Token> out;
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (is_word_char(c)) {
            size_t j = i;
            std::string word;
            while (j < n && is_word_char(static_cast<unsigned char>(text[j]))) {
                word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[j]))));
                ++j;
            }
            out.push_back({std::move(word), static_cast<int>(i), static_cast<int>(j)});
            i = j;
        } else {
            out.push_back({std::string(1, text[i]), static_cast<int>(i), static_cast<int>(i + 1)});
            ++i;
        }
    }
    return out;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    for (auto& t : tokenize_with_offsets(text)) out.push_back(t.text);
    return out;
}

// ---------------------------------------------------------------------------
// Vocab
// ---------------------------------------------------------------------------

Vocab::Vocab() {
    id_to_token_ = {"<pad>", "<unk>", "<sep>"};
    for (size_t i = 0; i < id_to_token_.size(); ++i) {
        token_to_id_[id_to_token_[i]] = static_cast<int>(i);
    }
}

Vocab Vocab::build(const std::vector<Example>& examples) {
    Vocab v;
    for (const auto& ex : examples) {
        for (const auto& t : ex.raw_question_tokens) v.add(t);
        for (const auto& t : ex.raw_context_tokens) v.add(t);
    }
    return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
    Vocab v;
    v.id_to_token_ = tokens;
    v.token_to_id_.clear();
    for (size_t i = 0; i < tokens.size(); ++i) v.token_to_id_[tokens[i]] = static_cast<int>(i);
    return v;
}

int Vocab::get(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

int Vocab::add(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    const int id = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(token);
    token_to_id_[token] = id;
    return id;
}

void encode_examples(std::vector<Example>& examples, const Vocab& vocab) {
    for (auto& ex : examples) {
        ex.question_tokens.clear();
        ex.context_tokens.clear();
        for (const auto& t : ex.raw_question_tokens) ex.question_tokens.push_back(vocab.get(t));
        for (const auto& t : ex.raw_context_tokens) ex.context_tokens.push_back(vocab.get(t));
    }
}

// ---------------------------------------------------------------------------
// SQuAD 2.0 parsing
// ---------------------------------------------------------------------------

std::vector<Example> parse_squad_v2(const std::string& json_text, ParseStats* stats) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("squad: malformed JSON: ") + e.what());
    }
    const json& data = require_field(doc, "data", "$");
    if (!data.is_array()) squad_error("$.data", "not an array");

    ParseStats local;
    std::vector<Example> out;
    for (size_t di = 0; di < data.size(); ++di) {
        const std::string dpath = "data[" + std::to_string(di) + "]";
        const json& paragraphs = require_field(data[di], "paragraphs", dpath);
        if (!paragraphs.is_array()) squad_error(dpath + ".paragraphs", "not an array");
        for (size_t pi = 0; pi < paragraphs.size(); ++pi) {
            const std::string ppath = dpath + ".paragraphs[" + std::to_string(pi) + "]";
            const json& para = paragraphs[pi];
            const json& context = require_field(para, "context", ppath);
            if (!context.is_string()) squad_error(ppath + ".context", "not a string");
            const std::string context_text = context.get<std::string>();
            const auto tokens = tokenize_with_offsets(context_text);
            std::vector<std::string> token_texts;
            token_texts.reserve(tokens.size());
            for (const auto& t : tokens) token_texts.push_back(t.text);

            const json& qas = require_field(para, "qas", ppath);
            if (!qas.is_array()) squad_error(ppath + ".qas", "not an array");
            for (size_t qi = 0; qi < qas.size(); ++qi) {
                const std::string qpath = ppath + ".qas[" + std::to_string(qi) + "]";
                const json& qa = qas[qi];
                const json& idj = require_field(qa, "id", qpath);
                const json& question = require_field(qa, "question", qpath);
                if (!question.is_string()) squad_error(qpath + ".question", "not a string");
                const bool impossible = qa.value("is_impossible", false);
                const json& answers = require_field(qa, "answers", qpath);
                if (!answers.is_array()) squad_error(qpath + ".answers", "not an array");

                Example ex;
                ex.id = idj.is_string() ? idj.get<std::string>() : idj.dump();
                ex.raw_question_tokens = tokenize(question.get<std::string>());
                ex.raw_context_tokens = token_texts;
                ex.is_answerable = !impossible;

                if (!impossible) {
                    if (answers.empty()) squad_error(qpath + ".answers", "empty for answerable entry");
                    const json& a0 = answers[0];
                    const json& text = require_field(a0, "text", qpath + ".answers[0]");
                    const json& start = require_field(a0, "answer_start", qpath + ".answers[0]");
                    auto span = char_span_to_token_span(tokens, start.get<int>(),
                                                        static_cast<int>(text.get<std::string>().size()));
                    if (!span) {
                        std::cerr << "squad: warning: " << qpath
                                  << ": answer offset does not align with the context; skipping\n";
                        ++local.skipped_unalignable;
                        continue;
                    }
                    ex.answer_span = span;
                    ex.plausible_span = span;  // true answers double as plausible supervision
                } else if (qa.contains("plausible_answers") && qa["plausible_answers"].is_array() &&
                           !qa["plausible_answers"].empty()) {
                    const json& p0 = qa["plausible_answers"][0];
                    const json& text = require_field(p0, "text", qpath + ".plausible_answers[0]");
                    const json& start =
                        require_field(p0, "answer_start", qpath + ".plausible_answers[0]");
                    auto span = char_span_to_token_span(tokens, start.get<int>(),
                                                        static_cast<int>(text.get<std::string>().size()));
                    if (span) {
                        ex.plausible_span = span;
                    } else {
                        std::cerr << "squad: warning: " << qpath
                                  << ": plausible answer does not align; dropping the span\n";
                        ++local.dropped_plausible;
                    }
                }
                out.push_back(std::move(ex));
            }
        }
    }
    if (stats) *stats = local;
    return out;
}

std::vector<Example> parse_squad_file(const std::string& path, ParseStats* stats) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("squad: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_squad_v2(ss.str(), stats);
}

// ---------------------------------------------------------------------------
// Synthetic task
// ---------------------------------------------------------------------------

SyntheticConfig SyntheticConfig::defaults() {
    SyntheticConfig c;
    c.entity_pool = {"flash flood", "winter storm", "brush fire", "heat wave",
                     "dust storm",  "mud slide",    "earthquake", "tornado",
                     "hail storm",  "blizzard",     "hurricane",  "ice storm"};
    c.event_pool = {"caused", "produced", "brought", "triggered"};
    c.unit_pool = {"thousand", "million", "billion", "trillion"};
    c.quantity_pool = {"10", "15", "20", "25", "30", "40", "50", "75"};
    return c;
}

namespace {

struct Fact {
    std::vector<std::string> entity_tokens;
    std::string verb, quantity, unit;
    Span entity_span;  // token positions in the assembled context
};

void append_fact(std::vector<std::string>& context, Fact& fact) {
    context.push_back("the");
    fact.entity_span.start = static_cast<int>(context.size());
    for (const auto& t : fact.entity_tokens) context.push_back(t);
    fact.entity_span.end = static_cast<int>(context.size()) - 1;
    context.push_back(fact.verb);
    context.push_back(fact.quantity);
    context.push_back(fact.unit);
    context.push_back("in");
    context.push_back("damage");
    context.push_back(".");
}

}  // namespace

std::vector<Example> generate_synthetic(const SyntheticConfig& config) {
    if (config.entity_pool.empty() || config.event_pool.empty() || config.unit_pool.empty() ||
        config.quantity_pool.empty()) {
        throw std::invalid_argument("synthetic: empty vocabulary pool");
    }
    const int k = config.context_facts_per_example;
    if (k < 1) throw std::invalid_argument("synthetic: need at least one fact per context");
    if (static_cast<size_t>(k) > config.entity_pool.size() ||
        static_cast<size_t>(k) >
            config.quantity_pool.size() * config.unit_pool.size()) {
        throw std::invalid_argument("synthetic: pools too small for distinct facts");
    }
    if (config.answerable_ratio < 0.0 || config.answerable_ratio > 1.0) {
        throw std::invalid_argument("synthetic: answerable_ratio outside [0, 1]");
    }

    std::mt19937_64 rng(config.rng_seed);
    const int n = config.num_examples;
    const int n_answerable =
        static_cast<int>(std::lround(config.answerable_ratio * static_cast<double>(n)));
    std::vector<uint8_t> flags(static_cast<size_t>(n), 0);
    std::fill(flags.begin(), flags.begin() + n_answerable, 1);
    shuffle_vec(flags, rng);

    std::vector<Example> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        // Distinct entities and distinct (quantity, unit) pairs per context,
        // so at most one fact can match the question.
        std::vector<int> entity_ids(config.entity_pool.size());
        for (size_t e = 0; e < entity_ids.size(); ++e) entity_ids[e] = static_cast<int>(e);
        shuffle_vec(entity_ids, rng);

        std::vector<std::pair<int, int>> pairs;
        while (static_cast<int>(pairs.size()) < k) {
            const int q = irand(rng, static_cast<int>(config.quantity_pool.size()));
            const int u = irand(rng, static_cast<int>(config.unit_pool.size()));
            if (std::find(pairs.begin(), pairs.end(), std::make_pair(q, u)) == pairs.end()) {
                pairs.emplace_back(q, u);
            }
        }

        std::vector<Fact> facts(static_cast<size_t>(k));
        std::vector<std::string> context;
        for (int f = 0; f < k; ++f) {
            Fact& fact = facts[static_cast<size_t>(f)];
            fact.entity_tokens = tokenize(config.entity_pool[static_cast<size_t>(entity_ids[f])]);
            fact.verb = config.event_pool[static_cast<size_t>(
                irand(rng, static_cast<int>(config.event_pool.size())))];
            fact.quantity = config.quantity_pool[static_cast<size_t>(pairs[f].first)];
            fact.unit = config.unit_pool[static_cast<size_t>(pairs[f].second)];
            append_fact(context, fact);
        }

        const int target = irand(rng, k);
        const Fact& t = facts[static_cast<size_t>(target)];
        std::string q_quantity = t.quantity;
        std::string q_unit = t.unit;
        const bool answerable = flags[static_cast<size_t>(i)] != 0;
        if (!answerable) {
            // One atomic mutation: quantity or unit. The result must match no
            // fact in this context.
            for (;;) {
                int qi = irand(rng, static_cast<int>(config.quantity_pool.size()));
                int ui = irand(rng, static_cast<int>(config.unit_pool.size()));
                std::pair<int, int> cand = irand(rng, 2) == 0
                                               ? std::make_pair(qi, pairs[target].second)
                                               : std::make_pair(pairs[target].first, ui);
                if (cand == pairs[target]) continue;
                if (std::find(pairs.begin(), pairs.end(), cand) != pairs.end()) continue;
                q_quantity = config.quantity_pool[static_cast<size_t>(cand.first)];
                q_unit = config.unit_pool[static_cast<size_t>(cand.second)];
                break;
            }
        }

        Example ex;
        ex.id = "syn-" + std::to_string(i);
        ex.raw_question_tokens = {"what", t.verb, q_quantity, q_unit, "in", "damage", "?"};
        ex.raw_context_tokens = context;
        ex.is_answerable = answerable;
        if (answerable) {
            ex.answer_span = t.entity_span;
            ex.plausible_span = t.entity_span;
        } else {
            ex.plausible_span = t.entity_span;  // the near-miss entity
        }
        out.push_back(std::move(ex));
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSONL
// ---------------------------------------------------------------------------

namespace {

json span_to_json(const std::optional<Span>& s) {
    if (!s) return nullptr;
    return json::array({s->start, s->end});
}

std::optional<Span> span_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return Span{j.at(0).get<int>(), j.at(1).get<int>()};
}

}  // namespace

void write_jsonl(const std::vector<Example>& examples, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("jsonl: cannot open " + path + " for writing");
    for (const auto& ex : examples) {
        json j{{"id", ex.id},
               {"question_tokens", ex.raw_question_tokens},
               {"context_tokens", ex.raw_context_tokens},
               {"answer_span", span_to_json(ex.answer_span)},
               {"plausible_span", span_to_json(ex.plausible_span)},
               {"is_answerable", ex.is_answerable}};
        out << j.dump() << "\n";
    }
}

std::vector<Example> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("jsonl: cannot open " + path);
    std::vector<Example> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error("jsonl: " + path + ":" + std::to_string(lineno) + ": " +
                                     e.what());
        }
        Example ex;
        ex.id = j.at("id").get<std::string>();
        ex.raw_question_tokens = j.at("question_tokens").get<std::vector<std::string>>();
        ex.raw_context_tokens = j.at("context_tokens").get<std::vector<std::string>>();
        ex.answer_span = span_from_json(j.at("answer_span"));
        ex.plausible_span = span_from_json(j.at("plausible_span"));
        ex.is_answerable = j.at("is_answerable").get<bool>();
        out.push_back(std::move(ex));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

int EncodedBatch::question_len(int b) const {
    int n = 0;
    for (int j = 0; j < max_q_len; ++j) {
        n += question_mask[static_cast<size_t>(b) * max_q_len + j] ? 1 : 0;
    }
    return n;
}

int EncodedBatch::context_len(int b) const {
    int n = 0;
    for (int j = 0; j < max_c_len; ++j) {
        n += context_mask[static_cast<size_t>(b) * max_c_len + j] ? 1 : 0;
    }
    return n;
}

std::vector<int> EncodedBatch::question_row(int b) const {
    const int n = question_len(b);
    return {question_ids.begin() + static_cast<size_t>(b) * max_q_len,
            question_ids.begin() + static_cast<size_t>(b) * max_q_len + n};
}

std::vector<int> EncodedBatch::context_row(int b) const {
    const int n = context_len(b);
    return {context_ids.begin() + static_cast<size_t>(b) * max_c_len,
            context_ids.begin() + static_cast<size_t>(b) * max_c_len + n};
}

std::vector<EncodedBatch> batchify(const std::vector<Example>& examples, int batch_size,
                                   const Vocab& vocab) {
    if (batch_size < 1) throw std::invalid_argument("batchify: batch_size must be positive");
    std::vector<EncodedBatch> out;
    for (size_t base = 0; base < examples.size(); base += static_cast<size_t>(batch_size)) {
        const int b = static_cast<int>(
            std::min(static_cast<size_t>(batch_size), examples.size() - base));
        EncodedBatch batch;
        batch.batch_size = b;
        for (int i = 0; i < b; ++i) {
            const Example& ex = examples[base + i];
            if (ex.raw_question_tokens.empty() || ex.raw_context_tokens.empty()) {
                throw std::invalid_argument("batchify: example '" + ex.id + "' has empty tokens");
            }
            batch.max_q_len = std::max(batch.max_q_len,
                                       static_cast<int>(ex.raw_question_tokens.size()));
            batch.max_c_len = std::max(batch.max_c_len,
                                       static_cast<int>(ex.raw_context_tokens.size()));
        }
        batch.question_ids.assign(static_cast<size_t>(b) * batch.max_q_len, Vocab::kPad);
        batch.context_ids.assign(static_cast<size_t>(b) * batch.max_c_len, Vocab::kPad);
        batch.question_mask.assign(batch.question_ids.size(), 0);
        batch.context_mask.assign(batch.context_ids.size(), 0);
        for (int i = 0; i < b; ++i) {
            const Example& ex = examples[base + i];
            for (size_t j = 0; j < ex.raw_question_tokens.size(); ++j) {
                batch.question_ids[static_cast<size_t>(i) * batch.max_q_len + j] =
                    vocab.get(ex.raw_question_tokens[j]);
                batch.question_mask[static_cast<size_t>(i) * batch.max_q_len + j] = 1;
            }
            for (size_t j = 0; j < ex.raw_context_tokens.size(); ++j) {
                batch.context_ids[static_cast<size_t>(i) * batch.max_c_len + j] =
                    vocab.get(ex.raw_context_tokens[j]);
                batch.context_mask[static_cast<size_t>(i) * batch.max_c_len + j] = 1;
            }
            batch.answer_start.push_back(ex.answer_span ? ex.answer_span->start : -1);
            batch.answer_end.push_back(ex.answer_span ? ex.answer_span->end : -1);
            batch.plausible_start.push_back(ex.plausible_span ? ex.plausible_span->start : -1);
            batch.plausible_end.push_back(ex.plausible_span ? ex.plausible_span->end : -1);
            batch.answerable.push_back(ex.is_answerable ? 1 : 0);
            batch.example_index.push_back(static_cast<int>(base + i));
        }
        out.push_back(std::move(batch));
    }
    return out;
}

}  // namespace relmod
