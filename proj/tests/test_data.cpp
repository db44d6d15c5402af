#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <set>

#include "relmod/data.hpp"

using namespace relmod;

namespace {

std::string fixture_path(const char* name) {
    return std::string(RELMOD_FIXTURE_DIR) + "/" + name;
}

// Independent rule-based reading of a generated context: facts are
// "the <entity..> <verb> <qty> <unit> in damage ." sentences.
struct OracleFact {
    std::string quantity, unit;
    int entity_start, entity_end;
};

std::vector<OracleFact> oracle_parse_facts(const std::vector<std::string>& ctx) {
    std::vector<OracleFact> facts;
    size_t begin = 0;
    for (size_t i = 0; i < ctx.size(); ++i) {
        if (ctx[i] != ".") continue;
        // sentence = [begin, i]
        REQUIRE(ctx[begin] == "the");
        REQUIRE(i - begin >= 7);
        REQUIRE(ctx[i - 1] == "damage");
        REQUIRE(ctx[i - 2] == "in");
        OracleFact f;
        f.unit = ctx[i - 3];
        f.quantity = ctx[i - 4];
        f.entity_start = static_cast<int>(begin) + 1;
        f.entity_end = static_cast<int>(i) - 6;
        facts.push_back(f);
        begin = i + 1;
    }
    return facts;
}

}  // namespace

TEST_CASE("tokenizer lowercases and splits punctuation") {
    auto toks = tokenize("The U.S. paid $20 billion!");
    std::vector<std::string> expect = {"the", "u", ".", "s", ".", "paid",
                                       "$",   "20", "billion", "!"};
    CHECK(toks == expect);

    auto with_offsets = tokenize_with_offsets("ab  cd");
    REQUIRE(with_offsets.size() == 2);
    CHECK(with_offsets[0].begin == 0);
    CHECK(with_offsets[0].end == 2);
    CHECK(with_offsets[1].begin == 4);
    CHECK(with_offsets[1].end == 6);
}

TEST_CASE("squad fixture parses with exact counts, spans and flags") {
    ParseStats stats;
    auto examples = parse_squad_file(fixture_path("squad_small.json"), &stats);
    REQUIRE(examples.size() == 3);
    CHECK(stats.skipped_unalignable == 0);

    const Example& ans = examples[0];
    CHECK(ans.id == "fix-1");
    CHECK(ans.is_answerable);
    REQUIRE(ans.answer_span.has_value());
    CHECK(ans.answer_span->start == 5);
    CHECK(ans.answer_span->end == 7);
    REQUIRE(ans.plausible_span.has_value());
    CHECK(*ans.plausible_span == *ans.answer_span);
    CHECK(ans.raw_context_tokens[5] == "20");
    CHECK(ans.raw_context_tokens[7] == "dollars");

    const Example& imp = examples[1];
    CHECK_FALSE(imp.is_answerable);
    CHECK_FALSE(imp.answer_span.has_value());
    REQUIRE(imp.plausible_span.has_value());
    CHECK(imp.plausible_span->start == 2);
    CHECK(imp.plausible_span->end == 3);
    CHECK(imp.raw_context_tokens[2] == "northridge");

    const Example& bare = examples[2];
    CHECK_FALSE(bare.is_answerable);
    CHECK_FALSE(bare.answer_span.has_value());
    CHECK_FALSE(bare.plausible_span.has_value());
}

TEST_CASE("squad: empty data array gives empty list") {
    CHECK(parse_squad_v2(R"({"data": []})").empty());
}

TEST_CASE("squad: answer starting at character 0 maps to token 0") {
    const char* doc = R"({"data": [{"paragraphs": [{
        "context": "Earthquakes happen often in this region.",
        "qas": [{"id": "q0", "question": "What happens often?",
                 "is_impossible": false,
                 "answers": [{"text": "Earthquakes", "answer_start": 0}]}]}]}]})";
    auto examples = parse_squad_v2(doc);
    REQUIRE(examples.size() == 1);
    REQUIRE(examples[0].answer_span.has_value());
    CHECK(examples[0].answer_span->start == 0);
    CHECK(examples[0].answer_span->end == 0);
}

TEST_CASE("squad: missing mandatory fields name the path") {
    const char* doc = R"({"data": [{"paragraphs": [{
        "context": "Some context.",
        "qas": [{"id": "q1", "answers": []}]}]}]})";
    try {
        parse_squad_v2(doc);
        FAIL("expected error");
    } catch (const std::runtime_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("data[0].paragraphs[0].qas[0]") != std::string::npos);
        CHECK(msg.find("question") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_squad_v2("{not json"), std::runtime_error);
    CHECK_THROWS_AS(parse_squad_v2(R"({"nope": 1})"), std::runtime_error);
}

TEST_CASE("squad: unalignable answer offsets are skipped and counted") {
    const char* doc = R"({"data": [{"paragraphs": [{
        "context": "Short context here.",
        "qas": [
          {"id": "bad", "question": "Q?", "is_impossible": false,
           "answers": [{"text": "missing", "answer_start": 5000}]},
          {"id": "good", "question": "Q?", "is_impossible": false,
           "answers": [{"text": "Short", "answer_start": 0}]}
        ]}]}]})";
    ParseStats stats;
    auto examples = parse_squad_v2(doc, &stats);
    REQUIRE(examples.size() == 1);
    CHECK(examples[0].id == "good");
    CHECK(stats.skipped_unalignable == 1);
}

TEST_CASE("synthetic: deterministic under the seed") {
    auto cfg = SyntheticConfig::defaults();
    cfg.num_examples = 50;
    cfg.rng_seed = 99;
    auto a = generate_synthetic(cfg);
    auto b = generate_synthetic(cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].raw_context_tokens == b[i].raw_context_tokens);
        CHECK(a[i].raw_question_tokens == b[i].raw_question_tokens);
        CHECK(a[i].is_answerable == b[i].is_answerable);
        CHECK(a[i].answer_span == b[i].answer_span);
        CHECK(a[i].plausible_span == b[i].plausible_span);
    }
}

TEST_CASE("synthetic: answerable counts are exact by construction") {
    auto cfg = SyntheticConfig::defaults();
    cfg.num_examples = 100;
    cfg.answerable_ratio = 1.0;
    auto all = generate_synthetic(cfg);
    CHECK(all.size() == 100);
    for (const auto& ex : all) CHECK(ex.is_answerable);

    cfg.num_examples = 1000;
    cfg.answerable_ratio = 0.5;
    auto half = generate_synthetic(cfg);
    int n_ans = 0;
    for (const auto& ex : half) {
        if (ex.is_answerable) {
            ++n_ans;
        } else {
            CHECK(ex.plausible_span.has_value());
        }
    }
    CHECK(n_ans == 500);
}

TEST_CASE("synthetic: rule-based oracle re-derives answerability and spans") {
    auto cfg = SyntheticConfig::defaults();
    cfg.num_examples = 400;
    cfg.rng_seed = 1234;
    auto examples = generate_synthetic(cfg);
    for (const auto& ex : examples) {
        auto facts = oracle_parse_facts(ex.raw_context_tokens);
        CHECK(static_cast<int>(facts.size()) == cfg.context_facts_per_example);
        REQUIRE(ex.raw_question_tokens.size() == 7);
        const std::string& q_qty = ex.raw_question_tokens[2];
        const std::string& q_unit = ex.raw_question_tokens[3];

        int matches = 0;
        const OracleFact* match = nullptr;
        int near_misses = 0;
        for (const auto& f : facts) {
            const bool qm = f.quantity == q_qty;
            const bool um = f.unit == q_unit;
            if (qm && um) {
                ++matches;
                match = &f;
            } else if (qm != um) {
                ++near_misses;
            }
        }
        if (ex.is_answerable) {
            CHECK(matches == 1);
            REQUIRE(ex.answer_span.has_value());
            CHECK(ex.answer_span->start == match->entity_start);
            CHECK(ex.answer_span->end == match->entity_end);
        } else {
            CHECK(matches == 0);
            // one atomic mutation away from an answerable counterpart
            CHECK(near_misses >= 1);
            REQUIRE(ex.plausible_span.has_value());
            bool plausible_is_entity = false;
            for (const auto& f : facts) {
                if (f.entity_start == ex.plausible_span->start &&
                    f.entity_end == ex.plausible_span->end) {
                    const bool qm = f.quantity == q_qty;
                    const bool um = f.unit == q_unit;
                    plausible_is_entity = true;
                    CHECK(qm != um);  // exactly one component differs
                }
            }
            CHECK(plausible_is_entity);
        }
    }
}

TEST_CASE("jsonl round trip preserves examples") {
    auto cfg = SyntheticConfig::defaults();
    cfg.num_examples = 20;
    auto examples = generate_synthetic(cfg);
    const std::string path = "test_roundtrip.jsonl";
    write_jsonl(examples, path);
    auto back = read_jsonl(path);
    std::remove(path.c_str());
    REQUIRE(back.size() == examples.size());
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].id == examples[i].id);
        CHECK(back[i].raw_question_tokens == examples[i].raw_question_tokens);
        CHECK(back[i].raw_context_tokens == examples[i].raw_context_tokens);
        CHECK(back[i].answer_span == examples[i].answer_span);
        CHECK(back[i].plausible_span == examples[i].plausible_span);
        CHECK(back[i].is_answerable == examples[i].is_answerable);
    }
}

TEST_CASE("batchify pads to per-batch maxima with consistent masks") {
    Example a;
    a.id = "a";
    a.raw_question_tokens = {"what", "now"};
    a.raw_context_tokens = {"one", "two", "three", "four", "five"};
    a.is_answerable = false;
    Example b = a;
    b.id = "b";
    b.raw_context_tokens = {"1", "2", "3", "4", "5", "6", "7", "8", "9"};
    std::vector<Example> examples = {a, b};
    Vocab vocab = Vocab::build(examples);

    auto batches = batchify(examples, 8, vocab);
    REQUIRE(batches.size() == 1);
    const auto& batch = batches[0];
    CHECK(batch.batch_size == 2);
    CHECK(batch.max_c_len == 9);
    CHECK(batch.context_len(0) == 5);
    CHECK(batch.context_len(1) == 9);
    for (int j = 5; j < 9; ++j) CHECK(batch.context_ids[j] == Vocab::kPad);

    CHECK(batchify({}, 4, vocab).empty());
}

TEST_CASE("batchify maps out-of-vocab tokens to unk") {
    Example a;
    a.id = "a";
    a.raw_question_tokens = {"known"};
    a.raw_context_tokens = {"known"};
    std::vector<Example> train = {a};
    Vocab vocab = Vocab::build(train);

    Example oov = a;
    oov.raw_context_tokens = {"known", "martian"};
    auto batches = batchify({oov}, 1, vocab);
    CHECK(batches[0].context_ids[0] != Vocab::kUnk);
    CHECK(batches[0].context_ids[1] == Vocab::kUnk);
}

TEST_CASE("parse -> batchify -> unpad round trip preserves ids and labels") {
    auto examples = parse_squad_file(fixture_path("squad_small.json"));
    Vocab vocab = Vocab::build(examples);
    encode_examples(examples, vocab);

    auto batches = batchify(examples, 2, vocab);
    size_t seen = 0;
    for (const auto& batch : batches) {
        for (int i = 0; i < batch.batch_size; ++i) {
            const Example& ex = examples[static_cast<size_t>(batch.example_index[i])];
            CHECK(batch.question_row(i) == ex.question_tokens);
            CHECK(batch.context_row(i) == ex.context_tokens);
            const int want_start = ex.answer_span ? ex.answer_span->start : -1;
            CHECK(batch.answer_start[i] == want_start);
            const int want_pl = ex.plausible_span ? ex.plausible_span->start : -1;
            CHECK(batch.plausible_start[i] == want_pl);
            CHECK((batch.answerable[i] != 0) == ex.is_answerable);
            ++seen;
        }
    }
    CHECK(seen == examples.size());
}
