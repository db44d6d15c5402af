#include "relmod/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "relmod/adam.hpp"

using nlohmann::json;

namespace relmod {

std::string EpochStats::to_json_string() const {
    json j{{"epoch", epoch},
           {"train_loss", train_loss},
           {"dev_loss", dev_loss},
           {"lr", lr},
           {"dev", json::parse(dev.to_json_string())}};
    return j.dump();
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<Example> load_path(const std::string& path) {
    if (ends_with(path, ".json")) return parse_squad_file(path);
    return read_jsonl(path);
}

SyntheticConfig synth_config(const RunConfig& cfg, int n, uint64_t seed) {
    SyntheticConfig s = SyntheticConfig::defaults();
    s.num_examples = n;
    s.answerable_ratio = cfg.synth_ratio;
    s.context_facts_per_example = cfg.synth_facts;
    s.rng_seed = seed;
    return s;
}

int irand(std::mt19937_64& rng, int n) {
    return static_cast<int>(rng() % static_cast<uint64_t>(n));
}

ScoredPair score_example(const Example& ex, const reader::SpanPrediction& pred) {
    ScoredPair pair;
    pair.gold_answerable = ex.is_answerable;
    if (ex.is_answerable && ex.answer_span) {
        pair.gold_tokens.assign(ex.raw_context_tokens.begin() + ex.answer_span->start,
                                ex.raw_context_tokens.begin() + ex.answer_span->end + 1);
    }
    pair.pred_answerable = !pred.no_answer;
    if (!pred.no_answer) {
        pair.pred_tokens.assign(ex.raw_context_tokens.begin() + pred.span.start,
                                ex.raw_context_tokens.begin() + pred.span.end + 1);
    }
    return pair;
}

}  // namespace

std::vector<Example> load_train_examples(const RunConfig& cfg) {
    if (!cfg.train_path.empty()) return load_path(cfg.train_path);
    return generate_synthetic(synth_config(cfg, cfg.synth_train, cfg.synth_seed));
}

std::vector<Example> load_dev_examples(const RunConfig& cfg) {
    if (!cfg.dev_path.empty()) return load_path(cfg.dev_path);
    return generate_synthetic(synth_config(cfg, cfg.synth_dev, cfg.synth_seed + 1));
}

EvalReport evaluate_model(const Model& model, const Vocab& vocab,
                          const std::vector<Example>& examples, double tau, int threads) {
    EvalReport report;
    const int n = static_cast<int>(examples.size());
    report.predictions.resize(static_cast<size_t>(n));
    std::vector<double> losses(static_cast<size_t>(n), 0.0);

    std::vector<Example> encoded = examples;
    encode_examples(encoded, vocab);

    auto worker = [&](int begin, int end) {
        NoGradGuard ng;
        for (int i = begin; i < end; ++i) {
            const Example& ex = encoded[static_cast<size_t>(i)];
            auto out = model.forward(ex.question_tokens, ex.context_tokens);
            ExampleLabels labels{ex.answer_span, ex.plausible_span, ex.is_answerable};
            losses[static_cast<size_t>(i)] = model.example_loss(out, labels)->item();
            report.predictions[static_cast<size_t>(i)] =
                reader::predict_span(out.start_logits->val, out.end_logits->val, out.context_len,
                                     model.config().max_span_len, tau);
        }
    };

    const int workers = std::max(1, std::min(threads, n));
    if (workers == 1) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (n + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int begin = w * chunk;
            const int end = std::min(n, begin + chunk);
            if (begin < end) pool.emplace_back(worker, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    double loss_sum = 0.0;
    std::vector<ScoredPair> pairs;
    pairs.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        loss_sum += losses[static_cast<size_t>(i)];
        pairs.push_back(score_example(examples[static_cast<size_t>(i)],
                                      report.predictions[static_cast<size_t>(i)]));
    }
    report.mean_loss = n > 0 ? loss_sum / n : 0.0;
    report.metrics = aggregate(pairs);
    return report;
}

EvalReport evaluate_checkpoint(const Checkpoint& ck, const std::vector<Example>& examples,
                               double tau, int threads) {
    Model model = ck.restore_model();
    return evaluate_model(model, ck.vocab(), examples, tau, threads);
}

TrainResult train_on(const RunConfig& cfg, const std::vector<Example>& train_examples,
                     const std::vector<Example>& dev_examples, bool verbose) {
    if (train_examples.empty()) throw std::invalid_argument("train: no training examples");
    Vocab vocab = Vocab::build(train_examples);
    Model model(ModelConfig::from_run_config(cfg, vocab.size()), cfg.seed);
    return train_model(model, cfg, vocab, train_examples, dev_examples, verbose);
}

TrainResult train_model(Model& model, const RunConfig& cfg, const Vocab& vocab,
                        const std::vector<Example>& train_examples,
                        const std::vector<Example>& dev_examples, bool verbose) {
    if (train_examples.empty()) throw std::invalid_argument("train: no training examples");
    std::vector<Example> train_set = train_examples;
    encode_examples(train_set, vocab);

    Adam opt(model.trainable(), AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps});
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5DEECE66DULL);

    TrainResult result;
    LrSchedule schedule{cfg.lr, cfg.lr_decay, cfg.patience};
    json history = json::array();

    std::vector<int> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<size_t>(irand(shuffle_rng, static_cast<int>(i)))]);
        }
        std::vector<Example> shuffled;
        shuffled.reserve(train_set.size());
        for (int idx : order) shuffled.push_back(train_set[static_cast<size_t>(idx)]);

        double loss_sum = 0.0;
        int example_count = 0;
        auto batches = batchify(shuffled, cfg.batch_size, vocab);
        for (size_t bi = 0; bi < batches.size(); ++bi) {
            opt.zero_grad();
            auto loss = model.batch_loss(batches[bi]);
            const double value = loss->item();
            if (!std::isfinite(value)) {
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " + std::to_string(bi));
            }
            backward(loss);
            opt.step();
            loss_sum += value * batches[bi].batch_size;
            example_count += batches[bi].batch_size;
        }

        auto dev = evaluate_model(model, vocab, dev_examples, cfg.tau, 1);
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = example_count > 0 ? loss_sum / example_count : 0.0;
        stats.dev_loss = dev.mean_loss;
        stats.lr = opt.lr();
        stats.dev = dev.metrics;
        result.history.push_back(stats);
        history.push_back(json::parse(stats.to_json_string()));
        if (verbose) {
            std::cerr << "epoch " << epoch << ": train_loss " << stats.train_loss << ", dev_loss "
                      << stats.dev_loss << ", dev NA " << dev.metrics.na_accuracy << "%, dev ans "
                      << dev.metrics.answerable_accuracy << "%, lr " << stats.lr << "\n";
        }

        if (schedule.observe(dev.mean_loss)) {
            result.best = snapshot(model, cfg, vocab, epoch, history.dump());
            result.best_dev = dev.metrics;
        } else {
            opt.set_lr(schedule.lr);
        }
    }
    if (result.best.tensor_names.empty()) {
        result.best = snapshot(model, cfg, vocab, cfg.epochs, history.dump());
    } else {
        // refresh the stored history to cover the full run
        result.best.metric_history_json = history.dump();
    }
    return result;
}

TrainResult train(const RunConfig& cfg, bool verbose) {
    return train_on(cfg, load_train_examples(cfg), load_dev_examples(cfg), verbose);
}

double sweep_tau(const std::vector<Example>& examples,
                 const std::vector<reader::SpanPrediction>& predictions) {
    if (examples.size() != predictions.size()) {
        throw std::invalid_argument("sweep_tau: prediction count mismatch");
    }
    // NO_ANSWER iff margin + tau > 0 with margin = na - best, so candidate
    // taus sit just above each observed -margin.
    std::vector<double> margins;
    margins.reserve(predictions.size());
    for (const auto& p : predictions) margins.push_back(p.na_score - p.best_span_score);
    std::vector<double> candidates;
    candidates.push_back(-1e30);
    for (double m : margins) candidates.push_back(-m + 1e-9);
    std::sort(candidates.begin(), candidates.end());

    double best_tau = 0.0;
    int best_correct = -1;
    for (double tau : candidates) {
        int correct = 0;
        for (size_t i = 0; i < examples.size(); ++i) {
            const bool predicted_na = margins[i] + tau > 0.0;
            if (predicted_na == !examples[i].is_answerable) ++correct;
        }
        if (correct > best_correct) {
            best_correct = correct;
            best_tau = tau;
        }
    }
    return best_tau;
}

Metrics metrics_at_tau(const std::vector<Example>& examples,
                       const std::vector<reader::SpanPrediction>& predictions, double tau) {
    if (examples.size() != predictions.size()) {
        throw std::invalid_argument("metrics_at_tau: prediction count mismatch");
    }
    std::vector<ScoredPair> pairs;
    pairs.reserve(examples.size());
    for (size_t i = 0; i < examples.size(); ++i) {
        reader::SpanPrediction pred = predictions[i];
        pred.no_answer = (pred.na_score - pred.best_span_score + tau) > 0.0;
        pairs.push_back(score_example(examples[i], pred));
    }
    return aggregate(pairs);
}

std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<int>& head_counts,
                                const std::string& out_dir, bool verbose) {
    std::filesystem::create_directories(out_dir);
    auto train_examples = load_train_examples(base);
    auto dev_examples = load_dev_examples(base);

    std::vector<std::pair<std::string, RunConfig>> variants;
    for (int heads : head_counts) {
        RunConfig cfg = base;
        cfg.use_relnet = true;
        cfg.baseline_fc_na = false;
        cfg.use_augment = true;
        cfg.n_context_heads = heads;
        variants.emplace_back("rm_heads" + std::to_string(heads), cfg);
    }
    {
        RunConfig cfg = base;  // plausible-answer supervision without the relation module
        cfg.use_relnet = false;
        cfg.baseline_fc_na = false;
        cfg.use_augment = true;
        variants.emplace_back("plausible_only", cfg);
    }
    {
        RunConfig cfg = base;  // relation module fed the raw context vector
        cfg.use_relnet = true;
        cfg.baseline_fc_na = false;
        cfg.use_augment = false;
        variants.emplace_back("no_augment", cfg);
    }
    {
        RunConfig cfg = base;  // single fully connected layer on the pooled context
        cfg.use_relnet = false;
        cfg.baseline_fc_na = true;
        cfg.use_augment = false;
        variants.emplace_back("fc_baseline", cfg);
    }

    std::vector<AblationRow> rows;
    for (const auto& [name, cfg] : variants) {
        if (verbose) std::cerr << "ablate: training variant '" << name << "'\n";
        auto result = train_on(cfg, train_examples, dev_examples, verbose);
        AblationRow row;
        row.variant = name;
        row.config = cfg;
        row.dev = result.best_dev;
        row.checkpoint_path = out_dir + "/" + name + ".ckpt";
        result.best.save(row.checkpoint_path);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_report_json(const std::vector<AblationRow>& rows) {
    json report = json::array();
    for (const auto& row : rows) {
        report.push_back({{"variant", row.variant},
                          {"metrics", json::parse(row.dev.to_json_string())},
                          {"checkpoint", row.checkpoint_path},
                          {"n_context_heads", row.config.n_context_heads},
                          {"use_relnet", row.config.use_relnet},
                          {"use_augment", row.config.use_augment},
                          {"baseline_fc_na", row.config.baseline_fc_na}});
    }
    return report.dump(2);
}

}  // namespace relmod
