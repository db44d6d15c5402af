#ifndef RELMOD_TRAIN_HPP
#define RELMOD_TRAIN_HPP

#include <limits>
#include <string>
#include <vector>

#include "relmod/checkpoint.hpp"
#include "relmod/config.hpp"
#include "relmod/data.hpp"
#include "relmod/metrics.hpp"
#include "relmod/model.hpp"
#include "relmod/reader.hpp"

namespace relmod {

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double dev_loss = 0.0;
    double lr = 0.0;
    Metrics dev;

    std::string to_json_string() const;
};

/// Plateau schedule: the rate halves (times `decay`) once the dev loss has
/// failed to improve for `patience` consecutive epochs.
struct LrSchedule {
    double lr;
    double decay;
    int patience;
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;

    /// Feeds one epoch's dev loss; returns true when this epoch improved.
    bool observe(double dev_loss) {
        if (dev_loss < best) {
            best = dev_loss;
            stale = 0;
            return true;
        }
        if (++stale >= patience) {
            lr *= decay;
            stale = 0;
        }
        return false;
    }
};

struct TrainResult {
    Checkpoint best;  // lowest dev loss
    std::vector<EpochStats> history;
    Metrics best_dev;
};

struct EvalReport {
    double mean_loss = 0.0;
    Metrics metrics;
    std::vector<reader::SpanPrediction> predictions;
};

/// Loads training/dev data per the config: file paths when given (.json is
/// SQuAD 2.0, anything else line-delimited JSON), the synthetic generator
/// otherwise (dev uses synth_seed + 1).
std::vector<Example> load_train_examples(const RunConfig& cfg);
std::vector<Example> load_dev_examples(const RunConfig& cfg);

/// Forward pass over every example with frozen parameters; fans out across
/// `threads` workers (predictions merge in example order either way).
EvalReport evaluate_model(const Model& model, const Vocab& vocab,
                          const std::vector<Example>& examples, double tau, int threads = 1);

EvalReport evaluate_checkpoint(const Checkpoint& ck, const std::vector<Example>& examples,
                               double tau, int threads = 1);

/// Joint training with Adam, epoch-level dev evaluation, lr halving after
/// `patience` epochs without dev-loss improvement, and best-dev checkpoint
/// selection. Deterministic for a fixed config. A non-finite loss aborts
/// with the offending epoch/batch id.
TrainResult train_on(const RunConfig& cfg, const std::vector<Example>& train_examples,
                     const std::vector<Example>& dev_examples, bool verbose = false);
TrainResult train(const RunConfig& cfg, bool verbose = false);

/// Same loop on an existing (possibly warm-started) model.
TrainResult train_model(Model& model, const RunConfig& cfg, const Vocab& vocab,
                        const std::vector<Example>& train_examples,
                        const std::vector<Example>& dev_examples, bool verbose = false);

/// Scans the observed na-vs-span score margins on a dataset and returns the
/// tau that maximizes classification accuracy (ties to the smaller tau).
double sweep_tau(const std::vector<Example>& examples,
                 const std::vector<reader::SpanPrediction>& predictions);

/// Re-derives metrics from existing predictions at a different tau; spans
/// and scores are tau-independent, only the no-answer decision moves.
Metrics metrics_at_tau(const std::vector<Example>& examples,
                       const std::vector<reader::SpanPrediction>& predictions, double tau);

struct AblationRow {
    std::string variant;
    RunConfig config;
    Metrics dev;
    std::string checkpoint_path;
};

/// Trains and evaluates the head-count variants plus the plausible-only,
/// no-augmentation and pooled-FC baselines; writes one checkpoint per
/// variant under out_dir and returns the report rows.
std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<int>& head_counts,
                                const std::string& out_dir, bool verbose = false);

std::string ablation_report_json(const std::vector<AblationRow>& rows);

}  // namespace relmod

#endif  // RELMOD_TRAIN_HPP
