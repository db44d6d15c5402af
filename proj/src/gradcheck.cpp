#include "relmod/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "relmod/model.hpp"
#include "relmod/train.hpp"

namespace relmod {

std::string GradCheckReport::to_json_string() const {
    nlohmann::json groups_json = nlohmann::json::array();
    for (const auto& g : groups) {
        groups_json.push_back(
            {{"group", g.name}, {"max_rel_err", g.max_rel_err}, {"n_params", g.n_params}});
    }
    nlohmann::json j{{"step", step}, {"worst", worst}, {"groups", groups_json}};
    return j.dump(2);
}

std::string GradCheckReport::to_table() const {
    std::ostringstream os;
    os << std::left << std::setw(16) << "group" << std::setw(12) << "params"
       << "max_rel_err\n";
    for (const auto& g : groups) {
        os << std::left << std::setw(16) << g.name << std::setw(12) << g.n_params
           << std::scientific << std::setprecision(3) << g.max_rel_err << "\n";
    }
    os << "worst: " << std::scientific << std::setprecision(3) << worst << " (step " << step
       << ")\n";
    return os.str();
}

RunConfig gradcheck_micro_config() {
    RunConfig cfg;
    cfg.hidden = 6;
    cfg.embed = 4;
    cfg.n_context_heads = 3;
    cfg.n_question_heads = 2;
    cfg.d_g = 5;
    cfg.d_r = 4;
    cfg.d_f = 5;
    cfg.d_z = 4;
    cfg.synth_facts = 1;
    cfg.seed = 101;
    return cfg;
}

GradCheckReport gradcheck(const RunConfig& cfg, double step) {
    // Fixed micro batch: one answerable and one unanswerable example with a
    // plausible span, so every loss term is active.
    SyntheticConfig synth = SyntheticConfig::defaults();
    synth.num_examples = 8;
    synth.answerable_ratio = 0.5;
    synth.context_facts_per_example = std::min(cfg.synth_facts, 2);
    synth.rng_seed = 2024;
    auto pool = generate_synthetic(synth);
    std::vector<Example> batch_examples;
    for (const auto& ex : pool) {
        if (ex.is_answerable) {
            batch_examples.push_back(ex);
            break;
        }
    }
    for (const auto& ex : pool) {
        if (!ex.is_answerable && ex.plausible_span) {
            batch_examples.push_back(ex);
            break;
        }
    }
    if (batch_examples.size() != 2) throw std::runtime_error("gradcheck: micro batch not found");

    Vocab vocab = Vocab::build(batch_examples);
    encode_examples(batch_examples, vocab);
    auto batches = batchify(batch_examples, 2, vocab);

    Model model(ModelConfig::from_run_config(cfg, vocab.size()), cfg.seed);

    auto loss_value = [&]() {
        NoGradGuard ng;
        return model.batch_loss(batches[0])->item();
    };

    // One analytic pass.
    for (const auto& [name, t] : model.named_params()) t->zero_grad();
    backward(model.batch_loss(batches[0]));

    GradCheckReport report;
    report.step = step;
    for (const auto& [name, tensor] : model.named_params()) {
        const std::string group = name.substr(0, name.find('.'));
        if (report.groups.empty() || report.groups.back().name != group) {
            report.groups.push_back({group, 0.0, 0});
        }
        auto& entry = report.groups.back();
        for (size_t i = 0; i < tensor->val.size(); ++i) {
            const double keep = tensor->val[i];
            tensor->val[i] = keep + step;
            const double up = loss_value();
            tensor->val[i] = keep - step;
            const double down = loss_value();
            tensor->val[i] = keep;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = tensor->grad[i];
            const double denom =
                std::max({std::abs(analytic), std::abs(numeric), 1e-3});
            entry.max_rel_err = std::max(entry.max_rel_err, std::abs(analytic - numeric) / denom);
            ++entry.n_params;
        }
        report.worst = std::max(report.worst, entry.max_rel_err);
    }
    return report;
}

}  // namespace relmod
