#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "relmod/checkpoint.hpp"
#include "relmod/config.hpp"
#include "relmod/data.hpp"
#include "relmod/gradcheck.hpp"
#include "relmod/inspect.hpp"
#include "relmod/train.hpp"

using namespace relmod;

namespace {

std::vector<Example> load_examples_any(const std::string& path) {
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        return parse_squad_file(path);
    }
    return read_jsonl(path);
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

std::vector<uint64_t> parse_u64_list(const std::string& csv) {
    std::vector<uint64_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoull(item));
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
}

// Binds RunConfig fields as CLI flags; values given on the command line win
// over the key=value config file.
class ConfigBinder {
public:
    explicit ConfigBinder(CLI::App* app) : app_(app) {
        app_->add_option("--config", config_path_, "flat key=value config file");
        opt_int("--hidden", &RunConfig::hidden);
        opt_int("--embed", &RunConfig::embed);
        opt_int("--n_context_heads", &RunConfig::n_context_heads);
        opt_int("--n_question_heads", &RunConfig::n_question_heads);
        opt_int("--d_g", &RunConfig::d_g);
        opt_int("--d_r", &RunConfig::d_r);
        opt_int("--d_f", &RunConfig::d_f);
        opt_int("--d_z", &RunConfig::d_z);
        opt_double("--alpha", &RunConfig::alpha);
        opt_double("--lambda_aux", &RunConfig::lambda_aux);
        opt_string("--activation", &RunConfig::activation);
        opt_bool("--eq3_bias", &RunConfig::eq3_bias);
        opt_bool("--squared_frobenius", &RunConfig::squared_frobenius);
        opt_int("--max_span_len", &RunConfig::max_span_len);
        opt_double("--tau", &RunConfig::tau);
        opt_bool("--use_relnet", &RunConfig::use_relnet);
        opt_bool("--use_augment", &RunConfig::use_augment);
        opt_bool("--baseline_fc_na", &RunConfig::baseline_fc_na);
        opt_bool("--use_pooled_summary", &RunConfig::use_pooled_summary);
        opt_double("--lr", &RunConfig::lr);
        opt_double("--lr_decay", &RunConfig::lr_decay);
        opt_int("--patience", &RunConfig::patience);
        opt_double("--beta1", &RunConfig::beta1);
        opt_double("--beta2", &RunConfig::beta2);
        opt_double("--adam_eps", &RunConfig::adam_eps);
        opt_int("--batch_size", &RunConfig::batch_size);
        opt_int("--epochs", &RunConfig::epochs);
        opt_u64("--seed", &RunConfig::seed);
        opt_string("--train", &RunConfig::train_path);
        opt_string("--dev", &RunConfig::dev_path);
        opt_int("--synth_train", &RunConfig::synth_train);
        opt_int("--synth_dev", &RunConfig::synth_dev);
        opt_double("--synth_ratio", &RunConfig::synth_ratio);
        opt_int("--synth_facts", &RunConfig::synth_facts);
        opt_u64("--synth_seed", &RunConfig::synth_seed);
    }

    RunConfig resolve() const {
        RunConfig cfg =
            config_path_.empty() ? RunConfig{} : RunConfig::from_file(config_path_);
        for (const auto& apply : appliers_) apply(cfg);
        return cfg;
    }

private:
    template <typename T>
    void bind(const std::string& name, T RunConfig::*field) {
        auto* option = app_->add_option(name, cli_.*field);
        appliers_.push_back([this, option, field](RunConfig& dst) {
            if (option->count() > 0) dst.*field = cli_.*field;
        });
    }
    void opt_int(const std::string& n, int RunConfig::*f) { bind(n, f); }
    void opt_double(const std::string& n, double RunConfig::*f) { bind(n, f); }
    void opt_string(const std::string& n, std::string RunConfig::*f) { bind(n, f); }
    void opt_u64(const std::string& n, uint64_t RunConfig::*f) { bind(n, f); }
    void opt_bool(const std::string& n, bool RunConfig::*f) { bind(n, f); }

    CLI::App* app_;
    RunConfig cli_;
    std::string config_path_;
    std::vector<std::function<void(RunConfig&)>> appliers_;
};

void print_metrics(const std::string& label, const Metrics& m) {
    std::cout << label << ": EM " << std::fixed << std::setprecision(2) << m.em << ", F1 " << m.f1
              << ", NA_acc " << m.na_accuracy << ", ans_acc " << m.answerable_accuracy << " ("
              << m.n_examples << " examples)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relation-module answerability model"};
    app.require_subcommand(1);

    // gen-data -------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset as JSON lines");
    std::string gen_out;
    SyntheticConfig synth = SyntheticConfig::defaults();
    gen->add_option("--out", gen_out, "output .jsonl path")->required();
    gen->add_option("--n", synth.num_examples, "number of examples");
    gen->add_option("--ratio", synth.answerable_ratio, "answerable fraction");
    gen->add_option("--facts", synth.context_facts_per_example, "facts per context");
    gen->add_option("--seed", synth.rng_seed, "generator seed");

    // train ----------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "train a model");
    ConfigBinder tr_cfg(tr);
    std::string tr_out = "model.ckpt";
    std::string tr_seeds;
    bool tr_quiet = false;
    tr->add_option("--out", tr_out, "checkpoint output path");
    tr->add_option("--seeds", tr_seeds, "comma-separated seeds; reports the mean");
    tr->add_flag("--quiet", tr_quiet, "suppress per-epoch logging");

    // eval -----------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string ev_ck, ev_data, ev_json;
    double ev_tau = 0.0;
    bool ev_tau_set = false;
    bool ev_sweep = false;
    int ev_threads = 1;
    ev->add_option("--checkpoint", ev_ck)->required();
    ev->add_option("--data", ev_data)->required();
    auto* ev_tau_opt = ev->add_option("--tau", ev_tau, "overrides the checkpoint tau");
    ev->add_flag("--sweep-tau", ev_sweep, "pick the best tau on this dataset");
    ev->add_option("--json", ev_json, "write metrics JSON here");
    ev->add_option("--threads", ev_threads, "evaluation fan-out");

    // ablate ---------------------------------------------------------------
    auto* ab = app.add_subcommand("ablate", "train and score the standard variants");
    ConfigBinder ab_cfg(ab);
    std::string ab_heads = "4,16,64";
    std::string ab_dir = "ablation";
    std::string ab_json;
    bool ab_quiet = false;
    ab->add_option("--heads", ab_heads, "comma-separated head counts");
    ab->add_option("--out-dir", ab_dir, "directory for per-variant checkpoints");
    ab->add_option("--json", ab_json, "write the report JSON here");
    ab->add_flag("--quiet", ab_quiet);

    // inspect --------------------------------------------------------------
    auto* in = app.add_subcommand("inspect", "dump per-head top-k token weights");
    std::string in_ck, in_data, in_id, in_out;
    int in_index = 0;
    int in_k = 5;
    in->add_option("--checkpoint", in_ck)->required();
    in->add_option("--data", in_data)->required();
    in->add_option("--index", in_index, "example index into the dataset");
    in->add_option("--id", in_id, "example id (overrides --index)");
    in->add_option("--k", in_k, "tokens per head");
    in->add_option("--out", in_out, "write JSON lines here instead of stdout");

    // gradcheck ------------------------------------------------------------
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    ConfigBinder gc_cfg(gc);
    double gc_step = 1e-5;
    std::string gc_json;
    bool gc_full = false;
    gc->add_option("--step", gc_step, "central-difference step");
    gc->add_option("--json", gc_json, "write the report JSON here");
    gc->add_flag("--full-size", gc_full, "use the configured dims instead of the micro config");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            auto examples = generate_synthetic(synth);
            write_jsonl(examples, gen_out);
            int answerable = 0;
            for (const auto& ex : examples) answerable += ex.is_answerable ? 1 : 0;
            std::cout << "wrote " << examples.size() << " examples (" << answerable
                      << " answerable) to " << gen_out << "\n";
        } else if (*tr) {
            RunConfig cfg = tr_cfg.resolve();
            std::vector<uint64_t> seeds =
                tr_seeds.empty() ? std::vector<uint64_t>{cfg.seed} : parse_u64_list(tr_seeds);
            auto train_examples = load_train_examples(cfg);
            auto dev_examples = load_dev_examples(cfg);
            Metrics mean;
            for (size_t si = 0; si < seeds.size(); ++si) {
                RunConfig run = cfg;
                run.seed = seeds[si];
                auto result = train_on(run, train_examples, dev_examples, !tr_quiet);
                const std::string path =
                    seeds.size() == 1 ? tr_out : tr_out + ".seed" + std::to_string(seeds[si]);
                result.best.save(path);
                print_metrics("seed " + std::to_string(seeds[si]) + " dev", result.best_dev);
                std::cout << "checkpoint: " << path << " (epoch " << result.best.epoch << ")\n";
                mean.em += result.best_dev.em / seeds.size();
                mean.f1 += result.best_dev.f1 / seeds.size();
                mean.na_accuracy += result.best_dev.na_accuracy / seeds.size();
                mean.answerable_accuracy += result.best_dev.answerable_accuracy / seeds.size();
                mean.n_examples = result.best_dev.n_examples;
            }
            if (seeds.size() > 1) print_metrics("mean dev", mean);
        } else if (*ev) {
            ev_tau_set = ev_tau_opt->count() > 0;
            auto ck = Checkpoint::load(ev_ck);
            auto examples = load_examples_any(ev_data);
            const double tau = ev_tau_set ? ev_tau : ck.config.tau;
            auto report = evaluate_checkpoint(ck, examples, tau, ev_threads);
            print_metrics("tau=" + std::to_string(tau), report.metrics);
            std::string metrics_json = report.metrics.to_json_string();
            if (ev_sweep) {
                const double best_tau = sweep_tau(examples, report.predictions);
                auto swept = evaluate_checkpoint(ck, examples, best_tau, ev_threads);
                print_metrics("swept tau=" + std::to_string(best_tau), swept.metrics);
                nlohmann::json j{{"tau", tau},
                                 {"metrics", nlohmann::json::parse(metrics_json)},
                                 {"swept_tau", best_tau},
                                 {"swept_metrics",
                                  nlohmann::json::parse(swept.metrics.to_json_string())}};
                metrics_json = j.dump(2);
            }
            if (!ev_json.empty()) write_text(ev_json, metrics_json);
        } else if (*ab) {
            RunConfig cfg = ab_cfg.resolve();
            auto rows = ablate(cfg, parse_int_list(ab_heads), ab_dir, !ab_quiet);
            for (const auto& row : rows) print_metrics(row.variant, row.dev);
            const std::string report = ablation_report_json(rows);
            if (!ab_json.empty()) write_text(ab_json, report);
            else std::cout << report << "\n";
        } else if (*in) {
            auto ck = Checkpoint::load(in_ck);
            auto examples = load_examples_any(in_data);
            const Example* target = nullptr;
            if (!in_id.empty()) {
                for (const auto& ex : examples) {
                    if (ex.id == in_id) target = &ex;
                }
                if (!target) throw std::runtime_error("inspect: no example with id " + in_id);
            } else {
                if (in_index < 0 || in_index >= static_cast<int>(examples.size())) {
                    throw std::runtime_error("inspect: index out of range");
                }
                target = &examples[static_cast<size_t>(in_index)];
            }
            Model model = ck.restore_model();
            auto heads = inspect_example(model, ck.vocab(), *target, in_k);
            const std::string lines = inspection_to_json_lines(target->id, heads);
            if (in_out.empty()) std::cout << lines;
            else write_text(in_out, lines);
        } else if (*gc) {
            RunConfig cfg = gc_full ? gc_cfg.resolve() : gradcheck_micro_config();
            auto report = gradcheck(cfg, gc_step);
            std::cout << report.to_table();
            if (!gc_json.empty()) write_text(gc_json, report.to_json_string());
            if (report.worst >= 1e-4) {
                std::cerr << "gradcheck: FAILED (worst " << report.worst << ")\n";
                return 1;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
