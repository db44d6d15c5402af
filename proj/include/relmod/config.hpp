#ifndef RELMOD_CONFIG_HPP
#define RELMOD_CONFIG_HPP

#include <cstdint>
#include <string>

namespace relmod {

/// Every knob of a training/evaluation run. Defaults follow the reference
/// setup: 16 context heads, 2 question heads, attention regularization
/// weight 0.0005, Adam at 0.0008 with decay 0.5 and patience 3.
struct RunConfig {
    // model dims
    int hidden = 64;
    int embed = 32;
    int n_context_heads = 16;
    int n_question_heads = 2;
    int d_g = 0;  // 0 resolves to `hidden`
    int d_r = 0;
    int d_f = 0;
    int d_z = 0;
    double alpha = 0.0005;
    double lambda_aux = 1.0;
    std::string activation = "tanh";
    bool eq3_bias = false;
    bool squared_frobenius = false;
    int max_span_len = 15;
    double tau = 0.0;

    // variant flags
    bool use_relnet = true;
    bool use_augment = true;
    bool baseline_fc_na = false;
    bool use_pooled_summary = false;

    // optimizer / loop
    double lr = 0.0008;
    double lr_decay = 0.5;
    int patience = 3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 32;
    int epochs = 15;
    uint64_t seed = 13;

    // data: file paths win over the synthetic generator
    std::string train_path;
    std::string dev_path;
    int synth_train = 2000;
    int synth_dev = 500;
    double synth_ratio = 0.5;
    int synth_facts = 4;
    uint64_t synth_seed = 7;

    /// Flat key=value file (one per line, '#' comments). Unknown keys are
    /// rejected. Flags given on the command line override file entries.
    static RunConfig from_file(const std::string& path);
    void apply_kv(const std::string& key, const std::string& value);

    std::string to_json_string() const;
    static RunConfig from_json_string(const std::string& text);
};

}  // namespace relmod

#endif  // RELMOD_CONFIG_HPP
