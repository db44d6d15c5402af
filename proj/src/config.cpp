#include "relmod/config.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

using nlohmann::json;

namespace relmod {

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config: bad boolean '" + v + "'");
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace

void RunConfig::apply_kv(const std::string& key, const std::string& value) {
    if (key == "hidden") hidden = std::stoi(value);
    else if (key == "embed") embed = std::stoi(value);
    else if (key == "n_context_heads") n_context_heads = std::stoi(value);
    else if (key == "n_question_heads") n_question_heads = std::stoi(value);
    else if (key == "d_g") d_g = std::stoi(value);
    else if (key == "d_r") d_r = std::stoi(value);
    else if (key == "d_f") d_f = std::stoi(value);
    else if (key == "d_z") d_z = std::stoi(value);
    else if (key == "alpha") alpha = std::stod(value);
    else if (key == "lambda_aux") lambda_aux = std::stod(value);
    else if (key == "activation") activation = value;
    else if (key == "eq3_bias") eq3_bias = parse_bool(value);
    else if (key == "squared_frobenius") squared_frobenius = parse_bool(value);
    else if (key == "max_span_len") max_span_len = std::stoi(value);
    else if (key == "tau") tau = std::stod(value);
    else if (key == "use_relnet") use_relnet = parse_bool(value);
    else if (key == "use_augment") use_augment = parse_bool(value);
    else if (key == "baseline_fc_na") baseline_fc_na = parse_bool(value);
    else if (key == "use_pooled_summary") use_pooled_summary = parse_bool(value);
    else if (key == "lr") lr = std::stod(value);
    else if (key == "lr_decay") lr_decay = std::stod(value);
    else if (key == "patience") patience = std::stoi(value);
    else if (key == "beta1") beta1 = std::stod(value);
    else if (key == "beta2") beta2 = std::stod(value);
    else if (key == "adam_eps") adam_eps = std::stod(value);
    else if (key == "batch_size") batch_size = std::stoi(value);
    else if (key == "epochs") epochs = std::stoi(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "train_path") train_path = value;
    else if (key == "dev_path") dev_path = value;
    else if (key == "synth_train") synth_train = std::stoi(value);
    else if (key == "synth_dev") synth_dev = std::stoi(value);
    else if (key == "synth_ratio") synth_ratio = std::stod(value);
    else if (key == "synth_facts") synth_facts = std::stoi(value);
    else if (key == "synth_seed") synth_seed = std::stoull(value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config: " + path + ":" + std::to_string(lineno) +
                                     ": expected key=value");
        }
        cfg.apply_kv(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

std::string RunConfig::to_json_string() const {
    json j{
        {"hidden", hidden},
        {"embed", embed},
        {"n_context_heads", n_context_heads},
        {"n_question_heads", n_question_heads},
        {"d_g", d_g},
        {"d_r", d_r},
        {"d_f", d_f},
        {"d_z", d_z},
        {"alpha", alpha},
        {"lambda_aux", lambda_aux},
        {"activation", activation},
        {"eq3_bias", eq3_bias},
        {"squared_frobenius", squared_frobenius},
        {"max_span_len", max_span_len},
        {"tau", tau},
        {"use_relnet", use_relnet},
        {"use_augment", use_augment},
        {"baseline_fc_na", baseline_fc_na},
        {"use_pooled_summary", use_pooled_summary},
        {"lr", lr},
        {"lr_decay", lr_decay},
        {"patience", patience},
        {"beta1", beta1},
        {"beta2", beta2},
        {"adam_eps", adam_eps},
        {"batch_size", batch_size},
        {"epochs", epochs},
        {"seed", seed},
        {"train_path", train_path},
        {"dev_path", dev_path},
        {"synth_train", synth_train},
        {"synth_dev", synth_dev},
        {"synth_ratio", synth_ratio},
        {"synth_facts", synth_facts},
        {"synth_seed", synth_seed},
    };
    return j.dump();
}

RunConfig RunConfig::from_json_string(const std::string& text) {
    const json j = json::parse(text);
    RunConfig c;
    c.hidden = j.at("hidden").get<int>();
    c.embed = j.at("embed").get<int>();
    c.n_context_heads = j.at("n_context_heads").get<int>();
    c.n_question_heads = j.at("n_question_heads").get<int>();
    c.d_g = j.at("d_g").get<int>();
    c.d_r = j.at("d_r").get<int>();
    c.d_f = j.at("d_f").get<int>();
    c.d_z = j.at("d_z").get<int>();
    c.alpha = j.at("alpha").get<double>();
    c.lambda_aux = j.at("lambda_aux").get<double>();
    c.activation = j.at("activation").get<std::string>();
    c.eq3_bias = j.at("eq3_bias").get<bool>();
    c.squared_frobenius = j.at("squared_frobenius").get<bool>();
    c.max_span_len = j.at("max_span_len").get<int>();
    c.tau = j.at("tau").get<double>();
    c.use_relnet = j.at("use_relnet").get<bool>();
    c.use_augment = j.at("use_augment").get<bool>();
    c.baseline_fc_na = j.at("baseline_fc_na").get<bool>();
    c.use_pooled_summary = j.at("use_pooled_summary").get<bool>();
    c.lr = j.at("lr").get<double>();
    c.lr_decay = j.at("lr_decay").get<double>();
    c.patience = j.at("patience").get<int>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    c.train_path = j.at("train_path").get<std::string>();
    c.dev_path = j.at("dev_path").get<std::string>();
    c.synth_train = j.at("synth_train").get<int>();
    c.synth_dev = j.at("synth_dev").get<int>();
    c.synth_ratio = j.at("synth_ratio").get<double>();
    c.synth_facts = j.at("synth_facts").get<int>();
    c.synth_seed = j.at("synth_seed").get<uint64_t>();
    return c;
}

}  // namespace relmod
