#include "relmod/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

using nlohmann::json;

namespace relmod {

namespace {

constexpr char kMagic[8] = {'R', 'E', 'L', 'M', 'O', 'D', 'C', '1'};

void write_u64_le(std::ostream& out, uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(buf, 8);
}

uint64_t read_u64_le(std::istream& in) {
    char buf[8];
    in.read(buf, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    }
    return v;
}

// Doubles are written as their little-endian byte image so a round trip is
// bit-exact.
void write_f64_le(std::ostream& out, const std::vector<double>& values) {
    for (double d : values) {
        uint64_t bits;
        std::memcpy(&bits, &d, 8);
        write_u64_le(out, bits);
    }
}

std::vector<double> read_f64_le(std::istream& in, size_t count) {
    std::vector<double> out(count);
    for (size_t i = 0; i < count; ++i) {
        const uint64_t bits = read_u64_le(in);
        std::memcpy(&out[i], &bits, 8);
    }
    return out;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    json tensors = json::array();
    uint64_t offset = 0;
    for (size_t i = 0; i < tensor_names.size(); ++i) {
        tensors.push_back({{"name", tensor_names[i]},
                           {"shape", tensor_shapes[i]},
                           {"offset", offset},
                           {"count", tensor_values[i].size()}});
        offset += tensor_values[i].size();
    }
    json header{{"format", "relmod-checkpoint"},
                {"dtype", "float64-le"},
                {"config", json::parse(config.to_json_string())},
                {"vocab", vocab_tokens},
                {"epoch", epoch},
                {"metric_history", json::parse(metric_history_json)},
                {"tensors", tensors}};
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(kMagic, 8);
    write_u64_le(out, header_text.size());
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& values : tensor_values) write_f64_le(out, values);
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("checkpoint: " + path + " is not a relmod checkpoint");
    }
    const uint64_t header_len = read_u64_le(in);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);
    const json header = json::parse(header_text);

    Checkpoint ck;
    ck.config = RunConfig::from_json_string(header.at("config").dump());
    ck.vocab_tokens = header.at("vocab").get<std::vector<std::string>>();
    ck.epoch = header.at("epoch").get<int>();
    ck.metric_history_json = header.at("metric_history").dump();
    for (const auto& t : header.at("tensors")) {
        ck.tensor_names.push_back(t.at("name").get<std::string>());
        ck.tensor_shapes.push_back(t.at("shape").get<std::vector<int>>());
        ck.tensor_values.push_back(read_f64_le(in, t.at("count").get<size_t>()));
    }
    if (!in) throw std::runtime_error("checkpoint: truncated payload in " + path);
    return ck;
}

Model Checkpoint::restore_model() const {
    Model model(ModelConfig::from_run_config(config, static_cast<int>(vocab_tokens.size())),
                config.seed);
    std::vector<std::pair<std::string, std::vector<double>>> named;
    named.reserve(tensor_names.size());
    for (size_t i = 0; i < tensor_names.size(); ++i) {
        named.emplace_back(tensor_names[i], tensor_values[i]);
    }
    model.load_named(named);
    return model;
}

Checkpoint snapshot(const Model& model, const RunConfig& config, const Vocab& vocab, int epoch,
                    const std::string& metric_history_json) {
    Checkpoint ck;
    ck.config = config;
    ck.vocab_tokens = vocab.tokens();
    ck.epoch = epoch;
    ck.metric_history_json = metric_history_json;
    for (const auto& [name, tensor] : model.named_params()) {
        ck.tensor_names.push_back(name);
        ck.tensor_shapes.push_back(tensor->shape);
        ck.tensor_values.push_back(tensor->val);
    }
    return ck;
}

}  // namespace relmod
