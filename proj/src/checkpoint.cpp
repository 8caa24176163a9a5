#include "rulkit/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace rulkit {
namespace {

constexpr char kMagic[4] = {'R', 'K', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

nlohmann::json arch_to_json(const ModelConfig& c) {
    return {
        {"features", c.features},
        {"window", c.window},
        {"kernel_size", c.kernel_size},
        {"conv1_filters", c.conv1_filters},
        {"conv2_filters", c.conv2_filters},
        {"lstm_hidden", c.lstm_hidden},
        {"attn_units", c.attn_units},
        {"fc1_units", c.fc1_units},
        {"fc2_units", c.fc2_units},
        {"dropout_conv", c.dropout_conv},
        {"dropout_lstm", c.dropout_lstm},
        {"dropout_fc", c.dropout_fc},
        {"bn_momentum", c.bn_momentum},
        {"bn_eps", c.bn_eps},
        {"ln_eps", c.ln_eps},
    };
}

ModelConfig arch_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.features = j.at("features").get<int>();
    c.window = j.at("window").get<int>();
    c.kernel_size = j.at("kernel_size").get<int>();
    c.conv1_filters = j.at("conv1_filters").get<int>();
    c.conv2_filters = j.at("conv2_filters").get<int>();
    c.lstm_hidden = j.at("lstm_hidden").get<int>();
    c.attn_units = j.at("attn_units").get<int>();
    c.fc1_units = j.at("fc1_units").get<int>();
    c.fc2_units = j.at("fc2_units").get<int>();
    c.dropout_conv = j.at("dropout_conv").get<double>();
    c.dropout_lstm = j.at("dropout_lstm").get<double>();
    c.dropout_fc = j.at("dropout_fc").get<double>();
    c.bn_momentum = j.at("bn_momentum").get<double>();
    c.bn_eps = j.at("bn_eps").get<double>();
    c.ln_eps = j.at("ln_eps").get<double>();
    return c;
}

void write_array(std::ofstream& out, const ConstParamEntry& entry) {
    std::uint32_t name_len = static_cast<std::uint32_t>(entry.name.size());
    write_raw(out, name_len);
    out.write(entry.name.data(), name_len);
    std::uint32_t rank = static_cast<std::uint32_t>(entry.shape.size());
    write_raw(out, rank);
    std::uint64_t expect = 1;
    for (int d : entry.shape) {
        std::uint64_t dim = static_cast<std::uint64_t>(d);
        write_raw(out, dim);
        expect *= dim;
    }
    if (expect != entry.values->size())
        throw_shape("checkpoint array " + entry.name + " has " +
                    std::to_string(entry.values->size()) + " values, shape wants " +
                    std::to_string(expect));
    out.write(reinterpret_cast<const char*>(entry.values->data()),
              static_cast<std::streamsize>(entry.values->size() * sizeof(double)));
}

void read_array(std::ifstream& in, const std::string& path, const ParamEntry& entry) {
    std::uint32_t name_len = 0;
    read_raw(in, name_len);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw_parse(path + ": truncated checkpoint");
    if (name != entry.name)
        throw_parse(path + ": expected array '" + entry.name + "', found '" + name + "'");
    std::uint32_t rank = 0;
    read_raw(in, rank);
    if (rank != entry.shape.size())
        throw_parse(path + ": array " + name + " rank mismatch");
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        std::uint64_t dim = 0;
        read_raw(in, dim);
        if (dim != static_cast<std::uint64_t>(entry.shape[i]))
            throw_parse(path + ": array " + name + " dim " + std::to_string(i) +
                        " mismatch: file has " + std::to_string(dim) + ", architecture wants " +
                        std::to_string(entry.shape[i]));
        count *= dim;
    }
    entry.values->resize(count);
    in.read(reinterpret_cast<char*>(entry.values->data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw_parse(path + ": truncated checkpoint");
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
    nlohmann::json meta;
    meta["arch"] = arch_to_json(checkpoint.params.config);
    meta["loss"] = {{"h1", checkpoint.loss.h1}, {"h2", checkpoint.loss.h2}};
    meta["seed"] = checkpoint.seed;
    meta["feature_names"] = checkpoint.feature_names;
    meta["max_rul"] = checkpoint.max_rul;
    meta["trainable_params"] = trainable_param_count(checkpoint.params.config);
    std::string meta_text = meta.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw_io("cannot open file for writing: " + path);
    out.write(kMagic, 4);
    write_raw(out, kVersion);
    std::uint64_t meta_len = meta_text.size();
    write_raw(out, meta_len);
    out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));

    auto trainable = trainable_entries(checkpoint.params);
    auto state = state_entries(checkpoint.params);
    std::uint32_t n_arrays = static_cast<std::uint32_t>(trainable.size() + state.size());
    write_raw(out, n_arrays);
    for (const auto& e : trainable) write_array(out, e);
    for (const auto& e : state) write_array(out, e);
    if (!out) throw_io("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw_parse(path + ": not a checkpoint file (bad magic)");
    std::uint32_t version = 0;
    read_raw(in, version);
    if (version != kVersion)
        throw_parse(path + ": unsupported checkpoint version " + std::to_string(version));
    std::uint64_t meta_len = 0;
    read_raw(in, meta_len);
    std::string meta_text(meta_len, '\0');
    in.read(meta_text.data(), static_cast<std::streamsize>(meta_len));
    if (!in) throw_parse(path + ": truncated checkpoint");

    Checkpoint cp;
    try {
        nlohmann::json meta = nlohmann::json::parse(meta_text);
        cp.params.config = arch_from_json(meta.at("arch"));
        cp.loss.h1 = meta.at("loss").at("h1").get<double>();
        cp.loss.h2 = meta.at("loss").at("h2").get<double>();
        cp.seed = meta.at("seed").get<std::uint64_t>();
        cp.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
        cp.max_rul = meta.at("max_rul").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw_parse(path + ": bad checkpoint metadata: " + e.what());
    }

    auto trainable = trainable_entries(cp.params);
    auto state = state_entries(cp.params);
    std::uint32_t n_arrays = 0;
    read_raw(in, n_arrays);
    if (n_arrays != trainable.size() + state.size())
        throw_parse(path + ": checkpoint holds " + std::to_string(n_arrays) + " arrays, expected " +
                    std::to_string(trainable.size() + state.size()));
    for (const auto& e : trainable) read_array(in, path, e);
    for (const auto& e : state) read_array(in, path, e);
    return cp;
}

}  // namespace rulkit
