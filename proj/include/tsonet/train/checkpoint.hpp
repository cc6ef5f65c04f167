#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsonet/core/error.hpp"
#include "tsonet/model/network.hpp"

namespace tsonet {

// Single-file checkpoint: magic, u64 header length, JSON descriptor (config
// echo, step, best val RMSE, parameter table), then the float32 payload in
// table order.
inline constexpr char kCheckpointMagic[8] = {'T', 'S', 'O', 'N', 'E', 'T', 'C', '1'};

template <class T>
void save_checkpoint(const std::filesystem::path& path, const tsonet_model<T>& model,
                     const nlohmann::json& train_config_echo, int64_t step,
                     double best_val_rmse) {
    nlohmann::json j;
    j["format"] = "tsonet-checkpoint";
    j["version"] = 1;
    j["step"] = step;
    j["best_val_rmse"] = best_val_rmse;
    j["model_config"] = model.cfg.to_json();
    j["train_config"] = train_config_echo;
    auto& table = j["params"] = nlohmann::json::array();
    int64_t offset = 0;
    for (const auto& p : model.params.list) {
        nlohmann::json e;
        e["name"] = p->name;
        e["shape"] = p->value.shape();
        e["offset"] = offset;
        table.push_back(e);
        offset += p->value.numel() * 4;
    }
    const std::string header = j.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw data_error("cannot write checkpoint: " + path.string());
    f.write(kCheckpointMagic, 8);
    const uint64_t hlen = header.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::vector<float> buf;
    for (const auto& p : model.params.list) {
        buf.resize(static_cast<size_t>(p->value.numel()));
        for (int64_t i = 0; i < p->value.numel(); ++i)
            buf[static_cast<size_t>(i)] = static_cast<float>(p->value[i]);
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * 4));
    }
    if (!f) throw data_error("short write: " + path.string());
}

struct checkpoint_data {
    nlohmann::json header;
    int64_t step = 0;
    double best_val_rmse = 0.0;
    model_config model_cfg;
    nlohmann::json train_config;
    std::map<std::string, tensor<float>> params;
};

inline checkpoint_data load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw data_error("missing checkpoint: " + path.string());
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw format_error(path.string() + ": not a tsonet checkpoint");
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    std::string header(hlen, '\0');
    f.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw format_error(path.string() + ": truncated header");

    checkpoint_data ck;
    try {
        ck.header = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path.string() + ": " + e.what());
    }
    ck.step = ck.header.value("step", int64_t{0});
    ck.best_val_rmse = ck.header.value("best_val_rmse", 0.0);
    ck.model_cfg = model_config::from_json(ck.header.at("model_config"));
    ck.train_config = ck.header.value("train_config", nlohmann::json::object());

    for (const auto& e : ck.header.at("params")) {
        const auto shape = e.at("shape").get<std::vector<int64_t>>();
        tensor<float> t(shape);
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.numel() * 4));
        if (!f) throw format_error(path.string() + ": truncated payload");
        ck.params.emplace(e.at("name").get<std::string>(), std::move(t));
    }
    return ck;
}

template <class T>
void apply_checkpoint(const checkpoint_data& ck, tsonet_model<T>& model) {
    check_contract(ck.params.size() == model.params.list.size(),
                   "checkpoint: parameter count mismatch");
    for (auto& p : model.params.list) {
        auto it = ck.params.find(p->name);
        check_contract(it != ck.params.end(), "checkpoint: missing parameter " + p->name);
        check_contract(it->second.shape() == p->value.shape(),
                       "checkpoint: shape mismatch for " + p->name);
        for (int64_t i = 0; i < p->value.numel(); ++i)
            p->value[i] = static_cast<T>(it->second[i]);
    }
}

// Rebuild the model a checkpoint was trained with and load its weights.
template <class T>
tsonet_model<T> model_from_checkpoint(const checkpoint_data& ck) {
    tsonet_model<T> m(ck.model_cfg, 0);
    apply_checkpoint(ck, m);
    return m;
}

} // namespace tsonet
