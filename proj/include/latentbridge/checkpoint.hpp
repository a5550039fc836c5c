#pragma once

// Checkpoint container: magic "LBRG", a little-endian u32 format version, a
// length-prefixed JSON block (architecture, sharing pattern, tensor
// manifest, user metadata), then raw little-endian tensor payloads in
// manifest order.  Tensors are either model parameters (canonical names
// only; aliases are reconstructed from the sharing pattern) or free-standing
// extras such as optimizer state.  Payload dtype is f32 or f64 per tensor;
// matching dtypes round-trip bitwise.  Only little-endian hosts are
// supported.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentbridge/arch.hpp"
#include "latentbridge/common.hpp"
#include "latentbridge/model.hpp"
#include "latentbridge/tensor.hpp"

namespace lb {

inline constexpr char kCheckpointMagic[4] = {'L', 'B', 'R', 'G'};
inline constexpr uint32_t kCheckpointVersion = 1;

inline nlohmann::json arch_to_json(const ArchConfig& a) {
    return {{"image_size", a.image_size},
            {"image_channels", a.image_channels},
            {"stem_channels", a.stem_channels},
            {"pack_channels", a.pack_channels},
            {"res_rows", a.res_rows},
            {"latent_channels", a.latent_channels},
            {"seg_classes", a.seg_classes},
            {"stem_kernel", a.stem_kernel},
            {"kernel", a.kernel},
            {"logvar_clamp", a.logvar_clamp},
            {"shared_enc_rows", a.shared_enc_rows},
            {"shared_dec_rows", a.shared_dec_rows},
            {"residual", a.residual},
            {"use_norm", a.use_norm},
            {"output_tanh", a.output_tanh}};
}

inline ArchConfig arch_from_json(const nlohmann::json& j) {
    ArchConfig a;
    try {
        j.at("image_size").get_to(a.image_size);
        j.at("image_channels").get_to(a.image_channels);
        j.at("stem_channels").get_to(a.stem_channels);
        j.at("pack_channels").get_to(a.pack_channels);
        j.at("res_rows").get_to(a.res_rows);
        j.at("latent_channels").get_to(a.latent_channels);
        j.at("seg_classes").get_to(a.seg_classes);
        j.at("stem_kernel").get_to(a.stem_kernel);
        j.at("kernel").get_to(a.kernel);
        j.at("logvar_clamp").get_to(a.logvar_clamp);
        j.at("shared_enc_rows").get_to(a.shared_enc_rows);
        j.at("shared_dec_rows").get_to(a.shared_dec_rows);
        j.at("residual").get_to(a.residual);
        j.at("use_norm").get_to(a.use_norm);
        j.at("output_tanh").get_to(a.output_tanh);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("bad architecture block: ") + e.what());
    }
    a.validate();
    return a;
}

namespace detail {

template <typename T>
const char* dtype_tag() {
    if constexpr (std::is_same_v<T, float>) return "f32";
    else if constexpr (std::is_same_v<T, double>) return "f64";
    else static_assert(sizeof(T) == 0, "unsupported checkpoint dtype");
}

template <typename T>
void write_payload(std::ofstream& out, const Tensor<T>& t) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(T)));
}

// Read one payload of the dtype recorded in the manifest into a Tensor<T>,
// casting if the file dtype differs.
template <typename T>
Tensor<T> read_payload(std::ifstream& in, const std::string& name, const std::string& dtype,
                       const Shape& shape, const std::string& path) {
    auto read_as = [&](auto witness) {
        using U = decltype(witness);
        Tensor<U> t(shape);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(U)));
        if (!in)
            throw CheckpointError("truncated checkpoint " + path + " while reading tensor '" +
                                  name + "'");
        return t;
    };
    if (dtype == "f32") return read_as(float{}).template cast<T>();
    if (dtype == "f64") return read_as(double{}).template cast<T>();
    throw CheckpointError("checkpoint " + path + ": unknown dtype '" + dtype +
                          "' for tensor '" + name + "'");
}

inline nlohmann::json read_header(std::ifstream& in, const std::string& path) {
    char magic[4];
    uint32_t version = 0;
    uint64_t json_len = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&json_len), sizeof(json_len));
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw CheckpointError("not a checkpoint file: " + path);
    if (version != kCheckpointVersion)
        throw CheckpointError("checkpoint " + path + ": unsupported format version " +
                              std::to_string(version));
    std::string text(json_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(json_len));
    if (!in) throw CheckpointError("truncated checkpoint header: " + path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("checkpoint " + path + ": bad metadata block: " + e.what());
    }
}

}  // namespace detail

template <typename T>
void save_checkpoint(const ModelBundle<T>& m, const std::string& path,
                     const std::map<std::string, Tensor<T>>& extras = {},
                     const nlohmann::json& meta = nlohmann::json::object()) {
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& name : m.order) {
        const auto& t = m.at(name);
        manifest.push_back({{"name", name},
                            {"dtype", detail::dtype_tag<T>()},
                            {"shape", t.shape},
                            {"kind", "param"}});
    }
    for (const auto& [name, t] : extras) {
        manifest.push_back({{"name", name},
                            {"dtype", detail::dtype_tag<T>()},
                            {"shape", t.shape},
                            {"kind", "extra"}});
    }
    nlohmann::json sharing = nlohmann::json::array();
    for (const auto& [alias, canon] : m.sharing) sharing.push_back({alias, canon});
    const nlohmann::json header = {{"arch", arch_to_json(m.arch)},
                                   {"sharing", sharing},
                                   {"manifest", manifest},
                                   {"meta", meta}};
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
    out.write(kCheckpointMagic, 4);
    const uint32_t version = kCheckpointVersion;
    const uint64_t json_len = text.size();
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&json_len), sizeof(json_len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& name : m.order) detail::write_payload(out, m.at(name));
    for (const auto& [name, t] : extras) detail::write_payload(out, t);
    if (!out) throw CheckpointError("write failed for checkpoint: " + path);
}

template <typename T>
struct Checkpoint {
    ModelBundle<T> model;
    std::map<std::string, Tensor<T>> extras;
    nlohmann::json meta;
};

// Fill an existing bundle's parameters from a file.  The file and the bundle
// must describe the same architecture.  Returns extras + meta.
template <typename T>
void load_checkpoint_into(ModelBundle<T>& m, const std::string& path,
                          std::map<std::string, Tensor<T>>* extras = nullptr,
                          nlohmann::json* meta = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    const nlohmann::json header = detail::read_header(in, path);

    const ArchConfig file_arch = arch_from_json(header.at("arch"));
    if (arch_to_json(file_arch) != arch_to_json(m.arch))
        throw CheckpointError("checkpoint " + path +
                              " was written for a different architecture");

    size_t params_seen = 0;
    for (const auto& entry : header.at("manifest")) {
        const std::string name = entry.at("name");
        const std::string dtype = entry.at("dtype");
        const Shape shape = entry.at("shape").get<Shape>();
        const std::string kind = entry.at("kind");
        Tensor<T> t = detail::read_payload<T>(in, name, dtype, shape, path);
        if (kind == "param") {
            auto it = m.params.find(name);
            if (it == m.params.end())
                throw CheckpointError("checkpoint " + path + ": unknown parameter '" + name +
                                      "'");
            if (it->second->shape != shape)
                throw CheckpointError("checkpoint " + path + ": parameter '" + name +
                                      "' has shape " + shape_str(shape) + ", expected " +
                                      shape_str(it->second->shape));
            *it->second = std::move(t);
            ++params_seen;
        } else if (kind == "extra") {
            if (extras) extras->emplace(name, std::move(t));
        } else {
            throw CheckpointError("checkpoint " + path + ": unknown tensor kind '" + kind +
                                  "'");
        }
    }
    if (params_seen != m.order.size())
        throw CheckpointError("checkpoint " + path + " provides " +
                              std::to_string(params_seen) + " parameters, model has " +
                              std::to_string(m.order.size()));
    if (meta) *meta = header.value("meta", nlohmann::json::object());
}

// Rebuild a model from a file alone.
template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    const nlohmann::json header = detail::read_header(in, path);
    in.close();

    Checkpoint<T> ck;
    ck.model = build_model<T>(arch_from_json(header.at("arch")), 0);
    load_checkpoint_into(ck.model, path, &ck.extras, &ck.meta);
    return ck;
}

}  // namespace lb
