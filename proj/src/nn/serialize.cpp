#include "crnn/nn/serialize.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "crnn/checksum.hpp"

namespace crnn::nn {

using nlohmann::json;

namespace {

json affine_json(const Affine& a) { return {{"offset", a.offset}, {"scale", a.scale}}; }

Affine affine_from(const json& j) { return {j.at("offset").get<double>(), j.at("scale").get<double>()}; }

}  // namespace

json to_json(const Network& net) {
    json layers = json::array();
    const auto tensors = net.tensors();
    const auto p = net.params();
    std::size_t ti = 0;
    for (const LayerSpec& l : net.layers()) {
        json jl = {{"kind", to_string(l.kind)},
                   {"input_dim", l.input_dim},
                   {"output_dim", l.output_dim},
                   {"activation", to_string(l.activation)}};
        json jt = json::array();
        const std::size_t n_tensors = l.kind == LayerKind::lstm ? 3 : 2;
        for (std::size_t k = 0; k < n_tensors; ++k, ++ti) {
            const TensorView& t = tensors[ti];
            std::vector<double> values(p.begin() + static_cast<std::ptrdiff_t>(t.offset),
                                       p.begin() + static_cast<std::ptrdiff_t>(t.offset + t.size()));
            jt.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"values", values}});
        }
        jl["tensors"] = std::move(jt);
        layers.push_back(std::move(jl));
    }
    return {{"schema_version", kModelSchemaVersion},
            {"window", net.window()},
            {"param_count", net.param_count()},
            {"layers", std::move(layers)},
            {"norm_stats", {{"input", affine_json(net.norm().input)}, {"target", affine_json(net.norm().target)}}}};
}

Network network_from_json(const json& j) {
    if (j.at("schema_version").get<int>() != kModelSchemaVersion)
        throw std::runtime_error("model: unsupported schema_version " + j.at("schema_version").dump());
    std::vector<LayerSpec> specs;
    for (const json& jl : j.at("layers"))
        specs.push_back({parse_layer_kind(jl.at("kind").get<std::string>()), jl.at("input_dim").get<std::size_t>(),
                         jl.at("output_dim").get<std::size_t>(),
                         parse_activation(jl.at("activation").get<std::string>())});
    Network net(std::move(specs), j.at("window").get<std::size_t>());

    auto p = net.params();
    const auto tensors = net.tensors();
    std::size_t ti = 0;
    for (const json& jl : j.at("layers")) {
        for (const json& jt : jl.at("tensors")) {
            if (ti >= tensors.size()) throw std::runtime_error("model: too many tensors");
            const TensorView& t = tensors[ti++];
            const auto values = jt.at("values").get<std::vector<double>>();
            const auto shape = jt.at("shape").get<std::vector<std::size_t>>();
            if (values.size() != t.size() || shape.size() != 2 || shape[0] != t.rows || shape[1] != t.cols)
                throw std::runtime_error("model: tensor " + t.name + " has the wrong shape");
            std::copy(values.begin(), values.end(), p.begin() + static_cast<std::ptrdiff_t>(t.offset));
        }
    }
    if (ti != tensors.size()) throw std::runtime_error("model: missing tensors");
    const json& ns = j.at("norm_stats");
    net.set_norm({affine_from(ns.at("input")), affine_from(ns.at("target"))});
    return net;
}

std::string serialize(const Network& net) { return to_json(net).dump(); }

std::string model_checksum(const Network& net) { return to_hex(fnv1a(serialize(net))); }

void save_network(const std::filesystem::path& path, const Network& net, const json& meta) {
    json j = to_json(net);
    j["checksum"] = model_checksum(net);
    j["meta"] = meta;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << j.dump(1) << '\n';
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

Network load_network(const std::filesystem::path& path, json* meta) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    const json j = json::parse(is);
    Network net = network_from_json(j);
    if (j.contains("checksum") && j.at("checksum").get<std::string>() != model_checksum(net))
        throw std::runtime_error(path.string() + ": stored checksum does not match the parameters");
    if (meta) *meta = j.value("meta", json::object());
    return net;
}

}  // namespace crnn::nn
