// JSON model persistence. Doubles are written in shortest round-trip form,
// so save -> load reproduces every parameter bit for bit.
#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "crnn/nn/network.hpp"

namespace crnn::nn {

inline constexpr int kModelSchemaVersion = 1;

nlohmann::json to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

/// Canonical text of the network alone (no metadata).
std::string serialize(const Network& net);
/// Hex FNV-1a of serialize(net).
std::string model_checksum(const Network& net);

/// Writes the network plus optional metadata under "meta".
void save_network(const std::filesystem::path& path, const Network& net,
                  const nlohmann::json& meta = nlohmann::json::object());
Network load_network(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

}  // namespace crnn::nn
