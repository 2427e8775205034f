#pragma once

// Topology document (JSON): top-level keys `switches`, `links`, `endpoints`.
// Field names follow SwitchConfig / Endpoint; see docs/config-reference.md.

#include <filesystem>

#include <json.hpp>

#include "sliceqos/fabric.hpp"

namespace sliceqos {

/// Throws ParseError on malformed documents; semantic checks happen in Fabric::build.
FabricConfig parse_topology(const nlohmann::json& doc);

/// parse_topology followed by Fabric::build.
Fabric build_fabric(const nlohmann::json& doc);

nlohmann::json to_json(const FabricConfig& config);

nlohmann::json read_json_file(const std::filesystem::path& path);

std::string to_string(Layer layer);
std::string to_string(EgressPolicy policy);

}  // namespace sliceqos
