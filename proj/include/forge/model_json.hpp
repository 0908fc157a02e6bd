#pragma once

// JSON field mapping for the model types, shared by the instance-model
// loader and by the catalogue / hardware-spec inputs of the pipeline.

#include <string>
#include <string_view>
#include <vector>

#include "forge/canonical.hpp"
#include "forge/model.hpp"

namespace forge {

FunctionSpec function_from_json(const nlohmann::json& j, const std::string& path);
HardwareNode node_from_json(const nlohmann::json& j, const std::string& path);
Link link_from_json(const nlohmann::json& j, const std::string& path);
FlowEdge edge_from_json(const nlohmann::json& j, const std::string& path);
Placement placement_from_json(const nlohmann::json& j, const std::string& path);

Json to_json(const FunctionSpec& f);
Json to_json(const HardwareNode& n);
Json to_json(const Link& l);
Json to_json(const FlowEdge& e);
Json to_json(const Placement& p);

/// Parse text as JSON; throws SyntaxError.
nlohmann::json parse_json(std::string_view doc);

/// {"functions": [...]}: the function catalogue.
std::vector<FunctionSpec> load_catalogue(std::string_view doc);

struct HardwareSpec {
    std::vector<HardwareNode> nodes;
    std::vector<Link> links;
};

/// {"hardware": [...], "links": [...]}, checked like the hardware half of
/// an instance model.
HardwareSpec load_hardware_spec(std::string_view doc);

} // namespace forge
