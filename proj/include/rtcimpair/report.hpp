#pragma once

#include <string>

#include "json.hpp"
#include "rtcimpair/engine.hpp"

namespace rtcimpair::io {

// JSON schema for run reports. Versioned; numeric fields carry explicit
// units in their names. The round trip from_json(to_json(r)) == r holds for
// every field.
nlohmann::json report_to_json(const RunReport& report);
Expected<RunReport> report_from_json(const nlohmann::json& j);

Expected<std::monostate> write_report(const RunReport& report, const std::string& path);
Expected<RunReport> read_report(const std::string& path);

nlohmann::json flow_key_to_json(const FlowKey& key);
Expected<FlowKey> flow_key_from_json(const nlohmann::json& j);

}  // namespace rtcimpair::io
