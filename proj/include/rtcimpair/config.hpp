#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rtcimpair/attack.hpp"
#include "rtcimpair/detect.hpp"
#include "rtcimpair/engine.hpp"
#include "rtcimpair/sim.hpp"
#include "rtcimpair/synth.hpp"

namespace rtcimpair::config {

struct SimSection {
    double duration_s = 300.0;
    std::vector<double> frame_drop_rates = {0.0, 0.05, 0.15, 0.25};
    std::string policy = "frame_drop";  // or "uniform_loss"
    std::uint32_t delay_ms = 0;
};

struct SynthSection {
    std::string mode = "video";  // video|audio|dtls_flight|appdata|snowflake_fixture|detector_pair
    std::string issuer = "WebRTC";
    std::optional<std::uint32_t> fragment_at;
    std::uint64_t appdata_packets = 200;
    std::uint64_t appdata_bytes = 400;
    double frame_drop_rate = 0.25;
};

struct DetectSection {
    detect::DistinguishConfig distinguish;
    std::uint32_t histogram_bin_bytes = 500;
    std::uint32_t histogram_range_bytes = 50000;
    bool marker_only = false;
};

// The full, resolved configuration for one run. `echo` is the effective
// document (defaults overlaid with file and flag values) that reports embed.
struct RunConfig {
    std::uint64_t seed = 0;
    io::EngineOptions engine;
    attack::PolicyChain chain;
    std::vector<synth::ResolutionProfile> profiles;
    synth::SourceModel source = synth::NonAdaptiveModel{};
    synth::StreamSpec stream;
    FlowKey stream_flow;
    sim::CovertChannelModel covert;
    SimSection sim;
    SynthSection synth;
    DetectSection detect;
    nlohmann::json echo;
};

// The complete default document; every known key appears here.
nlohmann::json default_config_json();

// Deep-merges `overlay` onto `base` (objects merge, everything else
// replaces).
nlohmann::json merge_config(nlohmann::json base, const nlohmann::json& overlay);

// Validates and resolves a document. Unknown keys are rejected; errors name
// the offending key path.
Expected<RunConfig> parse_config(const nlohmann::json& doc);

// Convenience: defaults <- file (optional) <- overlay, then parse.
Expected<RunConfig> load_config(const std::optional<std::string>& config_path,
                                const nlohmann::json& overlay);

}  // namespace rtcimpair::config
