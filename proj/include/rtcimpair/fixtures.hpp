#pragma once

#include <cstdint>
#include <string>

#include "rtcimpair/capture.hpp"
#include "rtcimpair/synth.hpp"

namespace rtcimpair::synth {

// One flow carrying a WebRTC-issuer handshake, data-channel application_data,
// video and audio; a second flow with a different issuer and its own
// application_data. The desk-scale stand-in for a Snowflake session next to
// an innocuous DTLS service.
struct SnowflakeFixtureSpec {
    FlowKey flagged_flow{IpAddr::v4(10, 0, 0, 1), 51000, IpAddr::v4(192, 0, 2, 10), 3478};
    FlowKey unflagged_flow{IpAddr::v4(10, 0, 0, 2), 52000, IpAddr::v4(198, 51, 100, 7), 4433};
    std::string flagged_issuer = "WebRTC";
    std::string unflagged_issuer = "Example CA";
    std::size_t appdata_packets = 200;
    std::size_t appdata_bytes = 400;
    double video_duration_s = 5.0;
    std::uint64_t seed = 1;
};

io::Trace gen_snowflake_fixture(const SnowflakeFixtureSpec& spec);

// Paired adaptive/non-adaptive streams, each with a clean baseline phase and
// a phase recorded under a closed-loop frame-drop attack (the attacked trace
// holds the surviving packets: the censor's view).
struct DetectorPairSpec {
    AdaptiveModel adaptive = default_adaptive_model();
    ResolutionProfile nonadaptive_profile = default_profiles()[0];
    StreamSpec stream;  // duration_s applies per phase
    double frame_drop_rate = 0.25;
    std::uint64_t seed = 1;
    FlowKey adaptive_flow{IpAddr::v4(10, 0, 1, 1), 40000, IpAddr::v4(10, 0, 1, 2), 40001};
    FlowKey nonadaptive_flow{IpAddr::v4(10, 0, 2, 1), 41000, IpAddr::v4(10, 0, 2, 2), 41001};
};

struct DetectorPairResult {
    io::Trace adaptive_baseline;
    io::Trace adaptive_attacked;
    io::Trace nonadaptive_baseline;
    io::Trace nonadaptive_attacked;
    double adaptive_achieved_loss = 0.0;
    double nonadaptive_achieved_loss = 0.0;
};

DetectorPairResult gen_detector_pair(const DetectorPairSpec& spec);

// Closed-loop helper: generates a stream while the real frame-drop path
// decides each packet's fate; window feedback comes from the achieved loss.
struct AttackedStreamResult {
    io::Trace source;     // everything the sender emitted
    io::Trace delivered;  // what survived the attack
    std::uint64_t frames_total = 0;
    std::uint64_t frames_dropped = 0;
    double achieved_loss() const {
        return frames_total ? static_cast<double>(frames_dropped) / frames_total : 0.0;
    }
};

AttackedStreamResult gen_stream_under_frame_drop(const SourceModel& model, const StreamSpec& spec,
                                                 const FlowKey& flow, double drop_rate,
                                                 std::uint64_t attack_seed);

}  // namespace rtcimpair::synth
