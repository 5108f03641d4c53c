#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rtcimpair/attack.hpp"
#include "rtcimpair/core.hpp"
#include "rtcimpair/synth.hpp"

namespace rtcimpair::sim {

// Reliable covert channel riding a non-adaptive carrier: a windowed ARQ with
// exponential RTO backoff, deliberately simpler than TCP. A dropped frame
// loses every message it carries.
struct CovertChannelModel {
    std::uint32_t message_bytes = 1500;
    std::uint32_t retransmit_timeout_ms = 1000;
    double rto_backoff = 2.0;
    std::uint32_t rto_cap_ms = 60000;
    std::uint32_t window_messages = 4;
    synth::ResolutionProfile carrier;  // frames of this profile carry the messages
    std::uint32_t mtu_payload_bytes = 1200;
    // Optional stand-in for WebRTC QoS recovery: a lost frame is retried once
    // immediately with this probability. Off by default.
    double fast_retransmit_probability = 0.0;
};

CovertChannelModel default_covert_model();

struct WindowRow {
    double t_end_s = 0;
    double covert_goodput_bytes_per_s = 0;
    double video_delivered_fps = 0;
    double video_frame_loss = 0;
    std::string video_profile;
};

struct DegradationReport {
    double covert_goodput_bytes_per_s = 0;
    double covert_message_loss_before_recovery = 0;  // fraction of first sends lost
    double covert_latency_ms = 0;                    // mean first-delivery latency
    double video_delivered_fps = 0;
    std::string video_final_profile;
    double frame_loss_achieved = 0;  // on the covert carrier stream

    double duration_s = 0;
    std::uint64_t seed = 0;
    std::uint64_t covert_messages_sent = 0;
    std::uint64_t covert_messages_delivered = 0;
    std::uint64_t covert_frames_total = 0;
    std::uint64_t covert_frames_dropped = 0;
    std::uint64_t video_frames_total = 0;
    std::uint64_t video_frames_delivered = 0;
    std::vector<WindowRow> windows;
};

// 1 - (1-q)^n: chance that an n-packet frame loses at least one packet under
// independent per-packet loss q.
Expected<double> analytic_frame_loss(double q, std::uint32_t packets_per_frame);

// Virtual-clock run of the covert channel and an adaptive video source under
// the same policy. Chain may hold one frame_drop and/or one uniform_loss plus
// fixed_delay entries; an empty chain is the no-attack baseline.
Expected<DegradationReport> simulate(const CovertChannelModel& covert,
                                     const synth::SourceModel& video,
                                     const attack::PolicyChain& policy, double duration_s,
                                     std::uint64_t seed);

struct RatioResult {
    double value = 0;           // D_covert / D_video; +inf when video is untouched
    bool no_degradation = false;  // neither side degraded; value 1 by convention
};

Expected<RatioResult> differential_ratio(const DegradationReport& report,
                                         const DegradationReport& baseline);

nlohmann::json degradation_report_to_json(const DegradationReport& report);
std::string windows_to_csv(const DegradationReport& report);

}  // namespace rtcimpair::sim
