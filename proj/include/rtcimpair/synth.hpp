#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "rtcimpair/capture.hpp"
#include "rtcimpair/core.hpp"
#include "rtcimpair/rng.hpp"
#include "rtcimpair/rtp.hpp"

namespace rtcimpair::synth {

// ---- resolution profiles ----

struct ResolutionProfile {
    std::string name;
    std::uint32_t mean_frame_bytes = 0;
    std::uint32_t frame_bytes_stdev = 0;
    double fps = 24.0;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
};

// Defaults: 1080p mean pinned at 6300 bytes (151.0 KBytes/s at 24 fps); the
// lower rungs scale by pixel count. Stdev defaults to mean/5.
std::vector<ResolutionProfile> default_profiles();
const ResolutionProfile* find_profile(const std::vector<ResolutionProfile>& profiles,
                                      const std::string& name);

// ---- source models ----

struct AdaptiveModel {
    std::vector<ResolutionProfile> ladder;  // ordered by mean_frame_bytes descending
    double downshift_loss_threshold = 0.10;
    double window_s = 2.0;
};

struct NonAdaptiveModel {
    ResolutionProfile profile;
};

using SourceModel = std::variant<AdaptiveModel, NonAdaptiveModel>;

// Default two-rung ladder (1080p over 540p): a sustained loss above the
// threshold produces exactly one downshift.
AdaptiveModel default_adaptive_model();

// Rung selection with hysteresis: down one rung when a window's observed
// frame loss reaches the threshold, up one rung after two consecutive clean
// windows.
class AdaptiveController {
  public:
    explicit AdaptiveController(AdaptiveModel model);

    const ResolutionProfile& active() const { return model_.ladder[rung_]; }
    std::size_t rung() const { return rung_; }
    double window_s() const { return model_.window_s; }

    void observe_window(double loss_fraction);

  private:
    AdaptiveModel model_;
    std::size_t rung_ = 0;
    int clean_streak_ = 0;
};

// ---- stream generation ----

struct StreamSpec {
    std::uint32_t ssrc = 0x11223344;
    std::uint8_t payload_type = 102;
    std::uint32_t mtu_payload_bytes = 1200;  // >= 64
    double duration_s = 10.0;
    std::uint64_t seed = 1;
    // Optional keyframe spikes: every Nth frame is scaled up. 0 = off.
    std::uint32_t keyframe_every = 0;
    double keyframe_scale = 3.0;
};

struct GeneratedFrame {
    std::uint64_t frame_index = 0;
    std::uint32_t size_bytes = 0;
    std::uint32_t packet_count = 0;
    TimeUsec first_packet_ts;
    std::string profile_name;
    std::vector<Packet> packets;
};

// Frame-by-frame generator. Adaptive models expect the driver to report the
// observed frame loss at each window boundary (needs_feedback() turns true);
// NonAdaptive ignores feedback entirely.
class VideoStreamGenerator {
  public:
    VideoStreamGenerator(SourceModel model, StreamSpec spec, FlowKey flow,
                         TimeUsec start = TimeUsec{});

    bool done() const;
    bool needs_feedback() const;
    void report_window_loss(double loss_fraction);
    GeneratedFrame next_frame();

    const ResolutionProfile& active_profile() const;
    std::uint64_t frames_emitted() const { return frame_index_; }
    std::size_t window_index() const { return window_index_; }

  private:
    SourceModel model_;
    StreamSpec spec_;
    FlowKey flow_;
    TimeUsec start_;
    std::optional<AdaptiveController> controller_;
    ResolutionProfile fixed_profile_;
    SplitMix64 rng_;
    // clock derives from the frame index so tick sums cannot drift; rebased
    // whenever the active profile (and so the frame interval) changes
    double base_clock_s_ = 0.0;
    std::uint64_t frames_at_base_ = 0;
    double clock_s_ = 0.0;
    double window_end_s_ = 0.0;
    std::uint64_t frame_index_ = 0;
    std::size_t window_index_ = 0;
    std::uint16_t seq_ = 0;
    bool feedback_due_ = false;
};

// Batch form: generates the whole stream, querying loss_feedback(window
// ordinal) at each window boundary. Pass nullptr for no feedback (treated as
// zero loss).
std::vector<Packet> gen_video_stream(const SourceModel& model, const StreamSpec& spec,
                                     const FlowKey& flow,
                                     const std::function<double(std::size_t)>& loss_feedback,
                                     TimeUsec start = TimeUsec{});

// Constant-small-packet audio stream: the non-video foil.
std::vector<Packet> gen_audio_stream(const FlowKey& flow, double duration_s,
                                     std::uint8_t payload_type, std::uint32_t ssrc,
                                     std::uint64_t seed, TimeUsec start = TimeUsec{});

// ---- DTLS flight generation ----

constexpr std::size_t kMaxIssuerLen = 64;

// Minimal self-signed certificate in DER with the given issuer (and subject)
// common name. Only the fields the extractor reads are meaningful.
Expected<Bytes> der_certificate_with_issuer_cn(const std::string& common_name);

// A plaintext flight carrying one Certificate message. With fragment_at set,
// the message is split at that body offset across two records in two
// datagrams.
Expected<std::vector<Packet>> gen_dtls_flight(const std::string& issuer, const FlowKey& flow,
                                              std::optional<std::uint32_t> fragment_at = {},
                                              TimeUsec start = TimeUsec{});

// DTLS application_data packets (epoch 1, opaque payload) standing in for
// data-channel traffic.
std::vector<Packet> gen_appdata_stream(const FlowKey& flow, std::size_t count,
                                       std::size_t record_bytes, std::uint64_t seed,
                                       TimeUsec start = TimeUsec{},
                                       std::int64_t interval_usec = 1000);

// ---- framing helpers ----

// Raw-IP frame (IPv4 or IPv6 by address family) around a UDP payload.
Bytes build_udp_frame(const FlowKey& flow, ByteView payload);

Packet make_udp_packet(const FlowKey& flow, Bytes payload, TimeUsec ts);

// Concatenate traces, sort by timestamp (stable) and renumber
// original_index, as if the merge had been captured in one file.
io::Trace merge_traces(std::vector<io::Trace> traces, LinkType link = LinkType::RawIp);

io::Trace packets_to_trace(std::vector<Packet> packets, LinkType link = LinkType::RawIp);

}  // namespace rtcimpair::synth
