#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rtcimpair/core.hpp"
#include "rtcimpair/flow_table.hpp"
#include "rtcimpair/rtp.hpp"

namespace rtcimpair::attack {

// Drop DTLS application_data on flows flagged as WebRTC; the media channel is
// never touched.
struct DataChannelBlockConfig {
    flowtable::IssuerMatchConfig issuer;
};

// Drop whole video frames. Probabilistic (Bernoulli per frame, per-flow rng
// stream) or periodic (error-accumulator, exact long-run rate).
struct FrameDropConfig {
    double rate = 0.0;
    std::uint64_t seed = 0;
    rtp::VideoPtSet pt_set;
    bool periodic = false;
};

// Drop each packet independently, transport-agnostic.
struct UniformLossConfig {
    double rate = 0.0;
    std::uint64_t seed = 0;
};

// Delay every packet by a fixed amount; ordering is the engine's problem.
struct FixedDelayConfig {
    std::uint32_t delay_ms = 0;
};

using PolicyConfig =
    std::variant<DataChannelBlockConfig, FrameDropConfig, UniformLossConfig, FixedDelayConfig>;

const char* policy_kind_name(const PolicyConfig& cfg);

struct PolicyChain {
    std::vector<PolicyConfig> policies;
    bool empty() const { return policies.empty(); }
};

struct PolicyStats {
    std::string kind;
    std::uint64_t packets_seen = 0;
    std::uint64_t packets_dropped = 0;
    std::uint64_t packets_delayed = 0;
    std::uint64_t frames_seen = 0;
    std::uint64_t frames_dropped = 0;
};

struct FlowBreakdown {
    std::uint64_t packets_seen = 0;
    std::uint64_t packets_dropped = 0;
    std::uint64_t frames_seen = 0;
    std::uint64_t frames_dropped = 0;
};

struct AttackStats {
    std::vector<PolicyStats> per_policy;
    std::map<FlowKey, FlowBreakdown> per_flow;
    std::uint64_t ssrc_slot_evictions = 0;

    void merge(const AttackStats& other);
};

// Everything a policy may look at for one packet, parsed once by the engine.
// The engine also advances frame segmentation exactly once per video packet;
// policies consume the event rather than re-running the state machine.
struct PacketContext {
    const Packet* pkt = nullptr;
    DemuxClass demux = DemuxClass::Unknown;
    flowtable::FlowState* state = nullptr;  // null for non-UDP pass-through
    std::uint64_t flow_hash = 0;
    std::uint64_t flow_packet_ordinal = 0;  // per-flow counter; original_index for non-UDP
    std::optional<rtp::Header> rtp_header;
    std::optional<rtp::FrameEvent> frame_event;  // set for video-classified packets
    flowtable::SsrcSlot* frame_slot = nullptr;
    bool dtls_has_appdata = false;
};

// Evaluates a chain against per-packet contexts. Policies run in order; Drop
// short-circuits; Delay durations sum.
class PolicyEngine {
  public:
    explicit PolicyEngine(PolicyChain chain);

    Verdict decide(PacketContext& ctx);

    const PolicyChain& chain() const { return chain_; }
    const AttackStats& stats() const { return stats_; }
    AttackStats& stats() { return stats_; }

    // First frame-drop seed in the chain, if any; the flow table's rng
    // streams derive from it.
    std::optional<std::uint64_t> frame_drop_seed() const;

  private:
    Verdict decide_one(std::size_t idx, PacketContext& ctx);

    PolicyChain chain_;
    AttackStats stats_;
};

// Standalone single-policy decisions (the engine composes these).
Verdict decide_data_channel_block(PacketContext& ctx);
Verdict decide_frame_drop(PacketContext& ctx, const FrameDropConfig& cfg, PolicyStats& st);
Verdict decide_uniform_loss(const PacketContext& ctx, const UniformLossConfig& cfg);
Verdict decide_fixed_delay(const FixedDelayConfig& cfg);

}  // namespace rtcimpair::attack
