#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "rtcimpair/attack.hpp"
#include "rtcimpair/capture.hpp"
#include "rtcimpair/core.hpp"
#include "rtcimpair/dtls.hpp"
#include "rtcimpair/flow_table.hpp"

namespace rtcimpair::io {

struct EngineOptions {
    std::uint64_t seed = 0;
    unsigned workers = 1;  // >1 shards flows across workers by pair hash
    bool marker_only_frames = false;
    rtp::VideoPtSet video_pt_set;
    flowtable::IssuerMatchConfig issuer;
    std::size_t flow_capacity = 1 << 16;
    std::size_t ssrc_slots = flowtable::FlowState::kDefaultSsrcSlots;
    std::size_t handshake_buffer_bytes = 16 * 1024;
};

// Per-flow inspection summary for reporting. Lists are capped so the summary
// stays bounded per flow.
struct FlowSummary {
    static constexpr std::size_t kMaxListed = 8;

    FlowKey flow;
    std::uint64_t packets = 0;
    std::array<std::uint64_t, 4> demux_counts{};  // indexed by DemuxClass
    bool webrtc_flagged = false;
    std::string issuer_common_name;  // certificate issuer seen on this flow
    std::string issuer_provenance;   // "parsed" | "scanned" | ""
    std::vector<std::uint32_t> ssrcs;
    std::vector<std::uint8_t> payload_types;
    std::uint64_t frames_seen = 0;
    std::uint64_t parse_failures = 0;
};

struct RunTotals {
    std::uint64_t packets_in = 0;
    std::uint64_t packets_out = 0;
    std::uint64_t packets_dropped = 0;
    std::uint64_t packets_delayed = 0;
    std::uint64_t udp_packets = 0;
    std::uint64_t parse_failures = 0;
};

struct RunReport {
    int schema_version = 1;
    std::string run_timestamp;  // the one field excluded from determinism
    std::uint64_t seed = 0;
    nlohmann::json config_echo = nlohmann::json::object();
    RunTotals totals;
    attack::AttackStats attack;
    std::vector<FlowSummary> flows;  // sorted by flow key
    std::vector<flowtable::FlaggedFlow> flagged;
    std::size_t max_flow_state_bytes = 0;
    nlohmann::json detector;  // filled by the detect pipeline when requested
};

// Shared per-packet path: DTLS/RTP inspection, flow-table upkeep, frame
// segmentation, then the policy chain. Single-owner per flow; the offline
// engine instantiates one per shard.
class PacketProcessor {
  public:
    PacketProcessor(const attack::PolicyChain& chain, const EngineOptions& opts);

    Verdict process(const Packet& pkt);

    const flowtable::FlowTable& table() const { return table_; }
    const attack::PolicyEngine& policy() const { return policy_; }
    const RunTotals& totals() const { return totals_; }

    // Folds this processor's results into a report under construction.
    void finalize_into(RunReport& report) const;

  private:
    void inspect_dtls(const Packet& pkt, attack::PacketContext& ctx, FlowSummary& sum);

    EngineOptions opts_;
    flowtable::FlowTable table_;
    attack::PolicyEngine policy_;
    std::unordered_map<FlowKey, dtls::HandshakeReassembler, FlowKeyHasher> reassembly_;
    std::map<FlowKey, FlowSummary> summaries_;
    RunTotals totals_;
};

struct OfflineResult {
    Trace output;
    RunReport report;
};

// Virtual-clock offline run: Pass copies, Drop omits, Delay shifts the
// timestamp; output re-sorted by adjusted timestamp with stable tie-breaking
// on original_index. Sharded and single-threaded modes produce identical
// results.
OfflineResult run_offline(const Trace& input, const attack::PolicyChain& chain,
                          const EngineOptions& opts);

// ---- live adapter contract ----

struct RawPacket {
    std::uint64_t id = 0;
    TimeUsec ts;
    Bytes frame;
};

// Host packet-verdict hook. Platform bindings (netfilter queues and friends)
// live behind this interface; tests drive it in-process.
class PacketHook {
  public:
    virtual ~PacketHook() = default;
    virtual bool supports_delay() const = 0;
    // Blocks for the next packet; false at end of stream.
    virtual bool next(RawPacket& out) = 0;
    // Receives the verdict for a previously delivered packet. The engine
    // submits the verdict for packet N before requesting packet N+1.
    virtual void submit(std::uint64_t id, const Verdict& v) = 0;
};

struct LiveOptions {
    double verdict_budget_ms = 1.0;  // soft budget; overruns only counted
};

struct LiveSummary {
    std::uint64_t packets = 0;
    std::uint64_t budget_overruns = 0;
    std::uint64_t delay_downgrades = 0;  // Delay -> Pass on hosts without delay support
    RunReport report;
};

LiveSummary run_live(PacketHook& hook, LinkType link, const attack::PolicyChain& chain,
                     const EngineOptions& opts, const LiveOptions& live = {});

}  // namespace rtcimpair::io
