#pragma once

#include <cstdint>
#include <list>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rtcimpair/core.hpp"
#include "rtcimpair/dtls.hpp"
#include "rtcimpair/rng.hpp"
#include "rtcimpair/rtp.hpp"

namespace rtcimpair::flowtable {

struct SsrcSlot {
    std::uint32_t ssrc = 0;
    bool in_use = false;
    std::uint32_t last_used_tick = 0;
    rtp::SsrcAssemblerState assembler;
};

// Per-flow censor memory. Everything in here is fixed-size; serialized_size()
// is the accounting hook for the constant-state bound.
class FlowState {
  public:
    static constexpr std::size_t kDefaultSsrcSlots = 8;

    explicit FlowState(std::uint64_t rng_seed = 0, std::size_t ssrc_slots = kDefaultSsrcSlots)
        : rng(rng_seed), slots_(ssrc_slots) {}

    bool webrtc_flagged = false;
    std::optional<TimeUsec> flagged_at;
    SplitMix64 rng;
    std::uint64_t packets_observed = 0;

    // Find-or-insert the slot for an ssrc; evicts the least-recently-seen
    // slot when full. An evicted ssrc restarts with fresh assembler state, so
    // a frame in progress falls open to Pass.
    SsrcSlot& slot_for(std::uint32_t ssrc, bool* evicted = nullptr);
    const SsrcSlot* find_slot(std::uint32_t ssrc) const;
    const std::vector<SsrcSlot>& slots() const { return slots_; }

    // Fixed serialized footprint in bytes, independent of packets observed.
    std::size_t serialized_size() const;

  private:
    std::vector<SsrcSlot> slots_;
    std::uint32_t tick_ = 0;
};

struct IssuerMatchConfig {
    std::string match = "WebRTC";
    bool substring = false;  // cheap-filter mode: match anywhere in the CN
};

struct FlowTableConfig {
    std::size_t capacity = 1 << 16;  // flows; least-recently-active eviction
    std::size_t ssrc_slots = FlowState::kDefaultSsrcSlots;
    std::uint64_t seed = 0;  // per-flow rng streams derive from seed ^ flow hash
    IssuerMatchConfig issuer;
};

struct FlaggedFlow {
    FlowKey flow;
    TimeUsec flagged_at;
    std::string issuer;
};

// FlowKey -> FlowState with bounded capacity. Lookup after insert returns the
// inserted state until eviction; eviction only on capacity pressure.
class FlowTable {
  public:
    explicit FlowTable(FlowTableConfig cfg = {});

    FlowState* lookup(const FlowKey& key);
    const FlowState* lookup(const FlowKey& key) const;
    FlowState& get_or_insert(const FlowKey& key);

    // Fig-6-style update: when the extracted issuer CN matches the configured
    // string, flag the flow and its reverse. Idempotent; flagged_at keeps the
    // first observation.
    void observe_dtls(const FlowKey& key, const dtls::CertificateInfo& issuer, TimeUsec now);

    std::size_t size() const { return map_.size(); }
    std::size_t capacity() const { return cfg_.capacity; }
    std::uint64_t evictions() const { return evictions_; }
    std::size_t max_state_size() const { return max_state_size_; }

    // Flagged flows sorted by key string; for the state-dump interface.
    std::vector<FlaggedFlow> flagged_flows() const;

    const FlowTableConfig& config() const { return cfg_; }

  private:
    struct Entry {
        FlowKey key;
        FlowState state;
        std::string issuer;  // CN that triggered the flag, for reporting
        Entry(const FlowKey& k, FlowState s) : key(k), state(std::move(s)) {}
    };

    void touch(std::list<Entry>::iterator it);
    void note_state_size(const FlowState& st);

    FlowTableConfig cfg_;
    std::list<Entry> lru_;  // front = most recently active
    std::unordered_map<FlowKey, std::list<Entry>::iterator, FlowKeyHasher> map_;
    std::uint64_t evictions_ = 0;
    std::size_t max_state_size_ = 0;
};

bool issuer_matches(const std::string& common_name, const IssuerMatchConfig& cfg);

}  // namespace rtcimpair::flowtable
