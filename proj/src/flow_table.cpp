#include "rtcimpair/flow_table.hpp"

#include <algorithm>

namespace rtcimpair::flowtable {

SsrcSlot& FlowState::slot_for(std::uint32_t ssrc, bool* evicted) {
    ++tick_;
    if (evicted) *evicted = false;
    SsrcSlot* free_slot = nullptr;
    SsrcSlot* oldest = &slots_[0];
    for (auto& slot : slots_) {
        if (slot.in_use && slot.ssrc == ssrc) {
            slot.last_used_tick = tick_;
            return slot;
        }
        if (!slot.in_use && !free_slot) free_slot = &slot;
        if (slot.last_used_tick < oldest->last_used_tick) oldest = &slot;
    }
    SsrcSlot* target = free_slot ? free_slot : oldest;
    if (evicted && !free_slot) *evicted = true;
    target->ssrc = ssrc;
    target->in_use = true;
    target->last_used_tick = tick_;
    target->assembler = rtp::SsrcAssemblerState{};
    return *target;
}

const SsrcSlot* FlowState::find_slot(std::uint32_t ssrc) const {
    for (const auto& slot : slots_) {
        if (slot.in_use && slot.ssrc == ssrc) return &slot;
    }
    return nullptr;
}

std::size_t FlowState::serialized_size() const {
    // flag(1) + flagged_at(12) + rng(8) + packet counter(8) + tick(4) +
    // per-slot: ssrc(4) + lru tick(4) + last_timestamp(4) + flag bits(1) +
    // frame_ordinal(4) + drop accumulator(8)
    return 1 + 12 + 8 + 8 + 4 + slots_.size() * (4 + 4 + 4 + 1 + 4 + 8);
}

bool issuer_matches(const std::string& common_name, const IssuerMatchConfig& cfg) {
    if (cfg.substring) return common_name.find(cfg.match) != std::string::npos;
    return common_name == cfg.match;
}

FlowTable::FlowTable(FlowTableConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.capacity == 0) cfg_.capacity = 1;
}

void FlowTable::touch(std::list<Entry>::iterator it) {
    if (it != lru_.begin()) lru_.splice(lru_.begin(), lru_, it);
}

void FlowTable::note_state_size(const FlowState& st) {
    max_state_size_ = std::max(max_state_size_, st.serialized_size());
}

FlowState* FlowTable::lookup(const FlowKey& key) {
    auto it = map_.find(key);
    if (it == map_.end()) return nullptr;
    touch(it->second);
    return &it->second->state;
}

const FlowState* FlowTable::lookup(const FlowKey& key) const {
    auto it = map_.find(key);
    return it == map_.end() ? nullptr : &it->second->state;
}

FlowState& FlowTable::get_or_insert(const FlowKey& key) {
    auto it = map_.find(key);
    if (it != map_.end()) {
        touch(it->second);
        return it->second->state;
    }
    while (map_.size() >= cfg_.capacity) {
        auto victim = std::prev(lru_.end());
        map_.erase(victim->key);
        lru_.erase(victim);
        ++evictions_;
    }
    lru_.emplace_front(key, FlowState(cfg_.seed ^ flow_hash(key), cfg_.ssrc_slots));
    map_.emplace(key, lru_.begin());
    note_state_size(lru_.front().state);
    return lru_.front().state;
}

void FlowTable::observe_dtls(const FlowKey& key, const dtls::CertificateInfo& issuer,
                             TimeUsec now) {
    if (!issuer_matches(issuer.issuer_common_name, cfg_.issuer)) return;
    for (const FlowKey& k : {key, key.reversed()}) {
        FlowState& st = get_or_insert(k);
        if (!st.webrtc_flagged) {
            st.webrtc_flagged = true;
            st.flagged_at = now;
            map_.find(k)->second->issuer = issuer.issuer_common_name;
        }
        note_state_size(st);
    }
}

std::vector<FlaggedFlow> FlowTable::flagged_flows() const {
    std::vector<FlaggedFlow> out;
    for (const auto& entry : lru_) {
        if (entry.state.webrtc_flagged) {
            out.push_back({entry.key, entry.state.flagged_at.value_or(TimeUsec{}), entry.issuer});
        }
    }
    std::sort(out.begin(), out.end(),
              [](const FlaggedFlow& a, const FlaggedFlow& b) { return a.flow < b.flow; });
    return out;
}

}  // namespace rtcimpair::flowtable
