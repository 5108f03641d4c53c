#include "rtcimpair/attack.hpp"

#include "rtcimpair/rng.hpp"

namespace rtcimpair::attack {

const char* policy_kind_name(const PolicyConfig& cfg) {
    struct Visitor {
        const char* operator()(const DataChannelBlockConfig&) const { return "data_channel_block"; }
        const char* operator()(const FrameDropConfig&) const { return "frame_drop"; }
        const char* operator()(const UniformLossConfig&) const { return "uniform_loss"; }
        const char* operator()(const FixedDelayConfig&) const { return "fixed_delay"; }
    };
    return std::visit(Visitor{}, cfg);
}

void AttackStats::merge(const AttackStats& other) {
    if (per_policy.size() < other.per_policy.size()) per_policy.resize(other.per_policy.size());
    for (std::size_t i = 0; i < other.per_policy.size(); ++i) {
        auto& dst = per_policy[i];
        const auto& src = other.per_policy[i];
        if (dst.kind.empty()) dst.kind = src.kind;
        dst.packets_seen += src.packets_seen;
        dst.packets_dropped += src.packets_dropped;
        dst.packets_delayed += src.packets_delayed;
        dst.frames_seen += src.frames_seen;
        dst.frames_dropped += src.frames_dropped;
    }
    for (const auto& [key, src] : other.per_flow) {
        auto& dst = per_flow[key];
        dst.packets_seen += src.packets_seen;
        dst.packets_dropped += src.packets_dropped;
        dst.frames_seen += src.frames_seen;
        dst.frames_dropped += src.frames_dropped;
    }
    ssrc_slot_evictions += other.ssrc_slot_evictions;
}

Verdict decide_data_channel_block(PacketContext& ctx) {
    if (!ctx.state || !ctx.state->webrtc_flagged) return Verdict::pass();
    if (!ctx.dtls_has_appdata) return Verdict::pass();
    return Verdict::drop();
}

Verdict decide_frame_drop(PacketContext& ctx, const FrameDropConfig& cfg, PolicyStats& st) {
    if (!ctx.state || !ctx.rtp_header) return Verdict::pass();
    const rtp::Header& h = *ctx.rtp_header;
    if (!rtp::is_video(h, cfg.pt_set)) return Verdict::pass();
    if (!ctx.frame_event || !ctx.frame_slot) return Verdict::pass();  // fail open

    flowtable::SsrcSlot& slot = *ctx.frame_slot;
    if (ctx.frame_event->began_frame) {
        ++st.frames_seen;
        bool drop;
        if (cfg.periodic) {
            slot.assembler.drop_accumulator += cfg.rate;
            drop = slot.assembler.drop_accumulator >= 1.0 - 1e-9;
            if (drop) slot.assembler.drop_accumulator -= 1.0;
        } else {
            drop = ctx.state->rng.bernoulli(cfg.rate);
        }
        slot.assembler.drop_current_frame = drop;
        if (drop) ++st.frames_dropped;
    }
    return slot.assembler.drop_current_frame ? Verdict::drop() : Verdict::pass();
}

Verdict decide_uniform_loss(const PacketContext& ctx, const UniformLossConfig& cfg) {
    if (cfg.rate <= 0.0) return Verdict::pass();
    const std::uint64_t stream = ctx.state ? (cfg.seed ^ ctx.flow_hash) : cfg.seed;
    const double u = mix_double(stream, ctx.flow_packet_ordinal);
    return u < cfg.rate ? Verdict::drop() : Verdict::pass();
}

Verdict decide_fixed_delay(const FixedDelayConfig& cfg) { return Verdict::delay(cfg.delay_ms); }

PolicyEngine::PolicyEngine(PolicyChain chain) : chain_(std::move(chain)) {
    stats_.per_policy.resize(chain_.policies.size());
    for (std::size_t i = 0; i < chain_.policies.size(); ++i) {
        stats_.per_policy[i].kind = policy_kind_name(chain_.policies[i]);
    }
}

std::optional<std::uint64_t> PolicyEngine::frame_drop_seed() const {
    for (const auto& p : chain_.policies) {
        if (const auto* fd = std::get_if<FrameDropConfig>(&p)) return fd->seed;
    }
    return std::nullopt;
}

Verdict PolicyEngine::decide_one(std::size_t idx, PacketContext& ctx) {
    PolicyStats& st = stats_.per_policy[idx];
    ++st.packets_seen;

    struct Visitor {
        PacketContext& ctx;
        PolicyStats& st;
        Verdict operator()(const DataChannelBlockConfig&) { return decide_data_channel_block(ctx); }
        Verdict operator()(const FrameDropConfig& cfg) { return decide_frame_drop(ctx, cfg, st); }
        Verdict operator()(const UniformLossConfig& cfg) { return decide_uniform_loss(ctx, cfg); }
        Verdict operator()(const FixedDelayConfig& cfg) { return decide_fixed_delay(cfg); }
    };
    Verdict v = std::visit(Visitor{ctx, st}, chain_.policies[idx]);

    if (v.is_drop()) ++st.packets_dropped;
    if (v.is_delay()) ++st.packets_delayed;
    return v;
}

Verdict PolicyEngine::decide(PacketContext& ctx) {
    std::uint64_t total_delay_ms = 0;
    for (std::size_t i = 0; i < chain_.policies.size(); ++i) {
        Verdict v = decide_one(i, ctx);
        if (v.is_drop()) return Verdict::drop();  // later policies never see it
        if (v.is_delay()) total_delay_ms += v.delay_ms();
    }
    return Verdict::delay(static_cast<std::uint32_t>(total_delay_ms));
}

}  // namespace rtcimpair::attack
