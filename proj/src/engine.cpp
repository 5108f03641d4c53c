#include "rtcimpair/engine.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

namespace rtcimpair::io {

PacketProcessor::PacketProcessor(const attack::PolicyChain& chain, const EngineOptions& opts)
    : opts_(opts),
      table_(flowtable::FlowTableConfig{opts.flow_capacity, opts.ssrc_slots, opts.seed,
                                        opts.issuer}),
      policy_(chain) {}

void PacketProcessor::inspect_dtls(const Packet& pkt, attack::PacketContext& ctx,
                                   FlowSummary& sum) {
    dtls::RecordParse parsed = dtls::parse_records(pkt.payload());
    if (parsed.error) {
        ++sum.parse_failures;
        ++totals_.parse_failures;
    }
    const FlowKey& flow = *pkt.flow;
    for (const dtls::Record& rec : parsed.records) {
        if (dtls::is_application_data(rec)) ctx.dtls_has_appdata = true;
        if (rec.content_type != dtls::kHandshake || rec.epoch != 0) continue;

        auto it = reassembly_.find(flow);
        if (it == reassembly_.end()) {
            if (reassembly_.size() >= opts_.flow_capacity) continue;  // fail open
            it = reassembly_.emplace(flow, dtls::HandshakeReassembler(opts_.handshake_buffer_bytes))
                     .first;
        }
        bool done = false;
        for (const dtls::HandshakeMessage& msg : it->second.feed(rec.fragment)) {
            if (msg.msg_type != dtls::kHsCertificate) continue;
            auto info = dtls::extract_issuer(msg);
            if (info.ok()) {
                sum.issuer_common_name = info.value().issuer_common_name;
                sum.issuer_provenance =
                    info.value().provenance == dtls::CertificateInfo::Provenance::Parsed
                        ? "parsed"
                        : "scanned";
                table_.observe_dtls(flow, info.value(), pkt.ts);
                done = true;
            }
        }
        if (it->second.unparseable()) {
            ++sum.parse_failures;
            ++totals_.parse_failures;
            done = true;
        }
        if (done) reassembly_.erase(it);
    }
}

namespace {

template <typename T>
void note_bounded(std::vector<T>& list, T value) {
    if (std::find(list.begin(), list.end(), value) != list.end()) return;
    if (list.size() < FlowSummary::kMaxListed) list.push_back(value);
}

}  // namespace

Verdict PacketProcessor::process(const Packet& pkt) {
    ++totals_.packets_in;

    attack::PacketContext ctx;
    ctx.pkt = &pkt;

    if (pkt.flow) {
        ++totals_.udp_packets;
        const FlowKey& flow = *pkt.flow;
        ctx.demux = demux(pkt.payload());
        flowtable::FlowState& state = table_.get_or_insert(flow);
        ctx.state = &state;
        ctx.flow_hash = flow_hash(flow);
        ctx.flow_packet_ordinal = state.packets_observed++;

        FlowSummary& sum = summaries_[flow];
        sum.flow = flow;
        ++sum.packets;
        ++sum.demux_counts[static_cast<std::size_t>(ctx.demux)];

        if (ctx.demux == DemuxClass::Dtls) {
            inspect_dtls(pkt, ctx, sum);
        } else if (ctx.demux == DemuxClass::Rtp) {
            auto header = rtp::parse(pkt.payload());
            if (header.ok()) {
                ctx.rtp_header = header.value();
                note_bounded(sum.payload_types, header.value().payload_type);
                if (rtp::is_video(header.value(), opts_.video_pt_set)) {
                    note_bounded(sum.ssrcs, header.value().ssrc);
                    bool evicted = false;
                    flowtable::SsrcSlot& slot = state.slot_for(header.value().ssrc, &evicted);
                    if (evicted) ++policy_.stats().ssrc_slot_evictions;
                    ctx.frame_slot = &slot;
                    ctx.frame_event =
                        rtp::frame_event(header.value(), slot.assembler, opts_.marker_only_frames);
                    if (ctx.frame_event->began_frame) {
                        ++sum.frames_seen;
                        // New frame starts undecided; the frame-drop policy
                        // re-arms it if it gets to see the packet.
                        slot.assembler.drop_current_frame = false;
                    }
                }
            } else {
                // not RTP after all; fail open and treat as unknown
                ++sum.parse_failures;
                ++totals_.parse_failures;
            }
        }
    } else {
        ctx.flow_packet_ordinal = pkt.original_index;
    }

    Verdict verdict = policy_.decide(ctx);

    if (verdict.is_drop()) {
        ++totals_.packets_dropped;
    } else {
        ++totals_.packets_out;
        if (verdict.is_delay()) ++totals_.packets_delayed;
    }

    if (pkt.flow) {
        attack::FlowBreakdown& br = policy_.stats().per_flow[*pkt.flow];
        ++br.packets_seen;
        if (verdict.is_drop()) ++br.packets_dropped;
        if (ctx.frame_event && ctx.frame_event->began_frame) {
            ++br.frames_seen;
            if (ctx.frame_slot && ctx.frame_slot->assembler.drop_current_frame) ++br.frames_dropped;
        }
    }
    return verdict;
}

void PacketProcessor::finalize_into(RunReport& report) const {
    report.totals.packets_in += totals_.packets_in;
    report.totals.packets_out += totals_.packets_out;
    report.totals.packets_dropped += totals_.packets_dropped;
    report.totals.packets_delayed += totals_.packets_delayed;
    report.totals.udp_packets += totals_.udp_packets;
    report.totals.parse_failures += totals_.parse_failures;

    report.attack.merge(policy_.stats());

    for (const auto& [key, sum] : summaries_) {
        FlowSummary s = sum;
        if (const flowtable::FlowState* st = table_.lookup(key)) {
            s.webrtc_flagged = st->webrtc_flagged;
        }
        report.flows.push_back(std::move(s));
    }
    for (const auto& f : table_.flagged_flows()) report.flagged.push_back(f);
    report.max_flow_state_bytes = std::max(report.max_flow_state_bytes, table_.max_state_size());
}

namespace {

void sort_report(RunReport& report) {
    std::sort(report.flows.begin(), report.flows.end(),
              [](const FlowSummary& a, const FlowSummary& b) { return a.flow < b.flow; });
    std::sort(report.flagged.begin(), report.flagged.end(),
              [](const auto& a, const auto& b) { return a.flow < b.flow; });
}

std::string rfc3339_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct OutputEntry {
    Packet pkt;
    TimeUsec out_ts;
};

void apply_verdict(const Packet& pkt, const Verdict& v, std::vector<OutputEntry>& out) {
    if (v.is_drop()) return;
    OutputEntry e{pkt, pkt.ts};
    if (v.is_delay()) e.out_ts = pkt.ts.plus_ms(v.delay_ms());
    out.push_back(std::move(e));
}

}  // namespace

OfflineResult run_offline(const Trace& input, const attack::PolicyChain& chain,
                          const EngineOptions& opts) {
    OfflineResult result;
    result.output.link = input.link;
    result.report.seed = opts.seed;
    result.report.run_timestamp = rfc3339_now();

    const unsigned workers = std::max(1u, opts.workers);
    std::vector<OutputEntry> entries;
    entries.reserve(input.packets.size());

    if (workers == 1) {
        PacketProcessor proc(chain, opts);
        for (const Packet& pkt : input.packets) {
            apply_verdict(pkt, proc.process(pkt), entries);
        }
        proc.finalize_into(result.report);
    } else {
        // Shard by direction-invariant flow hash so both directions of a
        // conversation stay with one worker; non-UDP packets have no
        // cross-packet state and spread by input ordinal.
        std::vector<std::vector<const Packet*>> shards(workers);
        for (const Packet& pkt : input.packets) {
            const std::uint64_t h =
                pkt.flow ? flow_pair_hash(*pkt.flow) : pkt.original_index;
            shards[h % workers].push_back(&pkt);
        }
        std::vector<PacketProcessor> procs;
        procs.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) procs.emplace_back(chain, opts);
        std::vector<std::vector<OutputEntry>> outs(workers);

        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            threads.emplace_back([&, w] {
                for (const Packet* pkt : shards[w]) {
                    apply_verdict(*pkt, procs[w].process(*pkt), outs[w]);
                }
            });
        }
        for (auto& t : threads) t.join();
        for (unsigned w = 0; w < workers; ++w) {
            procs[w].finalize_into(result.report);
            entries.insert(entries.end(), std::make_move_iterator(outs[w].begin()),
                           std::make_move_iterator(outs[w].end()));
        }
    }

    std::sort(entries.begin(), entries.end(), [](const OutputEntry& a, const OutputEntry& b) {
        if (a.out_ts != b.out_ts) return a.out_ts < b.out_ts;
        return a.pkt.original_index < b.pkt.original_index;
    });
    result.output.packets.reserve(entries.size());
    for (OutputEntry& e : entries) {
        Packet p = std::move(e.pkt);
        p.ts = e.out_ts;
        result.output.packets.push_back(std::move(p));
    }

    sort_report(result.report);
    return result;
}

LiveSummary run_live(PacketHook& hook, LinkType link, const attack::PolicyChain& chain,
                     const EngineOptions& opts, const LiveOptions& live) {
    LiveSummary summary;
    summary.report.seed = opts.seed;
    summary.report.run_timestamp = rfc3339_now();

    PacketProcessor proc(chain, opts);
    RawPacket raw;
    std::uint64_t ordinal = 0;
    while (hook.next(raw)) {
        Packet pkt;
        pkt.ts = raw.ts;
        pkt.frame = std::move(raw.frame);
        pkt.orig_len = static_cast<std::uint32_t>(pkt.frame.size());
        pkt.original_index = ordinal++;
        decode_packet(pkt, link);

        const auto start = std::chrono::steady_clock::now();
        Verdict v = proc.process(pkt);
        const double elapsed_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        if (elapsed_ms > live.verdict_budget_ms) ++summary.budget_overruns;

        if (v.is_delay() && !hook.supports_delay()) {
            ++summary.delay_downgrades;
            v = Verdict::pass();
        }
        hook.submit(raw.id, v);
        ++summary.packets;
    }
    proc.finalize_into(summary.report);
    sort_report(summary.report);
    return summary;
}

}  // namespace rtcimpair::io
