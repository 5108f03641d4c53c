#include "rtcimpair/fixtures.hpp"

#include "rtcimpair/engine.hpp"

namespace rtcimpair::synth {

io::Trace gen_snowflake_fixture(const SnowflakeFixtureSpec& spec) {
    std::vector<Packet> all;
    auto take = [&all](Expected<std::vector<Packet>> pkts) {
        if (pkts.ok()) {
            all.insert(all.end(), std::make_move_iterator(pkts.value().begin()),
                       std::make_move_iterator(pkts.value().end()));
        }
    };
    auto add = [&all](std::vector<Packet> pkts) {
        all.insert(all.end(), std::make_move_iterator(pkts.begin()),
                   std::make_move_iterator(pkts.end()));
    };

    // Flagged conversation: handshake, then co-located data channel + media.
    take(gen_dtls_flight(spec.flagged_issuer, spec.flagged_flow, {}, TimeUsec{}));
    add(gen_appdata_stream(spec.flagged_flow, spec.appdata_packets, spec.appdata_bytes,
                           spec.seed ^ 0xa11dULL, TimeUsec::from_seconds(0.010), 20000));
    StreamSpec video;
    video.ssrc = 0x56560001;
    video.payload_type = 102;
    video.duration_s = spec.video_duration_s;
    video.seed = spec.seed ^ 0x51deULL;
    add(gen_video_stream(NonAdaptiveModel{default_profiles()[0]}, video, spec.flagged_flow, nullptr,
                         TimeUsec::from_seconds(0.020)));
    add(gen_audio_stream(spec.flagged_flow, spec.video_duration_s, 111, 0x56560002,
                         spec.seed ^ 0x0d10ULL, TimeUsec::from_seconds(0.030)));

    // Unflagged DTLS service with its own application_data.
    take(gen_dtls_flight(spec.unflagged_issuer, spec.unflagged_flow, {}, TimeUsec{}));
    add(gen_appdata_stream(spec.unflagged_flow, spec.appdata_packets, spec.appdata_bytes,
                           spec.seed ^ 0x0feeULL, TimeUsec::from_seconds(0.015), 20000));

    return packets_to_trace(std::move(all));
}

AttackedStreamResult gen_stream_under_frame_drop(const SourceModel& model, const StreamSpec& spec,
                                                 const FlowKey& flow, double drop_rate,
                                                 std::uint64_t attack_seed) {
    attack::FrameDropConfig drop;
    drop.rate = drop_rate;
    drop.seed = attack_seed;
    attack::PolicyChain chain;
    chain.policies.push_back(drop);
    io::EngineOptions opts;
    opts.seed = attack_seed;
    io::PacketProcessor censor(chain, opts);

    AttackedStreamResult result;
    VideoStreamGenerator gen(model, spec, flow);
    std::uint64_t window_total = 0;
    std::uint64_t window_dropped = 0;
    std::uint64_t index = 0;

    while (!gen.done()) {
        if (gen.needs_feedback()) {
            const double loss =
                window_total ? static_cast<double>(window_dropped) / window_total : 0.0;
            gen.report_window_loss(loss);
            window_total = window_dropped = 0;
        }
        GeneratedFrame frame = gen.next_frame();
        ++result.frames_total;
        ++window_total;
        bool any_passed = false;
        for (Packet& pkt : frame.packets) {
            pkt.original_index = index++;
            Verdict v = censor.process(pkt);
            result.source.packets.push_back(pkt);
            if (!v.is_drop()) {
                any_passed = true;
                result.delivered.packets.push_back(std::move(pkt));
            }
        }
        if (!any_passed) {
            ++result.frames_dropped;
            ++window_dropped;
        }
    }
    result.source = packets_to_trace(std::move(result.source.packets));
    result.delivered = packets_to_trace(std::move(result.delivered.packets));
    return result;
}

DetectorPairResult gen_detector_pair(const DetectorPairSpec& spec) {
    DetectorPairResult result;

    StreamSpec adaptive_spec = spec.stream;
    adaptive_spec.seed = spec.stream.seed ^ 0xada97ULL;
    StreamSpec nonadaptive_spec = spec.stream;
    nonadaptive_spec.seed = spec.stream.seed ^ 0x0f1a7ULL;

    // Baseline phase: nothing dropped, adaptive feedback stays clean.
    result.adaptive_baseline = packets_to_trace(
        gen_video_stream(spec.adaptive, adaptive_spec, spec.adaptive_flow, nullptr));
    result.nonadaptive_baseline = packets_to_trace(gen_video_stream(
        NonAdaptiveModel{spec.nonadaptive_profile}, nonadaptive_spec, spec.nonadaptive_flow,
        nullptr));

    // Attack phase: closed loop through the frame-drop path.
    auto adaptive_attack =
        gen_stream_under_frame_drop(spec.adaptive, adaptive_spec, spec.adaptive_flow,
                                    spec.frame_drop_rate, spec.seed ^ 0xd20bULL);
    auto nonadaptive_attack = gen_stream_under_frame_drop(
        NonAdaptiveModel{spec.nonadaptive_profile}, nonadaptive_spec, spec.nonadaptive_flow,
        spec.frame_drop_rate, spec.seed ^ 0xd20cULL);

    result.adaptive_attacked = std::move(adaptive_attack.delivered);
    result.nonadaptive_attacked = std::move(nonadaptive_attack.delivered);
    result.adaptive_achieved_loss = adaptive_attack.achieved_loss();
    result.nonadaptive_achieved_loss = nonadaptive_attack.achieved_loss();
    return result;
}

}  // namespace rtcimpair::synth
