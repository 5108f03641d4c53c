#include "rtcimpair/detect.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace rtcimpair::detect {

const char* label_name(Label label) {
    switch (label) {
        case Label::Adaptive: return "adaptive";
        case Label::NonAdaptive: return "nonadaptive";
        case Label::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

namespace {

struct StreamAccumulator {
    rtp::SsrcAssemblerState assembler;
    bool frame_open = false;
    std::uint64_t open_size = 0;
    std::vector<double> sizes;
    std::uint64_t skipped = 0;
};

}  // namespace

std::vector<FrameSizeStats> frame_sizes(const io::Trace& trace, const FrameSizeConfig& cfg,
                                        std::vector<FrameRecord>* per_frame) {
    std::map<std::uint32_t, StreamAccumulator> streams;

    for (const Packet& pkt : trace.packets) {
        if (!pkt.flow) continue;
        if (demux(pkt.payload()) != DemuxClass::Rtp) continue;
        auto header = rtp::parse(pkt.payload());
        if (!header.ok()) {
            // count against the stream we cannot attribute precisely
            continue;
        }
        const rtp::Header& h = header.value();
        if (!rtp::is_video(h, cfg.pt_set)) continue;

        StreamAccumulator& acc = streams[h.ssrc];
        rtp::FrameEvent ev = rtp::frame_event(h, acc.assembler, cfg.marker_only);
        if (ev.began_frame) {
            // a frame still open here never saw its end: excluded
            acc.frame_open = true;
            acc.open_size = 0;
        }
        if (acc.frame_open) {
            acc.open_size += h.payload_length;
            if (ev.kind == rtp::FrameEventKind::FrameEnd) {
                acc.sizes.push_back(static_cast<double>(acc.open_size));
                if (per_frame) {
                    per_frame->push_back(
                        {h.ssrc, static_cast<std::uint64_t>(acc.sizes.size() - 1), acc.open_size});
                }
                acc.frame_open = false;
            }
        } else if (ev.kind == rtp::FrameEventKind::FrameEnd) {
            ++acc.skipped;  // end without a seen start
        }
    }

    std::vector<FrameSizeStats> out;
    for (auto& [ssrc, acc] : streams) {
        FrameSizeStats stats;
        stats.ssrc = ssrc;
        stats.frame_count = acc.sizes.size();
        stats.skipped_packets = acc.skipped;
        stats.histogram.bin_width_bytes = cfg.histogram_bin_bytes;
        stats.histogram.range_max_bytes = cfg.histogram_range_bytes;
        stats.histogram.init();
        if (!acc.sizes.empty()) {
            double sum = 0;
            for (double s : acc.sizes) sum += s;
            stats.mean_frame_bytes = sum / acc.sizes.size();
            double var = 0;
            for (double s : acc.sizes) {
                var += (s - stats.mean_frame_bytes) * (s - stats.mean_frame_bytes);
            }
            stats.stdev_frame_bytes = std::sqrt(var / acc.sizes.size());
            for (double s : acc.sizes) stats.histogram.add(s);
        }
        out.push_back(std::move(stats));
    }
    return out;  // std::map iteration is ssrc-sorted
}

Expected<DistinguisherVerdict> distinguish(const FrameSizeStats& baseline,
                                           const FrameSizeStats& under_attack,
                                           const DistinguishConfig& cfg) {
    if (baseline.mean_frame_bytes <= 0.0) return Error{"baseline mean frame size is zero", 0};

    DistinguisherVerdict verdict;
    verdict.frames_baseline = baseline.frame_count;
    verdict.frames_attack = under_attack.frame_count;
    verdict.reduction_fraction = 1.0 - under_attack.mean_frame_bytes / baseline.mean_frame_bytes;

    if (baseline.frame_count < cfg.min_frames || under_attack.frame_count < cfg.min_frames) {
        verdict.label = Label::Inconclusive;
    } else if (verdict.reduction_fraction >= cfg.threshold) {
        verdict.label = Label::Adaptive;
    } else {
        verdict.label = Label::NonAdaptive;
    }
    return verdict;
}

nlohmann::json frame_size_stats_to_json(const FrameSizeStats& s) {
    return nlohmann::json{{"ssrc", s.ssrc},
                          {"frame_count", s.frame_count},
                          {"mean_frame_bytes", s.mean_frame_bytes},
                          {"stdev_frame_bytes", s.stdev_frame_bytes},
                          {"histogram",
                           {{"bin_width_bytes", s.histogram.bin_width_bytes},
                            {"range_max_bytes", s.histogram.range_max_bytes},
                            {"bins", s.histogram.bins}}},
                          {"skipped_packets", s.skipped_packets}};
}

nlohmann::json verdict_to_json(const DistinguisherVerdict& v) {
    return nlohmann::json{{"label", label_name(v.label)},
                          {"reduction_fraction", v.reduction_fraction},
                          {"frames_baseline", v.frames_baseline},
                          {"frames_attack", v.frames_attack}};
}

std::string frame_records_to_csv(const std::vector<FrameRecord>& records) {
    std::ostringstream out;
    out << "ssrc,frame_ordinal,size_bytes\n";
    for (const auto& r : records) {
        out << r.ssrc << ',' << r.ordinal << ',' << r.size_bytes << '\n';
    }
    return out.str();
}

}  // namespace rtcimpair::detect
