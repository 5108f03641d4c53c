#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rtcimpair/capture.hpp"
#include "rtcimpair/rtp.hpp"

namespace rtcimpair::detect {

struct Histogram {
    std::uint32_t bin_width_bytes = 500;
    std::uint32_t range_max_bytes = 50000;
    std::vector<std::uint64_t> bins;  // last bin collects overflow

    void init() { bins.assign(range_max_bytes / bin_width_bytes + 1, 0); }
    void add(double value) {
        if (bins.empty()) init();
        auto idx = static_cast<std::size_t>(std::max(0.0, value) / bin_width_bytes);
        if (idx >= bins.size()) idx = bins.size() - 1;
        ++bins[idx];
    }
};

struct FrameSizeStats {
    std::uint32_t ssrc = 0;
    std::uint64_t frame_count = 0;
    double mean_frame_bytes = 0;
    double stdev_frame_bytes = 0;
    Histogram histogram;
    std::uint64_t skipped_packets = 0;  // unparseable packets in the stream
};

struct FrameSizeConfig {
    rtp::VideoPtSet pt_set;
    bool marker_only = false;
    std::uint32_t histogram_bin_bytes = 500;
    std::uint32_t histogram_range_bytes = 50000;
};

struct FrameRecord {
    std::uint32_t ssrc = 0;
    std::uint64_t ordinal = 0;
    std::uint64_t size_bytes = 0;
};

// Frame size = sum of RTP payload lengths over the packets observed for the
// frame. Frames with a start and no observed end (tail truncation or a lost
// marker) are excluded. Results sorted by ssrc.
std::vector<FrameSizeStats> frame_sizes(const io::Trace& trace, const FrameSizeConfig& cfg,
                                        std::vector<FrameRecord>* per_frame = nullptr);

enum class Label : std::uint8_t { Adaptive, NonAdaptive, Inconclusive };
const char* label_name(Label label);

struct DistinguisherVerdict {
    Label label = Label::Inconclusive;
    double reduction_fraction = 0.0;
    std::uint64_t frames_baseline = 0;
    std::uint64_t frames_attack = 0;
};

struct DistinguishConfig {
    double threshold = 0.20;
    std::uint64_t min_frames = 50;
};

// The change-under-attack test: a flow that does not shrink its frames under
// the frame-loss attack is not behaving like a genuine adaptive source.
Expected<DistinguisherVerdict> distinguish(const FrameSizeStats& baseline,
                                           const FrameSizeStats& under_attack,
                                           const DistinguishConfig& cfg = {});

nlohmann::json frame_size_stats_to_json(const FrameSizeStats& stats);
nlohmann::json verdict_to_json(const DistinguisherVerdict& verdict);
std::string frame_records_to_csv(const std::vector<FrameRecord>& records);

}  // namespace rtcimpair::detect
