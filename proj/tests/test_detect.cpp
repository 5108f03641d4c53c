#include <cmath>

#include "doctest.h"
#include "rtcimpair/detect.hpp"
#include "rtcimpair/fixtures.hpp"
#include "rtcimpair/synth.hpp"

using namespace rtcimpair;

namespace {

const FlowKey kFlow{IpAddr::v4(10, 2, 0, 1), 42000, IpAddr::v4(10, 2, 0, 2), 42001};

io::Trace constant_frame_trace(std::uint32_t frames, std::uint32_t payload_bytes) {
    std::vector<Packet> pkts;
    std::uint16_t seq = 0;
    for (std::uint32_t f = 0; f < frames; ++f) {
        rtp::Header h;
        h.marker = true;
        h.payload_type = 102;
        h.sequence_number = seq++;
        h.timestamp = f * 3750;
        h.ssrc = 0x1234;
        Bytes payload = rtp::encode(h);
        payload.insert(payload.end(), payload_bytes, 0xab);
        pkts.push_back(synth::make_udp_packet(kFlow, std::move(payload),
                                              TimeUsec::from_seconds(f / 24.0)));
    }
    return synth::packets_to_trace(std::move(pkts));
}

detect::FrameSizeStats stats_with(double mean, std::uint64_t frames) {
    detect::FrameSizeStats s;
    s.mean_frame_bytes = mean;
    s.frame_count = frames;
    return s;
}

}  // namespace

TEST_CASE("constant single-packet frames measure exactly") {
    io::Trace trace = constant_frame_trace(100, 1000);
    auto stats = detect::frame_sizes(trace, detect::FrameSizeConfig{});
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].ssrc == 0x1234);
    CHECK(stats[0].frame_count == 100);
    CHECK(stats[0].mean_frame_bytes == 1000.0);
    CHECK(stats[0].stdev_frame_bytes == 0.0);
    // 1000 bytes lands in the third 500-byte bin
    CHECK(stats[0].histogram.bins[2] == 100);
}

TEST_CASE("empty trace yields an empty list") {
    io::Trace empty;
    CHECK(detect::frame_sizes(empty, detect::FrameSizeConfig{}).empty());
}

TEST_CASE("lossless synth stream measures near the profile mean") {
    synth::StreamSpec spec;
    spec.duration_s = 20.0;
    spec.seed = 31;
    io::Trace trace = synth::packets_to_trace(synth::gen_video_stream(
        synth::NonAdaptiveModel{synth::default_profiles()[0]}, spec, kFlow, nullptr));

    auto stats = detect::frame_sizes(trace, detect::FrameSizeConfig{});
    REQUIRE(stats.size() == 1);
    REQUIRE(stats[0].frame_count >= 400);
    // sampling tolerance: 3 standard errors of the mean
    const double se = 1260.0 / std::sqrt(static_cast<double>(stats[0].frame_count));
    CHECK(std::abs(stats[0].mean_frame_bytes - 6300.0) < 3.0 * se);
}

TEST_CASE("tail-truncated frames are excluded") {
    synth::StreamSpec spec;
    spec.duration_s = 1.0;
    spec.seed = 9;
    auto pkts = synth::gen_video_stream(synth::NonAdaptiveModel{synth::default_profiles()[0]},
                                        spec, kFlow, nullptr);
    // chop the last packet (the final frame loses its marker)
    pkts.pop_back();
    io::Trace trace = synth::packets_to_trace(std::move(pkts));
    auto stats = detect::frame_sizes(trace, detect::FrameSizeConfig{});
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].frame_count == 23);  // 24 generated, one unterminated
}

TEST_CASE("distinguisher verdicts from the worked examples") {
    detect::DistinguishConfig cfg;

    SUBCASE("6300 baseline vs 1575 attacked reads as adaptive") {
        auto v = detect::distinguish(stats_with(6300, 200), stats_with(1575, 150), cfg);
        REQUIRE(v.ok());
        CHECK(v.value().reduction_fraction == doctest::Approx(0.75));
        CHECK(v.value().label == detect::Label::Adaptive);
    }
    SUBCASE("unchanged means read as nonadaptive") {
        auto v = detect::distinguish(stats_with(6300, 200), stats_with(6300, 150), cfg);
        REQUIRE(v.ok());
        CHECK(v.value().reduction_fraction == doctest::Approx(0.0));
        CHECK(v.value().label == detect::Label::NonAdaptive);
    }
    SUBCASE("too few frames is inconclusive") {
        auto v = detect::distinguish(stats_with(6300, 200), stats_with(1575, 10), cfg);
        REQUIRE(v.ok());
        CHECK(v.value().label == detect::Label::Inconclusive);
    }
    SUBCASE("zero baseline mean errors") {
        CHECK(!detect::distinguish(stats_with(0, 200), stats_with(100, 200), cfg).ok());
    }
}

TEST_CASE("reduction fraction is scale-free") {
    detect::DistinguishConfig cfg;
    for (double c : {0.5, 2.0, 13.0}) {
        auto base = detect::distinguish(stats_with(6300, 200), stats_with(4000, 200), cfg);
        auto scaled = detect::distinguish(stats_with(6300 * c, 200), stats_with(4000 * c, 200), cfg);
        REQUIRE(base.ok());
        REQUIRE(scaled.ok());
        CHECK(base.value().reduction_fraction ==
              doctest::Approx(scaled.value().reduction_fraction));
        CHECK(base.value().label == scaled.value().label);
    }
}

TEST_CASE("detector pair fixture labels both streams correctly") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        synth::DetectorPairSpec spec;
        spec.stream.duration_s = 10.0;  // >= 200 frames per phase at 24 fps
        spec.stream.seed = seed;
        spec.seed = seed;
        auto pair = synth::gen_detector_pair(spec);

        detect::FrameSizeConfig fcfg;
        auto ab = detect::frame_sizes(pair.adaptive_baseline, fcfg);
        auto aa = detect::frame_sizes(pair.adaptive_attacked, fcfg);
        auto nb = detect::frame_sizes(pair.nonadaptive_baseline, fcfg);
        auto na = detect::frame_sizes(pair.nonadaptive_attacked, fcfg);
        REQUIRE(ab.size() == 1);
        REQUIRE(aa.size() == 1);
        REQUIRE(nb.size() == 1);
        REQUIRE(na.size() == 1);

        auto adaptive = detect::distinguish(ab[0], aa[0], detect::DistinguishConfig{});
        auto nonadaptive = detect::distinguish(nb[0], na[0], detect::DistinguishConfig{});
        REQUIRE(adaptive.ok());
        REQUIRE(nonadaptive.ok());
        CAPTURE(seed);
        CHECK(adaptive.value().label == detect::Label::Adaptive);
        CHECK(nonadaptive.value().label == detect::Label::NonAdaptive);
        CHECK(pair.adaptive_achieved_loss == doctest::Approx(0.25).epsilon(0.35));
    }
}

TEST_CASE("per-frame CSV export lines up with the stats") {
    io::Trace trace = constant_frame_trace(10, 500);
    std::vector<detect::FrameRecord> records;
    auto stats = detect::frame_sizes(trace, detect::FrameSizeConfig{}, &records);
    REQUIRE(stats.size() == 1);
    CHECK(records.size() == 10);
    for (const auto& r : records) CHECK(r.size_bytes == 500);
    auto csv = detect::frame_records_to_csv(records);
    CHECK(csv.find("ssrc,frame_ordinal,size_bytes") == 0);
}
