#include <cmath>
#include <map>

#include "doctest.h"
#include "rtcimpair/capture.hpp"
#include "rtcimpair/dtls.hpp"
#include "rtcimpair/fixtures.hpp"
#include "rtcimpair/synth.hpp"

using namespace rtcimpair;

namespace {

const FlowKey kFlow{IpAddr::v4(10, 1, 0, 1), 40000, IpAddr::v4(10, 1, 0, 2), 40001};

}  // namespace

TEST_CASE("default profiles pin the derived magnitudes") {
    auto profiles = synth::default_profiles();
    REQUIRE(profiles.size() == 4);

    // 151.0 KBytes/s at 24 fps, rounded to the pinned default
    const double derived_1080p = 151.0 * 1000.0 / 24.0;
    CHECK(profiles[0].name == "1080p");
    CHECK(profiles[0].mean_frame_bytes == 6300);
    CHECK(std::abs(profiles[0].mean_frame_bytes - derived_1080p) / derived_1080p < 0.01);

    // lower rungs by pixel-count ratio, computed independently here
    auto scaled = [&](double w, double h) {
        return 6300.0 * (w * h) / (1920.0 * 1080.0);
    };
    CHECK(profiles[1].name == "540p");
    CHECK(profiles[1].mean_frame_bytes == 1575);
    CHECK(profiles[1].mean_frame_bytes == doctest::Approx(scaled(960, 540)));
    CHECK(profiles[2].name == "240p");
    CHECK(profiles[2].mean_frame_bytes == 311);
    CHECK(profiles[2].mean_frame_bytes == doctest::Approx(scaled(426, 240)).epsilon(0.005));
    CHECK(profiles[3].name == "180p");
    CHECK(profiles[3].mean_frame_bytes == 175);
    CHECK(profiles[3].mean_frame_bytes == doctest::Approx(scaled(320, 180)));

    for (const auto& p : profiles) CHECK(p.fps == 24.0);
    for (std::size_t i = 1; i < profiles.size(); ++i) {
        CHECK(profiles[i].mean_frame_bytes < profiles[i - 1].mean_frame_bytes);
    }
}

TEST_CASE("nonadaptive stream emits exactly fps*duration frames, markers on last packets") {
    synth::StreamSpec spec;
    spec.duration_s = 10.0;
    spec.seed = 5;
    synth::VideoStreamGenerator gen(synth::NonAdaptiveModel{synth::default_profiles()[0]}, spec,
                                    kFlow);
    std::uint64_t frames = 0;
    while (!gen.done()) {
        auto frame = gen.next_frame();
        ++frames;
        REQUIRE(!frame.packets.empty());
        for (std::size_t i = 0; i < frame.packets.size(); ++i) {
            auto h = rtp::parse(frame.packets[i].payload());
            REQUIRE(h.ok());
            CHECK(h.value().marker == (i + 1 == frame.packets.size()));
            CHECK(h.value().payload_type == 102);
            CHECK(h.value().ssrc == spec.ssrc);
        }
    }
    CHECK(frames == 240);
}

TEST_CASE("frame reconstruction recovers the generator's frames exactly") {
    synth::StreamSpec spec;
    spec.duration_s = 5.0;
    spec.seed = 17;
    synth::VideoStreamGenerator gen(synth::NonAdaptiveModel{synth::default_profiles()[0]}, spec,
                                    kFlow);

    std::vector<std::uint32_t> gen_sizes;
    std::vector<std::uint32_t> gen_packet_counts;
    std::vector<Packet> packets;
    while (!gen.done()) {
        auto frame = gen.next_frame();
        gen_sizes.push_back(frame.size_bytes);
        gen_packet_counts.push_back(frame.packet_count);
        for (auto& p : frame.packets) packets.push_back(std::move(p));
    }

    rtp::SsrcAssemblerState st;
    std::vector<std::uint32_t> seen_sizes;
    std::vector<std::uint32_t> seen_counts;
    std::uint32_t acc_size = 0, acc_count = 0;
    for (const auto& pkt : packets) {
        auto h = rtp::parse(pkt.payload());
        REQUIRE(h.ok());
        auto ev = rtp::frame_event(h.value(), st);
        if (ev.began_frame) {
            acc_size = 0;
            acc_count = 0;
        }
        acc_size += h.value().payload_length;
        ++acc_count;
        if (ev.kind == rtp::FrameEventKind::FrameEnd) {
            seen_sizes.push_back(acc_size);
            seen_counts.push_back(acc_count);
        }
    }
    CHECK(seen_sizes == gen_sizes);
    CHECK(seen_counts == gen_packet_counts);
}

TEST_CASE("adaptive model downshifts on loss and recovers on clean windows") {
    synth::AdaptiveModel model = synth::default_adaptive_model();
    synth::AdaptiveController ctrl(model);
    CHECK(ctrl.active().name == "1080p");

    SUBCASE("25% loss triggers exactly one downshift") {
        ctrl.observe_window(0.25);
        CHECK(ctrl.active().name == "540p");
        ctrl.observe_window(0.25);  // two-rung default ladder: stays at the floor
        CHECK(ctrl.active().name == "540p");
    }
    SUBCASE("loss below the threshold does not downshift") {
        ctrl.observe_window(0.05);
        CHECK(ctrl.active().name == "1080p");
    }
    SUBCASE("two consecutive clean windows shift back up") {
        ctrl.observe_window(0.25);
        CHECK(ctrl.active().name == "540p");
        ctrl.observe_window(0.0);
        CHECK(ctrl.active().name == "540p");
        ctrl.observe_window(0.0);
        CHECK(ctrl.active().name == "1080p");
    }
}

TEST_CASE("adaptive stream under feedback loss reduces its mean frame size") {
    synth::StreamSpec spec;
    spec.duration_s = 10.0;
    spec.seed = 7;

    auto mean_size = [&](double feedback_loss) {
        synth::VideoStreamGenerator gen(synth::default_adaptive_model(), spec, kFlow);
        double total = 0;
        std::uint64_t n = 0;
        while (!gen.done()) {
            if (gen.needs_feedback()) gen.report_window_loss(feedback_loss);
            auto frame = gen.next_frame();
            total += frame.size_bytes;
            ++n;
        }
        return total / static_cast<double>(n);
    };

    const double clean = mean_size(0.0);
    const double attacked = mean_size(0.25);
    CHECK(attacked < clean);
    CHECK(clean == doctest::Approx(6300).epsilon(0.05));

    synth::VideoStreamGenerator still(synth::default_adaptive_model(), spec, kFlow);
    while (!still.done()) {
        if (still.needs_feedback()) still.report_window_loss(0.0);
        still.next_frame();
    }
    CHECK(still.active_profile().name == "1080p");  // 0% feedback: never changes
}

TEST_CASE("adaptive profile sequence is non-increasing under constant loss") {
    auto profiles = synth::default_profiles();
    synth::AdaptiveModel model;
    model.ladder = {profiles[0], profiles[1], profiles[2], profiles[3]};
    synth::AdaptiveController ctrl(model);
    std::uint32_t last = ctrl.active().mean_frame_bytes;
    for (int w = 0; w < 10; ++w) {
        ctrl.observe_window(0.5);
        CHECK(ctrl.active().mean_frame_bytes <= last);
        last = ctrl.active().mean_frame_bytes;
    }
    CHECK(ctrl.active().name == "180p");
}

TEST_CASE("generation is deterministic in all byte positions") {
    synth::StreamSpec spec;
    spec.duration_s = 3.0;
    spec.seed = 41;
    auto a = synth::gen_video_stream(synth::NonAdaptiveModel{synth::default_profiles()[1]}, spec,
                                     kFlow, nullptr);
    auto b = synth::gen_video_stream(synth::NonAdaptiveModel{synth::default_profiles()[1]}, spec,
                                     kFlow, nullptr);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].frame == b[i].frame);
        CHECK(a[i].ts == b[i].ts);
    }

    io::Trace ta = synth::packets_to_trace(std::move(a));
    io::Trace tb = synth::packets_to_trace(std::move(b));
    CHECK(io::write_capture_bytes(ta) == io::write_capture_bytes(tb));
}

TEST_CASE("keyframe spikes scale every Nth frame") {
    synth::StreamSpec spec;
    spec.duration_s = 4.0;
    spec.seed = 2;
    spec.keyframe_every = 24;
    spec.keyframe_scale = 4.0;
    synth::VideoStreamGenerator gen(synth::NonAdaptiveModel{synth::default_profiles()[0]}, spec,
                                    kFlow);
    double key_sum = 0, other_sum = 0;
    std::uint64_t keys = 0, others = 0;
    while (!gen.done()) {
        auto f = gen.next_frame();
        if (f.frame_index % 24 == 0) {
            key_sum += f.size_bytes;
            ++keys;
        } else {
            other_sum += f.size_bytes;
            ++others;
        }
    }
    REQUIRE(keys > 0);
    CHECK(key_sum / keys > 2.5 * (other_sum / others));
}

TEST_CASE("dtls flight generation and bounds") {
    SUBCASE("issuer over 64 bytes errors") {
        CHECK(!synth::gen_dtls_flight(std::string(65, 'A'), kFlow).ok());
        CHECK(synth::gen_dtls_flight(std::string(64, 'A'), kFlow).ok());
    }
    SUBCASE("non-printable issuer errors") {
        CHECK(!synth::der_certificate_with_issuer_cn("bad\x01issuer").ok());
    }
    SUBCASE("fragment offset outside the body errors") {
        CHECK(!synth::gen_dtls_flight("WebRTC", kFlow, 1000000).ok());
    }
}

TEST_CASE("snowflake fixture composes the expected flows") {
    synth::SnowflakeFixtureSpec spec;
    io::Trace trace = synth::gen_snowflake_fixture(spec);
    REQUIRE(!trace.packets.empty());

    std::map<std::string, int> classes;
    for (std::size_t i = 1; i < trace.packets.size(); ++i) {
        CHECK(!(trace.packets[i].ts < trace.packets[i - 1].ts));
        CHECK(trace.packets[i].original_index == i);
    }
    bool saw_video = false, saw_appdata_flagged = false, saw_appdata_other = false;
    for (const auto& pkt : trace.packets) {
        REQUIRE(pkt.flow.has_value());
        if (demux(pkt.payload()) == DemuxClass::Rtp && pkt.flow == spec.flagged_flow) {
            saw_video = true;
        }
        if (demux(pkt.payload()) == DemuxClass::Dtls) {
            auto recs = dtls::parse_records(pkt.payload());
            for (const auto& r : recs.records) {
                if (dtls::is_application_data(r)) {
                    if (pkt.flow == spec.flagged_flow) saw_appdata_flagged = true;
                    if (pkt.flow == spec.unflagged_flow) saw_appdata_other = true;
                }
            }
        }
    }
    CHECK(saw_video);
    CHECK(saw_appdata_flagged);
    CHECK(saw_appdata_other);
}
