#include <cmath>
#include <map>

#include "doctest.h"
#include "rtcimpair/engine.hpp"
#include "rtcimpair/fixtures.hpp"
#include "rtcimpair/synth.hpp"

using namespace rtcimpair;

namespace {

const FlowKey kFlowA{IpAddr::v4(10, 0, 0, 1), 50000, IpAddr::v4(192, 0, 2, 1), 3478};
const FlowKey kFlowB{IpAddr::v4(10, 0, 0, 9), 50009, IpAddr::v4(192, 0, 2, 9), 4433};

io::Trace video_trace(double duration_s, std::uint64_t seed, std::uint8_t pt = 102) {
    synth::StreamSpec spec;
    spec.duration_s = duration_s;
    spec.seed = seed;
    spec.payload_type = pt;
    return synth::packets_to_trace(synth::gen_video_stream(
        synth::NonAdaptiveModel{synth::default_profiles()[0]}, spec, kFlowA, nullptr));
}

struct RunOutcome {
    std::vector<Verdict> verdicts;
    io::RunReport report;
};

RunOutcome run_chain(const io::Trace& trace, attack::PolicyChain chain, std::uint64_t seed = 1) {
    io::EngineOptions opts;
    opts.seed = seed;
    io::PacketProcessor proc(chain, opts);
    RunOutcome out;
    for (const Packet& pkt : trace.packets) out.verdicts.push_back(proc.process(pkt));
    proc.finalize_into(out.report);
    return out;
}

double binomial_99_halfwidth(double p, double n) {
    return 2.576 * std::sqrt(p * (1.0 - p) / n);
}

}  // namespace

TEST_CASE("data channel block drops flagged application_data only") {
    synth::SnowflakeFixtureSpec spec;
    io::Trace trace = synth::gen_snowflake_fixture(spec);

    attack::PolicyChain chain;
    chain.policies.push_back(attack::DataChannelBlockConfig{});
    RunOutcome out = run_chain(trace, chain);

    std::uint64_t flagged_appdata = 0, flagged_appdata_dropped = 0;
    std::uint64_t rtp_dropped = 0, unflagged_dropped = 0;
    for (std::size_t i = 0; i < trace.packets.size(); ++i) {
        const Packet& pkt = trace.packets[i];
        const bool dropped = out.verdicts[i].is_drop();
        const bool on_flagged = pkt.flow == spec.flagged_flow;
        const DemuxClass cls = demux(pkt.payload());
        if (cls == DemuxClass::Rtp) {
            rtp_dropped += dropped;
        } else if (cls == DemuxClass::Dtls) {
            auto records = dtls::parse_records(pkt.payload());
            bool appdata = false;
            for (const auto& r : records.records) appdata |= dtls::is_application_data(r);
            if (on_flagged && appdata) {
                ++flagged_appdata;
                flagged_appdata_dropped += dropped;
            }
        }
        if (!on_flagged && dropped) ++unflagged_dropped;
    }
    CHECK(flagged_appdata == spec.appdata_packets);
    CHECK(flagged_appdata_dropped == flagged_appdata);  // 100% of the data channel
    CHECK(rtp_dropped == 0);                            // media untouched
    CHECK(unflagged_dropped == 0);                      // no collateral flows
}

TEST_CASE("frame drop at the degenerate rates") {
    io::Trace trace = video_trace(2.0, 5);

    SUBCASE("rate 1.0 drops every video packet") {
        attack::FrameDropConfig cfg;
        cfg.rate = 1.0;
        attack::PolicyChain chain{{cfg}};
        RunOutcome out = run_chain(trace, chain);
        for (const auto& v : out.verdicts) CHECK(v.is_drop());
        CHECK(out.report.attack.per_policy[0].frames_dropped ==
              out.report.attack.per_policy[0].frames_seen);
    }
    SUBCASE("rate 0.0 passes everything") {
        attack::FrameDropConfig cfg;
        cfg.rate = 0.0;
        attack::PolicyChain chain{{cfg}};
        RunOutcome out = run_chain(trace, chain);
        for (const auto& v : out.verdicts) CHECK(v.is_pass());
    }
}

TEST_CASE("audio is immune to frame drop") {
    auto audio = synth::gen_audio_stream(kFlowA, 2.0, 111, 0xaaaa0001, 3);
    auto video = synth::gen_video_stream(synth::NonAdaptiveModel{synth::default_profiles()[0]},
                                         synth::StreamSpec{.duration_s = 2.0, .seed = 4}, kFlowA,
                                         nullptr);
    std::vector<Packet> all;
    all.insert(all.end(), audio.begin(), audio.end());
    all.insert(all.end(), video.begin(), video.end());
    io::Trace trace = synth::packets_to_trace(std::move(all));

    attack::FrameDropConfig cfg;
    cfg.rate = 1.0;
    RunOutcome out = run_chain(trace, attack::PolicyChain{{cfg}});
    for (std::size_t i = 0; i < trace.packets.size(); ++i) {
        auto h = rtp::parse(trace.packets[i].payload());
        REQUIRE(h.ok());
        if (h.value().payload_type == 111) {
            CHECK(out.verdicts[i].is_pass());
        } else {
            CHECK(out.verdicts[i].is_drop());
        }
    }
}

TEST_CASE("frame drop calibrates to the binomial interval at rate 0.25") {
    // 5000 frames at 24 fps
    io::Trace trace = video_trace(5000.0 / 24.0, 77);
    attack::FrameDropConfig cfg;
    cfg.rate = 0.25;
    RunOutcome out = run_chain(trace, attack::PolicyChain{{cfg}}, 123);

    const auto& st = out.report.attack.per_policy[0];
    REQUIRE(st.frames_seen >= 5000);
    const double achieved = static_cast<double>(st.frames_dropped) / st.frames_seen;
    const double hw = binomial_99_halfwidth(0.25, static_cast<double>(st.frames_seen));
    CHECK(achieved > 0.25 - hw);
    CHECK(achieved < 0.25 + hw);
}

TEST_CASE("frame atomicity: every frame fully present or fully absent") {
    io::Trace trace = video_trace(20.0, 99);
    attack::FrameDropConfig cfg;
    cfg.rate = 0.4;
    RunOutcome out = run_chain(trace, attack::PolicyChain{{cfg}}, 7);

    // group packets by media timestamp (one frame per timestamp in fixture)
    std::map<std::uint32_t, std::pair<int, int>> frames;  // ts -> (passed, dropped)
    for (std::size_t i = 0; i < trace.packets.size(); ++i) {
        auto h = rtp::parse(trace.packets[i].payload());
        REQUIRE(h.ok());
        auto& f = frames[h.value().timestamp];
        if (out.verdicts[i].is_drop()) {
            ++f.second;
        } else {
            ++f.first;
        }
    }
    for (const auto& [ts, counts] : frames) {
        CHECK((counts.first == 0 || counts.second == 0));
    }
}

TEST_CASE("periodic mode hits the configured rate exactly") {
    io::Trace trace = video_trace(1000.0 / 24.0, 13);
    attack::FrameDropConfig cfg;
    cfg.rate = 0.15;
    cfg.periodic = true;
    RunOutcome out = run_chain(trace, attack::PolicyChain{{cfg}});
    const auto& st = out.report.attack.per_policy[0];
    REQUIRE(st.frames_seen >= 1000);
    const double achieved = static_cast<double>(st.frames_dropped) / st.frames_seen;
    CHECK(achieved == doctest::Approx(0.15).epsilon(0.002));
}

TEST_CASE("identical seed and trace give identical decisions") {
    io::Trace trace = video_trace(5.0, 21);
    attack::FrameDropConfig cfg;
    cfg.rate = 0.3;
    auto a = run_chain(trace, attack::PolicyChain{{cfg}}, 9);
    auto b = run_chain(trace, attack::PolicyChain{{cfg}}, 9);
    CHECK(a.verdicts.size() == b.verdicts.size());
    for (std::size_t i = 0; i < a.verdicts.size(); ++i) CHECK(a.verdicts[i] == b.verdicts[i]);

    auto c = run_chain(trace, attack::PolicyChain{{cfg}}, 10);
    bool any_differs = false;
    for (std::size_t i = 0; i < a.verdicts.size(); ++i) {
        any_differs = any_differs || !(a.verdicts[i] == c.verdicts[i]);
    }
    CHECK(any_differs);  // the seed really drives the decisions
}

TEST_CASE("uniform loss calibrates and respects degenerate rates") {
    auto appdata = synth::gen_appdata_stream(kFlowA, 20000, 100, 5);
    io::Trace trace = synth::packets_to_trace(std::move(appdata));

    SUBCASE("rate 0 and 1") {
        attack::UniformLossConfig none{0.0, 1};
        for (const auto& v : run_chain(trace, attack::PolicyChain{{none}}).verdicts) {
            CHECK(v.is_pass());
        }
        attack::UniformLossConfig all{1.0, 1};
        for (const auto& v : run_chain(trace, attack::PolicyChain{{all}}).verdicts) {
            CHECK(v.is_drop());
        }
    }
    SUBCASE("rate 0.05 over 20000 packets") {
        attack::UniformLossConfig cfg{0.05, 42};
        RunOutcome out = run_chain(trace, attack::PolicyChain{{cfg}});
        std::uint64_t dropped = 0;
        for (const auto& v : out.verdicts) dropped += v.is_drop();
        const double achieved = static_cast<double>(dropped) / 20000.0;
        CHECK(achieved > 0.045);
        CHECK(achieved < 0.055);
    }
}

TEST_CASE("composition: drop dominates, delays sum") {
    io::Trace trace = video_trace(1.0, 31);

    SUBCASE("frame drop at zero is a no-op") {
        attack::FrameDropConfig cfg;
        cfg.rate = 0.0;
        for (const auto& v : run_chain(trace, attack::PolicyChain{{cfg}}).verdicts) {
            CHECK(v.is_pass());
        }
    }
    SUBCASE("two delays add") {
        attack::PolicyChain chain{
            {attack::FixedDelayConfig{100}, attack::FixedDelayConfig{100}}};
        for (const auto& v : run_chain(trace, chain).verdicts) {
            CHECK(v.is_delay());
            CHECK(v.delay_ms() == 200);
        }
    }
    SUBCASE("drop short-circuits a later delay") {
        attack::FrameDropConfig drop;
        drop.rate = 1.0;
        attack::PolicyChain chain{{drop, attack::FixedDelayConfig{100}}};
        RunOutcome out = run_chain(trace, chain);
        for (const auto& v : out.verdicts) CHECK(v.is_drop());
        // the delay policy never saw the dropped packets
        CHECK(out.report.attack.per_policy[1].packets_seen == 0);
    }
}
