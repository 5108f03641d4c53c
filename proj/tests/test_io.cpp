#include <filesystem>

#include "doctest.h"
#include "rtcimpair/engine.hpp"
#include "rtcimpair/fixtures.hpp"
#include "rtcimpair/report.hpp"
#include "rtcimpair/synth.hpp"

using namespace rtcimpair;

namespace {

const FlowKey kFlow{IpAddr::v4(10, 0, 0, 1), 50000, IpAddr::v4(192, 0, 2, 1), 3478};

io::Trace small_video_trace(double duration_s = 2.0, std::uint64_t seed = 1) {
    synth::StreamSpec spec;
    spec.duration_s = duration_s;
    spec.seed = seed;
    return synth::packets_to_trace(synth::gen_video_stream(
        synth::NonAdaptiveModel{synth::default_profiles()[0]}, spec, kFlow, nullptr));
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("capture writer/reader round-trip") {
    auto pkts = synth::gen_appdata_stream(kFlow, 10, 64, 3);
    io::Trace trace = synth::packets_to_trace(std::move(pkts));

    Bytes file = io::write_capture_bytes(trace);
    auto back = io::read_capture_bytes(file);
    REQUIRE(back.ok());
    REQUIRE(back.value().packets.size() == 10);
    CHECK(back.value().link == LinkType::RawIp);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(back.value().packets[i].frame == trace.packets[i].frame);
        CHECK(back.value().packets[i].ts == trace.packets[i].ts);
        CHECK(back.value().packets[i].original_index == i);
        CHECK(back.value().packets[i].flow == trace.packets[i].flow);
    }
    // writing again is byte-identical
    CHECK(io::write_capture_bytes(back.value()) == file);
}

TEST_CASE("byte-swapped magic parses to the same trace") {
    auto pkts = synth::gen_appdata_stream(kFlow, 3, 32, 3);
    io::Trace trace = synth::packets_to_trace(std::move(pkts));
    Bytes file = io::write_capture_bytes(trace);

    // byte-swap every header field of the native-order file
    Bytes swapped(file);
    auto swap32 = [&](std::size_t off) {
        std::swap(swapped[off], swapped[off + 3]);
        std::swap(swapped[off + 1], swapped[off + 2]);
    };
    auto swap16 = [&](std::size_t off) { std::swap(swapped[off], swapped[off + 1]); };
    swap32(0);
    swap16(4);
    swap16(6);
    swap32(8);
    swap32(12);
    swap32(16);
    swap32(20);
    std::size_t off = 24;
    for (int i = 0; i < 3; ++i) {
        const std::uint32_t incl = file[off + 8] | (file[off + 9] << 8) | (file[off + 10] << 16) |
                                   (static_cast<std::uint32_t>(file[off + 11]) << 24);
        swap32(off);
        swap32(off + 4);
        swap32(off + 8);
        swap32(off + 12);
        off += 16 + incl;
    }

    auto back = io::read_capture_bytes(swapped);
    REQUIRE(back.ok());
    REQUIRE(back.value().packets.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.value().packets[i].frame == trace.packets[i].frame);
        CHECK(back.value().packets[i].ts == trace.packets[i].ts);
    }
}

TEST_CASE("capture errors identify the problem") {
    SUBCASE("bad magic") {
        Bytes junk(32, 0x41);
        auto r = io::read_capture_bytes(junk);
        REQUIRE(!r.ok());
        CHECK(r.error().message.find("magic") != std::string::npos);
    }
    SUBCASE("truncated record names the ordinal") {
        auto pkts = synth::gen_appdata_stream(kFlow, 3, 32, 3);
        Bytes file = io::write_capture_bytes(synth::packets_to_trace(std::move(pkts)));
        file.resize(file.size() - 5);
        auto r = io::read_capture_bytes(file);
        REQUIRE(!r.ok());
        CHECK(r.error().message.find("record 2") != std::string::npos);
    }
    SUBCASE("missing file") {
        CHECK(!io::read_capture("/nonexistent/path.pcap").ok());
    }
}

TEST_CASE("reader normalizes timestamp order stably") {
    auto pkts = synth::gen_appdata_stream(kFlow, 4, 16, 9);
    // scramble timestamps: 3,0,1,2 seconds
    pkts[0].ts = TimeUsec::from_seconds(3.0);
    pkts[1].ts = TimeUsec::from_seconds(0.0);
    pkts[2].ts = TimeUsec::from_seconds(1.0);
    pkts[3].ts = TimeUsec::from_seconds(1.0);
    io::Trace raw;
    raw.link = LinkType::RawIp;
    raw.packets = pkts;
    for (std::size_t i = 0; i < raw.packets.size(); ++i) raw.packets[i].original_index = i;

    auto back = io::read_capture_bytes(io::write_capture_bytes(raw));
    REQUIRE(back.ok());
    const auto& sorted = back.value().packets;
    CHECK(sorted[0].original_index == 1);
    CHECK(sorted[1].original_index == 2);  // stable on the 1.0s tie
    CHECK(sorted[2].original_index == 3);
    CHECK(sorted[3].original_index == 0);
    for (std::size_t i = 1; i < sorted.size(); ++i) CHECK(!(sorted[i].ts < sorted[i - 1].ts));
}

TEST_CASE("empty policy chain reproduces the input capture byte for byte") {
    io::Trace trace = small_video_trace();
    auto result = io::run_offline(trace, attack::PolicyChain{}, io::EngineOptions{});
    CHECK(io::write_capture_bytes(result.output) == io::write_capture_bytes(trace));
    CHECK(result.report.totals.packets_in == trace.packets.size());
    CHECK(result.report.totals.packets_dropped == 0);
}

TEST_CASE("frame drop at rate 1.0 removes all video packets from the output") {
    io::Trace trace = small_video_trace();
    attack::FrameDropConfig cfg;
    cfg.rate = 1.0;
    auto result = io::run_offline(trace, attack::PolicyChain{{cfg}}, io::EngineOptions{});
    CHECK(result.output.packets.empty());
    const auto& st = result.report.attack.per_policy[0];
    CHECK(st.frames_dropped == st.frames_seen);
    CHECK(st.frames_seen > 0);
}

TEST_CASE("fixed delay shifts timestamps uniformly and keeps order") {
    io::Trace trace = small_video_trace();
    attack::PolicyChain chain{{attack::FixedDelayConfig{200}}};
    auto result = io::run_offline(trace, chain, io::EngineOptions{});
    REQUIRE(result.output.packets.size() == trace.packets.size());
    for (std::size_t i = 0; i < trace.packets.size(); ++i) {
        CHECK(result.output.packets[i].ts.total_usec() ==
              trace.packets[i].ts.total_usec() + 200000);
        CHECK(result.output.packets[i].original_index == trace.packets[i].original_index);
    }
    CHECK(result.report.totals.packets_delayed == trace.packets.size());
}

TEST_CASE("conservation: in = out + dropped") {
    io::Trace trace = synth::gen_snowflake_fixture(synth::SnowflakeFixtureSpec{});
    attack::FrameDropConfig drop;
    drop.rate = 0.3;
    attack::PolicyChain chain{{attack::DataChannelBlockConfig{}, drop,
                               attack::UniformLossConfig{0.1, 5}}};
    io::EngineOptions opts;
    opts.seed = 5;
    auto result = io::run_offline(trace, chain, opts);
    CHECK(result.report.totals.packets_in ==
          result.report.totals.packets_out + result.report.totals.packets_dropped);
    CHECK(result.report.totals.packets_in == trace.packets.size());
    CHECK(result.output.packets.size() == result.report.totals.packets_out);
}

TEST_CASE("single-threaded and sharded runs are bit-identical") {
    // two conversations plus non-UDP noise exercise the sharding
    synth::SnowflakeFixtureSpec spec;
    io::Trace trace = synth::gen_snowflake_fixture(spec);

    attack::FrameDropConfig drop;
    drop.rate = 0.25;
    drop.seed = 11;
    attack::PolicyChain chain{
        {attack::DataChannelBlockConfig{}, drop, attack::FixedDelayConfig{50}}};

    io::EngineOptions single;
    single.seed = 11;
    single.workers = 1;
    io::EngineOptions sharded = single;
    sharded.workers = 4;

    auto a = io::run_offline(trace, chain, single);
    auto b = io::run_offline(trace, chain, sharded);
    CHECK(io::write_capture_bytes(a.output) == io::write_capture_bytes(b.output));

    auto ja = io::report_to_json(a.report);
    auto jb = io::report_to_json(b.report);
    ja.erase("run_timestamp");
    jb.erase("run_timestamp");
    CHECK(ja == jb);
}

TEST_CASE("report JSON round-trips") {
    io::Trace trace = synth::gen_snowflake_fixture(synth::SnowflakeFixtureSpec{});
    attack::FrameDropConfig drop;
    drop.rate = 0.4;
    io::EngineOptions opts;
    opts.seed = 3;
    auto result = io::run_offline(trace, attack::PolicyChain{{drop}}, opts);
    result.report.config_echo = {{"policy", "frame_drop"}, {"rate", 0.4}};

    auto j = io::report_to_json(result.report);
    auto back = io::report_from_json(j);
    REQUIRE(back.ok());
    CHECK(io::report_to_json(back.value()) == j);

    const std::string path = tmp_path("rtcimpair_report_roundtrip.json");
    REQUIRE(io::write_report(result.report, path).ok());
    auto from_disk = io::read_report(path);
    REQUIRE(from_disk.ok());
    CHECK(io::report_to_json(from_disk.value()) == j);
    std::filesystem::remove(path);
}

TEST_CASE("zero-packet run still yields a valid report") {
    io::Trace empty;
    auto result = io::run_offline(empty, attack::PolicyChain{}, io::EngineOptions{});
    auto j = io::report_to_json(result.report);
    CHECK(j.at("totals").at("packets_in") == 0);
    auto back = io::report_from_json(j);
    CHECK(back.ok());
}

namespace {

// In-memory host hook fed from a trace.
class TraceHook : public io::PacketHook {
  public:
    TraceHook(const io::Trace& trace, bool delay_support)
        : trace_(trace), delay_support_(delay_support) {}

    bool supports_delay() const override { return delay_support_; }

    bool next(io::RawPacket& out) override {
        if (pos_ >= trace_.packets.size()) return false;
        // the contract: the previous verdict arrived before the next packet
        REQUIRE(verdicts_.size() == pos_);
        out.id = pos_;
        out.ts = trace_.packets[pos_].ts;
        out.frame = trace_.packets[pos_].frame;
        ++pos_;
        return true;
    }

    void submit(std::uint64_t id, const Verdict& v) override {
        CHECK(id == verdicts_.size());
        verdicts_.push_back(v);
    }

    const std::vector<Verdict>& verdicts() const { return verdicts_; }

  private:
    const io::Trace& trace_;
    bool delay_support_;
    std::size_t pos_ = 0;
    std::vector<Verdict> verdicts_;
};

}  // namespace

TEST_CASE("live adapter returns one in-order verdict per packet") {
    synth::SnowflakeFixtureSpec spec;
    io::Trace trace = synth::gen_snowflake_fixture(spec);
    TraceHook hook(trace, true);

    attack::PolicyChain chain{{attack::DataChannelBlockConfig{}}};
    auto summary = io::run_live(hook, trace.link, chain, io::EngineOptions{});
    CHECK(summary.packets == trace.packets.size());
    REQUIRE(hook.verdicts().size() == trace.packets.size());

    // the same decision path as offline: flagged application_data
    // is dropped packet for packet
    auto offline = io::run_offline(trace, chain, io::EngineOptions{});
    CHECK(offline.report.totals.packets_dropped == spec.appdata_packets);
    std::uint64_t live_drops = 0;
    for (const auto& v : hook.verdicts()) live_drops += v.is_drop();
    CHECK(live_drops == spec.appdata_packets);
}

TEST_CASE("live adapter downgrades delay verdicts when unsupported") {
    io::Trace trace = small_video_trace(0.5);
    TraceHook hook(trace, false);
    attack::PolicyChain chain{{attack::FixedDelayConfig{100}}};
    auto summary = io::run_live(hook, trace.link, chain, io::EngineOptions{});
    CHECK(summary.delay_downgrades == trace.packets.size());
    for (const auto& v : hook.verdicts()) CHECK(v.is_pass());

    TraceHook hook2(trace, true);
    auto summary2 = io::run_live(hook2, trace.link, chain, io::EngineOptions{});
    CHECK(summary2.delay_downgrades == 0);
    for (const auto& v : hook2.verdicts()) CHECK(v.is_delay());
}

TEST_CASE("thousand packets on one flow, one verdict each, in order") {
    auto pkts = synth::gen_appdata_stream(kFlow, 1000, 50, 8);
    io::Trace trace = synth::packets_to_trace(std::move(pkts));
    TraceHook hook(trace, true);
    auto summary = io::run_live(hook, trace.link, attack::PolicyChain{}, io::EngineOptions{});
    CHECK(summary.packets == 1000);
    CHECK(hook.verdicts().size() == 1000);
}
