#include "rtcimpair/report.hpp"

#include <fstream>

namespace rtcimpair::io {

using nlohmann::json;

json flow_key_to_json(const FlowKey& key) {
    return json{{"src_addr", key.src_addr.to_string()},
                {"src_port", key.src_port},
                {"dst_addr", key.dst_addr.to_string()},
                {"dst_port", key.dst_port}};
}

Expected<FlowKey> flow_key_from_json(const json& j) {
    FlowKey key;
    auto src = IpAddr::parse(j.at("src_addr").get<std::string>());
    auto dst = IpAddr::parse(j.at("dst_addr").get<std::string>());
    if (!src || !dst) return Error{"bad address in flow key", 0};
    key.src_addr = *src;
    key.dst_addr = *dst;
    key.src_port = j.at("src_port").get<std::uint16_t>();
    key.dst_port = j.at("dst_port").get<std::uint16_t>();
    return key;
}

namespace {

json totals_to_json(const RunTotals& t) {
    return json{{"packets_in", t.packets_in},     {"packets_out", t.packets_out},
                {"packets_dropped", t.packets_dropped}, {"packets_delayed", t.packets_delayed},
                {"udp_packets", t.udp_packets},   {"parse_failures", t.parse_failures}};
}

RunTotals totals_from_json(const json& j) {
    RunTotals t;
    t.packets_in = j.at("packets_in").get<std::uint64_t>();
    t.packets_out = j.at("packets_out").get<std::uint64_t>();
    t.packets_dropped = j.at("packets_dropped").get<std::uint64_t>();
    t.packets_delayed = j.at("packets_delayed").get<std::uint64_t>();
    t.udp_packets = j.at("udp_packets").get<std::uint64_t>();
    t.parse_failures = j.at("parse_failures").get<std::uint64_t>();
    return t;
}

json policy_stats_to_json(const attack::PolicyStats& p) {
    return json{{"kind", p.kind},
                {"packets_seen", p.packets_seen},
                {"packets_dropped", p.packets_dropped},
                {"packets_delayed", p.packets_delayed},
                {"frames_seen", p.frames_seen},
                {"frames_dropped", p.frames_dropped}};
}

attack::PolicyStats policy_stats_from_json(const json& j) {
    attack::PolicyStats p;
    p.kind = j.at("kind").get<std::string>();
    p.packets_seen = j.at("packets_seen").get<std::uint64_t>();
    p.packets_dropped = j.at("packets_dropped").get<std::uint64_t>();
    p.packets_delayed = j.at("packets_delayed").get<std::uint64_t>();
    p.frames_seen = j.at("frames_seen").get<std::uint64_t>();
    p.frames_dropped = j.at("frames_dropped").get<std::uint64_t>();
    return p;
}

json flow_summary_to_json(const FlowSummary& s) {
    return json{{"flow", flow_key_to_json(s.flow)},
                {"packets", s.packets},
                {"demux", json{{"stun", s.demux_counts[0]},
                               {"dtls", s.demux_counts[1]},
                               {"rtp", s.demux_counts[2]},
                               {"unknown", s.demux_counts[3]}}},
                {"webrtc_flagged", s.webrtc_flagged},
                {"issuer_common_name", s.issuer_common_name},
                {"issuer_provenance", s.issuer_provenance},
                {"ssrcs", s.ssrcs},
                {"payload_types", s.payload_types},
                {"frames_seen", s.frames_seen},
                {"parse_failures", s.parse_failures}};
}

Expected<FlowSummary> flow_summary_from_json(const json& j) {
    FlowSummary s;
    auto key = flow_key_from_json(j.at("flow"));
    if (!key.ok()) return key.error();
    s.flow = key.value();
    s.packets = j.at("packets").get<std::uint64_t>();
    const json& d = j.at("demux");
    s.demux_counts[0] = d.at("stun").get<std::uint64_t>();
    s.demux_counts[1] = d.at("dtls").get<std::uint64_t>();
    s.demux_counts[2] = d.at("rtp").get<std::uint64_t>();
    s.demux_counts[3] = d.at("unknown").get<std::uint64_t>();
    s.webrtc_flagged = j.at("webrtc_flagged").get<bool>();
    s.issuer_common_name = j.at("issuer_common_name").get<std::string>();
    s.issuer_provenance = j.at("issuer_provenance").get<std::string>();
    s.ssrcs = j.at("ssrcs").get<std::vector<std::uint32_t>>();
    s.payload_types = j.at("payload_types").get<std::vector<std::uint8_t>>();
    s.frames_seen = j.at("frames_seen").get<std::uint64_t>();
    s.parse_failures = j.at("parse_failures").get<std::uint64_t>();
    return s;
}

}  // namespace

json report_to_json(const RunReport& r) {
    json per_policy = json::array();
    for (const auto& p : r.attack.per_policy) per_policy.push_back(policy_stats_to_json(p));

    json per_flow = json::array();
    for (const auto& [key, br] : r.attack.per_flow) {
        per_flow.push_back(json{{"flow", flow_key_to_json(key)},
                                {"packets_seen", br.packets_seen},
                                {"packets_dropped", br.packets_dropped},
                                {"frames_seen", br.frames_seen},
                                {"frames_dropped", br.frames_dropped}});
    }

    json flows = json::array();
    for (const auto& s : r.flows) flows.push_back(flow_summary_to_json(s));

    json flagged = json::array();
    for (const auto& f : r.flagged) {
        flagged.push_back(json{{"flow", flow_key_to_json(f.flow)},
                               {"flagged_at_usec", f.flagged_at.total_usec()},
                               {"issuer", f.issuer}});
    }

    return json{{"schema_version", r.schema_version},
                {"run_timestamp", r.run_timestamp},
                {"seed", r.seed},
                {"config", r.config_echo},
                {"totals", totals_to_json(r.totals)},
                {"policies", per_policy},
                {"per_flow", per_flow},
                {"ssrc_slot_evictions", r.attack.ssrc_slot_evictions},
                {"flows", flows},
                {"flagged_flows", flagged},
                {"max_flow_state_bytes", r.max_flow_state_bytes},
                {"detector", r.detector}};
}

Expected<RunReport> report_from_json(const json& j) {
    try {
        RunReport r;
        r.schema_version = j.at("schema_version").get<int>();
        if (r.schema_version != 1) return Error{"unsupported report schema version", 0};
        r.run_timestamp = j.at("run_timestamp").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.config_echo = j.at("config");
        r.totals = totals_from_json(j.at("totals"));
        for (const auto& p : j.at("policies")) {
            r.attack.per_policy.push_back(policy_stats_from_json(p));
        }
        for (const auto& pf : j.at("per_flow")) {
            auto key = flow_key_from_json(pf.at("flow"));
            if (!key.ok()) return key.error();
            attack::FlowBreakdown br;
            br.packets_seen = pf.at("packets_seen").get<std::uint64_t>();
            br.packets_dropped = pf.at("packets_dropped").get<std::uint64_t>();
            br.frames_seen = pf.at("frames_seen").get<std::uint64_t>();
            br.frames_dropped = pf.at("frames_dropped").get<std::uint64_t>();
            r.attack.per_flow.emplace(key.value(), br);
        }
        r.attack.ssrc_slot_evictions = j.at("ssrc_slot_evictions").get<std::uint64_t>();
        for (const auto& f : j.at("flows")) {
            auto s = flow_summary_from_json(f);
            if (!s.ok()) return s.error();
            r.flows.push_back(s.value());
        }
        for (const auto& f : j.at("flagged_flows")) {
            auto key = flow_key_from_json(f.at("flow"));
            if (!key.ok()) return key.error();
            flowtable::FlaggedFlow ff;
            ff.flow = key.value();
            ff.flagged_at = TimeUsec::from_total_usec(f.at("flagged_at_usec").get<std::int64_t>());
            ff.issuer = f.at("issuer").get<std::string>();
            r.flagged.push_back(std::move(ff));
        }
        r.max_flow_state_bytes = j.at("max_flow_state_bytes").get<std::size_t>();
        r.detector = j.at("detector");
        return r;
    } catch (const json::exception& e) {
        return Error{std::string("malformed report: ") + e.what(), 0};
    }
}

Expected<std::monostate> write_report(const RunReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) return Error{"cannot open " + path + " for writing", 0};
    out << report_to_json(report).dump(2) << "\n";
    if (!out) return Error{"write failed for " + path, 0};
    return std::monostate{};
}

Expected<RunReport> read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) return Error{"cannot open " + path, 0};
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) return Error{"invalid JSON in " + path, 0};
    return report_from_json(j);
}

}  // namespace rtcimpair::io
