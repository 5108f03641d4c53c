#include "rtcimpair/config.hpp"

#include <fstream>
#include <set>

namespace rtcimpair::config {

using nlohmann::json;

json default_config_json() {
    json profiles = json::array();
    for (const auto& p : synth::default_profiles()) {
        profiles.push_back({{"name", p.name},
                            {"mean_frame_bytes", p.mean_frame_bytes},
                            {"frame_bytes_stdev", p.frame_bytes_stdev},
                            {"fps", p.fps},
                            {"width", p.width},
                            {"height", p.height}});
    }
    return json{
        {"seed", 0},
        {"engine",
         {{"workers", 1},
          {"marker_only_frames", false},
          {"video_payload_types", {102, 77}},
          {"issuer_match", "WebRTC"},
          {"issuer_substring", false},
          {"flow_capacity", 65536},
          {"ssrc_slots", 8},
          {"handshake_buffer_bytes", 16384}}},
        {"policy", {{"chain", json::array()}}},
        {"profiles", profiles},
        {"source",
         {{"kind", "nonadaptive"},
          {"profile", "1080p"},
          {"ladder", {"1080p", "540p"}},
          {"downshift_loss_threshold", 0.10},
          {"window_s", 2.0}}},
        {"stream",
         {{"ssrc", 0x11223344},
          {"payload_type", 102},
          {"mtu_payload_bytes", 1200},
          {"duration_s", 10.0},
          {"keyframe_every", 0},
          {"keyframe_scale", 3.0},
          {"src_addr", "10.0.0.1"},
          {"src_port", 5000},
          {"dst_addr", "10.0.0.2"},
          {"dst_port", 6000}}},
        {"covert",
         {{"message_bytes", 1500},
          {"retransmit_timeout_ms", 1000},
          {"rto_backoff", 2.0},
          {"rto_cap_ms", 60000},
          {"window_messages", 4},
          {"carrier_profile", "1080p"},
          {"fast_retransmit_probability", 0.0}}},
        {"sim",
         {{"duration_s", 300.0},
          {"frame_drop_rates", {0.0, 0.05, 0.15, 0.25}},
          {"policy", "frame_drop"},
          {"delay_ms", 0}}},
        {"synth",
         {{"mode", "video"},
          {"issuer", "WebRTC"},
          {"fragment_at", nullptr},
          {"appdata_packets", 200},
          {"appdata_bytes", 400},
          {"frame_drop_rate", 0.25}}},
        {"detect",
         {{"threshold", 0.20},
          {"min_frames", 50},
          {"histogram_bin_bytes", 500},
          {"histogram_range_bytes", 50000},
          {"marker_only", false}}},
    };
}

json merge_config(json base, const json& overlay) {
    if (!overlay.is_object() || !base.is_object()) return overlay;
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (base.contains(it.key())) {
            base[it.key()] = merge_config(base[it.key()], it.value());
        } else {
            base[it.key()] = it.value();
        }
    }
    return base;
}

namespace {

struct Validator {
    std::optional<Error> err;

    void fail(const std::string& path, const std::string& message) {
        if (!err) err = Error{path + ": " + message, 0};
    }

    bool check_keys(const json& obj, const std::string& path,
                    const std::set<std::string>& allowed) {
        if (err) return false;
        if (!obj.is_object()) {
            fail(path, "expected an object");
            return false;
        }
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (!allowed.count(it.key())) {
                fail(path + "." + it.key(), "unknown key");
                return false;
            }
        }
        return true;
    }

    template <typename T>
    T number(const json& obj, const std::string& path, const std::string& key, T fallback) {
        if (err) return fallback;
        if (!obj.contains(key)) return fallback;
        const json& v = obj.at(key);
        if (!v.is_number()) {
            fail(path + "." + key, "expected a number");
            return fallback;
        }
        return v.get<T>();
    }

    bool boolean(const json& obj, const std::string& path, const std::string& key, bool fallback) {
        if (err) return fallback;
        if (!obj.contains(key)) return fallback;
        if (!obj.at(key).is_boolean()) {
            fail(path + "." + key, "expected a boolean");
            return fallback;
        }
        return obj.at(key).get<bool>();
    }

    std::string text(const json& obj, const std::string& path, const std::string& key,
                     const std::string& fallback) {
        if (err) return fallback;
        if (!obj.contains(key)) return fallback;
        if (!obj.at(key).is_string()) {
            fail(path + "." + key, "expected a string");
            return fallback;
        }
        return obj.at(key).get<std::string>();
    }

    double rate(const json& obj, const std::string& path, const std::string& key,
                double fallback) {
        double v = number<double>(obj, path, key, fallback);
        if (!err && (v < 0.0 || v > 1.0)) fail(path + "." + key, "must be within [0,1]");
        return v;
    }
};

rtp::VideoPtSet pt_set_from(const json& arr, const std::string& path, Validator& v) {
    rtp::VideoPtSet set({});
    if (!arr.is_array() || arr.empty()) {
        v.fail(path, "expected a non-empty array of payload types");
        return rtp::VideoPtSet{};
    }
    for (const auto& el : arr) {
        if (!el.is_number_integer() || el.get<std::int64_t>() < 0 || el.get<std::int64_t>() > 127) {
            v.fail(path, "payload types are integers 0..127");
            return rtp::VideoPtSet{};
        }
        set.add(static_cast<std::uint8_t>(el.get<std::int64_t>()));
    }
    return set;
}

}  // namespace

namespace {
Expected<RunConfig> parse_config_impl(const json& doc);
}

Expected<RunConfig> parse_config(const json& doc) {
    try {
        return parse_config_impl(merge_config(default_config_json(), doc));
    } catch (const json::exception& e) {
        return Error{std::string("config: ") + e.what(), 0};
    }
}

namespace {

Expected<RunConfig> parse_config_impl(const json& doc) {
    Validator v;
    RunConfig cfg;
    cfg.echo = doc;

    if (!v.check_keys(doc, "config",
                      {"seed", "engine", "policy", "profiles", "source", "stream", "covert", "sim",
                       "synth", "detect"})) {
        return *v.err;
    }

    cfg.seed = v.number<std::uint64_t>(doc, "config", "seed", 0);

    // engine
    const json& engine = doc.at("engine");
    if (!v.check_keys(engine, "engine",
                      {"workers", "marker_only_frames", "video_payload_types", "issuer_match",
                       "issuer_substring", "flow_capacity", "ssrc_slots",
                       "handshake_buffer_bytes"})) {
        return *v.err;
    }
    cfg.engine.seed = cfg.seed;
    cfg.engine.workers = v.number<unsigned>(engine, "engine", "workers", 1);
    cfg.engine.marker_only_frames = v.boolean(engine, "engine", "marker_only_frames", false);
    if (engine.contains("video_payload_types")) {
        cfg.engine.video_pt_set =
            pt_set_from(engine.at("video_payload_types"), "engine.video_payload_types", v);
    }
    cfg.engine.issuer.match = v.text(engine, "engine", "issuer_match", "WebRTC");
    cfg.engine.issuer.substring = v.boolean(engine, "engine", "issuer_substring", false);
    cfg.engine.flow_capacity = v.number<std::size_t>(engine, "engine", "flow_capacity", 65536);
    cfg.engine.ssrc_slots = v.number<std::size_t>(engine, "engine", "ssrc_slots", 8);
    cfg.engine.handshake_buffer_bytes =
        v.number<std::size_t>(engine, "engine", "handshake_buffer_bytes", 16384);
    if (!v.err && cfg.engine.workers == 0) v.fail("engine.workers", "must be >= 1");
    if (!v.err && cfg.engine.ssrc_slots == 0) v.fail("engine.ssrc_slots", "must be >= 1");
    if (v.err) return *v.err;

    // profiles
    cfg.profiles.clear();
    const json& profiles = doc.at("profiles");
    if (!profiles.is_array() || profiles.empty()) {
        return Error{"profiles: expected a non-empty array", 0};
    }
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const std::string path = "profiles[" + std::to_string(i) + "]";
        const json& p = profiles[i];
        if (!v.check_keys(p, path,
                          {"name", "mean_frame_bytes", "frame_bytes_stdev", "fps", "width",
                           "height"})) {
            return *v.err;
        }
        synth::ResolutionProfile profile;
        profile.name = v.text(p, path, "name", "");
        profile.mean_frame_bytes = v.number<std::uint32_t>(p, path, "mean_frame_bytes", 0);
        profile.frame_bytes_stdev = v.number<std::uint32_t>(p, path, "frame_bytes_stdev", 0);
        profile.fps = v.number<double>(p, path, "fps", 24.0);
        profile.width = v.number<std::uint32_t>(p, path, "width", 0);
        profile.height = v.number<std::uint32_t>(p, path, "height", 0);
        if (!v.err && profile.name.empty()) v.fail(path + ".name", "must be non-empty");
        if (!v.err && profile.mean_frame_bytes == 0) {
            v.fail(path + ".mean_frame_bytes", "must be > 0");
        }
        if (!v.err && profile.fps <= 0) v.fail(path + ".fps", "must be > 0");
        if (v.err) return *v.err;
        cfg.profiles.push_back(std::move(profile));
    }

    auto lookup_profile = [&](const std::string& name,
                              const std::string& path) -> const synth::ResolutionProfile* {
        const auto* p = synth::find_profile(cfg.profiles, name);
        if (!p) v.fail(path, "unknown profile '" + name + "'");
        return p;
    };

    // source
    const json& source = doc.at("source");
    if (!v.check_keys(source, "source",
                      {"kind", "profile", "ladder", "downshift_loss_threshold", "window_s"})) {
        return *v.err;
    }
    const std::string source_kind = v.text(source, "source", "kind", "nonadaptive");
    if (source_kind == "nonadaptive") {
        const auto* p =
            lookup_profile(v.text(source, "source", "profile", "1080p"), "source.profile");
        if (v.err) return *v.err;
        cfg.source = synth::NonAdaptiveModel{*p};
    } else if (source_kind == "adaptive") {
        synth::AdaptiveModel model;
        const json& ladder = source.at("ladder");
        if (!ladder.is_array() || ladder.size() < 2) {
            return Error{"source.ladder: adaptive ladders need at least 2 rungs", 0};
        }
        for (const auto& rung : ladder) {
            if (!rung.is_string()) return Error{"source.ladder: expected profile names", 0};
            const auto* p = lookup_profile(rung.get<std::string>(), "source.ladder");
            if (v.err) return *v.err;
            model.ladder.push_back(*p);
        }
        for (std::size_t i = 1; i < model.ladder.size(); ++i) {
            if (model.ladder[i].mean_frame_bytes > model.ladder[i - 1].mean_frame_bytes) {
                return Error{"source.ladder: rungs must descend by mean_frame_bytes", 0};
            }
        }
        model.downshift_loss_threshold =
            v.rate(source, "source", "downshift_loss_threshold", 0.10);
        model.window_s = v.number<double>(source, "source", "window_s", 2.0);
        if (!v.err && model.downshift_loss_threshold <= 0.0) {
            v.fail("source.downshift_loss_threshold", "must be in (0,1)");
        }
        if (!v.err && model.window_s <= 0.0) v.fail("source.window_s", "must be > 0");
        if (v.err) return *v.err;
        cfg.source = std::move(model);
    } else {
        return Error{"source.kind: expected 'adaptive' or 'nonadaptive'", 0};
    }

    // stream
    const json& stream = doc.at("stream");
    if (!v.check_keys(stream, "stream",
                      {"ssrc", "payload_type", "mtu_payload_bytes", "duration_s", "keyframe_every",
                       "keyframe_scale", "src_addr", "src_port", "dst_addr", "dst_port"})) {
        return *v.err;
    }
    cfg.stream.ssrc = v.number<std::uint32_t>(stream, "stream", "ssrc", 0x11223344);
    cfg.stream.payload_type =
        static_cast<std::uint8_t>(v.number<std::uint32_t>(stream, "stream", "payload_type", 102));
    cfg.stream.mtu_payload_bytes =
        v.number<std::uint32_t>(stream, "stream", "mtu_payload_bytes", 1200);
    cfg.stream.duration_s = v.number<double>(stream, "stream", "duration_s", 10.0);
    cfg.stream.seed = cfg.seed + 1;
    cfg.stream.keyframe_every = v.number<std::uint32_t>(stream, "stream", "keyframe_every", 0);
    cfg.stream.keyframe_scale = v.number<double>(stream, "stream", "keyframe_scale", 3.0);
    if (!v.err && cfg.stream.mtu_payload_bytes < 64) {
        v.fail("stream.mtu_payload_bytes", "must be >= 64");
    }
    if (!v.err && cfg.stream.duration_s <= 0) v.fail("stream.duration_s", "must be > 0");
    auto src = IpAddr::parse(v.text(stream, "stream", "src_addr", "10.0.0.1"));
    auto dst = IpAddr::parse(v.text(stream, "stream", "dst_addr", "10.0.0.2"));
    if (!v.err && (!src || !dst)) v.fail("stream.src_addr", "invalid address");
    if (v.err) return *v.err;
    cfg.stream_flow.src_addr = *src;
    cfg.stream_flow.dst_addr = *dst;
    cfg.stream_flow.src_port = v.number<std::uint16_t>(stream, "stream", "src_port", 5000);
    cfg.stream_flow.dst_port = v.number<std::uint16_t>(stream, "stream", "dst_port", 6000);

    // covert
    const json& covert = doc.at("covert");
    if (!v.check_keys(covert, "covert",
                      {"message_bytes", "retransmit_timeout_ms", "rto_backoff", "rto_cap_ms",
                       "window_messages", "carrier_profile", "fast_retransmit_probability"})) {
        return *v.err;
    }
    cfg.covert.message_bytes = v.number<std::uint32_t>(covert, "covert", "message_bytes", 1500);
    cfg.covert.retransmit_timeout_ms =
        v.number<std::uint32_t>(covert, "covert", "retransmit_timeout_ms", 1000);
    cfg.covert.rto_backoff = v.number<double>(covert, "covert", "rto_backoff", 2.0);
    cfg.covert.rto_cap_ms = v.number<std::uint32_t>(covert, "covert", "rto_cap_ms", 60000);
    cfg.covert.window_messages = v.number<std::uint32_t>(covert, "covert", "window_messages", 4);
    cfg.covert.fast_retransmit_probability =
        v.rate(covert, "covert", "fast_retransmit_probability", 0.0);
    cfg.covert.mtu_payload_bytes = cfg.stream.mtu_payload_bytes;
    {
        const auto* p = lookup_profile(v.text(covert, "covert", "carrier_profile", "1080p"),
                                       "covert.carrier_profile");
        if (v.err) return *v.err;
        cfg.covert.carrier = *p;
    }
    if (cfg.covert.message_bytes == 0) return Error{"covert.message_bytes: must be > 0", 0};
    if (cfg.covert.window_messages == 0) return Error{"covert.window_messages: must be >= 1", 0};
    if (cfg.covert.retransmit_timeout_ms == 0) {
        return Error{"covert.retransmit_timeout_ms: must be > 0", 0};
    }
    if (cfg.covert.rto_backoff < 1.0) return Error{"covert.rto_backoff: must be >= 1", 0};

    // policy chain
    const json& policy = doc.at("policy");
    if (!v.check_keys(policy, "policy", {"chain"})) return *v.err;
    const json& chain = policy.at("chain");
    if (!chain.is_array()) return Error{"policy.chain: expected an array", 0};
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const std::string path = "policy.chain[" + std::to_string(i) + "]";
        const json& entry = chain[i];
        const std::string kind = v.text(entry, path, "kind", "");
        if (v.err) return *v.err;
        if (kind == "data_channel_block") {
            if (!v.check_keys(entry, path, {"kind", "issuer_match", "issuer_substring"})) {
                return *v.err;
            }
            attack::DataChannelBlockConfig block;
            block.issuer.match = v.text(entry, path, "issuer_match", cfg.engine.issuer.match);
            block.issuer.substring =
                v.boolean(entry, path, "issuer_substring", cfg.engine.issuer.substring);
            // the flag itself is set by the flow table; keep them consistent
            cfg.engine.issuer = block.issuer;
            cfg.chain.policies.push_back(block);
        } else if (kind == "frame_drop") {
            if (!v.check_keys(entry, path, {"kind", "rate", "seed", "payload_types", "periodic"})) {
                return *v.err;
            }
            attack::FrameDropConfig drop;
            drop.rate = v.rate(entry, path, "rate", 0.0);
            drop.seed = v.number<std::uint64_t>(entry, path, "seed", cfg.seed);
            drop.periodic = v.boolean(entry, path, "periodic", false);
            if (entry.contains("payload_types")) {
                drop.pt_set = pt_set_from(entry.at("payload_types"), path + ".payload_types", v);
            } else {
                drop.pt_set = cfg.engine.video_pt_set;
            }
            if (v.err) return *v.err;
            cfg.chain.policies.push_back(drop);
        } else if (kind == "uniform_loss") {
            if (!v.check_keys(entry, path, {"kind", "rate", "seed"})) return *v.err;
            attack::UniformLossConfig loss;
            loss.rate = v.rate(entry, path, "rate", 0.0);
            loss.seed = v.number<std::uint64_t>(entry, path, "seed", cfg.seed);
            if (v.err) return *v.err;
            cfg.chain.policies.push_back(loss);
        } else if (kind == "fixed_delay") {
            if (!v.check_keys(entry, path, {"kind", "delay_ms"})) return *v.err;
            attack::FixedDelayConfig delay;
            delay.delay_ms = v.number<std::uint32_t>(entry, path, "delay_ms", 0);
            if (!v.err && delay.delay_ms == 0) v.fail(path + ".delay_ms", "must be > 0");
            if (v.err) return *v.err;
            cfg.chain.policies.push_back(delay);
        } else {
            return Error{path + ".kind: unknown policy kind '" + kind + "'", 0};
        }
    }

    // the flow table's rng streams follow the frame-drop seed when present
    for (const auto& p : cfg.chain.policies) {
        if (const auto* fd = std::get_if<attack::FrameDropConfig>(&p)) {
            cfg.engine.seed = fd->seed;
            break;
        }
    }

    // sim
    const json& sim = doc.at("sim");
    if (!v.check_keys(sim, "sim", {"duration_s", "frame_drop_rates", "policy", "delay_ms"})) {
        return *v.err;
    }
    cfg.sim.duration_s = v.number<double>(sim, "sim", "duration_s", 300.0);
    cfg.sim.policy = v.text(sim, "sim", "policy", "frame_drop");
    cfg.sim.delay_ms = v.number<std::uint32_t>(sim, "sim", "delay_ms", 0);
    if (!v.err && cfg.sim.duration_s <= 0) v.fail("sim.duration_s", "must be > 0");
    if (!v.err && cfg.sim.policy != "frame_drop" && cfg.sim.policy != "uniform_loss") {
        v.fail("sim.policy", "expected 'frame_drop' or 'uniform_loss'");
    }
    if (sim.contains("frame_drop_rates")) {
        const json& rates = sim.at("frame_drop_rates");
        if (!rates.is_array() || rates.empty()) {
            return Error{"sim.frame_drop_rates: expected a non-empty array", 0};
        }
        cfg.sim.frame_drop_rates.clear();
        for (const auto& r : rates) {
            if (!r.is_number() || r.get<double>() < 0.0 || r.get<double>() > 1.0) {
                return Error{"sim.frame_drop_rates: rates must be within [0,1]", 0};
            }
            cfg.sim.frame_drop_rates.push_back(r.get<double>());
        }
    }
    if (v.err) return *v.err;

    // synth
    const json& synth_sec = doc.at("synth");
    if (!v.check_keys(synth_sec, "synth",
                      {"mode", "issuer", "fragment_at", "appdata_packets", "appdata_bytes",
                       "frame_drop_rate"})) {
        return *v.err;
    }
    cfg.synth.mode = v.text(synth_sec, "synth", "mode", "video");
    cfg.synth.issuer = v.text(synth_sec, "synth", "issuer", "WebRTC");
    if (synth_sec.contains("fragment_at") && !synth_sec.at("fragment_at").is_null()) {
        const json& frag = synth_sec.at("fragment_at");
        if (!frag.is_number_integer() || frag.get<std::int64_t>() < 0) {
            return Error{"synth.fragment_at: expected a non-negative integer or null", 0};
        }
        cfg.synth.fragment_at = frag.get<std::uint32_t>();
    }
    cfg.synth.appdata_packets = v.number<std::uint64_t>(synth_sec, "synth", "appdata_packets", 200);
    cfg.synth.appdata_bytes = v.number<std::uint64_t>(synth_sec, "synth", "appdata_bytes", 400);
    cfg.synth.frame_drop_rate = v.rate(synth_sec, "synth", "frame_drop_rate", 0.25);
    static const std::set<std::string> kModes = {"video",  "audio",             "dtls_flight",
                                                 "appdata", "snowflake_fixture", "detector_pair"};
    if (!v.err && !kModes.count(cfg.synth.mode)) {
        v.fail("synth.mode", "unknown mode '" + cfg.synth.mode + "'");
    }
    if (v.err) return *v.err;

    // detect
    const json& det = doc.at("detect");
    if (!v.check_keys(det, "detect",
                      {"threshold", "min_frames", "histogram_bin_bytes", "histogram_range_bytes",
                       "marker_only"})) {
        return *v.err;
    }
    cfg.detect.distinguish.threshold = v.rate(det, "detect", "threshold", 0.20);
    cfg.detect.distinguish.min_frames = v.number<std::uint64_t>(det, "detect", "min_frames", 50);
    cfg.detect.histogram_bin_bytes =
        v.number<std::uint32_t>(det, "detect", "histogram_bin_bytes", 500);
    cfg.detect.histogram_range_bytes =
        v.number<std::uint32_t>(det, "detect", "histogram_range_bytes", 50000);
    cfg.detect.marker_only = v.boolean(det, "detect", "marker_only", false);
    if (!v.err && cfg.detect.histogram_bin_bytes == 0) {
        v.fail("detect.histogram_bin_bytes", "must be > 0");
    }
    if (v.err) return *v.err;

    return cfg;
}

}  // namespace

Expected<RunConfig> load_config(const std::optional<std::string>& config_path,
                                const json& overlay) {
    json doc = default_config_json();
    if (config_path) {
        std::ifstream in(*config_path);
        if (!in) return Error{"config: cannot open " + *config_path, 0};
        json file = json::parse(in, nullptr, false);
        if (file.is_discarded()) return Error{"config: invalid JSON in " + *config_path, 0};
        doc = merge_config(std::move(doc), file);
    }
    doc = merge_config(std::move(doc), overlay);
    auto cfg = parse_config(doc);
    if (cfg.ok()) cfg.value().echo = doc;
    return cfg;
}

}  // namespace rtcimpair::config
