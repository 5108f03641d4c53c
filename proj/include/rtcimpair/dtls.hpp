#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rtcimpair/core.hpp"

namespace rtcimpair::dtls {

// Record-layer content types.
constexpr std::uint8_t kChangeCipherSpec = 20;
constexpr std::uint8_t kAlert = 21;
constexpr std::uint8_t kHandshake = 22;
constexpr std::uint8_t kApplicationData = 23;

// Handshake message types (only the certificate is interpreted).
constexpr std::uint8_t kHsCertificate = 11;

// One record of the 13-byte-headed DTLS record layer. The fragment is the
// record body; length on the wire equals fragment.size().
struct Record {
    std::uint8_t content_type = 0;
    std::uint16_t protocol_version = 0;
    std::uint16_t epoch = 0;
    std::uint64_t sequence_number = 0;  // 48-bit on the wire
    Bytes fragment;
};

constexpr std::size_t kRecordHeaderLen = 13;

inline bool is_application_data(const Record& r) { return r.content_type == kApplicationData; }

// All complete records of a datagram, in wire order. Trailing garbage or a
// truncated record keeps the records parsed so far and sets `error`.
struct RecordParse {
    std::vector<Record> records;
    std::optional<Error> error;
    bool complete() const { return !error.has_value(); }
};

RecordParse parse_records(ByteView datagram);

// Serialize one record (13-byte header + fragment); used by generators.
Bytes encode_record(const Record& r);

// A complete, reassembled handshake message.
struct HandshakeMessage {
    std::uint8_t msg_type = 0;
    std::uint32_t total_length = 0;  // 24-bit on the wire
    std::uint16_t message_seq = 0;
    Bytes body;  // body.size() == total_length once complete
};

// Handshake header is 1+3+2+3+3 = 12 bytes.
constexpr std::size_t kHandshakeHeaderLen = 12;

// Per-flow reassembly of plaintext (epoch 0) handshake messages from record
// fragments. Messages are keyed by message_seq; duplicates are ignored;
// inconsistent overlaps or exceeding the buffer cap mark the flow
// unparseable, after which nothing further is produced (fail open).
class HandshakeReassembler {
  public:
    explicit HandshakeReassembler(std::size_t buffer_cap_bytes = 16 * 1024)
        : cap_(buffer_cap_bytes) {}

    // Feed one handshake record fragment (the body of a content_type 22,
    // epoch 0 record). Returns messages completed by this fragment.
    std::vector<HandshakeMessage> feed(ByteView record_fragment);

    bool unparseable() const { return unparseable_; }
    std::size_t buffered_bytes() const { return buffered_; }

  private:
    struct Pending {
        std::uint8_t msg_type = 0;
        std::uint32_t total_length = 0;
        Bytes body;
        std::vector<bool> covered;
        std::uint32_t covered_count = 0;
        bool done = false;
    };

    std::map<std::uint16_t, Pending> pending_;
    std::size_t buffered_ = 0;
    std::size_t cap_;
    bool unparseable_ = false;
};

// Certificate issuer as seen by the filter.
struct CertificateInfo {
    std::string issuer_common_name;
    Bytes raw_issuer_der;  // the DER Name element, when parsed
    enum class Provenance : std::uint8_t { Parsed, Scanned } provenance = Provenance::Parsed;
};

struct IssuerExtractConfig {
    bool scan_fallback = true;  // byte-pattern scan when DER parsing fails
    bool all_certificates = false;  // inspect the whole chain, not just the first
};

// Extract the issuer CN from the first certificate of a Certificate
// handshake message. DER parsing walks only
// Certificate -> TBSCertificate -> issuer -> RDN CN; anything the walker does
// not understand falls back to a byte scan for the CN attribute pattern.
Expected<CertificateInfo> extract_issuer(const HandshakeMessage& msg,
                                         const IssuerExtractConfig& cfg = {});

}  // namespace rtcimpair::dtls
