#include "rtcimpair/dtls.hpp"

#include <algorithm>
#include <cstring>

namespace rtcimpair::dtls {

namespace {

std::uint32_t rd24(ByteView b, std::size_t off) {
    return (static_cast<std::uint32_t>(b[off]) << 16) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
           b[off + 2];
}

std::uint16_t rd16(ByteView b, std::size_t off) {
    return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

}  // namespace

RecordParse parse_records(ByteView datagram) {
    RecordParse out;
    std::size_t off = 0;
    while (off < datagram.size()) {
        if (datagram.size() - off < kRecordHeaderLen) {
            out.error = Error{"truncated record header", off};
            return out;
        }
        Record rec;
        rec.content_type = datagram[off];
        rec.protocol_version = rd16(datagram, off + 1);
        rec.epoch = rd16(datagram, off + 3);
        rec.sequence_number = 0;
        for (int i = 0; i < 6; ++i) {
            rec.sequence_number = (rec.sequence_number << 8) | datagram[off + 5 + i];
        }
        const std::size_t frag_len = rd16(datagram, off + 11);
        if (datagram.size() - off - kRecordHeaderLen < frag_len) {
            out.error = Error{"record length exceeds remaining bytes", off};
            return out;
        }
        rec.fragment.assign(datagram.begin() + off + kRecordHeaderLen,
                            datagram.begin() + off + kRecordHeaderLen + frag_len);
        out.records.push_back(std::move(rec));
        off += kRecordHeaderLen + frag_len;
    }
    return out;
}

Bytes encode_record(const Record& r) {
    Bytes out;
    out.reserve(kRecordHeaderLen + r.fragment.size());
    out.push_back(r.content_type);
    out.push_back(static_cast<std::uint8_t>(r.protocol_version >> 8));
    out.push_back(static_cast<std::uint8_t>(r.protocol_version));
    out.push_back(static_cast<std::uint8_t>(r.epoch >> 8));
    out.push_back(static_cast<std::uint8_t>(r.epoch));
    for (int i = 5; i >= 0; --i) {
        out.push_back(static_cast<std::uint8_t>(r.sequence_number >> (8 * i)));
    }
    out.push_back(static_cast<std::uint8_t>(r.fragment.size() >> 8));
    out.push_back(static_cast<std::uint8_t>(r.fragment.size()));
    out.insert(out.end(), r.fragment.begin(), r.fragment.end());
    return out;
}

std::vector<HandshakeMessage> HandshakeReassembler::feed(ByteView record_fragment) {
    std::vector<HandshakeMessage> completed;
    if (unparseable_) return completed;

    std::size_t off = 0;
    while (off < record_fragment.size()) {
        if (record_fragment.size() - off < kHandshakeHeaderLen) {
            unparseable_ = true;
            return completed;
        }
        const std::uint8_t msg_type = record_fragment[off];
        const std::uint32_t total_length = rd24(record_fragment, off + 1);
        const std::uint16_t message_seq = rd16(record_fragment, off + 4);
        const std::uint32_t frag_off = rd24(record_fragment, off + 6);
        const std::uint32_t frag_len = rd24(record_fragment, off + 9);
        off += kHandshakeHeaderLen;

        if (record_fragment.size() - off < frag_len ||
            static_cast<std::uint64_t>(frag_off) + frag_len > total_length) {
            unparseable_ = true;
            return completed;
        }

        auto it = pending_.find(message_seq);
        if (it == pending_.end()) {
            if (buffered_ + total_length > cap_) {
                unparseable_ = true;
                return completed;
            }
            Pending p;
            p.msg_type = msg_type;
            p.total_length = total_length;
            p.body.assign(total_length, 0);
            p.covered.assign(total_length, false);
            it = pending_.emplace(message_seq, std::move(p)).first;
            buffered_ += total_length;
        }
        Pending& p = it->second;
        if (p.msg_type != msg_type || p.total_length != total_length) {
            unparseable_ = true;
            return completed;
        }
        if (!p.done) {
            for (std::uint32_t i = 0; i < frag_len; ++i) {
                const std::uint32_t pos = frag_off + i;
                const std::uint8_t byte = record_fragment[off + i];
                if (p.covered[pos]) {
                    if (p.body[pos] != byte) {  // inconsistent overlap
                        unparseable_ = true;
                        return completed;
                    }
                } else {
                    p.body[pos] = byte;
                    p.covered[pos] = true;
                    ++p.covered_count;
                }
            }
            if (p.covered_count == p.total_length) {
                p.done = true;
                HandshakeMessage msg;
                msg.msg_type = p.msg_type;
                msg.total_length = p.total_length;
                msg.message_seq = message_seq;
                msg.body = p.body;
                completed.push_back(std::move(msg));
            }
        }
        off += frag_len;
    }
    return completed;
}

namespace {

// Minimal DER walker. Reads a TLV header at `off`; returns false on any
// construct outside definite-length encoding with <= 4 length octets.
struct DerElement {
    std::uint8_t tag = 0;
    std::size_t header_len = 0;
    std::size_t content_len = 0;
    std::size_t content_off = 0;  // absolute offset of content
    std::size_t end() const { return content_off + content_len; }
};

bool der_read(ByteView data, std::size_t off, DerElement& el) {
    if (off + 2 > data.size()) return false;
    el.tag = data[off];
    std::uint8_t len0 = data[off + 1];
    std::size_t hlen = 2;
    std::size_t clen = 0;
    if (len0 < 0x80) {
        clen = len0;
    } else {
        const std::size_t n = len0 & 0x7f;
        if (n == 0 || n > 4 || off + 2 + n > data.size()) return false;
        for (std::size_t i = 0; i < n; ++i) clen = (clen << 8) | data[off + 2 + i];
        hlen += n;
    }
    if (off + hlen + clen > data.size()) return false;
    el.header_len = hlen;
    el.content_len = clen;
    el.content_off = off + hlen;
    return true;
}

constexpr std::uint8_t kTagSequence = 0x30;
constexpr std::uint8_t kTagSet = 0x31;
constexpr std::uint8_t kTagOid = 0x06;
constexpr std::uint8_t kTagInteger = 0x02;
// id-at-commonName, 2.5.4.3
constexpr std::uint8_t kOidCn[3] = {0x55, 0x04, 0x03};

bool is_string_tag(std::uint8_t tag) {
    // UTF8String, PrintableString, T61String, IA5String, BMPString skipped.
    return tag == 0x0c || tag == 0x13 || tag == 0x14 || tag == 0x16;
}

// Walk Certificate -> TBSCertificate -> issuer Name -> RDN CN.
bool der_issuer_cn(ByteView cert, std::string& cn, Bytes& raw_issuer) {
    DerElement certificate;
    if (!der_read(cert, 0, certificate) || certificate.tag != kTagSequence) return false;

    DerElement tbs;
    if (!der_read(cert, certificate.content_off, tbs) || tbs.tag != kTagSequence) return false;

    std::size_t off = tbs.content_off;
    DerElement el;
    if (!der_read(cert, off, el)) return false;
    if (el.tag == 0xa0) {  // [0] EXPLICIT version
        off = el.end();
        if (!der_read(cert, off, el)) return false;
    }
    if (el.tag != kTagInteger) return false;  // serialNumber
    off = el.end();
    if (!der_read(cert, off, el) || el.tag != kTagSequence) return false;  // signature alg
    off = el.end();

    DerElement issuer;
    if (!der_read(cert, off, issuer) || issuer.tag != kTagSequence) return false;
    raw_issuer.assign(cert.begin() + off, cert.begin() + issuer.end());

    std::size_t rdn_off = issuer.content_off;
    while (rdn_off < issuer.end()) {
        DerElement rdn;
        if (!der_read(cert, rdn_off, rdn) || rdn.tag != kTagSet) return false;
        std::size_t atv_off = rdn.content_off;
        while (atv_off < rdn.end()) {
            DerElement atv;
            if (!der_read(cert, atv_off, atv) || atv.tag != kTagSequence) return false;
            DerElement oid;
            if (!der_read(cert, atv.content_off, oid) || oid.tag != kTagOid) return false;
            if (oid.content_len == sizeof(kOidCn) &&
                std::memcmp(cert.data() + oid.content_off, kOidCn, sizeof(kOidCn)) == 0) {
                DerElement value;
                if (!der_read(cert, oid.end(), value) || !is_string_tag(value.tag)) return false;
                cn.assign(reinterpret_cast<const char*>(cert.data() + value.content_off),
                          value.content_len);
                return true;
            }
            atv_off = atv.end();
        }
        rdn_off = rdn.end();
    }
    return false;
}

// Cheap-filter fallback: scan raw bytes for the CN attribute pattern
// (OID 2.5.4.3 followed by a string TLV).
bool scan_issuer_cn(ByteView data, std::string& cn) {
    static const std::uint8_t pattern[5] = {kTagOid, 0x03, 0x55, 0x04, 0x03};
    for (std::size_t i = 0; i + sizeof(pattern) + 2 <= data.size(); ++i) {
        if (std::memcmp(data.data() + i, pattern, sizeof(pattern)) != 0) continue;
        DerElement value;
        if (!der_read(data, i + sizeof(pattern), value) || !is_string_tag(value.tag)) continue;
        cn.assign(reinterpret_cast<const char*>(data.data() + value.content_off),
                  value.content_len);
        return true;
    }
    return false;
}

}  // namespace

Expected<CertificateInfo> extract_issuer(const HandshakeMessage& msg,
                                         const IssuerExtractConfig& cfg) {
    ByteView body(msg.body);
    if (body.size() < 3) return Error{"certificate body too short", 0};
    const std::uint32_t list_len = rd24(body, 0);
    if (list_len == 0) return Error{"empty certificate list", 0};
    if (body.size() - 3 < list_len) return Error{"certificate list truncated", 3};

    std::size_t off = 3;
    const std::size_t list_end = 3 + list_len;
    while (off < list_end) {
        if (list_end - off < 3) return Error{"certificate entry truncated", off};
        const std::uint32_t cert_len = rd24(body, off);
        off += 3;
        if (list_end - off < cert_len) return Error{"certificate entry truncated", off};
        ByteView cert = body.subspan(off, cert_len);

        CertificateInfo info;
        if (der_issuer_cn(cert, info.issuer_common_name, info.raw_issuer_der)) {
            info.provenance = CertificateInfo::Provenance::Parsed;
            return info;
        }
        if (cfg.scan_fallback && scan_issuer_cn(cert, info.issuer_common_name)) {
            info.provenance = CertificateInfo::Provenance::Scanned;
            return info;
        }
        if (!cfg.all_certificates) break;
        off += cert_len;
    }
    return Error{"no parseable issuer", 3};
}

}  // namespace rtcimpair::dtls
