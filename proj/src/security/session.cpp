#include "agribus/security/session.hpp"

namespace agribus::security {

Key32 SessionKeys::key_for(Scope scope, const wire::GuidPrefix& sender_prefix,
                           const std::string& topic, uint32_t writer_entity) const {
    ByteWriter w;
    w.u8(static_cast<uint8_t>(scope));
    w.raw(std::span<const uint8_t>(sender_prefix.data(), sender_prefix.size()));
    w.text(topic);
    w.u32(writer_entity);
    Bytes label(w.bytes().begin(), w.bytes().end());
    auto it = derived_.find(label);
    if (it != derived_.end()) return it->second;
    auto mac = hmac_sha256(shared_secret, label);
    Key32 k;
    std::copy(mac.begin(), mac.end(), k.begin());
    derived_.emplace(std::move(label), k);
    return k;
}

std::array<uint8_t, 8> SessionKeys::check_value() const {
    static const uint8_t label[] = "key-check";
    auto mac = hmac_sha256(shared_secret, std::span<const uint8_t>(label, sizeof label - 1));
    std::array<uint8_t, 8> out;
    std::copy_n(mac.begin(), 8, out.begin());
    return out;
}

Status ReplayWindow::check_and_update(uint64_t seq) {
    if (seq == 0) return {Errc::NONCE_REPLAYED, "zero sequence"};
    if (seq > highest) {
        uint64_t shift = seq - highest;
        mask = shift >= 64 ? 0 : mask << shift;
        mask |= 1;  // bit 0 = seq itself
        highest = seq;
        return Status::success();
    }
    uint64_t age = highest - seq;
    if (age >= 64) return {Errc::NONCE_REPLAYED, "outside window"};
    if (mask & (uint64_t{1} << age)) return {Errc::NONCE_REPLAYED, "duplicate"};
    mask |= uint64_t{1} << age;
    return Status::success();
}

namespace {

std::array<uint8_t, 12> nonce_from_seq(uint64_t seq) {
    std::array<uint8_t, 12> n{};
    for (size_t i = 0; i < 8; ++i) n[4 + i] = static_cast<uint8_t>(seq >> (8 * i));
    return n;
}

Bytes mac_input(Scope scope, ProtectionKind kind, uint64_t seq,
                std::span<const uint8_t> payload) {
    ByteWriter w;
    w.u8(static_cast<uint8_t>(scope));
    w.u8(static_cast<uint8_t>(kind));
    w.u64(seq);
    w.raw(payload);
    return w.take();
}

}  // namespace

Result<Bytes> protect(Scope scope, ProtectionKind kind, const Key32& key, uint64_t seq,
                      std::span<const uint8_t> plaintext) {
    ByteWriter w;
    w.u8(static_cast<uint8_t>(scope));
    w.u8(static_cast<uint8_t>(kind));
    w.u64(seq);
    switch (kind) {
    case ProtectionKind::None:
        w.blob(plaintext);
        return w.take();
    case ProtectionKind::Sign: {
        w.blob(plaintext);
        auto tag = gcm_tag(key, nonce_from_seq(seq), mac_input(scope, kind, seq, plaintext));
        if (!tag) return tag.error();
        w.raw(std::span<const uint8_t>(tag.value().data(), tag.value().size()));
        return w.take();
    }
    case ProtectionKind::Encrypt: {
        auto ct = aead_seal(key, nonce_from_seq(seq), plaintext);
        if (!ct) return ct.error();
        w.blob(ct.value());
        return w.take();
    }
    default:
        return Error{Errc::UNSUPPORTED, "origin authentication kinds not supported"};
    }
}

Result<EnvelopeHeader> peek_envelope(std::span<const uint8_t> body) {
    ByteReader r(body);
    auto scope = r.u8();
    if (!scope) return scope.error();
    if (scope.value() > 3) return Error{Errc::BAD_ENUM_ORDINAL, "envelope scope"};
    auto kind = r.u8();
    if (!kind) return kind.error();
    if (kind.value() > 4) return Error{Errc::BAD_ENUM_ORDINAL, "envelope kind"};
    auto seq = r.u64();
    if (!seq) return seq.error();
    return EnvelopeHeader{static_cast<Scope>(scope.value()),
                          static_cast<ProtectionKind>(kind.value()), seq.value()};
}

Result<Bytes> unprotect(ProtectionKind expected_kind, const Key32& key, ReplayWindow* window,
                        std::span<const uint8_t> body) {
    auto hdr = peek_envelope(body);
    if (!hdr) return hdr.error();
    if (hdr.value().kind != expected_kind)
        return Error{Errc::KIND_MISMATCH,
                     std::string("envelope kind ") + protection_kind_name(hdr.value().kind)};
    ByteReader r(body);
    (void)r.skip(10);  // scope + kind + seq, already parsed
    switch (hdr.value().kind) {
    case ProtectionKind::None: {
        auto p = r.blob();
        if (!p) return p.error();
        if (!r.done()) return Error{Errc::TRUNCATED, "trailing bytes"};
        return p.value();
    }
    case ProtectionKind::Sign: {
        auto p = r.blob();
        if (!p) return p.error();
        auto mac_wire = r.raw(16);
        if (!mac_wire) return mac_wire.error();
        if (!r.done()) return Error{Errc::TRUNCATED, "trailing bytes"};
        auto tag = gcm_tag(
            key, nonce_from_seq(hdr.value().seq),
            mac_input(hdr.value().scope, hdr.value().kind, hdr.value().seq, p.value()));
        if (!tag) return tag.error();
        if (!std::equal(tag.value().begin(), tag.value().end(), mac_wire.value().begin()))
            return Error{Errc::MAC_INVALID, "mac mismatch"};
        if (window) {
            if (auto st = window->check_and_update(hdr.value().seq); !st) return st.error();
        }
        return p.value();
    }
    case ProtectionKind::Encrypt: {
        auto ct = r.blob();
        if (!ct) return ct.error();
        if (!r.done()) return Error{Errc::TRUNCATED, "trailing bytes"};
        auto p = aead_open(key, nonce_from_seq(hdr.value().seq), ct.value());
        if (!p) return p.error();
        if (window) {
            if (auto st = window->check_and_update(hdr.value().seq); !st) return st.error();
        }
        return p.value();
    }
    default:
        return Error{Errc::UNSUPPORTED, "origin authentication kinds not supported"};
    }
}

// --- handshake ---

namespace {

void write_handshake_core(ByteWriter& w, const Bytes& cert, const Bytes& permissions,
                          const std::array<uint8_t, 16>& gov, const Bytes& nonce,
                          const Bytes& eph) {
    w.blob(cert);
    w.blob(permissions);
    w.raw(std::span<const uint8_t>(gov.data(), gov.size()));
    w.blob(nonce);
    w.blob(eph);
}

struct HandshakeCore {
    Bytes cert, permissions, nonce, eph;
    std::array<uint8_t, 16> gov{};
};

Result<HandshakeCore> read_handshake_core(ByteReader& r) {
    HandshakeCore c;
    auto cert = r.blob();
    if (!cert) return cert.error();
    c.cert = std::move(cert.value());
    auto perms = r.blob();
    if (!perms) return perms.error();
    c.permissions = std::move(perms.value());
    auto gov = r.raw(16);
    if (!gov) return gov.error();
    std::copy(gov.value().begin(), gov.value().end(), c.gov.begin());
    auto nonce = r.blob();
    if (!nonce) return nonce.error();
    c.nonce = std::move(nonce.value());
    auto eph = r.blob();
    if (!eph) return eph.error();
    c.eph = std::move(eph.value());
    return c;
}

}  // namespace

Bytes encode_handshake(const HandshakeRequest& m) {
    ByteWriter w;
    w.u8(static_cast<uint8_t>(HandshakeStep::Request));
    write_handshake_core(w, m.certificate, m.permissions, m.governance_digest, m.nonce,
                         m.ephemeral_public);
    return w.take();
}

Bytes encode_handshake(const HandshakeReply& m) {
    ByteWriter w;
    w.u8(static_cast<uint8_t>(HandshakeStep::Reply));
    write_handshake_core(w, m.certificate, m.permissions, m.governance_digest, m.nonce,
                         m.ephemeral_public);
    w.blob(m.signature);
    return w.take();
}

Bytes encode_handshake(const HandshakeFinal& m) {
    ByteWriter w;
    w.u8(static_cast<uint8_t>(HandshakeStep::Final));
    w.blob(m.signature);
    return w.take();
}

Result<HandshakeStep> peek_handshake_step(std::span<const uint8_t> body) {
    ByteReader r(body);
    auto step = r.u8();
    if (!step) return step.error();
    if (step.value() < 1 || step.value() > 3)
        return Error{Errc::BAD_ENUM_ORDINAL, "handshake step"};
    return static_cast<HandshakeStep>(step.value());
}

Result<HandshakeRequest> decode_handshake_request(std::span<const uint8_t> body) {
    ByteReader r(body);
    (void)r.skip(1);
    auto core = read_handshake_core(r);
    if (!core) return core.error();
    HandshakeRequest m;
    m.certificate = std::move(core.value().cert);
    m.permissions = std::move(core.value().permissions);
    m.governance_digest = core.value().gov;
    m.nonce = std::move(core.value().nonce);
    m.ephemeral_public = std::move(core.value().eph);
    return m;
}

Result<HandshakeReply> decode_handshake_reply(std::span<const uint8_t> body) {
    ByteReader r(body);
    (void)r.skip(1);
    auto core = read_handshake_core(r);
    if (!core) return core.error();
    HandshakeReply m;
    m.certificate = std::move(core.value().cert);
    m.permissions = std::move(core.value().permissions);
    m.governance_digest = core.value().gov;
    m.nonce = std::move(core.value().nonce);
    m.ephemeral_public = std::move(core.value().eph);
    auto sig = r.blob();
    if (!sig) return sig.error();
    m.signature = std::move(sig.value());
    return m;
}

Result<HandshakeFinal> decode_handshake_final(std::span<const uint8_t> body) {
    ByteReader r(body);
    (void)r.skip(1);
    HandshakeFinal m;
    auto sig = r.blob();
    if (!sig) return sig.error();
    m.signature = std::move(sig.value());
    return m;
}

Bytes handshake_transcript(const HandshakeRequest& req, const HandshakeReply& reply) {
    ByteWriter w;
    write_handshake_core(w, req.certificate, req.permissions, req.governance_digest, req.nonce,
                         req.ephemeral_public);
    write_handshake_core(w, reply.certificate, reply.permissions, reply.governance_digest,
                         reply.nonce, reply.ephemeral_public);
    return w.take();
}

Result<SessionKeys> derive_session(std::span<const uint8_t> local_ephemeral_private,
                                   std::span<const uint8_t> peer_ephemeral_public) {
    auto secret = x25519_shared_secret(local_ephemeral_private, peer_ephemeral_public);
    if (!secret) return secret.error();
    SessionKeys s;
    s.shared_secret = secret.value();
    return s;
}

}  // namespace agribus::security
