#pragma once

#include <map>

#include "agribus/security/documents.hpp"
#include "agribus/wire/types.hpp"

namespace agribus::security {

enum class Scope : uint8_t { Rtps = 0, Discovery = 1, Liveliness = 2, Data = 3 };

/// Per peer-pair keys derived from the authenticated key agreement. Sub-keys
/// are distinct per scope (and per topic/writer for data) via labeled
/// derivation, and directional via the sender prefix.
struct SessionKeys {
    Key32 shared_secret{};

    Key32 key_for(Scope scope, const wire::GuidPrefix& sender_prefix,
                  const std::string& topic = {}, uint32_t writer_entity = 0) const;

    /// 8-byte check value both sides can compare in tests.
    std::array<uint8_t, 8> check_value() const;

  private:
    mutable std::map<Bytes, Key32> derived_;  // memoized per-label derivations
};

/// Anti-replay sliding window (64 entries) per peer/scope.
struct ReplayWindow {
    uint64_t highest = 0;
    uint64_t mask = 0;  // bit i set = (highest - i) seen

    Status check_and_update(uint64_t seq);
};

/// Builds a protected envelope body: NONE = passthrough plus tags, SIGN =
/// plaintext plus an AES-256-GMAC tag, ENCRYPT = AES-256-GCM, both with a
/// seq-derived nonce (unique per key by construction).
Result<Bytes> protect(Scope scope, ProtectionKind kind, const Key32& key, uint64_t seq,
                      std::span<const uint8_t> plaintext);

struct EnvelopeHeader {
    Scope scope;
    ProtectionKind kind;
    uint64_t seq;
};

/// Parses the envelope header so the caller can look up the right key and
/// check the kind against governance before releasing any plaintext.
Result<EnvelopeHeader> peek_envelope(std::span<const uint8_t> body);

/// Verifies and opens an envelope; checks the replay window when given.
Result<Bytes> unprotect(ProtectionKind expected_kind, const Key32& key, ReplayWindow* window,
                        std::span<const uint8_t> body);

// --- authentication handshake (3 messages over unicast) ---

enum class HandshakeStep : uint8_t { Request = 1, Reply = 2, Final = 3 };

struct HandshakeRequest {
    Bytes certificate;          // encoded IdentityCertificate
    Bytes permissions;          // encoded PermissionsDocument
    std::array<uint8_t, 16> governance_digest{};
    Bytes nonce;                // 32 random bytes
    Bytes ephemeral_public;     // X25519, 32 bytes
};

struct HandshakeReply {
    Bytes certificate;
    Bytes permissions;
    std::array<uint8_t, 16> governance_digest{};
    Bytes nonce;
    Bytes ephemeral_public;
    Bytes signature;  // over transcript(request, reply-without-signature)
};

struct HandshakeFinal {
    Bytes signature;  // initiator's signature over the same transcript
};

Bytes encode_handshake(const HandshakeRequest& m);
Bytes encode_handshake(const HandshakeReply& m);
Bytes encode_handshake(const HandshakeFinal& m);
Result<HandshakeStep> peek_handshake_step(std::span<const uint8_t> body);
Result<HandshakeRequest> decode_handshake_request(std::span<const uint8_t> body);
Result<HandshakeReply> decode_handshake_reply(std::span<const uint8_t> body);
Result<HandshakeFinal> decode_handshake_final(std::span<const uint8_t> body);

/// The byte string both sides sign: binds certificates, nonces, governance,
/// and ephemeral key shares of the exchange.
Bytes handshake_transcript(const HandshakeRequest& req, const HandshakeReply& reply);

Result<SessionKeys> derive_session(std::span<const uint8_t> local_ephemeral_private,
                                   std::span<const uint8_t> peer_ephemeral_public);

}  // namespace agribus::security
