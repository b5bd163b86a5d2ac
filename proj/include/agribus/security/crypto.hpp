#pragma once

#include <array>
#include <cstdint>

#include "agribus/bytes.hpp"

namespace agribus::security {

using Digest32 = std::array<uint8_t, 32>;
using Key32 = std::array<uint8_t, 32>;

Digest32 sha256(std::span<const uint8_t> data);
Digest32 hmac_sha256(std::span<const uint8_t> key, std::span<const uint8_t> data);
Bytes random_bytes(size_t n);

/// Ed25519 signing key pair (raw 32-byte keys, 64-byte signatures).
struct SigningKeyPair {
    Bytes public_key;   // 32 bytes
    Bytes private_key;  // 32 bytes

    static SigningKeyPair generate();
};

Result<Bytes> ed25519_sign(std::span<const uint8_t> private_key, std::span<const uint8_t> message);
bool ed25519_verify(std::span<const uint8_t> public_key, std::span<const uint8_t> message,
                    std::span<const uint8_t> signature);

/// X25519 ephemeral key agreement.
struct AgreementKeyPair {
    Bytes public_key;   // 32 bytes
    Bytes private_key;  // 32 bytes

    static AgreementKeyPair generate();
};

Result<Key32> x25519_shared_secret(std::span<const uint8_t> private_key,
                                   std::span<const uint8_t> peer_public_key);

/// AES-256-GCM authentication-only (GMAC): 16-byte tag over the given bytes.
Result<std::array<uint8_t, 16>> gcm_tag(const Key32& key, const std::array<uint8_t, 12>& nonce,
                                        std::span<const uint8_t> aad);

/// AES-256-GCM; returns ciphertext || 16-byte tag.
Result<Bytes> aead_seal(const Key32& key, const std::array<uint8_t, 12>& nonce,
                        std::span<const uint8_t> plaintext);
Result<Bytes> aead_open(const Key32& key, const std::array<uint8_t, 12>& nonce,
                        std::span<const uint8_t> ciphertext_and_tag);

}  // namespace agribus::security
