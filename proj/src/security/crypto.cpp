#include "agribus/security/crypto.hpp"

#include <memory>
#include <utility>

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

namespace agribus::security {

Digest32 sha256(std::span<const uint8_t> data) {
    Digest32 out;
    SHA256(data.data(), data.size(), out.data());
    return out;
}

Digest32 hmac_sha256(std::span<const uint8_t> key, std::span<const uint8_t> data) {
    Digest32 out;
    unsigned int len = 0;
    HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(),
         out.data(), &len);
    return out;
}

Bytes random_bytes(size_t n) {
    Bytes out(n);
    RAND_bytes(out.data(), static_cast<int>(n));
    return out;
}

namespace {

struct PkeyDeleter {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;

struct CtxDeleter {
    void operator()(EVP_PKEY_CTX* c) const { EVP_PKEY_CTX_free(c); }
};
using CtxPtr = std::unique_ptr<EVP_PKEY_CTX, CtxDeleter>;

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

struct CipherCtxDeleter {
    void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

std::pair<Bytes, Bytes> generate_raw_keypair(int type) {
    CtxPtr ctx(EVP_PKEY_CTX_new_id(type, nullptr));
    EVP_PKEY* raw = nullptr;
    EVP_PKEY_keygen_init(ctx.get());
    EVP_PKEY_keygen(ctx.get(), &raw);
    PkeyPtr key(raw);
    Bytes pub(32), priv(32);
    size_t len = 32;
    EVP_PKEY_get_raw_public_key(key.get(), pub.data(), &len);
    len = 32;
    EVP_PKEY_get_raw_private_key(key.get(), priv.data(), &len);
    return {std::move(pub), std::move(priv)};
}

}  // namespace

SigningKeyPair SigningKeyPair::generate() {
    auto [pub, priv] = generate_raw_keypair(EVP_PKEY_ED25519);
    return {std::move(pub), std::move(priv)};
}

AgreementKeyPair AgreementKeyPair::generate() {
    auto [pub, priv] = generate_raw_keypair(EVP_PKEY_X25519);
    return {std::move(pub), std::move(priv)};
}

Result<Bytes> ed25519_sign(std::span<const uint8_t> private_key, std::span<const uint8_t> message) {
    if (private_key.size() != 32) return Error{Errc::BAD_KEY, "ed25519 private key"};
    PkeyPtr key(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, private_key.data(),
                                             private_key.size()));
    if (!key) return Error{Errc::BAD_KEY, "ed25519 private key"};
    MdCtxPtr ctx(EVP_MD_CTX_new());
    Bytes sig(64);
    size_t siglen = sig.size();
    if (EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1 ||
        EVP_DigestSign(ctx.get(), sig.data(), &siglen, message.data(), message.size()) != 1)
        return Error{Errc::BAD_KEY, "sign failed"};
    sig.resize(siglen);
    return sig;
}

bool ed25519_verify(std::span<const uint8_t> public_key, std::span<const uint8_t> message,
                    std::span<const uint8_t> signature) {
    if (public_key.size() != 32 || signature.size() != 64) return false;
    PkeyPtr key(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, public_key.data(),
                                            public_key.size()));
    if (!key) return false;
    MdCtxPtr ctx(EVP_MD_CTX_new());
    if (EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1) return false;
    return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), message.data(),
                            message.size()) == 1;
}

Result<Key32> x25519_shared_secret(std::span<const uint8_t> private_key,
                                   std::span<const uint8_t> peer_public_key) {
    if (private_key.size() != 32 || peer_public_key.size() != 32)
        return Error{Errc::BAD_KEY, "x25519 key size"};
    PkeyPtr priv(EVP_PKEY_new_raw_private_key(EVP_PKEY_X25519, nullptr, private_key.data(),
                                              private_key.size()));
    PkeyPtr pub(EVP_PKEY_new_raw_public_key(EVP_PKEY_X25519, nullptr, peer_public_key.data(),
                                            peer_public_key.size()));
    if (!priv || !pub) return Error{Errc::BAD_KEY, "x25519 key"};
    CtxPtr ctx(EVP_PKEY_CTX_new(priv.get(), nullptr));
    Key32 secret;
    size_t len = secret.size();
    if (EVP_PKEY_derive_init(ctx.get()) != 1 ||
        EVP_PKEY_derive_set_peer(ctx.get(), pub.get()) != 1 ||
        EVP_PKEY_derive(ctx.get(), secret.data(), &len) != 1 || len != secret.size())
        return Error{Errc::BAD_KEY, "x25519 derive failed"};
    return secret;
}

Result<Bytes> aead_seal(const Key32& key, const std::array<uint8_t, 12>& nonce,
                        std::span<const uint8_t> plaintext) {
    CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
    Bytes out(plaintext.size() + 16);
    int len = 0;
    if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(), nonce.data()) != 1)
        return Error{Errc::BAD_KEY, "gcm init"};
    if (!plaintext.empty() &&
        EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                          static_cast<int>(plaintext.size())) != 1)
        return Error{Errc::BAD_KEY, "gcm encrypt"};
    int fin = 0;
    if (EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1)
        return Error{Errc::BAD_KEY, "gcm final"};
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, 16,
                            out.data() + plaintext.size()) != 1)
        return Error{Errc::BAD_KEY, "gcm tag"};
    return out;
}

Result<std::array<uint8_t, 16>> gcm_tag(const Key32& key, const std::array<uint8_t, 12>& nonce,
                                        std::span<const uint8_t> aad) {
    CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
    int len = 0;
    if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(), nonce.data()) != 1)
        return Error{Errc::BAD_KEY, "gcm init"};
    if (!aad.empty() &&
        EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1)
        return Error{Errc::BAD_KEY, "gcm aad"};
    uint8_t fin_buf[16];
    int fin = 0;
    if (EVP_EncryptFinal_ex(ctx.get(), fin_buf, &fin) != 1)
        return Error{Errc::BAD_KEY, "gcm final"};
    std::array<uint8_t, 16> tag{};
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, 16, tag.data()) != 1)
        return Error{Errc::BAD_KEY, "gcm tag"};
    return tag;
}

Result<Bytes> aead_open(const Key32& key, const std::array<uint8_t, 12>& nonce,
                        std::span<const uint8_t> ciphertext_and_tag) {
    if (ciphertext_and_tag.size() < 16) return Error{Errc::MAC_INVALID, "short ciphertext"};
    size_t ct_len = ciphertext_and_tag.size() - 16;
    CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
    Bytes out(ct_len);
    int len = 0;
    if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(), nonce.data()) != 1)
        return Error{Errc::BAD_KEY, "gcm init"};
    if (ct_len > 0 && EVP_DecryptUpdate(ctx.get(), out.data(), &len, ciphertext_and_tag.data(),
                                        static_cast<int>(ct_len)) != 1)
        return Error{Errc::MAC_INVALID, "gcm decrypt"};
    uint8_t tag[16];
    std::memcpy(tag, ciphertext_and_tag.data() + ct_len, 16);
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, 16, tag) != 1)
        return Error{Errc::MAC_INVALID, "gcm tag"};
    int fin = 0;
    if (EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1)
        return Error{Errc::MAC_INVALID, "authentication failed"};
    return out;
}

}  // namespace agribus::security
