#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agribus/security/crypto.hpp"

namespace agribus::security {

enum class ProtectionKind : uint8_t {
    None = 0,
    Sign = 1,
    Encrypt = 2,
    SignWithOriginAuth = 3,     // parsed but rejected as UNSUPPORTED
    EncryptWithOriginAuth = 4,  // parsed but rejected as UNSUPPORTED
};

const char* protection_kind_name(ProtectionKind k);
Result<ProtectionKind> protection_kind_from_string(const std::string& s);

/// Simplified identity certificate: a structured signed document standing in
/// for X.509. Verifies under the root Identity CA public key.
struct IdentityCertificate {
    uint64_t subject_name = 0;
    Bytes subject_public_key;  // Ed25519, 32 bytes
    int64_t valid_from = 0;    // unix seconds
    int64_t valid_to = 0;
    std::string issuer_id;
    Bytes signature;  // CA signature over all prior fields

    Bytes tbs_bytes() const;
    std::array<uint8_t, 16> digest() const;
    bool verify(std::span<const uint8_t> ca_public_key, int64_t at_time) const;

    Bytes encode() const;
    static Result<IdentityCertificate> decode(std::span<const uint8_t> bytes);
};

struct TopicRule {
    std::string topic_pattern = "*";
    bool enable_discovery_protection = true;
    bool enable_liveliness_protection = true;
    bool enable_read_access_control = true;
    bool enable_write_access_control = true;
    ProtectionKind metadata_protection_kind = ProtectionKind::None;
    ProtectionKind data_protection_kind = ProtectionKind::Encrypt;
};

struct GovernanceDocument {
    uint32_t domain_id = 0;
    bool allow_unauthenticated_participants = false;
    bool enable_join_access_control = true;
    ProtectionKind discovery_protection_kind = ProtectionKind::Encrypt;
    ProtectionKind liveliness_protection_kind = ProtectionKind::Encrypt;
    ProtectionKind rtps_protection_kind = ProtectionKind::Sign;
    std::vector<TopicRule> topic_rules;
    Bytes signature;

    Bytes tbs_bytes() const;
    std::array<uint8_t, 16> digest() const;
    bool verify(std::span<const uint8_t> ca_public_key) const;
    /// First topic rule whose pattern matches, if any.
    const TopicRule* rule_for_topic(const std::string& topic) const;
    /// Rejects unknown/unsupported protection kinds.
    Status validate() const;
};

enum class GrantAction : uint8_t { Publish = 0, Subscribe = 1 };

struct Grant {
    bool allow = true;
    GrantAction action = GrantAction::Publish;
    std::string topic_pattern;
    std::vector<std::string> partition_patterns;  // empty list = default partition only
};

struct PermissionsDocument {
    uint64_t subject_name = 0;
    int64_t valid_from = 0;
    int64_t valid_to = 0;
    std::vector<Grant> grants;  // first matching rule wins; default deny
    Bytes signature;

    Bytes tbs_bytes() const;
    bool verify(std::span<const uint8_t> ca_public_key, int64_t at_time) const;

    Bytes encode() const;
    static Result<PermissionsDocument> decode(std::span<const uint8_t> bytes);
};

/// Glob match with "*" wildcards (any run of characters).
bool pattern_match(const std::string& pattern, const std::string& text);

/// First-match grant evaluation; deny when no rule matches. The empty
/// partition string is the default partition.
bool check_permission(const PermissionsDocument& doc, GrantAction action,
                      const std::string& topic, const std::string& partition);

/// Local root CA acting as both Identity CA and Permissions CA.
class CertificateAuthority {
  public:
    static CertificateAuthority create(std::string issuer_id = "agribus-root-ca");

    Result<IdentityCertificate> issue_identity(uint64_t name,
                                               std::span<const uint8_t> public_key,
                                               int64_t valid_from, int64_t valid_to) const;
    Status sign_governance(GovernanceDocument& doc) const;
    Status sign_permissions(PermissionsDocument& doc) const;

    const Bytes& public_key() const { return keys_.public_key; }
    const Bytes& private_key() const { return keys_.private_key; }
    const std::string& issuer_id() const { return issuer_id_; }

    SigningKeyPair keys_;
    std::string issuer_id_;
};

/// Everything a secure participant loads from its credential directory.
struct SecurityConfig {
    IdentityCertificate identity;
    Bytes identity_private_key;
    PermissionsDocument permissions;
    GovernanceDocument governance;
    Bytes ca_public_key;

    /// Verifies all documents under the CA key and cross-checks the subject.
    Status validate(uint64_t participant_name, int64_t now_unix) const;
};

// JSON (de)serialization of credential files; binary fields are base64.
Status save_json(const std::string& path, const IdentityCertificate& c);
Status save_json(const std::string& path, const GovernanceDocument& g);
Status save_json(const std::string& path, const PermissionsDocument& p);
Status save_key_json(const std::string& path, const std::string& kind, const Bytes& key);
Result<IdentityCertificate> load_identity_json(const std::string& path);
Result<GovernanceDocument> load_governance_json(const std::string& path);
Result<PermissionsDocument> load_permissions_json(const std::string& path);
Result<Bytes> load_key_json(const std::string& path, const std::string& kind);

/// Benchmark governance profiles: every protection kind set to the given
/// value ("encrypt", "sign", "none"), or the mixed default profile
/// ("default": discovery/liveliness ENCRYPT, rtps SIGN, metadata NONE,
/// data ENCRYPT).
Result<GovernanceDocument> make_governance_profile(const std::string& profile,
                                                   uint32_t domain_id);

}  // namespace agribus::security
