#include "agribus/security/documents.hpp"

#include <fstream>

#include <json.hpp>

namespace agribus::security {

using nlohmann::json;

const char* protection_kind_name(ProtectionKind k) {
    switch (k) {
    case ProtectionKind::None: return "NONE";
    case ProtectionKind::Sign: return "SIGN";
    case ProtectionKind::Encrypt: return "ENCRYPT";
    case ProtectionKind::SignWithOriginAuth: return "SIGN_WITH_ORIGIN_AUTHENTICATION";
    case ProtectionKind::EncryptWithOriginAuth: return "ENCRYPT_WITH_ORIGIN_AUTHENTICATION";
    }
    return "NONE";
}

Result<ProtectionKind> protection_kind_from_string(const std::string& s) {
    if (s == "NONE") return ProtectionKind::None;
    if (s == "SIGN") return ProtectionKind::Sign;
    if (s == "ENCRYPT") return ProtectionKind::Encrypt;
    if (s == "SIGN_WITH_ORIGIN_AUTHENTICATION") return ProtectionKind::SignWithOriginAuth;
    if (s == "ENCRYPT_WITH_ORIGIN_AUTHENTICATION") return ProtectionKind::EncryptWithOriginAuth;
    return Error{Errc::SECURITY_CONFIG_INVALID, "unknown protection kind: " + s};
}

namespace {

Status check_kind_supported(ProtectionKind k, const char* where) {
    if (k == ProtectionKind::SignWithOriginAuth || k == ProtectionKind::EncryptWithOriginAuth)
        return {Errc::UNSUPPORTED, std::string("origin authentication not supported: ") + where};
    return Status::success();
}

std::array<uint8_t, 16> digest16(std::span<const uint8_t> data) {
    auto full = sha256(data);
    std::array<uint8_t, 16> out;
    std::copy_n(full.begin(), 16, out.begin());
    return out;
}

// base64 helpers
const char* kB64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(std::span<const uint8_t> in) {
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    for (size_t i = 0; i < in.size(); i += 3) {
        uint32_t v = in[i] << 16;
        if (i + 1 < in.size()) v |= in[i + 1] << 8;
        if (i + 2 < in.size()) v |= in[i + 2];
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(i + 1 < in.size() ? kB64[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < in.size() ? kB64[v & 63] : '=');
    }
    return out;
}

Result<Bytes> b64_decode(const std::string& in) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (in.size() % 4 != 0) return Error{Errc::IO_ERROR, "bad base64 length"};
    Bytes out;
    out.reserve(in.size() / 4 * 3);
    for (size_t i = 0; i < in.size(); i += 4) {
        int a = val(in[i]), b = val(in[i + 1]);
        if (a < 0 || b < 0) return Error{Errc::IO_ERROR, "bad base64"};
        uint32_t v = (a << 18) | (b << 12);
        int n = 1;
        if (in[i + 2] != '=') {
            int c = val(in[i + 2]);
            if (c < 0) return Error{Errc::IO_ERROR, "bad base64"};
            v |= c << 6;
            n = 2;
        }
        if (in[i + 3] != '=') {
            int d = val(in[i + 3]);
            if (d < 0 || n != 2) return Error{Errc::IO_ERROR, "bad base64"};
            v |= d;
            n = 3;
        }
        out.push_back((v >> 16) & 0xFF);
        if (n >= 2) out.push_back((v >> 8) & 0xFF);
        if (n == 3) out.push_back(v & 0xFF);
    }
    return out;
}

Result<json> read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) return Error{Errc::IO_ERROR, "cannot open " + path};
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) return Error{Errc::IO_ERROR, "bad JSON in " + path};
    return j;
}

Status write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) return {Errc::IO_ERROR, "cannot write " + path};
    out << j.dump(2) << "\n";
    return Status::success();
}

}  // namespace

// --- IdentityCertificate ---

Bytes IdentityCertificate::tbs_bytes() const {
    ByteWriter w;
    w.u64(subject_name);
    w.blob(subject_public_key);
    w.u64(static_cast<uint64_t>(valid_from));
    w.u64(static_cast<uint64_t>(valid_to));
    w.text(issuer_id);
    return w.take();
}

std::array<uint8_t, 16> IdentityCertificate::digest() const { return digest16(encode()); }

bool IdentityCertificate::verify(std::span<const uint8_t> ca_public_key, int64_t at_time) const {
    if (at_time < valid_from || at_time > valid_to) return false;
    return ed25519_verify(ca_public_key, tbs_bytes(), signature);
}

Bytes IdentityCertificate::encode() const {
    ByteWriter w;
    auto tbs = tbs_bytes();
    w.blob(tbs);
    w.blob(signature);
    return w.take();
}

Result<IdentityCertificate> IdentityCertificate::decode(std::span<const uint8_t> bytes) {
    ByteReader outer(bytes);
    auto tbs = outer.blob();
    if (!tbs) return tbs.error();
    auto sig = outer.blob();
    if (!sig) return sig.error();
    ByteReader r(tbs.value());
    IdentityCertificate c;
    auto name = r.u64();
    if (!name) return name.error();
    c.subject_name = name.value();
    auto pk = r.blob();
    if (!pk) return pk.error();
    c.subject_public_key = std::move(pk.value());
    auto from = r.u64();
    if (!from) return from.error();
    c.valid_from = static_cast<int64_t>(from.value());
    auto to = r.u64();
    if (!to) return to.error();
    c.valid_to = static_cast<int64_t>(to.value());
    auto issuer = r.text();
    if (!issuer) return issuer.error();
    c.issuer_id = std::move(issuer.value());
    c.signature = std::move(sig.value());
    return c;
}

// --- GovernanceDocument ---

Bytes GovernanceDocument::tbs_bytes() const {
    ByteWriter w;
    w.u32(domain_id);
    w.u8(allow_unauthenticated_participants ? 1 : 0);
    w.u8(enable_join_access_control ? 1 : 0);
    w.u8(static_cast<uint8_t>(discovery_protection_kind));
    w.u8(static_cast<uint8_t>(liveliness_protection_kind));
    w.u8(static_cast<uint8_t>(rtps_protection_kind));
    w.u32(static_cast<uint32_t>(topic_rules.size()));
    for (const auto& r : topic_rules) {
        w.text(r.topic_pattern);
        w.u8(r.enable_discovery_protection ? 1 : 0);
        w.u8(r.enable_liveliness_protection ? 1 : 0);
        w.u8(r.enable_read_access_control ? 1 : 0);
        w.u8(r.enable_write_access_control ? 1 : 0);
        w.u8(static_cast<uint8_t>(r.metadata_protection_kind));
        w.u8(static_cast<uint8_t>(r.data_protection_kind));
    }
    return w.take();
}

std::array<uint8_t, 16> GovernanceDocument::digest() const { return digest16(tbs_bytes()); }

bool GovernanceDocument::verify(std::span<const uint8_t> ca_public_key) const {
    return ed25519_verify(ca_public_key, tbs_bytes(), signature);
}

const TopicRule* GovernanceDocument::rule_for_topic(const std::string& topic) const {
    for (const auto& r : topic_rules)
        if (pattern_match(r.topic_pattern, topic)) return &r;
    return nullptr;
}

Status GovernanceDocument::validate() const {
    if (auto st = check_kind_supported(discovery_protection_kind, "discovery"); !st) return st;
    if (auto st = check_kind_supported(liveliness_protection_kind, "liveliness"); !st) return st;
    if (auto st = check_kind_supported(rtps_protection_kind, "rtps"); !st) return st;
    for (const auto& r : topic_rules) {
        if (auto st = check_kind_supported(r.metadata_protection_kind, "metadata"); !st) return st;
        if (auto st = check_kind_supported(r.data_protection_kind, "data"); !st) return st;
    }
    return Status::success();
}

// --- PermissionsDocument ---

Bytes PermissionsDocument::tbs_bytes() const {
    ByteWriter w;
    w.u64(subject_name);
    w.u64(static_cast<uint64_t>(valid_from));
    w.u64(static_cast<uint64_t>(valid_to));
    w.u32(static_cast<uint32_t>(grants.size()));
    for (const auto& g : grants) {
        w.u8(g.allow ? 1 : 0);
        w.u8(static_cast<uint8_t>(g.action));
        w.text(g.topic_pattern);
        w.u32(static_cast<uint32_t>(g.partition_patterns.size()));
        for (const auto& p : g.partition_patterns) w.text(p);
    }
    return w.take();
}

bool PermissionsDocument::verify(std::span<const uint8_t> ca_public_key, int64_t at_time) const {
    if (at_time < valid_from || at_time > valid_to) return false;
    return ed25519_verify(ca_public_key, tbs_bytes(), signature);
}

Bytes PermissionsDocument::encode() const {
    ByteWriter w;
    auto tbs = tbs_bytes();
    w.blob(tbs);
    w.blob(signature);
    return w.take();
}

Result<PermissionsDocument> PermissionsDocument::decode(std::span<const uint8_t> bytes) {
    ByteReader outer(bytes);
    auto tbs = outer.blob();
    if (!tbs) return tbs.error();
    auto sig = outer.blob();
    if (!sig) return sig.error();
    ByteReader r(tbs.value());
    PermissionsDocument p;
    auto name = r.u64();
    if (!name) return name.error();
    p.subject_name = name.value();
    auto from = r.u64();
    if (!from) return from.error();
    p.valid_from = static_cast<int64_t>(from.value());
    auto to = r.u64();
    if (!to) return to.error();
    p.valid_to = static_cast<int64_t>(to.value());
    auto n = r.u32();
    if (!n) return n.error();
    if (n.value() > r.remaining()) return Error{Errc::TRUNCATED, "grants"};
    for (uint32_t i = 0; i < n.value(); ++i) {
        Grant g;
        auto allow = r.u8();
        if (!allow) return allow.error();
        g.allow = allow.value() != 0;
        auto action = r.u8();
        if (!action) return action.error();
        if (action.value() > 1) return Error{Errc::BAD_ENUM_ORDINAL, "grant action"};
        g.action = static_cast<GrantAction>(action.value());
        auto topic = r.text();
        if (!topic) return topic.error();
        g.topic_pattern = std::move(topic.value());
        auto np = r.u32();
        if (!np) return np.error();
        if (np.value() > r.remaining()) return Error{Errc::TRUNCATED, "partition patterns"};
        for (uint32_t k = 0; k < np.value(); ++k) {
            auto part = r.text();
            if (!part) return part.error();
            g.partition_patterns.push_back(std::move(part.value()));
        }
        p.grants.push_back(std::move(g));
    }
    p.signature = std::move(sig.value());
    return p;
}

bool pattern_match(const std::string& pattern, const std::string& text) {
    // iterative glob with '*' only
    size_t p = 0, t = 0, star = std::string::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

bool check_permission(const PermissionsDocument& doc, GrantAction action,
                      const std::string& topic, const std::string& partition) {
    for (const auto& g : doc.grants) {
        if (g.action != action) continue;
        if (!pattern_match(g.topic_pattern, topic)) continue;
        bool part_ok;
        if (g.partition_patterns.empty()) {
            part_ok = partition.empty();
        } else {
            part_ok = false;
            for (const auto& pp : g.partition_patterns)
                if (pattern_match(pp, partition)) {
                    part_ok = true;
                    break;
                }
        }
        if (!part_ok) continue;
        return g.allow;
    }
    return false;  // default deny
}

// --- CertificateAuthority ---

CertificateAuthority CertificateAuthority::create(std::string issuer_id) {
    CertificateAuthority ca;
    ca.keys_ = SigningKeyPair::generate();
    ca.issuer_id_ = std::move(issuer_id);
    return ca;
}

Result<IdentityCertificate> CertificateAuthority::issue_identity(
    uint64_t name, std::span<const uint8_t> public_key, int64_t valid_from,
    int64_t valid_to) const {
    if (public_key.size() != 32) return Error{Errc::BAD_KEY, "subject public key"};
    if (valid_to <= valid_from) return Error{Errc::EXPIRED_REQUEST, "validity window"};
    IdentityCertificate c;
    c.subject_name = name;
    c.subject_public_key.assign(public_key.begin(), public_key.end());
    c.valid_from = valid_from;
    c.valid_to = valid_to;
    c.issuer_id = issuer_id_;
    auto sig = ed25519_sign(keys_.private_key, c.tbs_bytes());
    if (!sig) return sig.error();
    c.signature = std::move(sig.value());
    return c;
}

Status CertificateAuthority::sign_governance(GovernanceDocument& doc) const {
    auto sig = ed25519_sign(keys_.private_key, doc.tbs_bytes());
    if (!sig) return sig.error();
    doc.signature = std::move(sig.value());
    return Status::success();
}

Status CertificateAuthority::sign_permissions(PermissionsDocument& doc) const {
    auto sig = ed25519_sign(keys_.private_key, doc.tbs_bytes());
    if (!sig) return sig.error();
    doc.signature = std::move(sig.value());
    return Status::success();
}

// --- SecurityConfig ---

Status SecurityConfig::validate(uint64_t participant_name, int64_t now_unix) const {
    if (auto st = governance.validate(); !st)
        return {Errc::SECURITY_CONFIG_INVALID, st.error().to_string()};
    if (!identity.verify(ca_public_key, now_unix))
        return {Errc::CERT_INVALID, "identity certificate does not verify"};
    if (identity.subject_name != participant_name)
        return {Errc::CERT_INVALID, "certificate subject does not match participant name"};
    if (!governance.verify(ca_public_key))
        return {Errc::SECURITY_CONFIG_INVALID, "governance signature invalid"};
    if (!permissions.verify(ca_public_key, now_unix))
        return {Errc::SECURITY_CONFIG_INVALID, "permissions document invalid"};
    if (permissions.subject_name != participant_name)
        return {Errc::SECURITY_CONFIG_INVALID, "permissions subject mismatch"};
    // The identity key pair must be consistent.
    auto probe = ed25519_sign(identity_private_key, identity.tbs_bytes());
    if (!probe || !ed25519_verify(identity.subject_public_key, identity.tbs_bytes(),
                                  probe.value()))
        return {Errc::BAD_KEY, "identity private key does not match certificate"};
    return Status::success();
}

// --- JSON I/O ---

Status save_json(const std::string& path, const IdentityCertificate& c) {
    json j{{"kind", "identity_certificate"},
           {"subject_name", c.subject_name},
           {"subject_public_key", b64_encode(c.subject_public_key)},
           {"valid_from", c.valid_from},
           {"valid_to", c.valid_to},
           {"issuer_id", c.issuer_id},
           {"signature", b64_encode(c.signature)}};
    return write_json_file(path, j);
}

Result<IdentityCertificate> load_identity_json(const std::string& path) {
    auto j = read_json_file(path);
    if (!j) return j.error();
    try {
        IdentityCertificate c;
        c.subject_name = j.value().at("subject_name").get<uint64_t>();
        auto pk = b64_decode(j.value().at("subject_public_key").get<std::string>());
        if (!pk) return pk.error();
        c.subject_public_key = std::move(pk.value());
        c.valid_from = j.value().at("valid_from").get<int64_t>();
        c.valid_to = j.value().at("valid_to").get<int64_t>();
        c.issuer_id = j.value().at("issuer_id").get<std::string>();
        auto sig = b64_decode(j.value().at("signature").get<std::string>());
        if (!sig) return sig.error();
        c.signature = std::move(sig.value());
        return c;
    } catch (const json::exception& e) {
        return Error{Errc::IO_ERROR, std::string("identity json: ") + e.what()};
    }
}

Status save_json(const std::string& path, const GovernanceDocument& g) {
    json rules = json::array();
    for (const auto& r : g.topic_rules) {
        rules.push_back({{"topic_pattern", r.topic_pattern},
                         {"enable_discovery_protection", r.enable_discovery_protection},
                         {"enable_liveliness_protection", r.enable_liveliness_protection},
                         {"enable_read_access_control", r.enable_read_access_control},
                         {"enable_write_access_control", r.enable_write_access_control},
                         {"metadata_protection_kind",
                          protection_kind_name(r.metadata_protection_kind)},
                         {"data_protection_kind", protection_kind_name(r.data_protection_kind)}});
    }
    json j{{"kind", "governance_document"},
           {"domain_id", g.domain_id},
           {"allow_unauthenticated_participants", g.allow_unauthenticated_participants},
           {"enable_join_access_control", g.enable_join_access_control},
           {"discovery_protection_kind", protection_kind_name(g.discovery_protection_kind)},
           {"liveliness_protection_kind", protection_kind_name(g.liveliness_protection_kind)},
           {"rtps_protection_kind", protection_kind_name(g.rtps_protection_kind)},
           {"topic_rules", rules},
           {"signature", b64_encode(g.signature)}};
    return write_json_file(path, j);
}

Result<GovernanceDocument> load_governance_json(const std::string& path) {
    auto j = read_json_file(path);
    if (!j) return j.error();
    try {
        GovernanceDocument g;
        g.domain_id = j.value().at("domain_id").get<uint32_t>();
        g.allow_unauthenticated_participants =
            j.value().at("allow_unauthenticated_participants").get<bool>();
        g.enable_join_access_control = j.value().at("enable_join_access_control").get<bool>();
        auto k1 = protection_kind_from_string(
            j.value().at("discovery_protection_kind").get<std::string>());
        if (!k1) return k1.error();
        g.discovery_protection_kind = k1.value();
        auto k2 = protection_kind_from_string(
            j.value().at("liveliness_protection_kind").get<std::string>());
        if (!k2) return k2.error();
        g.liveliness_protection_kind = k2.value();
        auto k3 =
            protection_kind_from_string(j.value().at("rtps_protection_kind").get<std::string>());
        if (!k3) return k3.error();
        g.rtps_protection_kind = k3.value();
        for (const auto& rj : j.value().at("topic_rules")) {
            TopicRule r;
            r.topic_pattern = rj.at("topic_pattern").get<std::string>();
            r.enable_discovery_protection = rj.at("enable_discovery_protection").get<bool>();
            r.enable_liveliness_protection = rj.at("enable_liveliness_protection").get<bool>();
            r.enable_read_access_control = rj.at("enable_read_access_control").get<bool>();
            r.enable_write_access_control = rj.at("enable_write_access_control").get<bool>();
            auto mk = protection_kind_from_string(
                rj.at("metadata_protection_kind").get<std::string>());
            if (!mk) return mk.error();
            r.metadata_protection_kind = mk.value();
            auto dk = protection_kind_from_string(rj.at("data_protection_kind").get<std::string>());
            if (!dk) return dk.error();
            r.data_protection_kind = dk.value();
            g.topic_rules.push_back(std::move(r));
        }
        auto sig = b64_decode(j.value().at("signature").get<std::string>());
        if (!sig) return sig.error();
        g.signature = std::move(sig.value());
        return g;
    } catch (const json::exception& e) {
        return Error{Errc::IO_ERROR, std::string("governance json: ") + e.what()};
    }
}

Status save_json(const std::string& path, const PermissionsDocument& p) {
    json grants = json::array();
    for (const auto& g : p.grants) {
        grants.push_back({{"allow", g.allow},
                          {"action", g.action == GrantAction::Publish ? "publish" : "subscribe"},
                          {"topic_pattern", g.topic_pattern},
                          {"partition_patterns", g.partition_patterns}});
    }
    json j{{"kind", "permissions_document"},
           {"subject_name", p.subject_name},
           {"valid_from", p.valid_from},
           {"valid_to", p.valid_to},
           {"grants", grants},
           {"signature", b64_encode(p.signature)}};
    return write_json_file(path, j);
}

Result<PermissionsDocument> load_permissions_json(const std::string& path) {
    auto j = read_json_file(path);
    if (!j) return j.error();
    try {
        PermissionsDocument p;
        p.subject_name = j.value().at("subject_name").get<uint64_t>();
        p.valid_from = j.value().at("valid_from").get<int64_t>();
        p.valid_to = j.value().at("valid_to").get<int64_t>();
        for (const auto& gj : j.value().at("grants")) {
            Grant g;
            g.allow = gj.at("allow").get<bool>();
            std::string action = gj.at("action").get<std::string>();
            if (action == "publish")
                g.action = GrantAction::Publish;
            else if (action == "subscribe")
                g.action = GrantAction::Subscribe;
            else
                return Error{Errc::IO_ERROR, "bad grant action: " + action};
            g.topic_pattern = gj.at("topic_pattern").get<std::string>();
            g.partition_patterns = gj.at("partition_patterns").get<std::vector<std::string>>();
            p.grants.push_back(std::move(g));
        }
        auto sig = b64_decode(j.value().at("signature").get<std::string>());
        if (!sig) return sig.error();
        p.signature = std::move(sig.value());
        return p;
    } catch (const json::exception& e) {
        return Error{Errc::IO_ERROR, std::string("permissions json: ") + e.what()};
    }
}

Status save_key_json(const std::string& path, const std::string& kind, const Bytes& key) {
    json j{{"kind", kind}, {"key", b64_encode(key)}};
    return write_json_file(path, j);
}

Result<Bytes> load_key_json(const std::string& path, const std::string& kind) {
    auto j = read_json_file(path);
    if (!j) return j.error();
    try {
        if (j.value().at("kind").get<std::string>() != kind)
            return Error{Errc::IO_ERROR, "wrong key kind in " + path};
        return b64_decode(j.value().at("key").get<std::string>());
    } catch (const json::exception& e) {
        return Error{Errc::IO_ERROR, std::string("key json: ") + e.what()};
    }
}

Result<GovernanceDocument> make_governance_profile(const std::string& profile,
                                                   uint32_t domain_id) {
    GovernanceDocument g;
    g.domain_id = domain_id;
    g.allow_unauthenticated_participants = false;
    g.enable_join_access_control = true;
    TopicRule rule;  // applies to all topics
    rule.topic_pattern = "*";
    if (profile == "default") {
        g.discovery_protection_kind = ProtectionKind::Encrypt;
        g.liveliness_protection_kind = ProtectionKind::Encrypt;
        g.rtps_protection_kind = ProtectionKind::Sign;
        rule.metadata_protection_kind = ProtectionKind::None;
        rule.data_protection_kind = ProtectionKind::Encrypt;
    } else if (profile == "encrypt" || profile == "sign" || profile == "none") {
        ProtectionKind k = profile == "encrypt" ? ProtectionKind::Encrypt
                           : profile == "sign"  ? ProtectionKind::Sign
                                                : ProtectionKind::None;
        g.discovery_protection_kind = k;
        g.liveliness_protection_kind = k;
        g.rtps_protection_kind = k;
        rule.metadata_protection_kind = k;
        rule.data_protection_kind = k;
    } else {
        return Error{Errc::CONFIG_INVALID, "unknown governance profile: " + profile};
    }
    g.topic_rules.push_back(rule);
    return g;
}

}  // namespace agribus::security
