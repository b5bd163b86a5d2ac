#include "agribus/discovery/discovery.hpp"

namespace agribus::discovery {

wire::Submessage ParticipantAnnouncement::to_submessage() const {
    ByteWriter w;
    w.raw(std::span<const uint8_t>(prefix.data(), prefix.size()));
    w.u64(name);
    w.u32(domain_id);
    w.u32(static_cast<uint32_t>(unicast_locators.size()));
    for (const auto& l : unicast_locators) transport::encode_locator(w, l);
    w.u64(lease_duration_ms);
    w.u8(security_enabled ? 1 : 0);
    w.raw(std::span<const uint8_t>(identity_digest.data(), identity_digest.size()));
    wire::Submessage s;
    s.kind = static_cast<uint8_t>(wire::SubmessageKind::ParticipantAnnounce);
    s.body = w.take();
    return s;
}

Result<ParticipantAnnouncement> ParticipantAnnouncement::parse(const wire::Submessage& s) {
    ByteReader r(s.body);
    ParticipantAnnouncement a;
    auto prefix = r.raw(12);
    if (!prefix) return prefix.error();
    std::copy(prefix.value().begin(), prefix.value().end(), a.prefix.begin());
    auto name = r.u64();
    if (!name) return name.error();
    a.name = name.value();
    auto domain = r.u32();
    if (!domain) return domain.error();
    a.domain_id = domain.value();
    auto n = r.u32();
    if (!n) return n.error();
    if (n.value() > r.remaining()) return Error{Errc::TRUNCATED, "locator list"};
    for (uint32_t i = 0; i < n.value(); ++i) {
        auto l = transport::decode_locator(r);
        if (!l) return l.error();
        a.unicast_locators.push_back(std::move(l.value()));
    }
    auto lease = r.u64();
    if (!lease) return lease.error();
    a.lease_duration_ms = lease.value();
    auto sec = r.u8();
    if (!sec) return sec.error();
    a.security_enabled = sec.value() != 0;
    auto digest = r.raw(16);
    if (!digest) return digest.error();
    std::copy(digest.value().begin(), digest.value().end(), a.identity_digest.begin());
    return a;
}

Bytes EndpointAnnouncement::encode() const {
    ByteWriter w;
    wire::write_guid(w, endpoint);
    w.u8(is_reader ? 1 : 0);
    w.text(topic);
    w.text(type_name);
    w.raw(std::span<const uint8_t>(type_digest.data(), type_digest.size()));
    core::encode_qos(w, qos);
    transport::encode_locator(w, unicast);
    w.u8(retired ? 1 : 0);
    return w.take();
}

Result<EndpointAnnouncement> EndpointAnnouncement::decode(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    EndpointAnnouncement e;
    auto guid = wire::read_guid(r);
    if (!guid) return guid.error();
    e.endpoint = guid.value();
    auto dir = r.u8();
    if (!dir) return dir.error();
    e.is_reader = dir.value() != 0;
    auto topic = r.text();
    if (!topic) return topic.error();
    e.topic = std::move(topic.value());
    auto type_name = r.text();
    if (!type_name) return type_name.error();
    e.type_name = std::move(type_name.value());
    auto digest = r.raw(16);
    if (!digest) return digest.error();
    std::copy(digest.value().begin(), digest.value().end(), e.type_digest.begin());
    auto qos = core::decode_qos(r);
    if (!qos) return qos.error();
    e.qos = std::move(qos.value());
    auto loc = transport::decode_locator(r);
    if (!loc) return loc.error();
    e.unicast = std::move(loc.value());
    auto retired = r.u8();
    if (!retired) return retired.error();
    e.retired = retired.value() != 0;
    return e;
}

}  // namespace agribus::discovery
