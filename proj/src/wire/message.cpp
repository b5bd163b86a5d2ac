#include "agribus/wire/message.hpp"

namespace agribus::wire {

Bytes encode_message(const Message& m) {
    ByteWriter w;
    w.raw(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(kProtocolMagic), 4));
    w.u8(kVersionMajor);
    w.u8(kVersionMinor);
    w.raw(std::span<const uint8_t>(m.sender.data(), m.sender.size()));
    for (const auto& s : m.submessages) {
        w.u8(s.kind);
        w.u8(s.flags);
        w.u32(static_cast<uint32_t>(s.body.size()));
        w.raw(s.body);
    }
    return w.take();
}

Result<Message> decode_message(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    auto magic = r.raw(4);
    if (!magic) return magic.error();
    if (std::memcmp(magic.value().data(), kProtocolMagic, 4) != 0)
        return Error{Errc::BAD_MAGIC, "bad protocol magic"};
    auto major = r.u8();
    if (!major) return major.error();
    if (major.value() != kVersionMajor) return Error{Errc::BAD_MAGIC, "unsupported major version"};
    auto minor = r.u8();
    if (!minor) return minor.error();
    Message m;
    auto prefix = r.raw(12);
    if (!prefix) return prefix.error();
    std::copy(prefix.value().begin(), prefix.value().end(), m.sender.begin());
    while (!r.done()) {
        Submessage s;
        auto kind = r.u8();
        if (!kind) return kind.error();
        auto flags = r.u8();
        if (!flags) return flags.error();
        auto body = r.blob();
        if (!body) return body.error();
        s.kind = kind.value();
        s.flags = flags.value();
        s.body = std::move(body.value());
        m.submessages.push_back(std::move(s));
    }
    return m;
}

void write_guid(ByteWriter& w, const Guid& g) {
    w.raw(std::span<const uint8_t>(g.prefix.data(), g.prefix.size()));
    w.u32(g.entity_id);
}

Result<Guid> read_guid(ByteReader& r) {
    auto p = r.raw(12);
    if (!p) return p.error();
    Guid g;
    std::copy(p.value().begin(), p.value().end(), g.prefix.begin());
    auto e = r.u32();
    if (!e) return e.error();
    g.entity_id = e.value();
    return g;
}

Submessage DataSub::to_submessage() const {
    ByteWriter w;
    write_guid(w, writer);
    w.u64(sn.value);
    w.raw(std::span<const uint8_t>(key_hash.data(), key_hash.size()));
    w.blob(payload);
    Submessage s;
    s.kind = static_cast<uint8_t>(SubmessageKind::Data);
    s.flags = dispose ? kDataFlagDispose : 0;
    s.body = w.take();
    return s;
}

Result<DataSub> DataSub::parse(const Submessage& s) {
    ByteReader r(s.body);
    DataSub d;
    auto g = read_guid(r);
    if (!g) return g.error();
    d.writer = g.value();
    auto sn = r.u64();
    if (!sn) return sn.error();
    d.sn.value = sn.value();
    auto kh = r.raw(16);
    if (!kh) return kh.error();
    std::copy(kh.value().begin(), kh.value().end(), d.key_hash.begin());
    auto payload = r.blob();
    if (!payload) return payload.error();
    d.payload = std::move(payload.value());
    d.dispose = (s.flags & kDataFlagDispose) != 0;
    return d;
}

Submessage HeartbeatSub::to_submessage() const {
    ByteWriter w;
    write_guid(w, writer);
    w.u64(first.value);
    w.u64(last.value);
    w.u32(count);
    Submessage s;
    s.kind = static_cast<uint8_t>(SubmessageKind::Heartbeat);
    s.body = w.take();
    return s;
}

Result<HeartbeatSub> HeartbeatSub::parse(const Submessage& s) {
    ByteReader r(s.body);
    HeartbeatSub h;
    auto g = read_guid(r);
    if (!g) return g.error();
    h.writer = g.value();
    auto first = r.u64();
    if (!first) return first.error();
    h.first.value = first.value();
    auto last = r.u64();
    if (!last) return last.error();
    h.last.value = last.value();
    auto count = r.u32();
    if (!count) return count.error();
    h.count = count.value();
    return h;
}

Submessage AckNackSub::to_submessage() const {
    ByteWriter w;
    write_guid(w, reader);
    write_guid(w, writer);
    w.u64(base.value);
    w.u32(static_cast<uint32_t>(missing.size()));
    for (uint64_t m : missing) w.u64(m);
    Submessage s;
    s.kind = static_cast<uint8_t>(SubmessageKind::AckNack);
    s.body = w.take();
    return s;
}

Result<AckNackSub> AckNackSub::parse(const Submessage& s) {
    ByteReader r(s.body);
    AckNackSub a;
    auto rg = read_guid(r);
    if (!rg) return rg.error();
    a.reader = rg.value();
    auto wg = read_guid(r);
    if (!wg) return wg.error();
    a.writer = wg.value();
    auto base = r.u64();
    if (!base) return base.error();
    a.base.value = base.value();
    auto n = r.u32();
    if (!n) return n.error();
    if (n.value() > r.remaining() / 8) return Error{Errc::TRUNCATED, "acknack missing list"};
    a.missing.reserve(n.value());
    for (uint32_t i = 0; i < n.value(); ++i) {
        auto m = r.u64();
        if (!m) return m.error();
        a.missing.push_back(m.value());
    }
    return a;
}

}  // namespace agribus::wire
