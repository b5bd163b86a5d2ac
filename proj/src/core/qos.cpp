#include "agribus/core/qos.hpp"

#include <algorithm>

namespace agribus::core {

const char* incompatible_reason_name(IncompatibleReason r) {
    switch (r) {
    case IncompatibleReason::None: return "NONE";
    case IncompatibleReason::Reliability: return "RELIABILITY";
    case IncompatibleReason::Durability: return "DURABILITY";
    case IncompatibleReason::Deadline: return "DEADLINE";
    case IncompatibleReason::Partition: return "PARTITION";
    case IncompatibleReason::Ownership: return "OWNERSHIP";
    }
    return "NONE";
}

bool partitions_intersect(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() && b.empty()) return true;
    if (a.empty() || b.empty()) return false;
    auto has_wildcard = [](const std::vector<std::string>& v) {
        return std::find(v.begin(), v.end(), "*") != v.end();
    };
    if (has_wildcard(a) || has_wildcard(b)) return true;
    for (const auto& pa : a)
        for (const auto& pb : b)
            if (pa == pb) return true;
    return false;
}

MatchResult qos_compatible(const QosProfile& offered, const QosProfile& requested) {
    if (static_cast<int>(offered.reliability) < static_cast<int>(requested.reliability))
        return {false, IncompatibleReason::Reliability};
    if (static_cast<int>(offered.durability) < static_cast<int>(requested.durability))
        return {false, IncompatibleReason::Durability};
    // Absent deadline = infinite period. The offered period must be no
    // longer than the requested one.
    if (requested.deadline_ms.has_value()) {
        if (!offered.deadline_ms.has_value() || *offered.deadline_ms > *requested.deadline_ms)
            return {false, IncompatibleReason::Deadline};
    }
    if (!partitions_intersect(offered.partitions, requested.partitions))
        return {false, IncompatibleReason::Partition};
    // History is not a matching criterion. Ownership kind mismatch on the
    // same topic is reported so ownership conflicts never go silent.
    if (offered.ownership != requested.ownership) return {false, IncompatibleReason::Ownership};
    return {true, IncompatibleReason::None};
}

void encode_qos(ByteWriter& w, const QosProfile& q) {
    w.u8(static_cast<uint8_t>(q.reliability));
    w.u8(static_cast<uint8_t>(q.durability));
    w.u8(static_cast<uint8_t>(q.history));
    w.u32(q.history_depth);
    w.u8(static_cast<uint8_t>(q.ownership));
    w.u32(q.ownership_strength);
    w.u8(q.deadline_ms.has_value() ? 1 : 0);
    w.u64(q.deadline_ms.value_or(0));
    w.u32(static_cast<uint32_t>(q.partitions.size()));
    for (const auto& p : q.partitions) w.text(p);
}

Result<QosProfile> decode_qos(ByteReader& r) {
    QosProfile q;
    auto rel = r.u8();
    if (!rel) return rel.error();
    if (rel.value() > 1) return Error{Errc::BAD_ENUM_ORDINAL, "reliability"};
    q.reliability = static_cast<Reliability>(rel.value());
    auto dur = r.u8();
    if (!dur) return dur.error();
    if (dur.value() > 2) return Error{Errc::BAD_ENUM_ORDINAL, "durability"};
    q.durability = static_cast<Durability>(dur.value());
    auto hist = r.u8();
    if (!hist) return hist.error();
    if (hist.value() > 1) return Error{Errc::BAD_ENUM_ORDINAL, "history"};
    q.history = static_cast<HistoryKind>(hist.value());
    auto depth = r.u32();
    if (!depth) return depth.error();
    q.history_depth = depth.value();
    auto own = r.u8();
    if (!own) return own.error();
    if (own.value() > 1) return Error{Errc::BAD_ENUM_ORDINAL, "ownership"};
    q.ownership = static_cast<Ownership>(own.value());
    auto strength = r.u32();
    if (!strength) return strength.error();
    q.ownership_strength = strength.value();
    auto has_deadline = r.u8();
    if (!has_deadline) return has_deadline.error();
    auto deadline = r.u64();
    if (!deadline) return deadline.error();
    if (has_deadline.value()) q.deadline_ms = deadline.value();
    auto n = r.u32();
    if (!n) return n.error();
    if (n.value() > r.remaining() / 4) return Error{Errc::TRUNCATED, "partition list"};
    for (uint32_t i = 0; i < n.value(); ++i) {
        auto p = r.text();
        if (!p) return p.error();
        q.partitions.push_back(std::move(p.value()));
    }
    return q;
}

}  // namespace agribus::core
