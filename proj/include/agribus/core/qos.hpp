#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agribus/bytes.hpp"

namespace agribus::core {

enum class Reliability : uint8_t { BestEffort = 0, Reliable = 1 };
enum class Durability : uint8_t { Volatile = 0, TransientLocal = 1, Durable = 2 };
enum class HistoryKind : uint8_t { KeepLast = 0, KeepAll = 1 };
enum class Ownership : uint8_t { Shared = 0, Exclusive = 1 };

struct QosProfile {
    Reliability reliability = Reliability::BestEffort;
    Durability durability = Durability::Volatile;
    HistoryKind history = HistoryKind::KeepLast;
    uint32_t history_depth = 1;  // KeepLast only, >= 1
    Ownership ownership = Ownership::Shared;
    uint32_t ownership_strength = 0;
    std::optional<uint64_t> deadline_ms;        // absent = no deadline
    std::vector<std::string> partitions;        // empty = default partition

    bool operator==(const QosProfile&) const = default;
};

enum class IncompatibleReason : uint8_t {
    None = 0,
    Reliability,
    Durability,
    Deadline,
    Partition,
    Ownership,
};

struct MatchResult {
    bool compatible = true;
    IncompatibleReason reason = IncompatibleReason::None;
};

const char* incompatible_reason_name(IncompatibleReason r);

/// Request/offer compatibility: the offer must meet or exceed the request on
/// reliability, durability, and deadline period, and partitions must
/// intersect. Ownership kind must agree on both sides.
MatchResult qos_compatible(const QosProfile& offered, const QosProfile& requested);

/// Exact string intersection; two empty sets share the default partition.
/// A single "*" entry matches any partition set.
bool partitions_intersect(const std::vector<std::string>& a, const std::vector<std::string>& b);

void encode_qos(ByteWriter& w, const QosProfile& q);
Result<QosProfile> decode_qos(ByteReader& r);

}  // namespace agribus::core
