#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "agribus/bytes.hpp"

namespace agribus::wire {

using GuidPrefix = std::array<uint8_t, 12>;
using EntityId = uint32_t;

// Builtin entity ids (all user endpoints allocate at or above 0x100).
inline constexpr EntityId kEntityParticipant = 0x000000C1;
inline constexpr EntityId kEntityEndpointAnnounceWriter = 0x000000C2;
inline constexpr EntityId kEntityEndpointAnnounceReader = 0x000000C7;
inline constexpr EntityId kFirstUserEntityId = 0x00000100;

struct Guid {
    GuidPrefix prefix{};
    EntityId entity_id = 0;

    auto operator<=>(const Guid&) const = default;
};

/// Builds a participant prefix from the device NAME plus random salt.
Guid make_participant_guid(uint64_t name, uint32_t random_salt);

struct SequenceNumber {
    uint64_t value = 0;  // 0 means "none"; writers start at 1

    auto operator<=>(const SequenceNumber&) const = default;
};

using KeyHash = std::array<uint8_t, 16>;

enum class FieldKind : uint8_t { U64, U32, F32, Enum, Text, Nested };

struct TypeDescriptor;

struct FieldDescriptor {
    std::string name;
    FieldKind kind = FieldKind::U64;
    bool is_key = false;
    uint32_t enum_max = 0;   // Enum: highest valid ordinal
    uint32_t text_max = 0;   // Text: maximum length in bytes
    std::shared_ptr<const TypeDescriptor> nested;  // Nested only
};

/// Describes a topic data type: ordered fields, fixed at build time.
struct TypeDescriptor {
    std::string name;
    std::vector<FieldDescriptor> fields;

    bool has_key() const {
        for (const auto& f : fields)
            if (f.is_key) return true;
        return false;
    }

    /// Structural digest; equal digests mean interoperable types.
    std::array<uint8_t, 16> digest() const;
};

/// A dynamically-typed field value; records are vectors of these in
/// declaration order, nested records inline as sub-vectors.
struct Value {
    std::variant<uint64_t, uint32_t, float, std::string, std::vector<Value>> v;

    Value() : v(uint64_t{0}) {}
    Value(uint64_t x) : v(x) {}
    Value(uint32_t x) : v(x) {}
    Value(float x) : v(x) {}
    Value(std::string x) : v(std::move(x)) {}
    Value(std::vector<Value> x) : v(std::move(x)) {}

    uint64_t as_u64() const { return std::get<uint64_t>(v); }
    uint32_t as_u32() const { return std::get<uint32_t>(v); }
    float as_f32() const { return std::get<float>(v); }
    const std::string& as_text() const { return std::get<std::string>(v); }
    const std::vector<Value>& as_record() const { return std::get<std::vector<Value>>(v); }

    bool operator==(const Value&) const = default;
};

using Record = std::vector<Value>;

}  // namespace agribus::wire
