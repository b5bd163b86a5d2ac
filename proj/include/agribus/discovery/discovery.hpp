#pragma once

#include "agribus/core/qos.hpp"
#include "agribus/transport/transport.hpp"
#include "agribus/wire/message.hpp"

namespace agribus::discovery {

inline constexpr uint64_t kAnnouncePeriodMs = 1000;
inline constexpr uint64_t kFastAnnouncePeriodMs = 100;  // first three announcements
inline constexpr uint64_t kDefaultLeaseMs = 5000;
inline constexpr uint64_t kHandshakeTimeoutMs = 3000;
inline constexpr int kHandshakeRetries = 3;
inline constexpr uint64_t kQuarantineMs = 30000;

struct ParticipantAnnouncement {
    wire::GuidPrefix prefix{};
    uint64_t name = 0;
    uint32_t domain_id = 0;
    std::vector<transport::Locator> unicast_locators;
    uint64_t lease_duration_ms = kDefaultLeaseMs;
    bool security_enabled = false;
    std::array<uint8_t, 16> identity_digest{};  // certificate digest when security on

    wire::Submessage to_submessage() const;
    static Result<ParticipantAnnouncement> parse(const wire::Submessage& s);
};

struct EndpointAnnouncement {
    wire::Guid endpoint;
    bool is_reader = false;
    std::string topic;
    std::string type_name;
    std::array<uint8_t, 16> type_digest{};
    core::QosProfile qos;
    transport::Locator unicast;
    bool retired = false;

    Bytes encode() const;
    static Result<EndpointAnnouncement> decode(std::span<const uint8_t> bytes);
};

}  // namespace agribus::discovery
