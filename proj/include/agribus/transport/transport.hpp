#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "agribus/bytes.hpp"

namespace agribus::transport {

inline constexpr size_t kMaxDatagram = 60 * 1024;

enum class LocatorKind : uint8_t { UdpUnicast = 0, UdpMulticast = 1, Sim = 2 };

struct Locator {
    LocatorKind kind = LocatorKind::UdpUnicast;
    std::string address;
    uint16_t port = 0;

    bool operator==(const Locator&) const = default;
    std::string to_string() const;
};

void encode_locator(ByteWriter& w, const Locator& l);
Result<Locator> decode_locator(ByteReader& r);

struct Packet {
    Bytes bytes;
};

struct TransportConfig {
    uint32_t domain_id = 0;
    std::string discovery_address = "239.255.77.77";  // AGRIBUS_DISCOVERY_ADDR overrides
    uint16_t discovery_port_base = 7400;              // actual port = base + domain_id
    uint16_t unicast_port_min = 7500;
    uint16_t unicast_port_max = 7999;
};

/// Moves encoded messages between participants. Implementations: UDP
/// multicast/unicast, and an in-process simulator with deterministic
/// loss/reorder/delay driven by a virtual clock.
class Transport {
  public:
    virtual ~Transport() = default;

    virtual Locator unicast_locator() const = 0;
    /// The pre-known group locator for participant announcements.
    virtual Locator discovery_locator() const = 0;

    virtual Status send(const Locator& dest, std::span<const uint8_t> bytes) = 0;
    /// Non-blocking receive; returns false when the inbound queue is empty.
    virtual bool try_receive(Packet& out) = 0;
    /// Blocks up to timeout_ms in live mode; equals try_receive on the simulator.
    virtual bool wait_receive(Packet& out, uint64_t timeout_ms) = 0;

    virtual uint64_t now_ms() const = 0;
};

}  // namespace agribus::transport
