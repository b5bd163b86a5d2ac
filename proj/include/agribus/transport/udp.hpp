#pragma once

#include <memory>

#include "agribus/transport/transport.hpp"

namespace agribus::transport {

/// UDP transport: one unicast socket from the configured port range plus a
/// multicast membership on the domain's discovery group. Both receive paths
/// feed a single inbound path via poll().
class UdpTransport : public Transport {
  public:
    static Result<std::shared_ptr<UdpTransport>> open(const TransportConfig& config);
    ~UdpTransport() override;

    UdpTransport(const UdpTransport&) = delete;
    UdpTransport& operator=(const UdpTransport&) = delete;

    Locator unicast_locator() const override;
    Locator discovery_locator() const override;
    Status send(const Locator& dest, std::span<const uint8_t> bytes) override;
    bool try_receive(Packet& out) override;
    bool wait_receive(Packet& out, uint64_t timeout_ms) override;
    uint64_t now_ms() const override;

  private:
    UdpTransport() = default;

    int unicast_fd_ = -1;
    int multicast_fd_ = -1;
    uint16_t unicast_port_ = 0;
    std::string local_address_;
    std::string group_address_;
    uint16_t group_port_ = 0;
};

}  // namespace agribus::transport
