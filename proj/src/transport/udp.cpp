#include "agribus/transport/udp.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <cstring>

namespace agribus::transport {

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

bool recv_datagram(int fd, Packet& out) {
    uint8_t buf[kMaxDatagram + 1];
    ssize_t n = ::recv(fd, buf, sizeof buf, MSG_DONTWAIT);
    if (n <= 0) return false;
    out.bytes.assign(buf, buf + n);
    return true;
}

}  // namespace

Result<std::shared_ptr<UdpTransport>> UdpTransport::open(const TransportConfig& config) {
    auto t = std::shared_ptr<UdpTransport>(new UdpTransport());
    t->group_address_ = env_or("AGRIBUS_DISCOVERY_ADDR", config.discovery_address);
    t->group_port_ = static_cast<uint16_t>(config.discovery_port_base + config.domain_id);
    // The interface carrying multicast; loopback by default for desk use.
    t->local_address_ = env_or("AGRIBUS_MCAST_IF", "127.0.0.1");

    // unicast socket from the configured range
    t->unicast_fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (t->unicast_fd_ < 0) return Error{Errc::IO_ERROR, "socket() failed"};
    bool bound = false;
    for (uint32_t port = config.unicast_port_min; port <= config.unicast_port_max; ++port) {
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<uint16_t>(port));
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
        if (::bind(t->unicast_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) {
            t->unicast_port_ = static_cast<uint16_t>(port);
            bound = true;
            break;
        }
    }
    if (!bound || config.unicast_port_min > config.unicast_port_max)
        return Error{Errc::PORT_EXHAUSTED, "no free unicast port in range"};

    // multicast membership on the discovery group
    t->multicast_fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (t->multicast_fd_ < 0) return Error{Errc::IO_ERROR, "socket() failed"};
    int one = 1;
    ::setsockopt(t->multicast_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
#ifdef SO_REUSEPORT
    ::setsockopt(t->multicast_fd_, SOL_SOCKET, SO_REUSEPORT, &one, sizeof one);
#endif
    sockaddr_in maddr{};
    maddr.sin_family = AF_INET;
    maddr.sin_port = htons(t->group_port_);
    maddr.sin_addr.s_addr = htonl(INADDR_ANY);
    if (::bind(t->multicast_fd_, reinterpret_cast<sockaddr*>(&maddr), sizeof maddr) != 0)
        return Error{Errc::MULTICAST_JOIN_FAILED, "bind to discovery port failed"};
    ip_mreqn mreq{};
    mreq.imr_multiaddr.s_addr = inet_addr(t->group_address_.c_str());
    mreq.imr_address.s_addr = inet_addr(t->local_address_.c_str());
    if (::setsockopt(t->multicast_fd_, IPPROTO_IP, IP_ADD_MEMBERSHIP, &mreq, sizeof mreq) != 0)
        return Error{Errc::MULTICAST_JOIN_FAILED, t->group_address_};

    // multicast sends leave the unicast socket via the chosen interface
    in_addr ifa{};
    ifa.s_addr = inet_addr(t->local_address_.c_str());
    ::setsockopt(t->unicast_fd_, IPPROTO_IP, IP_MULTICAST_IF, &ifa, sizeof ifa);
    int loop = 1;
    ::setsockopt(t->unicast_fd_, IPPROTO_IP, IP_MULTICAST_LOOP, &loop, sizeof loop);

    return t;
}

UdpTransport::~UdpTransport() {
    if (unicast_fd_ >= 0) ::close(unicast_fd_);
    if (multicast_fd_ >= 0) ::close(multicast_fd_);
}

Locator UdpTransport::unicast_locator() const {
    return {LocatorKind::UdpUnicast, local_address_, unicast_port_};
}

Locator UdpTransport::discovery_locator() const {
    return {LocatorKind::UdpMulticast, group_address_, group_port_};
}

Status UdpTransport::send(const Locator& dest, std::span<const uint8_t> bytes) {
    if (bytes.size() > kMaxDatagram) return {Errc::OVERSIZE_DATAGRAM, std::to_string(bytes.size())};
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(dest.port);
    addr.sin_addr.s_addr = inet_addr(dest.address.c_str());
    ssize_t n = ::sendto(unicast_fd_, bytes.data(), bytes.size(), 0,
                         reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    if (n != static_cast<ssize_t>(bytes.size())) return {Errc::IO_ERROR, "sendto failed"};
    return Status::success();
}

bool UdpTransport::try_receive(Packet& out) {
    return recv_datagram(unicast_fd_, out) || recv_datagram(multicast_fd_, out);
}

bool UdpTransport::wait_receive(Packet& out, uint64_t timeout_ms) {
    if (try_receive(out)) return true;
    pollfd fds[2] = {{unicast_fd_, POLLIN, 0}, {multicast_fd_, POLLIN, 0}};
    int rc = ::poll(fds, 2, static_cast<int>(timeout_ms));
    if (rc <= 0) return false;
    return try_receive(out);
}

uint64_t UdpTransport::now_ms() const {
    using namespace std::chrono;
    return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace agribus::transport
