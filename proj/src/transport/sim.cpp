#include "agribus/transport/sim.hpp"

namespace agribus::transport {

std::string Locator::to_string() const {
    const char* k = kind == LocatorKind::UdpUnicast ? "udp"
                    : kind == LocatorKind::UdpMulticast ? "udpm"
                                                        : "sim";
    return std::string(k) + "://" + address + ":" + std::to_string(port);
}

void encode_locator(ByteWriter& w, const Locator& l) {
    w.u8(static_cast<uint8_t>(l.kind));
    w.text(l.address);
    w.u16(l.port);
}

Result<Locator> decode_locator(ByteReader& r) {
    Locator l;
    auto k = r.u8();
    if (!k) return k.error();
    if (k.value() > 2) return Error{Errc::BAD_ENUM_ORDINAL, "locator kind"};
    l.kind = static_cast<LocatorKind>(k.value());
    auto addr = r.text();
    if (!addr) return addr.error();
    l.address = std::move(addr.value());
    auto p = r.u16();
    if (!p) return p.error();
    l.port = p.value();
    return l;
}

SimNetwork::SimNetwork(SimNetworkConfig config) : config_(config), rng_(config.seed) {}

std::shared_ptr<SimTransport> SimNetwork::create_node(uint32_t domain_id) {
    auto node = std::shared_ptr<SimTransport>(new SimTransport());
    node->net_ = this;
    node->node_id_ = static_cast<uint32_t>(nodes_.size());
    node->domain_id_ = domain_id;
    nodes_.push_back(node);
    return node;
}

void SimNetwork::submit(uint32_t from_node, const Locator& dest, std::span<const uint8_t> bytes) {
    if (dest.address == "mcast") {
        // Deliver to every node on the same domain, sender included,
        // matching UDP multicast loopback behaviour.
        for (auto& weak : nodes_) {
            auto node = weak.lock();
            if (!node) continue;
            if (7400 + node->domain_id_ != dest.port) continue;
            schedule(from_node, node->node_id_, true, bytes);
        }
        return;
    }
    // unicast: address "node:<id>"
    if (dest.address.rfind("node:", 0) != 0) return;
    uint32_t to = static_cast<uint32_t>(std::stoul(dest.address.substr(5)));
    if (to >= nodes_.size()) return;
    schedule(from_node, to, false, bytes);
}

void SimNetwork::schedule(uint32_t from, uint32_t to, bool multicast,
                          std::span<const uint8_t> bytes) {
    bool dropped = false;
    if (config_.loss_probability > 0.0) {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        dropped = coin(rng_) < config_.loss_probability;
    }
    uint64_t delay = config_.delay_min_ms;
    if (config_.reorder && config_.delay_max_ms > config_.delay_min_ms) {
        std::uniform_int_distribution<uint64_t> jitter(config_.delay_min_ms, config_.delay_max_ms);
        delay = jitter(rng_);
    }
    if (dropped) {
        TraceEntry e{now_, from, to, multicast, true, {}};
        trace_.push_back(std::move(e));
        return;
    }
    PendingDelivery d{to, from, multicast, Bytes(bytes.begin(), bytes.end())};
    events_.emplace(std::make_pair(now_ + delay, next_event_seq_++), std::move(d));
}

void SimNetwork::advance(uint64_t ms) {
    for (uint64_t step = 0; step < ms; ++step) {
        ++now_;
        while (!events_.empty() && events_.begin()->first.first <= now_) {
            auto it = events_.begin();
            PendingDelivery d = std::move(it->second);
            events_.erase(it);
            TraceEntry e{now_, d.from_node, d.to_node, d.multicast, false, {}};
            if (capture_payloads_) e.bytes = d.bytes;
            trace_.push_back(std::move(e));
            if (d.to_node < nodes_.size()) {
                if (auto node = nodes_[d.to_node].lock())
                    node->inbound_.push_back(std::move(d.bytes));
            }
        }
        for (auto& cb : step_callbacks_) cb();
    }
}

void SimNetwork::inject(uint32_t to_node, Bytes bytes) {
    if (to_node < nodes_.size()) {
        if (auto node = nodes_[to_node].lock()) node->inbound_.push_back(std::move(bytes));
    }
}

Locator SimTransport::unicast_locator() const {
    return {LocatorKind::Sim, "node:" + std::to_string(node_id_),
            static_cast<uint16_t>(7500 + node_id_)};
}

Locator SimTransport::discovery_locator() const {
    return {LocatorKind::Sim, "mcast", static_cast<uint16_t>(7400 + domain_id_)};
}

Status SimTransport::send(const Locator& dest, std::span<const uint8_t> bytes) {
    if (bytes.size() > kMaxDatagram) return {Errc::OVERSIZE_DATAGRAM, std::to_string(bytes.size())};
    net_->submit(node_id_, dest, bytes);
    return Status::success();
}

bool SimTransport::try_receive(Packet& out) {
    if (inbound_.empty()) return false;
    out.bytes = std::move(inbound_.front());
    inbound_.pop_front();
    return true;
}

bool SimTransport::wait_receive(Packet& out, uint64_t) { return try_receive(out); }

uint64_t SimTransport::now_ms() const { return net_->now_ms(); }

}  // namespace agribus::transport
