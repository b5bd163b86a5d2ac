#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <vector>

#include "agribus/transport/transport.hpp"

namespace agribus::transport {

struct SimNetworkConfig {
    double loss_probability = 0.0;  // per delivery, [0, 1]
    uint64_t delay_min_ms = 0;
    uint64_t delay_max_ms = 0;  // > min only meaningful with reorder
    bool reorder = false;
    uint64_t seed = 0;
};

/// One delivered (or dropped) datagram in the simulator's trace.
struct TraceEntry {
    uint64_t time_ms = 0;
    uint32_t from_node = 0;
    uint32_t to_node = 0;
    bool multicast = false;
    bool dropped = false;
    Bytes bytes;
};

class SimTransport;

/// Deterministic in-process network on a virtual clock. Same seed and send
/// schedule produce an identical delivery trace.
class SimNetwork {
  public:
    explicit SimNetwork(SimNetworkConfig config = {});

    std::shared_ptr<SimTransport> create_node(uint32_t domain_id);

    /// Advances the virtual clock one millisecond at a time, delivering due
    /// datagrams and invoking registered per-step callbacks (participant ticks).
    void advance(uint64_t ms);
    uint64_t now_ms() const { return now_; }

    void add_step_callback(std::function<void()> cb) { step_callbacks_.push_back(std::move(cb)); }

    const std::vector<TraceEntry>& trace() const { return trace_; }
    void clear_trace() { trace_.clear(); }
    /// When false, delivered payload bytes are not retained in the trace.
    void set_capture_payloads(bool on) { capture_payloads_ = on; }

    /// Injects a raw datagram into one node's inbound queue (tamper testing).
    void inject(uint32_t to_node, Bytes bytes);

  private:
    friend class SimTransport;
    void submit(uint32_t from_node, const Locator& dest, std::span<const uint8_t> bytes);
    void schedule(uint32_t from, uint32_t to, bool multicast, std::span<const uint8_t> bytes);

    struct PendingDelivery {
        uint32_t to_node;
        uint32_t from_node;
        bool multicast;
        Bytes bytes;
    };

    SimNetworkConfig config_;
    std::mt19937_64 rng_;
    uint64_t now_ = 0;
    uint64_t next_event_seq_ = 0;
    std::multimap<std::pair<uint64_t, uint64_t>, PendingDelivery> events_;  // (time, seq)
    std::vector<std::weak_ptr<SimTransport>> nodes_;
    std::vector<std::function<void()>> step_callbacks_;
    std::vector<TraceEntry> trace_;
    bool capture_payloads_ = true;
};

class SimTransport : public Transport {
  public:
    Locator unicast_locator() const override;
    Locator discovery_locator() const override;
    Status send(const Locator& dest, std::span<const uint8_t> bytes) override;
    bool try_receive(Packet& out) override;
    bool wait_receive(Packet& out, uint64_t timeout_ms) override;
    uint64_t now_ms() const override;

    uint32_t node_id() const { return node_id_; }
    uint32_t domain_id() const { return domain_id_; }

  private:
    friend class SimNetwork;
    SimNetwork* net_ = nullptr;
    uint32_t node_id_ = 0;
    uint32_t domain_id_ = 0;
    std::deque<Bytes> inbound_;
};

}  // namespace agribus::transport
