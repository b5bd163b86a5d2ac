#pragma once

#include <functional>
#include <map>
#include <memory>

#include "agribus/core/participant.hpp"
#include "agribus/tc/model.hpp"

namespace agribus::tc {

// The five fixed topics (names and QoS frozen).
inline constexpr char kTopicServiceDiscovery[] = "t_service_discovery";
inline constexpr char kTopicDdopHierarchy[] = "t_ddop_hierarchy";
inline constexpr char kTopicDdiLinking[] = "t_ddi_linking";
inline constexpr char kTopicPdValuesReliable[] = "t_pd_values_reliable";
inline constexpr char kTopicPdValuesBestEffort[] = "t_pd_values_best_effort";

enum class Channel { BestEffort, Reliable };

inline const char* channel_topic(Channel c) {
    return c == Channel::Reliable ? kTopicPdValuesReliable : kTopicPdValuesBestEffort;
}

/// Uppercase hexadecimal of the 64-bit NAME, no prefix (e.g. "FF0001").
std::string partition_name(uint64_t name);

struct TopicSpec {
    core::TopicDescriptor topic;
    core::QosProfile qos;
};

TopicSpec service_discovery_topic();
TopicSpec ddop_hierarchy_topic(const std::string& partition);
TopicSpec ddi_linking_topic(const std::string& partition);
TopicSpec pd_values_topic(Channel channel, const std::string& partition);

/// Publishes (or republishes) a services row; keep the returned writer alive.
Result<core::Writer> announce_service(const std::shared_ptr<core::Participant>& participant,
                                      const ServicesRow& row);

using IdleFn = std::function<void(uint64_t ms)>;  // sleeps live, advances the sim clock
using ServicePredicate = std::function<bool(const ServicesRow&)>;

/// Blocks until a row other than `self_name` satisfies the predicate; ties
/// break on the lowest NAME. Times out with NO_PEER.
Result<ServicesRow> await_peer_service(core::Participant& participant, core::Reader& services,
                                       uint64_t self_name, const ServicePredicate& pred,
                                       uint64_t timeout_ms, const IdleFn& idle);

using ProcessValueCallback =
    std::function<void(const ProcessValue&, uint64_t sender_name, Channel channel)>;

struct SessionConfig {
    Channel channel = Channel::BestEffort;  // default channel for sends
    bool publish_ddop = true;  // extra participants of a distributed client set this false
    uint64_t implement_name = 0;  // partition override for distributed clients; 0 = own NAME
    IdleFn idle;                  // defaults to wall-clock sleep
};

/// TC client session for one implement: joins its own partition, uploads the
/// DDOP, announces itself, and exchanges process values with the server.
class ImplementSession {
  public:
    static Result<std::unique_ptr<ImplementSession>> start(
        std::shared_ptr<core::Participant> participant, const Ddop& ddop, SessionConfig config);

    Result<uint64_t> send_process_value(const ProcessValue& value);
    Result<uint64_t> send_process_value(const ProcessValue& value, Channel channel);
    void on_process_value(ProcessValueCallback cb);

    Result<ServicesRow> await_server(uint32_t min_version, uint64_t timeout_ms);

    /// True once a foreign DDOP writer was seen in our partition; sending is
    /// then refused with PARTITION_CONFLICT.
    bool conflict_detected() const;

    uint64_t name() const { return name_; }
    const std::string& partition() const { return partition_; }
    core::Participant& participant() { return *participant_; }

  private:
    ImplementSession() = default;
    Result<uint64_t> send_on(const ProcessValue& value, Channel channel);

    std::shared_ptr<core::Participant> participant_;
    SessionConfig config_;
    uint64_t name_ = 0;
    std::string partition_;
    std::optional<core::Writer> services_writer_;
    std::optional<core::Writer> hierarchy_writer_;
    std::optional<core::Writer> linking_writer_;
    std::optional<core::Writer> pd_writer_be_;
    std::optional<core::Writer> pd_writer_rel_;
    std::optional<core::Reader> services_reader_;
    std::optional<core::Reader> hierarchy_reader_;
    std::optional<core::Reader> pd_reader_be_;
    std::optional<core::Reader> pd_reader_rel_;

    mutable std::mutex mutex_;
    ProcessValueCallback callback_;
    bool conflict_ = false;
};

/// TC server session: discovers implements on the services topic, wires up a
/// reader/writer set per partition, and reconstructs each implement's DDOP.
class ServerSession {
  public:
    static Result<std::unique_ptr<ServerSession>> start(
        std::shared_ptr<core::Participant> participant, SessionConfig config);

    std::vector<uint64_t> implement_names() const;
    Result<ServicesRow> await_client(uint32_t min_version, uint64_t timeout_ms);

    /// Latest reconstruction attempt; INCOMPLETE while rows are still missing.
    Result<Ddop> ddop_for(uint64_t name);
    Result<Ddop> await_ddop(uint64_t name, uint64_t timeout_ms);

    Result<uint64_t> send_process_value(uint64_t implement_name, const ProcessValue& value);
    Result<uint64_t> send_process_value(uint64_t implement_name, const ProcessValue& value,
                                        Channel channel);
    void on_process_value(ProcessValueCallback cb);

    uint64_t unknown_element_warnings() const;
    core::Participant& participant() { return *participant_; }

  private:
    struct ImplementState {
        uint64_t name = 0;
        std::string partition;
        std::optional<core::Reader> hierarchy_reader;
        std::optional<core::Reader> linking_reader;
        std::optional<core::Reader> pd_reader_be;
        std::optional<core::Reader> pd_reader_rel;
        std::optional<core::Writer> pd_writer_be;
        std::optional<core::Writer> pd_writer_rel;
        std::optional<Ddop> ddop;
    };

    ServerSession() = default;
    void on_services_row(const ServicesRow& row);
    void wire_implement(uint64_t name);
    void handle_pd(ImplementState& impl, const wire::Record& rec,
                   const core::SampleInfo& info, Channel channel);

    std::shared_ptr<core::Participant> participant_;
    SessionConfig config_;
    std::optional<core::Writer> services_writer_;
    std::optional<core::Reader> services_reader_;

    mutable std::recursive_mutex mutex_;
    std::map<uint64_t, std::unique_ptr<ImplementState>> implements_;
    ProcessValueCallback callback_;
    uint64_t unknown_element_warnings_ = 0;
};

}  // namespace agribus::tc
