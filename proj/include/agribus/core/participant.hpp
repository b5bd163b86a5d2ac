#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <thread>

#include "agribus/core/history.hpp"
#include "agribus/discovery/discovery.hpp"
#include "agribus/security/session.hpp"
#include "agribus/transport/transport.hpp"

namespace agribus::core {

struct TopicDescriptor {
    std::string name;
    std::shared_ptr<const wire::TypeDescriptor> type;
    QosProfile default_qos;
};

enum class EventKind {
    ParticipantFound,
    ParticipantLost,
    ParticipantConflict,
    EndpointMatched,
    EndpointUnmatched,
    IncompatibleQos,
    IncompatibleType,
    HandshakeFailed,
    PermissionDenied,
    SecurityViolation,
    DeadlineMissed,
    OwnershipViolation,
};

const char* event_kind_name(EventKind k);

struct Event {
    EventKind kind;
    std::string detail;
    wire::Guid guid{};
};

struct SecurityStats {
    uint64_t mac_invalid = 0;
    uint64_t decode_rejected = 0;
    uint64_t replay_rejected = 0;
    uint64_t kind_mismatch = 0;
    uint64_t unauthenticated_ignored = 0;

    uint64_t total_rejected() const {
        return mac_invalid + decode_rejected + replay_rejected + kind_mismatch +
               unauthenticated_ignored;
    }
};

struct ParticipantConfig {
    uint32_t domain_id = 0;
    uint64_t name = 0;  // 64-bit device NAME, nonzero
    std::optional<security::SecurityConfig> security;
    uint64_t announce_period_ms = discovery::kAnnouncePeriodMs;
    uint64_t lease_duration_ms = discovery::kDefaultLeaseMs;
    uint64_t heartbeat_period_ms = 100;
    uint64_t acknack_delay_ms = 10;
    uint32_t guid_salt = 0;  // 0 = random
};

class Participant;
struct WriterImpl;
struct ReaderImpl;

class Writer {
  public:
    Result<uint64_t> write(const wire::Record& value);
    Status dispose(const wire::Record& value);
    const wire::Guid& guid() const;
    const TopicDescriptor& topic() const;
    size_t matched_reader_count() const;

  private:
    friend class Participant;
    std::shared_ptr<Participant> participant_;
    std::shared_ptr<WriterImpl> impl_;
};

using DataCallback = std::function<void(const wire::Record&, const SampleInfo&)>;

class Reader {
  public:
    struct RowSnapshot {
        wire::KeyHash key_hash{};
        wire::Record key;
        std::vector<Sample> samples;  // newest first
        wire::Guid last_writer;
        uint64_t last_sn = 0;
    };

    /// Consistent snapshot of the whole topic matrix.
    std::vector<RowSnapshot> read_state() const;
    /// Drains unread samples in arrival order.
    std::vector<Sample> take_new();
    void set_on_data(DataCallback cb);
    const wire::Guid& guid() const;
    const TopicDescriptor& topic() const;
    size_t matched_writer_count() const;

  private:
    friend class Participant;
    std::shared_ptr<Participant> participant_;
    std::shared_ptr<ReaderImpl> impl_;
};

/// A domain participant: owns the transport, runs discovery, matching, the
/// reliable-delivery protocol, and (optionally) document-based security.
class Participant : public std::enable_shared_from_this<Participant> {
  public:
    static Result<std::shared_ptr<Participant>> create(
        const ParticipantConfig& config, std::shared_ptr<transport::Transport> transport);
    ~Participant();

    Participant(const Participant&) = delete;
    Participant& operator=(const Participant&) = delete;

    Result<Writer> create_writer(const TopicDescriptor& topic, const QosProfile& qos);
    Result<Reader> create_reader(const TopicDescriptor& topic, const QosProfile& qos,
                                 DataCallback callback = nullptr);

    /// Processes inbound packets and timers once; the simulator's step
    /// callback and the live receive thread both funnel through here.
    void tick();

    /// Spawns the background receive/timer thread (live transports).
    void start();
    void stop();

    std::vector<Event> poll_events();

    const wire::GuidPrefix& guid_prefix() const { return prefix_; }
    uint64_t now_ms() const { return transport_->now_ms(); }
    uint64_t name() const { return config_.name; }
    uint32_t domain_id() const { return config_.domain_id; }
    bool security_enabled() const { return config_.security.has_value(); }

    std::optional<uint64_t> peer_name(const wire::GuidPrefix& prefix) const;
    size_t peer_count() const;
    size_t matched_endpoint_count() const;
    SecurityStats security_stats() const;

    /// Live participant/endpoint/match/topic-matrix graph as JSON text.
    std::string dump_json() const;

  private:
    friend class Writer;
    friend class Reader;
    struct Peer;
    struct EnvCtx;

    explicit Participant(const ParticipantConfig& config);

    // inbound processing
    void process_datagram(std::span<const uint8_t> bytes);
    bool plain_allowed(security::ProtectionKind kind) const;
    bool plaintext_forbidden(const wire::GuidPrefix& sender);
    void process_message(const wire::Message& m, const EnvCtx& ctx);
    void handle_participant_announce(const wire::Submessage& s, const EnvCtx& ctx);
    void handle_handshake(const wire::GuidPrefix& sender, const wire::Submessage& s);
    void handle_envelope(const wire::GuidPrefix& sender, const wire::Submessage& s);
    void handle_data(const wire::GuidPrefix& sender, const wire::Submessage& s, bool builtin,
                     const EnvCtx& ctx);
    void handle_heartbeat(const wire::GuidPrefix& sender, const wire::Submessage& s,
                          const EnvCtx& ctx);
    void handle_acknack(const wire::GuidPrefix& sender, const wire::Submessage& s,
                        const EnvCtx& ctx);
    void handle_endpoint_announcement(Peer& peer, const Bytes& payload);

    // timers
    void run_timers(uint64_t now);
    void announce_now(uint64_t now);
    void check_leases(uint64_t now);
    void heartbeat_tick(uint64_t now);
    void acknack_tick(uint64_t now);
    void deadline_tick(uint64_t now);
    void handshake_tick(uint64_t now);

    // discovery / security
    void admit_peer(Peer& peer);
    void drop_peer(const wire::GuidPrefix& prefix, const char* reason);
    bool is_initiator_for(const wire::GuidPrefix& peer) const;
    void start_handshake(Peer& peer, uint64_t now);
    void fail_handshake(Peer& peer, const char* reason, uint64_t now);
    Status verify_peer_documents(const Bytes& cert_bytes, const Bytes& permissions_bytes,
                                 const std::array<uint8_t, 16>& gov_digest,
                                 security::IdentityCertificate& cert_out,
                                 security::PermissionsDocument& perms_out);

    // matching
    void evaluate_remote_endpoint(Peer& peer, const discovery::EndpointAnnouncement& ann);
    void unmatch_remote_endpoint(Peer& peer, const wire::Guid& endpoint);
    void match_writer_to_remote_reader(WriterImpl& w, Peer& peer,
                                       const discovery::EndpointAnnouncement& ann);
    void match_reader_to_remote_writer(ReaderImpl& r, Peer& peer,
                                       const discovery::EndpointAnnouncement& ann);
    void match_local_pair(WriterImpl& w, ReaderImpl& r);
    bool security_allows_match(Peer& peer, const std::string& topic,
                               const std::vector<std::string>& local_parts,
                               const std::vector<std::string>& remote_parts,
                               bool local_is_writer);

    // sending
    void send_to_locator(const transport::Locator& loc, const wire::Message& m);
    void send_to_peer(Peer& peer, security::Scope scope, security::ProtectionKind kind,
                      const std::string& topic, uint32_t writer_entity,
                      std::vector<wire::Submessage> subs);
    const security::TopicRule& topic_rule(const std::string& topic) const;

    // data path
    void writer_send_sample(WriterImpl& w, uint64_t sn);
    void writer_push_history(WriterImpl& w, struct ReaderProxy& proxy);
    void writer_send_to_proxy(WriterImpl& w, struct ReaderProxy& proxy, uint64_t sn);
    void writer_send_heartbeat(WriterImpl& w, struct ReaderProxy& proxy);
    void trim_writer(WriterImpl& w);
    void reader_accept(ReaderImpl& r, struct WriterProxyState& wp, const wire::DataSub& d);
    void reader_drain(ReaderImpl& r, struct WriterProxyState& wp);
    void deliver(ReaderImpl& r, struct WriterProxyState& wp, const wire::DataSub& d);
    void deliver_local(ReaderImpl& r, WriterImpl& w, uint64_t sn);

    Result<uint64_t> writer_write(WriterImpl& w, const wire::Record& value, bool dispose);

    void push_event(EventKind kind, std::string detail, wire::Guid guid = {});
    discovery::ParticipantAnnouncement own_announcement() const;
    void announce_endpoint(const discovery::EndpointAnnouncement& ann);
    Peer* find_peer(const wire::GuidPrefix& prefix);

    ParticipantConfig config_;
    std::shared_ptr<transport::Transport> transport_;
    wire::GuidPrefix prefix_{};
    uint32_t next_entity_id_ = wire::kFirstUserEntityId;

    mutable std::recursive_mutex mutex_;
    std::vector<std::shared_ptr<WriterImpl>> writers_;
    std::vector<std::shared_ptr<ReaderImpl>> readers_;
    std::shared_ptr<WriterImpl> builtin_writer_;  // endpoint-announcement channel
    std::shared_ptr<ReaderImpl> builtin_reader_;
    std::map<wire::GuidPrefix, std::shared_ptr<Peer>> peers_;
    std::map<wire::Guid, std::vector<ReaderImpl*>> writer_routes_;

    std::vector<Event> events_;
    SecurityStats stats_;

    uint64_t announce_count_ = 0;
    uint64_t next_announce_ms_ = 0;
    uint64_t last_heartbeat_ms_ = 0;
    uint64_t last_lease_check_ms_ = 0;

    std::thread thread_;
    std::atomic<bool> running_{false};
};

}  // namespace agribus::core
