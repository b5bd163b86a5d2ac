#include "agribus/core/participant.hpp"

#include <algorithm>
#include <ctime>
#include <set>
#include <tuple>

#include <json.hpp>

#include "agribus/security/crypto.hpp"

namespace agribus::core {

namespace {

constexpr size_t kMaxEvents = 4096;
constexpr size_t kMaxPendingSamples = 65536;
constexpr size_t kMaxNackList = 4096;
constexpr char kBuiltinTopic[] = "__endpoints";

// key context for envelope sequence counters and replay windows
using EnvKey = std::tuple<uint8_t, std::string, uint32_t>;

EnvKey env_key(security::Scope scope, const std::string& topic, uint32_t entity) {
    return {static_cast<uint8_t>(scope), topic, entity};
}

wire::KeyHash guid_hash(const wire::Guid& g) {
    ByteWriter w;
    wire::write_guid(w, g);
    auto d = security::sha256(w.bytes());
    wire::KeyHash h;
    std::copy_n(d.begin(), h.size(), h.begin());
    return h;
}

// concrete partitions both sides could communicate on, for permission checks
std::vector<std::string> candidate_partitions(const std::vector<std::string>& a,
                                              const std::vector<std::string>& b) {
    auto has_wild = [](const std::vector<std::string>& v) {
        return std::find(v.begin(), v.end(), "*") != v.end();
    };
    bool wa = has_wild(a), wb = has_wild(b);
    std::vector<std::string> out;
    auto add = [&out](const std::string& s) {
        if (s != "*" && std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    };
    for (const auto& s : a)
        if (wb || std::find(b.begin(), b.end(), s) != b.end()) add(s);
    if (wa)
        for (const auto& s : b) add(s);
    if (out.empty()) out.push_back("");
    return out;
}

}  // namespace

const char* event_kind_name(EventKind k) {
    switch (k) {
    case EventKind::ParticipantFound: return "PARTICIPANT_FOUND";
    case EventKind::ParticipantLost: return "PARTICIPANT_LOST";
    case EventKind::ParticipantConflict: return "PARTICIPANT_CONFLICT";
    case EventKind::EndpointMatched: return "ENDPOINT_MATCHED";
    case EventKind::EndpointUnmatched: return "ENDPOINT_UNMATCHED";
    case EventKind::IncompatibleQos: return "INCOMPATIBLE_QOS";
    case EventKind::IncompatibleType: return "INCOMPATIBLE_TYPE";
    case EventKind::HandshakeFailed: return "HANDSHAKE_FAILED";
    case EventKind::PermissionDenied: return "PERMISSION_DENIED";
    case EventKind::SecurityViolation: return "SECURITY_VIOLATION";
    case EventKind::DeadlineMissed: return "DEADLINE_MISSED";
    case EventKind::OwnershipViolation: return "OWNERSHIP_VIOLATION";
    }
    return "UNKNOWN";
}

// --- internal structures ---

struct ReaderProxy {
    wire::Guid reader;
    wire::GuidPrefix peer{};
    bool local = false;
    ReaderImpl* local_reader = nullptr;
    bool reliable = false;
    uint64_t start_sn = 1;  // first sequence number this proxy receives
    uint64_t acked = 0;     // everything <= acked is acknowledged
    uint32_t hb_count = 0;
};

struct StoredSample {
    Bytes payload;
    wire::KeyHash key_hash{};
    bool dispose = false;
};

struct WriterImpl {
    wire::Guid guid;
    TopicDescriptor topic;
    QosProfile qos;
    bool builtin = false;
    uint64_t last_sn = 0;
    std::map<uint64_t, StoredSample> store;  // contiguous range ending at last_sn
    std::vector<ReaderProxy> proxies;
};

struct WriterProxyState {
    wire::Guid writer;
    wire::GuidPrefix peer{};
    uint32_t strength = 0;
    bool reliable = false;
    bool initialized = false;  // reliable readers wait for the first heartbeat
    uint64_t max_contig = 0;   // everything <= max_contig delivered or skipped
    uint64_t hb_last = 0;
    std::map<uint64_t, wire::DataSub> pending;  // out-of-order buffer
    uint64_t acknack_due = 0;                   // 0 = none scheduled
};

struct ReaderImpl {
    wire::Guid guid;
    TopicDescriptor topic;
    QosProfile qos;
    bool builtin = false;
    std::unique_ptr<InstanceCache> cache;
    DataCallback callback;
    std::map<wire::Guid, WriterProxyState> proxies;
};

struct Participant::EnvCtx {
    bool present = false;
    security::Scope scope = security::Scope::Rtps;
    security::ProtectionKind kind = security::ProtectionKind::None;
    std::string topic;
    uint32_t entity = 0;
};

struct Participant::Peer {
    enum class Hs { None, WaitReply, WaitFinal, Done, Failed };

    discovery::ParticipantAnnouncement info;
    uint64_t last_seen_ms = 0;
    bool admitted = false;
    bool conflict_reported = false;

    Hs hs = Hs::None;
    uint64_t hs_deadline_ms = 0;
    int hs_attempts = 0;
    uint64_t quarantine_until_ms = 0;

    security::HandshakeRequest sent_req;  // initiator
    security::HandshakeRequest peer_req;  // responder
    security::HandshakeReply sent_reply;  // responder (signature cleared for transcript)
    Bytes eph_private;

    std::optional<security::SessionKeys> session;
    security::IdentityCertificate cert;
    std::optional<security::PermissionsDocument> perms;

    std::map<EnvKey, uint64_t> send_seq;
    std::map<EnvKey, security::ReplayWindow> replay;

    std::map<wire::Guid, discovery::EndpointAnnouncement> endpoints;

    transport::Locator locator() const {
        return info.unicast_locators.empty() ? transport::Locator{}
                                             : info.unicast_locators.front();
    }
    bool authenticated() const { return session.has_value(); }
};

// --- Writer / Reader handles ---

Result<uint64_t> Writer::write(const wire::Record& value) {
    std::lock_guard lock(participant_->mutex_);
    return participant_->writer_write(*impl_, value, false);
}

Status Writer::dispose(const wire::Record& value) {
    std::lock_guard lock(participant_->mutex_);
    auto r = participant_->writer_write(*impl_, value, true);
    if (!r) return r.error();
    return Status::success();
}

const wire::Guid& Writer::guid() const { return impl_->guid; }
const TopicDescriptor& Writer::topic() const { return impl_->topic; }

size_t Writer::matched_reader_count() const {
    std::lock_guard lock(participant_->mutex_);
    return impl_->proxies.size();
}

std::vector<Reader::RowSnapshot> Reader::read_state() const {
    std::lock_guard lock(participant_->mutex_);
    std::vector<RowSnapshot> out;
    for (const InstanceRow* row : impl_->cache->rows()) {
        RowSnapshot s;
        s.key_hash = row->key_hash;
        s.key = row->key_value;
        s.samples.assign(row->samples.rbegin(), row->samples.rend());
        s.last_writer = row->last_writer;
        s.last_sn = row->last_sn;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> Reader::take_new() {
    std::lock_guard lock(participant_->mutex_);
    return impl_->cache->take_new();
}

void Reader::set_on_data(DataCallback cb) {
    std::lock_guard lock(participant_->mutex_);
    impl_->callback = std::move(cb);
}

const wire::Guid& Reader::guid() const { return impl_->guid; }
const TopicDescriptor& Reader::topic() const { return impl_->topic; }

size_t Reader::matched_writer_count() const {
    std::lock_guard lock(participant_->mutex_);
    return impl_->proxies.size();
}

// --- Participant lifecycle ---

Participant::Participant(const ParticipantConfig& config) : config_(config) {}

Result<std::shared_ptr<Participant>> Participant::create(
    const ParticipantConfig& config, std::shared_ptr<transport::Transport> transport) {
    if (config.name == 0) return Error{Errc::CONFIG_INVALID, "participant NAME must be nonzero"};
    if (!transport) return Error{Errc::CONFIG_INVALID, "transport required"};
    if (config.security) {
        const auto& sec = *config.security;
        if (auto st = sec.governance.validate(); !st) return st.error();
        if (sec.governance.domain_id != config.domain_id)
            return Error{Errc::SECURITY_CONFIG_INVALID, "governance domain mismatch"};
        if (auto st = sec.validate(config.name, static_cast<int64_t>(std::time(nullptr))); !st)
            return st.error();
    }
    auto p = std::shared_ptr<Participant>(new Participant(config));
    p->transport_ = std::move(transport);
    uint32_t salt = config.guid_salt;
    if (salt == 0) {
        auto rnd = security::random_bytes(4);
        std::memcpy(&salt, rnd.data(), 4);
    }
    p->prefix_ = wire::make_participant_guid(config.name, salt).prefix;

    auto bw = std::make_shared<WriterImpl>();
    bw->guid = {p->prefix_, wire::kEntityEndpointAnnounceWriter};
    bw->topic.name = kBuiltinTopic;
    bw->qos.reliability = Reliability::Reliable;
    bw->qos.durability = Durability::TransientLocal;
    bw->qos.history = HistoryKind::KeepAll;
    bw->builtin = true;
    p->builtin_writer_ = std::move(bw);

    auto br = std::make_shared<ReaderImpl>();
    br->guid = {p->prefix_, wire::kEntityEndpointAnnounceReader};
    br->topic.name = kBuiltinTopic;
    br->qos = p->builtin_writer_->qos;
    br->builtin = true;
    p->builtin_reader_ = std::move(br);

    p->next_announce_ms_ = p->transport_->now_ms();
    return p;
}

Participant::~Participant() { stop(); }

void Participant::start() {
    if (running_.exchange(true)) return;
    thread_ = std::thread([this] {
        while (running_) {
            transport::Packet pkt;
            if (transport_->wait_receive(pkt, 5)) {
                std::lock_guard lock(mutex_);
                process_datagram(pkt.bytes);
                while (transport_->try_receive(pkt)) process_datagram(pkt.bytes);
            }
            std::lock_guard lock(mutex_);
            run_timers(transport_->now_ms());
        }
    });
}

void Participant::stop() {
    if (!running_.exchange(false)) return;
    if (thread_.joinable()) thread_.join();
}

void Participant::tick() {
    std::lock_guard lock(mutex_);
    transport::Packet pkt;
    while (transport_->try_receive(pkt)) process_datagram(pkt.bytes);
    run_timers(transport_->now_ms());
}

std::vector<Event> Participant::poll_events() {
    std::lock_guard lock(mutex_);
    return std::exchange(events_, {});
}

void Participant::push_event(EventKind kind, std::string detail, wire::Guid guid) {
    if (events_.size() >= kMaxEvents) events_.erase(events_.begin());
    events_.push_back({kind, std::move(detail), guid});
}

std::optional<uint64_t> Participant::peer_name(const wire::GuidPrefix& prefix) const {
    std::lock_guard lock(mutex_);
    auto it = peers_.find(prefix);
    if (it == peers_.end()) return std::nullopt;
    return it->second->info.name;
}

size_t Participant::peer_count() const {
    std::lock_guard lock(mutex_);
    size_t n = 0;
    for (const auto& [pfx, peer] : peers_)
        if (peer->admitted) ++n;
    return n;
}

size_t Participant::matched_endpoint_count() const {
    std::lock_guard lock(mutex_);
    size_t n = 0;
    for (const auto& w : writers_) n += w->proxies.size();
    for (const auto& r : readers_) n += r->proxies.size();
    return n;
}

SecurityStats Participant::security_stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

Participant::Peer* Participant::find_peer(const wire::GuidPrefix& prefix) {
    auto it = peers_.find(prefix);
    return it == peers_.end() ? nullptr : it->second.get();
}

// --- endpoint creation ---

Result<Writer> Participant::create_writer(const TopicDescriptor& topic, const QosProfile& qos) {
    std::lock_guard lock(mutex_);
    if (!topic.type || topic.name.empty())
        return Error{Errc::CONFIG_INVALID, "topic needs a name and a type"};
    if (qos.history == HistoryKind::KeepLast && qos.history_depth < 1)
        return Error{Errc::CONFIG_INVALID, "history depth must be >= 1"};
    if (config_.security) {
        const auto& rule = topic_rule(topic.name);
        if (rule.enable_write_access_control) {
            bool ok = false;
            for (const auto& part : candidate_partitions(qos.partitions, qos.partitions))
                if (security::check_permission(config_.security->permissions,
                                               security::GrantAction::Publish, topic.name, part))
                    ok = true;
            if (!ok)
                return Error{Errc::PERMISSION_DENIED, "not permitted to publish " + topic.name};
        }
    }
    auto w = std::make_shared<WriterImpl>();
    w->guid = {prefix_, next_entity_id_++};
    w->topic = topic;
    w->qos = qos;
    writers_.push_back(w);

    discovery::EndpointAnnouncement ann;
    ann.endpoint = w->guid;
    ann.is_reader = false;
    ann.topic = topic.name;
    ann.type_name = topic.type->name;
    ann.type_digest = topic.type->digest();
    ann.qos = qos;
    ann.unicast = transport_->unicast_locator();
    announce_endpoint(ann);

    for (auto& r : readers_)
        if (r->topic.name == topic.name) match_local_pair(*w, *r);
    for (auto& [pfx, peer] : peers_) {
        if (!peer->admitted) continue;
        for (const auto& [guid, remote] : peer->endpoints)
            if (remote.is_reader && remote.topic == topic.name)
                match_writer_to_remote_reader(*w, *peer, remote);
    }

    Writer handle;
    handle.participant_ = shared_from_this();
    handle.impl_ = w;
    return handle;
}

Result<Reader> Participant::create_reader(const TopicDescriptor& topic, const QosProfile& qos,
                                          DataCallback callback) {
    std::lock_guard lock(mutex_);
    if (!topic.type || topic.name.empty())
        return Error{Errc::CONFIG_INVALID, "topic needs a name and a type"};
    if (qos.history == HistoryKind::KeepLast && qos.history_depth < 1)
        return Error{Errc::CONFIG_INVALID, "history depth must be >= 1"};
    if (config_.security) {
        const auto& rule = topic_rule(topic.name);
        if (rule.enable_read_access_control) {
            bool ok = false;
            for (const auto& part : candidate_partitions(qos.partitions, qos.partitions))
                if (security::check_permission(config_.security->permissions,
                                               security::GrantAction::Subscribe, topic.name,
                                               part))
                    ok = true;
            if (!ok)
                return Error{Errc::PERMISSION_DENIED, "not permitted to subscribe " + topic.name};
        }
    }
    auto r = std::make_shared<ReaderImpl>();
    r->guid = {prefix_, next_entity_id_++};
    r->topic = topic;
    r->qos = qos;
    r->cache = std::make_unique<InstanceCache>(topic.type, qos);
    r->callback = std::move(callback);
    readers_.push_back(r);

    discovery::EndpointAnnouncement ann;
    ann.endpoint = r->guid;
    ann.is_reader = true;
    ann.topic = topic.name;
    ann.type_name = topic.type->name;
    ann.type_digest = topic.type->digest();
    ann.qos = qos;
    ann.unicast = transport_->unicast_locator();
    announce_endpoint(ann);

    for (auto& w : writers_)
        if (w->topic.name == topic.name) match_local_pair(*w, *r);
    for (auto& [pfx, peer] : peers_) {
        if (!peer->admitted) continue;
        for (const auto& [guid, remote] : peer->endpoints)
            if (!remote.is_reader && remote.topic == topic.name)
                match_reader_to_remote_writer(*r, *peer, remote);
    }

    Reader handle;
    handle.participant_ = shared_from_this();
    handle.impl_ = r;
    return handle;
}

void Participant::announce_endpoint(const discovery::EndpointAnnouncement& ann) {
    auto& w = *builtin_writer_;
    uint64_t sn = ++w.last_sn;
    w.store[sn] = {ann.encode(), guid_hash(ann.endpoint), false};
    writer_send_sample(w, sn);
}

// --- timers ---

void Participant::run_timers(uint64_t now) {
    if (now >= next_announce_ms_) announce_now(now);
    if (now - last_heartbeat_ms_ >= config_.heartbeat_period_ms) {
        heartbeat_tick(now);
        last_heartbeat_ms_ = now;
    }
    acknack_tick(now);
    deadline_tick(now);
    handshake_tick(now);
    if (now - last_lease_check_ms_ >= 500) {
        check_leases(now);
        last_lease_check_ms_ = now;
    }
}

discovery::ParticipantAnnouncement Participant::own_announcement() const {
    discovery::ParticipantAnnouncement a;
    a.prefix = prefix_;
    a.name = config_.name;
    a.domain_id = config_.domain_id;
    a.unicast_locators.push_back(transport_->unicast_locator());
    a.lease_duration_ms = config_.lease_duration_ms;
    a.security_enabled = config_.security.has_value();
    if (config_.security) a.identity_digest = config_.security->identity.digest();
    return a;
}

void Participant::announce_now(uint64_t now) {
    auto sub = own_announcement().to_submessage();
    send_to_locator(transport_->discovery_locator(), {prefix_, {sub}});
    // protected lease refreshes to authenticated peers
    if (config_.security) {
        for (auto& [pfx, peer] : peers_)
            if (peer->authenticated())
                send_to_peer(*peer, security::Scope::Liveliness,
                             config_.security->governance.liveliness_protection_kind, "", 0,
                             {sub});
    }
    ++announce_count_;
    uint64_t period = announce_count_ < 3 ? discovery::kFastAnnouncePeriodMs
                                          : config_.announce_period_ms;
    next_announce_ms_ = now + period;
}

void Participant::check_leases(uint64_t now) {
    std::vector<wire::GuidPrefix> expired;
    for (auto& [pfx, peer] : peers_) {
        if (peer->hs == Peer::Hs::Failed) continue;  // kept for quarantine bookkeeping
        uint64_t lease = peer->info.lease_duration_ms ? peer->info.lease_duration_ms
                                                      : discovery::kDefaultLeaseMs;
        if (now > peer->last_seen_ms && now - peer->last_seen_ms > lease)
            expired.push_back(pfx);
    }
    for (const auto& pfx : expired) drop_peer(pfx, "lease expired");
}

void Participant::heartbeat_tick(uint64_t) {
    auto run = [this](WriterImpl& w) {
        for (auto& proxy : w.proxies) {
            if (proxy.local || !proxy.reliable) continue;
            if (proxy.acked < w.last_sn) writer_send_heartbeat(w, proxy);
        }
    };
    run(*builtin_writer_);
    for (auto& w : writers_) run(*w);
}

void Participant::acknack_tick(uint64_t now) {
    auto run = [this, now](ReaderImpl& r) {
        for (auto& [writer, wp] : r.proxies) {
            if (!wp.acknack_due || now < wp.acknack_due || !wp.initialized) continue;
            wp.acknack_due = 0;
            Peer* peer = find_peer(wp.peer);
            if (!peer) continue;
            wire::AckNackSub ack;
            ack.reader = r.guid;
            ack.writer = writer;
            ack.base.value = wp.max_contig + 1;
            for (uint64_t sn = wp.max_contig + 1; sn <= wp.hb_last; ++sn) {
                if (wp.pending.count(sn)) continue;
                ack.missing.push_back(sn);
                if (ack.missing.size() >= kMaxNackList) break;
            }
            security::Scope scope =
                r.builtin ? security::Scope::Discovery : security::Scope::Data;
            security::ProtectionKind kind = security::ProtectionKind::None;
            std::string topic;
            uint32_t entity = 0;
            if (config_.security) {
                if (r.builtin) {
                    kind = config_.security->governance.discovery_protection_kind;
                } else {
                    kind = topic_rule(r.topic.name).metadata_protection_kind;
                    topic = r.topic.name;
                    entity = writer.entity_id;
                }
            }
            send_to_peer(*peer, scope, kind, topic, entity, {ack.to_submessage()});
        }
    };
    run(*builtin_reader_);
    for (auto& r : readers_) run(*r);
}

void Participant::deadline_tick(uint64_t now) {
    for (auto& r : readers_) {
        if (!r->qos.deadline_ms) continue;
        for (auto& [kh, row] : r->cache->mutable_rows()) {
            if (row.disposed || row.samples.empty() || row.deadline_flagged) continue;
            if (now - row.last_arrival_ms > *r->qos.deadline_ms) {
                row.deadline_flagged = true;
                push_event(EventKind::DeadlineMissed,
                           r->topic.name + " key " + to_hex(row.key_hash), row.last_writer);
                // let a lower-strength writer take over a stale instance
                row.owner.reset();
            }
        }
    }
}

void Participant::handshake_tick(uint64_t now) {
    for (auto& [pfx, peer] : peers_) {
        switch (peer->hs) {
        case Peer::Hs::WaitReply:
            if (now >= peer->hs_deadline_ms) {
                if (peer->hs_attempts >= discovery::kHandshakeRetries) {
                    fail_handshake(*peer, "handshake timed out", now);
                } else {
                    wire::Submessage s;
                    s.kind = static_cast<uint8_t>(wire::SubmessageKind::Handshake);
                    s.body = security::encode_handshake(peer->sent_req);
                    send_to_locator(peer->locator(), {prefix_, {s}});
                    peer->hs_attempts++;
                    peer->hs_deadline_ms = now + discovery::kHandshakeTimeoutMs;
                }
            }
            break;
        case Peer::Hs::WaitFinal:
            if (now >= peer->hs_deadline_ms) {
                // let the initiator start over with a fresh request
                peer->hs = Peer::Hs::None;
                peer->hs_attempts = 0;
            }
            break;
        case Peer::Hs::Failed:
            if (now >= peer->quarantine_until_ms) {
                peer->hs = Peer::Hs::None;
                peer->hs_attempts = 0;
                peer->last_seen_ms = now;
            }
            break;
        default:
            break;
        }
    }
}

// --- inbound ---

void Participant::process_datagram(std::span<const uint8_t> bytes) {
    auto msg = wire::decode_message(bytes);
    if (!msg) {
        stats_.decode_rejected++;
        return;
    }
    if (msg.value().sender == prefix_) return;  // own multicast loopback
    process_message(msg.value(), EnvCtx{});
}

bool Participant::plain_allowed(security::ProtectionKind kind) const {
    // a None kind under a None rtps scope travels without any envelope
    return kind == security::ProtectionKind::None &&
           config_.security->governance.rtps_protection_kind == security::ProtectionKind::None;
}

bool Participant::plaintext_forbidden(const wire::GuidPrefix& sender) {
    // once a peer is authenticated under an rtps-protected governance, every
    // endpoint submessage must arrive inside an envelope
    if (!config_.security) return false;
    if (config_.security->governance.rtps_protection_kind == security::ProtectionKind::None)
        return false;
    Peer* peer = find_peer(sender);
    return peer && peer->authenticated();
}

void Participant::process_message(const wire::Message& m, const EnvCtx& ctx) {
    for (const auto& s : m.submessages) {
        switch (static_cast<wire::SubmessageKind>(s.kind)) {
        case wire::SubmessageKind::ParticipantAnnounce:
            handle_participant_announce(s, ctx);
            break;
        case wire::SubmessageKind::Handshake:
            if (!ctx.present) handle_handshake(m.sender, s);
            break;
        case wire::SubmessageKind::SecureEnvelope:
            handle_envelope(m.sender, s);
            break;
        case wire::SubmessageKind::Data:
        case wire::SubmessageKind::EndpointAnnounce:
        case wire::SubmessageKind::Heartbeat:
        case wire::SubmessageKind::AckNack: {
            if (!ctx.present && plaintext_forbidden(m.sender)) {
                stats_.kind_mismatch++;
                break;
            }
            auto kind = static_cast<wire::SubmessageKind>(s.kind);
            if (kind == wire::SubmessageKind::Data)
                handle_data(m.sender, s, false, ctx);
            else if (kind == wire::SubmessageKind::EndpointAnnounce)
                handle_data(m.sender, s, true, ctx);
            else if (kind == wire::SubmessageKind::Heartbeat)
                handle_heartbeat(m.sender, s, ctx);
            else
                handle_acknack(m.sender, s, ctx);
            break;
        }
        default:
            stats_.decode_rejected++;  // unknown kinds are skipped but tallied
            break;
        }
    }
}

void Participant::handle_participant_announce(const wire::Submessage& s, const EnvCtx& ctx) {
    auto parsed = discovery::ParticipantAnnouncement::parse(s);
    if (!parsed) return;
    auto& a = parsed.value();
    if (a.prefix == prefix_ || a.domain_id != config_.domain_id) return;
    uint64_t now = transport_->now_ms();

    Peer* peer = find_peer(a.prefix);
    if (ctx.present) {
        // protected liveliness refresh from an authenticated peer
        if (peer && ctx.scope == security::Scope::Liveliness && peer->authenticated())
            peer->last_seen_ms = now;
        return;
    }

    if (!peer) {
        if (a.name == config_.name)
            push_event(EventKind::ParticipantConflict,
                       "duplicate NAME " + std::to_string(a.name), {a.prefix, 0});
        auto p = std::make_shared<Peer>();
        p->info = a;
        p->last_seen_ms = now;
        peer = p.get();
        peers_[a.prefix] = std::move(p);
        for (auto& [pfx, other] : peers_)
            if (pfx != a.prefix && other->info.name == a.name && !peer->conflict_reported) {
                peer->conflict_reported = true;
                push_event(EventKind::ParticipantConflict,
                           "duplicate NAME " + std::to_string(a.name), {a.prefix, 0});
            }
        push_event(EventKind::ParticipantFound, "NAME " + std::to_string(a.name), {a.prefix, 0});

        if (!config_.security) {
            admit_peer(*peer);
        } else if (!a.security_enabled) {
            const auto& gov = config_.security->governance;
            if (gov.allow_unauthenticated_participants &&
                gov.discovery_protection_kind == security::ProtectionKind::None) {
                admit_peer(*peer);
            } else {
                stats_.unauthenticated_ignored++;
                push_event(EventKind::SecurityViolation,
                           "ignoring unauthenticated participant", {a.prefix, 0});
            }
        } else if (is_initiator_for(a.prefix)) {
            start_handshake(*peer, now);
        }
        return;
    }

    peer->info = a;
    // plaintext announcements stop refreshing the lease once liveliness is protected
    bool protected_liveliness =
        config_.security && peer->authenticated() &&
        config_.security->governance.liveliness_protection_kind != security::ProtectionKind::None;
    if (!protected_liveliness) peer->last_seen_ms = now;
    if (config_.security && a.security_enabled && peer->hs == Peer::Hs::None &&
        is_initiator_for(a.prefix) && now >= peer->quarantine_until_ms)
        start_handshake(*peer, now);
}

// --- security handshake ---

bool Participant::is_initiator_for(const wire::GuidPrefix& peer) const {
    return prefix_ < peer;
}

Status Participant::verify_peer_documents(const Bytes& cert_bytes, const Bytes& perm_bytes,
                                          const std::array<uint8_t, 16>& gov_digest,
                                          security::IdentityCertificate& cert_out,
                                          security::PermissionsDocument& perms_out) {
    const auto& sec = *config_.security;
    int64_t now_unix = static_cast<int64_t>(std::time(nullptr));
    auto cert = security::IdentityCertificate::decode(cert_bytes);
    if (!cert) return cert.error();
    if (!cert.value().verify(sec.ca_public_key, now_unix))
        return Error{Errc::CERT_INVALID, "peer certificate rejected"};
    if (gov_digest != sec.governance.digest())
        return Error{Errc::SECURITY_CONFIG_INVALID, "governance digest mismatch"};
    auto perms = security::PermissionsDocument::decode(perm_bytes);
    if (!perms) return perms.error();
    if (sec.governance.enable_join_access_control) {
        if (!perms.value().verify(sec.ca_public_key, now_unix))
            return Error{Errc::PERMISSION_DENIED, "peer permissions rejected"};
        if (perms.value().subject_name != cert.value().subject_name)
            return Error{Errc::PERMISSION_DENIED, "permissions subject mismatch"};
    }
    cert_out = std::move(cert.value());
    perms_out = std::move(perms.value());
    return Status::success();
}

void Participant::start_handshake(Peer& peer, uint64_t now) {
    const auto& sec = *config_.security;
    auto eph = security::AgreementKeyPair::generate();
    peer.eph_private = eph.private_key;
    peer.sent_req.certificate = sec.identity.encode();
    peer.sent_req.permissions = sec.permissions.encode();
    peer.sent_req.governance_digest = sec.governance.digest();
    peer.sent_req.nonce = security::random_bytes(32);
    peer.sent_req.ephemeral_public = eph.public_key;
    wire::Submessage s;
    s.kind = static_cast<uint8_t>(wire::SubmessageKind::Handshake);
    s.body = security::encode_handshake(peer.sent_req);
    send_to_locator(peer.locator(), {prefix_, {s}});
    peer.hs = Peer::Hs::WaitReply;
    peer.hs_attempts = 1;
    peer.hs_deadline_ms = now + discovery::kHandshakeTimeoutMs;
}

void Participant::fail_handshake(Peer& peer, const char* reason, uint64_t now) {
    peer.hs = Peer::Hs::Failed;
    peer.quarantine_until_ms = now + discovery::kQuarantineMs;
    peer.session.reset();
    push_event(EventKind::HandshakeFailed, reason, {peer.info.prefix, 0});
}

void Participant::handle_handshake(const wire::GuidPrefix& sender, const wire::Submessage& s) {
    if (!config_.security) return;
    Peer* peer = find_peer(sender);
    if (!peer) return;  // wait until the announcement arrives; the initiator retries
    uint64_t now = transport_->now_ms();
    if (now < peer->quarantine_until_ms) return;

    auto step = security::peek_handshake_step(s.body);
    if (!step) {
        stats_.decode_rejected++;
        return;
    }

    switch (step.value()) {
    case security::HandshakeStep::Request: {
        if (is_initiator_for(sender)) return;  // we initiate toward this peer, not them
        if (peer->hs == Peer::Hs::Done) return;
        auto req = security::decode_handshake_request(s.body);
        if (!req) {
            stats_.decode_rejected++;
            return;
        }
        security::IdentityCertificate cert;
        security::PermissionsDocument perms;
        if (auto st = verify_peer_documents(req.value().certificate, req.value().permissions,
                                            req.value().governance_digest, cert, perms);
            !st) {
            fail_handshake(*peer, st.error().to_string().c_str(), now);
            return;
        }
        const auto& sec = *config_.security;
        auto eph = security::AgreementKeyPair::generate();
        peer->eph_private = eph.private_key;
        peer->peer_req = std::move(req.value());
        security::HandshakeReply reply;
        reply.certificate = sec.identity.encode();
        reply.permissions = sec.permissions.encode();
        reply.governance_digest = sec.governance.digest();
        reply.nonce = security::random_bytes(32);
        reply.ephemeral_public = eph.public_key;
        auto transcript = security::handshake_transcript(peer->peer_req, reply);
        auto sig = security::ed25519_sign(sec.identity_private_key, transcript);
        if (!sig) return;
        reply.signature = sig.value();
        peer->sent_reply = reply;
        peer->sent_reply.signature.clear();
        peer->cert = std::move(cert);
        peer->perms = std::move(perms);
        wire::Submessage out;
        out.kind = static_cast<uint8_t>(wire::SubmessageKind::Handshake);
        out.body = security::encode_handshake(reply);
        send_to_locator(peer->locator(), {prefix_, {out}});
        peer->hs = Peer::Hs::WaitFinal;
        peer->hs_deadline_ms = now + discovery::kHandshakeTimeoutMs;
        break;
    }
    case security::HandshakeStep::Reply: {
        if (peer->hs != Peer::Hs::WaitReply) return;
        auto reply = security::decode_handshake_reply(s.body);
        if (!reply) {
            stats_.decode_rejected++;
            return;
        }
        security::IdentityCertificate cert;
        security::PermissionsDocument perms;
        if (auto st = verify_peer_documents(reply.value().certificate,
                                            reply.value().permissions,
                                            reply.value().governance_digest, cert, perms);
            !st) {
            fail_handshake(*peer, st.error().to_string().c_str(), now);
            return;
        }
        auto transcript = security::handshake_transcript(peer->sent_req, reply.value());
        if (!security::ed25519_verify(cert.subject_public_key, transcript,
                                      reply.value().signature)) {
            fail_handshake(*peer, "reply signature invalid", now);
            return;
        }
        auto session =
            security::derive_session(peer->eph_private, reply.value().ephemeral_public);
        if (!session) {
            fail_handshake(*peer, "key agreement failed", now);
            return;
        }
        auto sig = security::ed25519_sign(config_.security->identity_private_key, transcript);
        if (!sig) return;
        security::HandshakeFinal fin;
        fin.signature = sig.value();
        wire::Submessage out;
        out.kind = static_cast<uint8_t>(wire::SubmessageKind::Handshake);
        out.body = security::encode_handshake(fin);
        send_to_locator(peer->locator(), {prefix_, {out}});
        peer->cert = std::move(cert);
        peer->perms = std::move(perms);
        peer->session = session.value();
        peer->hs = Peer::Hs::Done;
        peer->last_seen_ms = now;
        admit_peer(*peer);
        break;
    }
    case security::HandshakeStep::Final: {
        if (peer->hs != Peer::Hs::WaitFinal) return;
        auto fin = security::decode_handshake_final(s.body);
        if (!fin) {
            stats_.decode_rejected++;
            return;
        }
        auto transcript = security::handshake_transcript(peer->peer_req, peer->sent_reply);
        if (!security::ed25519_verify(peer->cert.subject_public_key, transcript,
                                      fin.value().signature)) {
            fail_handshake(*peer, "final signature invalid", now);
            return;
        }
        auto session =
            security::derive_session(peer->eph_private, peer->peer_req.ephemeral_public);
        if (!session) {
            fail_handshake(*peer, "key agreement failed", now);
            return;
        }
        peer->session = session.value();
        peer->hs = Peer::Hs::Done;
        peer->last_seen_ms = now;
        admit_peer(*peer);
        break;
    }
    }
}

// --- peer admission / removal ---

void Participant::admit_peer(Peer& peer) {
    if (peer.admitted) return;
    peer.admitted = true;

    // cross the builtin endpoint-announcement channels
    ReaderProxy rp;
    rp.reader = {peer.info.prefix, wire::kEntityEndpointAnnounceReader};
    rp.peer = peer.info.prefix;
    rp.reliable = true;
    rp.start_sn = builtin_writer_->store.empty() ? builtin_writer_->last_sn + 1
                                                 : builtin_writer_->store.begin()->first;
    rp.acked = rp.start_sn - 1;
    builtin_writer_->proxies.push_back(rp);
    writer_push_history(*builtin_writer_, builtin_writer_->proxies.back());
    writer_send_heartbeat(*builtin_writer_, builtin_writer_->proxies.back());

    WriterProxyState wp;
    wp.writer = {peer.info.prefix, wire::kEntityEndpointAnnounceWriter};
    wp.peer = peer.info.prefix;
    wp.reliable = true;
    builtin_reader_->proxies[wp.writer] = wp;
}

void Participant::drop_peer(const wire::GuidPrefix& prefix, const char* reason) {
    auto it = peers_.find(prefix);
    if (it == peers_.end()) return;
    Peer& peer = *it->second;
    push_event(EventKind::ParticipantLost,
               std::string(reason) + ", NAME " + std::to_string(peer.info.name), {prefix, 0});

    auto scrub_writer = [&prefix](WriterImpl& w) {
        std::erase_if(w.proxies, [&prefix](const ReaderProxy& p) { return p.peer == prefix; });
    };
    scrub_writer(*builtin_writer_);
    for (auto& w : writers_) {
        size_t before = w->proxies.size();
        scrub_writer(*w);
        if (w->proxies.size() != before)
            push_event(EventKind::EndpointUnmatched, w->topic.name, w->guid);
        trim_writer(*w);
    }
    auto scrub_reader = [this, &prefix](ReaderImpl& r) {
        for (auto pit = r.proxies.begin(); pit != r.proxies.end();) {
            if (pit->second.peer == prefix) {
                if (r.cache) r.cache->release_ownership(pit->first);
                writer_routes_.erase(pit->first);
                if (!r.builtin) push_event(EventKind::EndpointUnmatched, r.topic.name, r.guid);
                pit = r.proxies.erase(pit);
            } else {
                ++pit;
            }
        }
    };
    scrub_reader(*builtin_reader_);
    for (auto& r : readers_) scrub_reader(*r);
    peers_.erase(it);
}

// --- secure envelopes ---

const security::TopicRule& Participant::topic_rule(const std::string& topic) const {
    static const security::TopicRule kDefault{};
    if (!config_.security) return kDefault;
    const auto* rule = config_.security->governance.rule_for_topic(topic);
    return rule ? *rule : kDefault;
}

void Participant::send_to_locator(const transport::Locator& loc, const wire::Message& m) {
    if (loc.address.empty() && loc.port == 0) return;
    (void)transport_->send(loc, wire::encode_message(m));
}

void Participant::send_to_peer(Peer& peer, security::Scope scope, security::ProtectionKind kind,
                               const std::string& topic, uint32_t writer_entity,
                               std::vector<wire::Submessage> subs) {
    bool plain = !config_.security || !peer.authenticated();
    if (!plain && kind == security::ProtectionKind::None &&
        config_.security->governance.rtps_protection_kind == security::ProtectionKind::None)
        plain = true;  // no protection anywhere on this path: skip the envelope
    if (plain) {
        send_to_locator(peer.locator(), {prefix_, std::move(subs)});
        return;
    }
    auto wrap = [this, &peer](security::Scope sc, security::ProtectionKind k,
                              const std::string& t, uint32_t ent,
                              std::vector<wire::Submessage> inner) -> std::optional<wire::Submessage> {
        Bytes plaintext = wire::encode_message({prefix_, std::move(inner)});
        auto key = peer.session->key_for(sc, prefix_, t, ent);
        uint64_t seq = ++peer.send_seq[env_key(sc, t, ent)];
        auto env = security::protect(sc, k, key, seq, plaintext);
        if (!env) return std::nullopt;
        ByteWriter w;
        w.text(t);
        w.u32(ent);
        w.raw(env.value());
        wire::Submessage s;
        s.kind = static_cast<uint8_t>(wire::SubmessageKind::SecureEnvelope);
        s.body = w.take();
        return s;
    };
    auto sub = wrap(scope, kind, topic, writer_entity, std::move(subs));
    if (!sub) return;
    auto rtps = config_.security->governance.rtps_protection_kind;
    if (rtps != security::ProtectionKind::None && scope != security::Scope::Rtps) {
        sub = wrap(security::Scope::Rtps, rtps, "", 0, {std::move(*sub)});
        if (!sub) return;
    }
    send_to_locator(peer.locator(), {prefix_, {std::move(*sub)}});
}

void Participant::handle_envelope(const wire::GuidPrefix& sender, const wire::Submessage& s) {
    if (!config_.security) return;
    Peer* peer = find_peer(sender);
    if (!peer || !peer->authenticated()) {
        stats_.unauthenticated_ignored++;
        return;
    }
    ByteReader r(s.body);
    auto topic = r.text();
    auto entity = r.u32();
    if (!topic || !entity) {
        stats_.decode_rejected++;
        return;
    }
    auto rest = r.raw(r.remaining());
    auto hdr = security::peek_envelope(rest.value());
    if (!hdr) {
        stats_.decode_rejected++;
        push_event(EventKind::SecurityViolation, "malformed envelope", {sender, 0});
        return;
    }
    const auto& gov = config_.security->governance;
    security::ProtectionKind expected;
    switch (hdr.value().scope) {
    case security::Scope::Rtps: expected = gov.rtps_protection_kind; break;
    case security::Scope::Discovery: expected = gov.discovery_protection_kind; break;
    case security::Scope::Liveliness: expected = gov.liveliness_protection_kind; break;
    case security::Scope::Data: {
        const auto& rule = topic_rule(topic.value());
        expected = hdr.value().kind == rule.data_protection_kind
                       ? rule.data_protection_kind
                       : rule.metadata_protection_kind;
        break;
    }
    default: expected = security::ProtectionKind::None; break;
    }
    auto key = peer->session->key_for(hdr.value().scope, sender, topic.value(), entity.value());
    auto& window = peer->replay[env_key(hdr.value().scope, topic.value(), entity.value())];
    auto plaintext = security::unprotect(expected, key, &window, rest.value());
    if (!plaintext) {
        switch (plaintext.error().code) {
        case Errc::NONCE_REPLAYED: stats_.replay_rejected++; break;
        case Errc::MAC_INVALID: stats_.mac_invalid++; break;
        case Errc::KIND_MISMATCH: stats_.kind_mismatch++; break;
        default: stats_.decode_rejected++; break;
        }
        push_event(EventKind::SecurityViolation, plaintext.error().to_string(), {sender, 0});
        return;
    }
    auto inner = wire::decode_message(plaintext.value());
    if (!inner || inner.value().sender != sender) {
        stats_.decode_rejected++;
        push_event(EventKind::SecurityViolation, "envelope payload rejected", {sender, 0});
        return;
    }
    peer->last_seen_ms = transport_->now_ms();
    EnvCtx ctx;
    ctx.present = true;
    ctx.scope = hdr.value().scope;
    ctx.kind = hdr.value().kind;
    ctx.topic = topic.value();
    ctx.entity = entity.value();
    process_message(inner.value(), ctx);
}

// --- data path: reception ---

void Participant::handle_data(const wire::GuidPrefix& sender, const wire::Submessage& s,
                              bool builtin, const EnvCtx& ctx) {
    auto parsed = wire::DataSub::parse(s);
    if (!parsed) {
        if (ctx.present) stats_.decode_rejected++;
        return;
    }
    auto& d = parsed.value();
    if (d.writer.prefix != sender) return;
    Peer* peer = find_peer(sender);
    bool secure_link = config_.security && peer && peer->authenticated();

    if (builtin) {
        if (!peer || !peer->admitted) return;
        if (secure_link) {
            const auto& gov = config_.security->governance;
            bool in_envelope = ctx.present && ctx.scope == security::Scope::Discovery &&
                               ctx.kind == gov.discovery_protection_kind;
            if (!in_envelope &&
                !(!ctx.present && plain_allowed(gov.discovery_protection_kind))) {
                stats_.kind_mismatch++;
                return;
            }
        }
        auto it = builtin_reader_->proxies.find(d.writer);
        if (it == builtin_reader_->proxies.end()) return;
        reader_accept(*builtin_reader_, it->second, d);
        return;
    }

    auto route = writer_routes_.find(d.writer);
    if (route == writer_routes_.end()) return;
    for (ReaderImpl* r : route->second) {
        if (secure_link) {
            const auto& rule = topic_rule(r->topic.name);
            bool in_envelope = ctx.present && ctx.scope == security::Scope::Data &&
                               ctx.topic == r->topic.name &&
                               ctx.entity == d.writer.entity_id &&
                               ctx.kind == rule.data_protection_kind;
            if (!in_envelope &&
                !(!ctx.present && plain_allowed(rule.data_protection_kind))) {
                stats_.kind_mismatch++;
                push_event(EventKind::SecurityViolation,
                           "data outside its protection envelope on " + r->topic.name,
                           d.writer);
                continue;
            }
        }
        auto it = r->proxies.find(d.writer);
        if (it == r->proxies.end()) continue;
        reader_accept(*r, it->second, d);
    }
}

void Participant::reader_accept(ReaderImpl& r, WriterProxyState& wp, const wire::DataSub& d) {
    uint64_t sn = d.sn.value;
    if (!wp.reliable) {
        if (sn <= wp.max_contig) return;
        wp.max_contig = sn;
        deliver(r, wp, d);
        return;
    }
    if (!wp.initialized) {
        if (wp.pending.size() < kMaxPendingSamples) wp.pending[sn] = d;
        return;
    }
    if (sn <= wp.max_contig) return;
    if (sn == wp.max_contig + 1) {
        wp.max_contig = sn;
        deliver(r, wp, d);
        reader_drain(r, wp);
    } else {
        if (wp.pending.size() < kMaxPendingSamples) wp.pending[sn] = d;
        wp.hb_last = std::max(wp.hb_last, sn);
        if (!wp.acknack_due)
            wp.acknack_due = transport_->now_ms() + config_.acknack_delay_ms;
    }
}

void Participant::reader_drain(ReaderImpl& r, WriterProxyState& wp) {
    while (!wp.pending.empty()) {
        auto it = wp.pending.begin();
        if (it->first <= wp.max_contig) {
            wp.pending.erase(it);
        } else if (it->first == wp.max_contig + 1) {
            wp.max_contig = it->first;
            wire::DataSub d = std::move(it->second);
            wp.pending.erase(it);
            deliver(r, wp, d);
        } else {
            break;
        }
    }
}

void Participant::handle_heartbeat(const wire::GuidPrefix& sender, const wire::Submessage& s,
                                   const EnvCtx& ctx) {
    auto parsed = wire::HeartbeatSub::parse(s);
    if (!parsed) return;
    auto& hb = parsed.value();
    if (hb.writer.prefix != sender) return;
    Peer* peer = find_peer(sender);
    bool secure_link = config_.security && peer && peer->authenticated();

    auto apply = [this, &hb](ReaderImpl& r, WriterProxyState& wp) {
        if (!wp.reliable) return;
        if (!wp.initialized) {
            wp.initialized = true;
            wp.max_contig = hb.first.value ? hb.first.value - 1 : 0;
        } else if (hb.first.value > wp.max_contig + 1) {
            wp.max_contig = hb.first.value - 1;  // older samples are gone
        }
        reader_drain(r, wp);
        wp.hb_last = std::max(wp.hb_last, hb.last.value);
        if (!wp.acknack_due)
            wp.acknack_due = transport_->now_ms() + config_.acknack_delay_ms;
    };

    if (hb.writer.entity_id == wire::kEntityEndpointAnnounceWriter) {
        if (!peer || !peer->admitted) return;
        if (secure_link) {
            const auto& gov = config_.security->governance;
            bool in_envelope = ctx.present && ctx.scope == security::Scope::Discovery &&
                               ctx.kind == gov.discovery_protection_kind;
            if (!in_envelope &&
                !(!ctx.present && plain_allowed(gov.discovery_protection_kind))) {
                stats_.kind_mismatch++;
                return;
            }
        }
        auto it = builtin_reader_->proxies.find(hb.writer);
        if (it != builtin_reader_->proxies.end()) apply(*builtin_reader_, it->second);
        return;
    }
    auto route = writer_routes_.find(hb.writer);
    if (route == writer_routes_.end()) return;
    for (ReaderImpl* r : route->second) {
        if (secure_link) {
            const auto& rule = topic_rule(r->topic.name);
            bool in_envelope = ctx.present && ctx.scope == security::Scope::Data &&
                               ctx.kind == rule.metadata_protection_kind;
            if (!in_envelope &&
                !(!ctx.present && plain_allowed(rule.metadata_protection_kind))) {
                stats_.kind_mismatch++;
                continue;
            }
        }
        auto it = r->proxies.find(hb.writer);
        if (it != r->proxies.end()) apply(*r, it->second);
    }
}

void Participant::handle_acknack(const wire::GuidPrefix& sender, const wire::Submessage& s,
                                 const EnvCtx& ctx) {
    auto parsed = wire::AckNackSub::parse(s);
    if (!parsed) return;
    auto& ack = parsed.value();
    if (ack.writer.prefix != prefix_ || ack.reader.prefix != sender) return;
    Peer* peer = find_peer(sender);
    bool secure_link = config_.security && peer && peer->authenticated();

    WriterImpl* w = nullptr;
    if (ack.writer.entity_id == wire::kEntityEndpointAnnounceWriter) {
        w = builtin_writer_.get();
        if (secure_link) {
            const auto& gov = config_.security->governance;
            bool in_envelope = ctx.present && ctx.scope == security::Scope::Discovery &&
                               ctx.kind == gov.discovery_protection_kind;
            if (!in_envelope &&
                !(!ctx.present && plain_allowed(gov.discovery_protection_kind))) {
                stats_.kind_mismatch++;
                return;
            }
        }
    } else {
        for (auto& cand : writers_)
            if (cand->guid == ack.writer) w = cand.get();
        if (w && secure_link) {
            const auto& rule = topic_rule(w->topic.name);
            bool in_envelope = ctx.present && ctx.scope == security::Scope::Data &&
                               ctx.kind == rule.metadata_protection_kind;
            if (!in_envelope &&
                !(!ctx.present && plain_allowed(rule.metadata_protection_kind))) {
                stats_.kind_mismatch++;
                return;
            }
        }
    }
    if (!w) return;
    for (auto& proxy : w->proxies) {
        if (proxy.reader != ack.reader) continue;
        if (ack.base.value > 0) proxy.acked = std::max(proxy.acked, ack.base.value - 1);
        for (uint64_t sn : ack.missing)
            if (w->store.count(sn)) writer_send_to_proxy(*w, proxy, sn);
    }
    trim_writer(*w);
}

void Participant::deliver(ReaderImpl& r, WriterProxyState& wp, const wire::DataSub& d) {
    if (r.builtin) {
        Peer* peer = find_peer(wp.peer);
        if (peer) handle_endpoint_announcement(*peer, d.payload);
        return;
    }
    SampleInfo info;
    info.writer = d.writer;
    info.sn = d.sn.value;
    info.key_hash = d.key_hash;
    info.dispose = d.dispose;
    info.writer_strength = wp.strength;
    info.arrival_ms = transport_->now_ms();
    wire::Record value;
    if (!d.dispose) {
        auto decoded = wire::decode_sample(*r.topic.type, d.payload);
        if (!decoded) return;
        value = std::move(decoded.value());
    }
    bool inserted = r.cache->insert(value, info);
    if (inserted && !d.dispose && r.callback) r.callback(value, info);
}

void Participant::deliver_local(ReaderImpl& r, WriterImpl& w, uint64_t sn) {
    const auto& stored = w.store.at(sn);
    wire::DataSub d;
    d.writer = w.guid;
    d.sn.value = sn;
    d.key_hash = stored.key_hash;
    d.dispose = stored.dispose;
    d.payload = stored.payload;
    WriterProxyState& wp = r.proxies[w.guid];
    wp.max_contig = std::max(wp.max_contig, sn);
    deliver(r, wp, d);
}

// --- data path: emission ---

Result<uint64_t> Participant::writer_write(WriterImpl& w, const wire::Record& value,
                                           bool dispose) {
    StoredSample stored;
    stored.dispose = dispose;
    if (!dispose) {
        auto payload = wire::encode_sample(*w.topic.type, value);
        if (!payload) return payload.error();
        stored.payload = std::move(payload.value());
    }
    if (w.topic.type->has_key()) {
        auto kh = wire::compute_key_hash(*w.topic.type, value);
        if (!kh) return kh.error();
        stored.key_hash = kh.value();
    }
    uint64_t sn = ++w.last_sn;
    w.store[sn] = std::move(stored);
    writer_send_sample(w, sn);
    trim_writer(w);
    return sn;
}

void Participant::writer_send_sample(WriterImpl& w, uint64_t sn) {
    for (auto& proxy : w.proxies) {
        if (sn < proxy.start_sn) continue;
        if (proxy.local) {
            deliver_local(*proxy.local_reader, w, sn);
            proxy.acked = std::max(proxy.acked, sn);
            continue;
        }
        writer_send_to_proxy(w, proxy, sn);
        if (!proxy.reliable) proxy.acked = std::max(proxy.acked, sn);
    }
}

void Participant::writer_send_to_proxy(WriterImpl& w, ReaderProxy& proxy, uint64_t sn) {
    Peer* peer = find_peer(proxy.peer);
    if (!peer) return;
    auto it = w.store.find(sn);
    if (it == w.store.end()) return;
    wire::DataSub d;
    d.writer = w.guid;
    d.sn.value = sn;
    d.key_hash = it->second.key_hash;
    d.dispose = it->second.dispose;
    d.payload = it->second.payload;
    auto sub = d.to_submessage();
    if (w.builtin) {
        sub.kind = static_cast<uint8_t>(wire::SubmessageKind::EndpointAnnounce);
        security::ProtectionKind kind =
            config_.security ? config_.security->governance.discovery_protection_kind
                             : security::ProtectionKind::None;
        send_to_peer(*peer, security::Scope::Discovery, kind, "", 0, {std::move(sub)});
        return;
    }
    security::ProtectionKind kind = config_.security
                                        ? topic_rule(w.topic.name).data_protection_kind
                                        : security::ProtectionKind::None;
    send_to_peer(*peer, security::Scope::Data, kind, w.topic.name, w.guid.entity_id,
                 {std::move(sub)});
}

void Participant::writer_send_heartbeat(WriterImpl& w, ReaderProxy& proxy) {
    Peer* peer = find_peer(proxy.peer);
    if (!peer) return;
    wire::HeartbeatSub hb;
    hb.writer = w.guid;
    uint64_t oldest = w.store.empty() ? w.last_sn + 1 : w.store.begin()->first;
    hb.first.value = std::max(oldest, proxy.start_sn);
    hb.last.value = w.last_sn;
    hb.count = ++proxy.hb_count;
    auto sub = hb.to_submessage();
    if (w.builtin) {
        security::ProtectionKind kind =
            config_.security ? config_.security->governance.discovery_protection_kind
                             : security::ProtectionKind::None;
        send_to_peer(*peer, security::Scope::Discovery, kind, "", 0, {std::move(sub)});
        return;
    }
    security::ProtectionKind kind = config_.security
                                        ? topic_rule(w.topic.name).metadata_protection_kind
                                        : security::ProtectionKind::None;
    send_to_peer(*peer, security::Scope::Data, kind, w.topic.name, w.guid.entity_id,
                 {std::move(sub)});
}

void Participant::writer_push_history(WriterImpl& w, ReaderProxy& proxy) {
    for (const auto& [sn, stored] : w.store)
        if (sn >= proxy.start_sn) writer_send_to_proxy(w, proxy, sn);
}

void Participant::trim_writer(WriterImpl& w) {
    if (w.store.empty() || w.builtin) return;  // builtin history is kept forever
    uint64_t min_acked = w.last_sn;
    for (const auto& p : w.proxies)
        if (!p.local && p.reliable) min_acked = std::min(min_acked, p.acked);
    uint64_t min_needed = min_acked + 1;
    if (w.qos.durability != Durability::Volatile) {
        if (w.qos.history != HistoryKind::KeepLast) return;  // keep everything
        // retain the contiguous tail that still covers the last `depth`
        // samples of every instance, so late-joiner pushes have no holes
        std::map<wire::KeyHash, uint32_t> counts;
        uint64_t oldest_retained = w.last_sn + 1;
        for (auto it = w.store.rbegin(); it != w.store.rend(); ++it) {
            uint32_t& c = counts[it->second.key_hash];
            if (c < w.qos.history_depth) {
                ++c;
                oldest_retained = it->first;
            }
        }
        min_needed = std::min(min_needed, oldest_retained);
    }
    while (!w.store.empty() && w.store.begin()->first < min_needed)
        w.store.erase(w.store.begin());
}

// --- matching ---

void Participant::handle_endpoint_announcement(Peer& peer, const Bytes& payload) {
    auto parsed = discovery::EndpointAnnouncement::decode(payload);
    if (!parsed) {
        stats_.decode_rejected++;
        return;
    }
    auto& ann = parsed.value();
    if (ann.retired) {
        unmatch_remote_endpoint(peer, ann.endpoint);
        return;
    }
    peer.endpoints[ann.endpoint] = ann;
    evaluate_remote_endpoint(peer, ann);
}

void Participant::unmatch_remote_endpoint(Peer& peer, const wire::Guid& endpoint) {
    peer.endpoints.erase(endpoint);
    for (auto& w : writers_) {
        size_t before = w->proxies.size();
        std::erase_if(w->proxies,
                      [&endpoint](const ReaderProxy& p) { return p.reader == endpoint; });
        if (w->proxies.size() != before)
            push_event(EventKind::EndpointUnmatched, w->topic.name, w->guid);
    }
    for (auto& r : readers_) {
        auto it = r->proxies.find(endpoint);
        if (it != r->proxies.end()) {
            r->cache->release_ownership(endpoint);
            r->proxies.erase(it);
            push_event(EventKind::EndpointUnmatched, r->topic.name, r->guid);
        }
    }
    auto route = writer_routes_.find(endpoint);
    if (route != writer_routes_.end()) writer_routes_.erase(route);
}

void Participant::evaluate_remote_endpoint(Peer& peer,
                                           const discovery::EndpointAnnouncement& ann) {
    if (ann.is_reader) {
        for (auto& w : writers_)
            if (w->topic.name == ann.topic) match_writer_to_remote_reader(*w, peer, ann);
    } else {
        for (auto& r : readers_)
            if (r->topic.name == ann.topic) match_reader_to_remote_writer(*r, peer, ann);
    }
}

bool Participant::security_allows_match(Peer& peer, const std::string& topic,
                                        const std::vector<std::string>& local_parts,
                                        const std::vector<std::string>& remote_parts,
                                        bool local_is_writer) {
    if (!config_.security) return true;
    const auto& rule = topic_rule(topic);
    if (!peer.authenticated()) {
        // plaintext interop only when the topic needs no protection at all
        return config_.security->governance.allow_unauthenticated_participants &&
               rule.data_protection_kind == security::ProtectionKind::None &&
               rule.metadata_protection_kind == security::ProtectionKind::None;
    }
    const auto& pub_perms =
        local_is_writer ? config_.security->permissions : *peer.perms;
    const auto& sub_perms =
        local_is_writer ? *peer.perms : config_.security->permissions;
    for (const auto& part : candidate_partitions(local_parts, remote_parts)) {
        bool pub_ok = !rule.enable_write_access_control ||
                      security::check_permission(pub_perms, security::GrantAction::Publish,
                                                 topic, part);
        bool sub_ok = !rule.enable_read_access_control ||
                      security::check_permission(sub_perms, security::GrantAction::Subscribe,
                                                 topic, part);
        if (pub_ok && sub_ok) return true;
    }
    return false;
}

void Participant::match_writer_to_remote_reader(WriterImpl& w, Peer& peer,
                                                const discovery::EndpointAnnouncement& ann) {
    for (const auto& p : w.proxies)
        if (p.reader == ann.endpoint) return;
    if (w.topic.type->digest() != ann.type_digest) {
        push_event(EventKind::IncompatibleType, w.topic.name, ann.endpoint);
        return;
    }
    auto match = qos_compatible(w.qos, ann.qos);
    if (!match.compatible) {
        push_event(EventKind::IncompatibleQos,
                   w.topic.name + ": " + incompatible_reason_name(match.reason), ann.endpoint);
        return;
    }
    if (!security_allows_match(peer, w.topic.name, w.qos.partitions, ann.qos.partitions,
                               true)) {
        push_event(EventKind::PermissionDenied, w.topic.name, ann.endpoint);
        return;
    }
    ReaderProxy proxy;
    proxy.reader = ann.endpoint;
    proxy.peer = peer.info.prefix;
    proxy.reliable = w.qos.reliability == Reliability::Reliable &&
                     ann.qos.reliability == Reliability::Reliable;
    bool push_history = w.qos.durability >= Durability::TransientLocal &&
                        ann.qos.durability >= Durability::TransientLocal;
    if (push_history) {
        proxy.start_sn =
            w.store.empty() ? w.last_sn + 1 : w.store.begin()->first;
    } else {
        proxy.start_sn = w.last_sn + 1;
    }
    proxy.acked = proxy.start_sn - 1;
    w.proxies.push_back(proxy);
    auto& added = w.proxies.back();
    if (push_history) writer_push_history(w, added);
    if (added.reliable) writer_send_heartbeat(w, added);
    push_event(EventKind::EndpointMatched, w.topic.name + " -> reader", ann.endpoint);
}

void Participant::match_reader_to_remote_writer(ReaderImpl& r, Peer& peer,
                                                const discovery::EndpointAnnouncement& ann) {
    if (r.proxies.count(ann.endpoint)) return;
    if (r.topic.type->digest() != ann.type_digest) {
        push_event(EventKind::IncompatibleType, r.topic.name, ann.endpoint);
        return;
    }
    auto match = qos_compatible(ann.qos, r.qos);
    if (!match.compatible) {
        push_event(EventKind::IncompatibleQos,
                   r.topic.name + ": " + incompatible_reason_name(match.reason), ann.endpoint);
        return;
    }
    if (!security_allows_match(peer, r.topic.name, r.qos.partitions, ann.qos.partitions,
                               false)) {
        push_event(EventKind::PermissionDenied, r.topic.name, ann.endpoint);
        return;
    }
    WriterProxyState wp;
    wp.writer = ann.endpoint;
    wp.peer = peer.info.prefix;
    wp.strength = ann.qos.ownership_strength;
    wp.reliable = ann.qos.reliability == Reliability::Reliable &&
                  r.qos.reliability == Reliability::Reliable;
    r.proxies[ann.endpoint] = wp;
    writer_routes_[ann.endpoint].push_back(&r);
    push_event(EventKind::EndpointMatched, r.topic.name + " <- writer", ann.endpoint);
}

void Participant::match_local_pair(WriterImpl& w, ReaderImpl& r) {
    for (const auto& p : w.proxies)
        if (p.reader == r.guid) return;
    if (w.topic.type->digest() != r.topic.type->digest()) {
        push_event(EventKind::IncompatibleType, w.topic.name, r.guid);
        return;
    }
    auto match = qos_compatible(w.qos, r.qos);
    if (!match.compatible) {
        push_event(EventKind::IncompatibleQos,
                   w.topic.name + ": " + incompatible_reason_name(match.reason), r.guid);
        return;
    }
    ReaderProxy proxy;
    proxy.reader = r.guid;
    proxy.peer = prefix_;
    proxy.local = true;
    proxy.local_reader = &r;
    bool push_history = w.qos.durability >= Durability::TransientLocal &&
                        r.qos.durability >= Durability::TransientLocal;
    proxy.start_sn = push_history
                         ? (w.store.empty() ? w.last_sn + 1 : w.store.begin()->first)
                         : w.last_sn + 1;
    proxy.acked = w.last_sn;
    w.proxies.push_back(proxy);

    WriterProxyState wp;
    wp.writer = w.guid;
    wp.peer = prefix_;
    wp.strength = w.qos.ownership_strength;
    wp.reliable = false;  // local delivery is direct
    r.proxies[w.guid] = wp;

    if (push_history)
        for (const auto& [sn, stored] : w.store)
            if (sn >= proxy.start_sn) deliver_local(r, w, sn);
    push_event(EventKind::EndpointMatched, w.topic.name + " (local)", r.guid);
}

// --- introspection ---

std::string Participant::dump_json() const {
    std::lock_guard lock(mutex_);
    nlohmann::json j;
    j["name"] = config_.name;
    j["domain"] = config_.domain_id;
    j["prefix"] = to_hex(prefix_);
    j["security"] = config_.security.has_value();

    std::function<nlohmann::json(const wire::Value&)> value_json =
        [&value_json](const wire::Value& v) -> nlohmann::json {
        return std::visit(
            [&value_json](const auto& x) -> nlohmann::json {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, std::vector<wire::Value>>) {
                    nlohmann::json arr = nlohmann::json::array();
                    for (const auto& e : x) arr.push_back(value_json(e));
                    return arr;
                } else {
                    return x;
                }
            },
            v.v);
    };

    j["peers"] = nlohmann::json::array();
    for (const auto& [pfx, peer] : peers_) {
        nlohmann::json pj;
        pj["prefix"] = to_hex(pfx);
        pj["name"] = peer->info.name;
        pj["admitted"] = peer->admitted;
        pj["authenticated"] = peer->authenticated();
        pj["endpoints"] = nlohmann::json::array();
        for (const auto& [guid, e] : peer->endpoints) {
            nlohmann::json ej;
            ej["entity"] = guid.entity_id;
            ej["topic"] = e.topic;
            ej["reader"] = e.is_reader;
            pj["endpoints"].push_back(ej);
        }
        j["peers"].push_back(pj);
    }

    j["writers"] = nlohmann::json::array();
    for (const auto& w : writers_) {
        nlohmann::json wj;
        wj["entity"] = w->guid.entity_id;
        wj["topic"] = w->topic.name;
        wj["last_sn"] = w->last_sn;
        wj["matched"] = w->proxies.size();
        j["writers"].push_back(wj);
    }

    j["readers"] = nlohmann::json::array();
    for (const auto& r : readers_) {
        nlohmann::json rj;
        rj["entity"] = r->guid.entity_id;
        rj["topic"] = r->topic.name;
        rj["matched"] = r->proxies.size();
        rj["rows"] = nlohmann::json::array();
        for (const InstanceRow* row : r->cache->rows()) {
            nlohmann::json xj;
            xj["key_hash"] = to_hex(row->key_hash);
            nlohmann::json key = nlohmann::json::array();
            for (const auto& v : row->key_value) key.push_back(value_json(v));
            xj["key"] = key;
            xj["samples"] = row->samples.size();
            xj["last_sn"] = row->last_sn;
            if (!row->samples.empty()) {
                nlohmann::json latest = nlohmann::json::array();
                for (const auto& v : row->samples.back().value) latest.push_back(value_json(v));
                xj["latest"] = latest;
            }
            rj["rows"].push_back(xj);
        }
        j["readers"].push_back(rj);
    }

    nlohmann::json sj;
    sj["mac_invalid"] = stats_.mac_invalid;
    sj["decode_rejected"] = stats_.decode_rejected;
    sj["replay_rejected"] = stats_.replay_rejected;
    sj["kind_mismatch"] = stats_.kind_mismatch;
    sj["unauthenticated_ignored"] = stats_.unauthenticated_ignored;
    j["security_stats"] = sj;
    return j.dump(2);
}

}  // namespace agribus::core
