#include "agribus/tc/protocol.hpp"

#include <chrono>
#include <thread>

namespace agribus::tc {

std::string partition_name(uint64_t name) {
    static const char* digits = "0123456789ABCDEF";
    std::string s;
    do {
        s.insert(s.begin(), digits[name & 0xF]);
        name >>= 4;
    } while (name);
    return s;
}

namespace {

IdleFn default_idle() {
    return [](uint64_t ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
}

}  // namespace

TopicSpec service_discovery_topic() {
    TopicSpec s;
    s.topic.name = kTopicServiceDiscovery;
    s.topic.type = services_type();
    s.qos.reliability = core::Reliability::Reliable;
    s.qos.durability = core::Durability::TransientLocal;
    s.qos.history = core::HistoryKind::KeepLast;
    s.qos.history_depth = 1;
    return s;  // default partition
}

TopicSpec ddop_hierarchy_topic(const std::string& partition) {
    TopicSpec s;
    s.topic.name = kTopicDdopHierarchy;
    s.topic.type = hierarchy_type();
    s.qos.reliability = core::Reliability::Reliable;
    s.qos.durability = core::Durability::Durable;
    s.qos.history = core::HistoryKind::KeepAll;
    s.qos.partitions = {partition};
    return s;
}

TopicSpec ddi_linking_topic(const std::string& partition) {
    TopicSpec s;
    s.topic.name = kTopicDdiLinking;
    s.topic.type = capabilities_type();
    s.qos.reliability = core::Reliability::Reliable;
    s.qos.durability = core::Durability::Durable;
    s.qos.history = core::HistoryKind::KeepAll;
    s.qos.partitions = {partition};
    return s;
}

TopicSpec pd_values_topic(Channel channel, const std::string& partition) {
    TopicSpec s;
    s.topic.name = channel_topic(channel);
    s.topic.type = values_type();
    s.qos.reliability = channel == Channel::Reliable ? core::Reliability::Reliable
                                                     : core::Reliability::BestEffort;
    s.qos.durability = core::Durability::Volatile;
    s.qos.history = core::HistoryKind::KeepLast;
    s.qos.history_depth = 16;  // Setpoint and Actual share one instance row
    s.qos.partitions = {partition};
    return s;
}

Result<core::Writer> announce_service(const std::shared_ptr<core::Participant>& participant,
                                      const ServicesRow& row) {
    auto spec = service_discovery_topic();
    auto writer = participant->create_writer(spec.topic, spec.qos);
    if (!writer) return writer.error();
    auto sn = writer.value().write(to_record(row));
    if (!sn) return sn.error();
    return writer;
}

Result<ServicesRow> await_peer_service(core::Participant& participant, core::Reader& services,
                                       uint64_t self_name, const ServicePredicate& pred,
                                       uint64_t timeout_ms, const IdleFn& idle) {
    IdleFn wait = idle ? idle : default_idle();
    uint64_t deadline = participant.now_ms() + timeout_ms;
    for (;;) {
        std::optional<ServicesRow> best;
        for (const auto& row : services.read_state()) {
            if (row.samples.empty()) continue;
            auto parsed = services_from_record(row.samples.front().value);
            if (!parsed) continue;
            const auto& svc = parsed.value();
            if (svc.name == self_name || !pred(svc)) continue;
            if (!best || svc.name < best->name) best = svc;  // lowest NAME wins
        }
        if (best) return *best;
        if (participant.now_ms() >= deadline)
            return Error{Errc::NO_PEER, "no matching service before timeout"};
        wait(10);
    }
}

// --- implement session ---

Result<std::unique_ptr<ImplementSession>> ImplementSession::start(
    std::shared_ptr<core::Participant> participant, const Ddop& ddop, SessionConfig config) {
    if (!config.idle) config.idle = default_idle();
    auto session = std::unique_ptr<ImplementSession>(new ImplementSession());
    session->participant_ = participant;
    session->config_ = config;
    session->name_ = config.implement_name ? config.implement_name : participant->name();
    session->partition_ = partition_name(session->name_);

    DdopSamples samples;
    if (config.publish_ddop) {
        if (ddop.device_name != session->name_)
            return Error{Errc::CONFIG_INVALID, "DDOP device NAME differs from participant NAME"};
        auto s = ddop_to_samples(ddop);
        if (!s) return s.error();
        samples = std::move(s.value());
    }

    auto sd = service_discovery_topic();
    auto services_reader = participant->create_reader(sd.topic, sd.qos);
    if (!services_reader) return services_reader.error();
    session->services_reader_ = std::move(services_reader.value());

    auto hier = ddop_hierarchy_topic(session->partition_);
    auto link = ddi_linking_topic(session->partition_);
    ImplementSession* raw = session.get();
    if (config.publish_ddop) {
        // the partition owner watches for a foreign DDOP writer
        auto hierarchy_reader = participant->create_reader(
            hier.topic, hier.qos,
            [raw](const wire::Record&, const core::SampleInfo& info) {
                if (info.writer.prefix != raw->participant_->guid_prefix()) {
                    std::lock_guard lock(raw->mutex_);
                    raw->conflict_ = true;
                }
            });
        if (!hierarchy_reader) return hierarchy_reader.error();
        session->hierarchy_reader_ = std::move(hierarchy_reader.value());
    }

    if (config.publish_ddop) {
        auto hw = participant->create_writer(hier.topic, hier.qos);
        if (!hw) return hw.error();
        session->hierarchy_writer_ = std::move(hw.value());
        auto lw = participant->create_writer(link.topic, link.qos);
        if (!lw) return lw.error();
        session->linking_writer_ = std::move(lw.value());
        for (const auto& rec : samples.hierarchy) {
            auto sn = session->hierarchy_writer_->write(rec);
            if (!sn) return sn.error();
        }
        for (const auto& rec : samples.linking) {
            auto sn = session->linking_writer_->write(rec);
            if (!sn) return sn.error();
        }
    }

    for (Channel ch : {Channel::BestEffort, Channel::Reliable}) {
        auto pd = pd_values_topic(ch, session->partition_);
        auto w = participant->create_writer(pd.topic, pd.qos);
        if (!w) return w.error();
        auto r = participant->create_reader(
            pd.topic, pd.qos,
            [raw, ch](const wire::Record& rec, const core::SampleInfo& info) {
                if (info.writer.prefix == raw->participant_->guid_prefix()) return;
                auto value = value_from_record(rec);
                if (!value) return;
                uint64_t sender =
                    raw->participant_->peer_name(info.writer.prefix).value_or(0);
                ProcessValueCallback cb;
                {
                    std::lock_guard lock(raw->mutex_);
                    cb = raw->callback_;
                }
                if (cb) cb(value.value(), sender, ch);
            });
        if (!r) return r.error();
        if (ch == Channel::Reliable) {
            session->pd_writer_rel_ = std::move(w.value());
            session->pd_reader_rel_ = std::move(r.value());
        } else {
            session->pd_writer_be_ = std::move(w.value());
            session->pd_reader_be_ = std::move(r.value());
        }
    }

    if (config.publish_ddop) {  // one services row per implement NAME
        auto sw = announce_service(participant, ServicesRow{session->name_, 1, 0, 0});
        if (!sw) return sw.error();
        session->services_writer_ = std::move(sw.value());
    }
    return session;
}

Result<uint64_t> ImplementSession::send_process_value(const ProcessValue& value) {
    return send_on(value, config_.channel);
}

Result<uint64_t> ImplementSession::send_process_value(const ProcessValue& value,
                                                      Channel channel) {
    return send_on(value, channel);
}

Result<uint64_t> ImplementSession::send_on(const ProcessValue& value, Channel channel) {
    core::Writer writer;
    {
        std::lock_guard lock(mutex_);
        if (conflict_)
            return Error{Errc::PARTITION_CONFLICT, "another TC client owns partition " +
                                                       partition_};
        writer = channel == Channel::Reliable ? *pd_writer_rel_ : *pd_writer_be_;
    }
    return writer.write(to_record(value));
}

void ImplementSession::on_process_value(ProcessValueCallback cb) {
    std::lock_guard lock(mutex_);
    callback_ = std::move(cb);
}

Result<ServicesRow> ImplementSession::await_server(uint32_t min_version, uint64_t timeout_ms) {
    return await_peer_service(
        *participant_, *services_reader_, name_,
        [min_version](const ServicesRow& r) { return r.v_tc_server >= min_version; },
        timeout_ms, config_.idle);
}

bool ImplementSession::conflict_detected() const {
    std::lock_guard lock(mutex_);
    return conflict_;
}

// --- server session ---

Result<std::unique_ptr<ServerSession>> ServerSession::start(
    std::shared_ptr<core::Participant> participant, SessionConfig config) {
    if (!config.idle) config.idle = default_idle();
    auto session = std::unique_ptr<ServerSession>(new ServerSession());
    session->participant_ = participant;
    session->config_ = config;

    auto sd = service_discovery_topic();
    ServerSession* raw = session.get();
    auto reader = participant->create_reader(
        sd.topic, sd.qos, [raw](const wire::Record& rec, const core::SampleInfo&) {
            auto row = services_from_record(rec);
            if (row) raw->on_services_row(row.value());
        });
    if (!reader) return reader.error();
    session->services_reader_ = std::move(reader.value());

    auto sw = announce_service(participant, ServicesRow{participant->name(), 0, 1, 0});
    if (!sw) return sw.error();
    session->services_writer_ = std::move(sw.value());
    return session;
}

void ServerSession::on_services_row(const ServicesRow& row) {
    if (row.name == participant_->name() || row.v_tc_client < 1) return;
    std::lock_guard lock(mutex_);
    if (!implements_.count(row.name)) wire_implement(row.name);
}

void ServerSession::wire_implement(uint64_t name) {
    auto state = std::make_unique<ImplementState>();
    state->name = name;
    state->partition = partition_name(name);
    ImplementState* impl = state.get();
    ServerSession* raw = this;

    auto hier = ddop_hierarchy_topic(state->partition);
    auto link = ddi_linking_topic(state->partition);
    auto hr = participant_->create_reader(hier.topic, hier.qos);
    auto lr = participant_->create_reader(link.topic, link.qos);
    if (!hr || !lr) return;
    state->hierarchy_reader = std::move(hr.value());
    state->linking_reader = std::move(lr.value());

    for (Channel ch : {Channel::BestEffort, Channel::Reliable}) {
        auto pd = pd_values_topic(ch, state->partition);
        auto w = participant_->create_writer(pd.topic, pd.qos);
        auto r = participant_->create_reader(
            pd.topic, pd.qos,
            [raw, impl, ch](const wire::Record& rec, const core::SampleInfo& info) {
                if (info.writer.prefix == raw->participant_->guid_prefix()) return;
                raw->handle_pd(*impl, rec, info, ch);
            });
        if (!w || !r) return;
        if (ch == Channel::Reliable) {
            state->pd_writer_rel = std::move(w.value());
            state->pd_reader_rel = std::move(r.value());
        } else {
            state->pd_writer_be = std::move(w.value());
            state->pd_reader_be = std::move(r.value());
        }
    }
    implements_[name] = std::move(state);
}

void ServerSession::handle_pd(ImplementState& impl, const wire::Record& rec,
                              const core::SampleInfo& info, Channel channel) {
    auto value = value_from_record(rec);
    if (!value) return;
    uint64_t sender = participant_->peer_name(info.writer.prefix).value_or(impl.name);
    ProcessValueCallback cb;
    {
        std::lock_guard lock(mutex_);
        if (impl.ddop) {
            bool known = false;
            for (const auto& row : impl.ddop->rows)
                if (row.element == value.value().element) known = true;
            if (!known) ++unknown_element_warnings_;  // accepted anyway; startup races
        }
        cb = callback_;
    }
    if (cb) cb(value.value(), sender, channel);
}

std::vector<uint64_t> ServerSession::implement_names() const {
    std::lock_guard lock(mutex_);
    std::vector<uint64_t> out;
    for (const auto& [name, impl] : implements_) out.push_back(name);
    return out;
}

Result<ServicesRow> ServerSession::await_client(uint32_t min_version, uint64_t timeout_ms) {
    return await_peer_service(
        *participant_, *services_reader_, participant_->name(),
        [min_version](const ServicesRow& r) { return r.v_tc_client >= min_version; },
        timeout_ms, config_.idle);
}

Result<Ddop> ServerSession::ddop_for(uint64_t name) {
    core::Reader hier, link;
    {
        std::lock_guard lock(mutex_);
        auto it = implements_.find(name);
        if (it == implements_.end())
            return Error{Errc::NO_PEER, "implement not discovered yet"};
        hier = *it->second->hierarchy_reader;
        link = *it->second->linking_reader;
    }
    std::vector<wire::Record> hierarchy, linking;
    for (const auto& row : hier.read_state())
        if (!row.samples.empty()) hierarchy.push_back(row.samples.front().value);
    for (const auto& row : link.read_state())
        if (!row.samples.empty()) linking.push_back(row.samples.front().value);
    auto ddop = samples_to_ddop(name, hierarchy, linking);
    if (ddop) {
        std::lock_guard lock(mutex_);
        auto it = implements_.find(name);
        if (it != implements_.end()) it->second->ddop = ddop.value();
    }
    return ddop;
}

Result<Ddop> ServerSession::await_ddop(uint64_t name, uint64_t timeout_ms) {
    uint64_t deadline = participant_->now_ms() + timeout_ms;
    for (;;) {
        auto ddop = ddop_for(name);
        if (ddop) return ddop;
        if (participant_->now_ms() >= deadline)
            return Error{Errc::TIMEOUT, "DDOP incomplete: " + ddop.error().to_string()};
        config_.idle(10);
    }
}

Result<uint64_t> ServerSession::send_process_value(uint64_t implement_name,
                                                   const ProcessValue& value) {
    return send_process_value(implement_name, value, config_.channel);
}

Result<uint64_t> ServerSession::send_process_value(uint64_t implement_name,
                                                   const ProcessValue& value, Channel channel) {
    core::Writer writer;
    {
        std::lock_guard lock(mutex_);
        auto it = implements_.find(implement_name);
        if (it == implements_.end())
            return Error{Errc::NO_PEER, "implement not discovered yet"};
        writer = channel == Channel::Reliable ? *it->second->pd_writer_rel
                                              : *it->second->pd_writer_be;
    }
    return writer.write(to_record(value));
}

void ServerSession::on_process_value(ProcessValueCallback cb) {
    std::lock_guard lock(mutex_);
    callback_ = std::move(cb);
}

uint64_t ServerSession::unknown_element_warnings() const {
    std::lock_guard lock(mutex_);
    return unknown_element_warnings_;
}

}  // namespace agribus::tc
