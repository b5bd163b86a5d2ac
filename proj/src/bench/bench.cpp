#include "agribus/bench/bench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

namespace agribus::bench {

const char* role_name(Role r) { return r == Role::Server ? "server" : "implement"; }

const char* security_mode_name(SecurityMode m) {
    switch (m) {
        case SecurityMode::Encrypt: return "ENCRYPT";
        case SecurityMode::Sign: return "SIGN";
        case SecurityMode::None: return "NONE";
        case SecurityMode::NotUsed: return "NOT_USED";
    }
    return "?";
}

const char* channel_name(tc::Channel c) {
    return c == tc::Channel::Reliable ? "reliable" : "best_effort";
}

SendLoop::SendLoop(Role role, uint64_t device_name, uint32_t element_count)
    : element_count_(element_count ? element_count : 100) {
    current_.element.name = device_name;
    current_.element.element_num = 0;
    current_.group = tc::HandlingGroup::ApplicationRate;
    current_.feature =
        role == Role::Server ? tc::HandlingFeature::Setpoint : tc::HandlingFeature::Actual;
    current_.unit = {tc::UnitAtom::Kilogram, tc::UnitAtom::SquareMetre};
    current_.value = 0.0f;
}

tc::ProcessValue SendLoop::next() {
    current_.value += 1.0f;
    current_.element.element_num += 1;
    if (current_.element.element_num == element_count_) current_.element.element_num = 0;
    ++sent_;
    return current_;
}

Receiver::Receiver(const BenchConfig& config, uint64_t start_ms)
    : config_(config), start_ms_(start_ms) {}

void Receiver::on_sample(uint64_t sender_name, uint64_t now_ms) {
    if (!first_sample_ms_) {
        first_sample_ms_ = now_ms;
        return;  // the first sample itself falls inside the warmup window
    }
    uint64_t warmup_end = *first_sample_ms_ + uint64_t(config_.warmup_s) * 1000;
    uint64_t measure_end = warmup_end + uint64_t(config_.measure_s) * 1000;
    if (now_ms < warmup_end || now_ms >= measure_end) return;
    size_t bucket = size_t((now_ms - warmup_end) / 1000);
    auto& counts = buckets_[sender_name];
    if (counts.empty()) counts.assign(config_.measure_s, 0);
    ++counts[bucket];
}

bool Receiver::finished(uint64_t now_ms) const {
    if (!first_sample_ms_) return false;
    return now_ms >= *first_sample_ms_ +
                         uint64_t(config_.warmup_s + config_.measure_s + config_.cooldown_s) *
                             1000;
}

bool Receiver::no_traffic(uint64_t now_ms) const {
    return !first_sample_ms_ && now_ms >= start_ms_ + 30000;
}

Result<std::vector<BenchRecord>> Receiver::records() const {
    if (!first_sample_ms_) return Error{Errc::NO_TRAFFIC, "no samples received"};
    std::vector<BenchRecord> out;
    for (const auto& [sender, counts] : buckets_) {
        for (uint32_t i = 0; i < counts.size(); ++i) {
            BenchRecord rec;
            rec.config = config_.config_label();
            rec.channel = channel_name(config_.channel);
            rec.role = role_name(config_.role);
            rec.sender_name = sender;
            rec.timestep = i + 1;
            rec.samples = counts[i];
            out.push_back(std::move(rec));
        }
    }
    return out;
}

Result<std::vector<BenchRecord>> run_bench(const BenchConfig& config, const BenchIo& io) {
    std::mutex mutex;
    Receiver receiver(config, io.now_ms());
    io.set_callback([&](const tc::ProcessValue&, uint64_t sender, tc::Channel ch) {
        if (ch != config.channel) return;  // other topics are not counted
        std::lock_guard lock(mutex);
        receiver.on_sample(sender, io.now_ms());
    });

    SendLoop loop(config.role, io.self_name, config.element_count);
    uint64_t next_send_ms = io.now_ms();
    double send_interval = config.rate ? 1000.0 / config.rate : 0.0;
    double send_credit = 0.0;

    for (;;) {
        uint64_t now = io.now_ms();
        {
            std::lock_guard lock(mutex);
            if (receiver.finished(now)) break;
            if (receiver.no_traffic(now))
                return Error{Errc::NO_TRAFFIC, "no samples within 30 s"};
        }
        if (config.rate) {
            if (now < next_send_ms) {
                io.idle(next_send_ms - now);
                continue;
            }
            io.send(loop.next());
            send_credit += send_interval;
            uint64_t whole = uint64_t(send_credit);
            send_credit -= double(whole);
            next_send_ms += whole;
        } else {
            io.send(loop.next());
            if (io.idle) io.idle(0);  // sim transports flush queued traffic here
        }
    }
    io.set_callback(nullptr);
    std::lock_guard lock(mutex);
    auto records = receiver.records();
    if (records && !config.log_path.empty()) {
        auto st = write_csv(records.value(), config.log_path);
        if (!st.ok()) return st.error();
    }
    return records;
}

Result<std::vector<BenchRecord>> run_bench_duplex(const BenchConfig& config,
                                                  const BenchIo& server,
                                                  const BenchIo& implement) {
    std::mutex mutex;
    BenchConfig server_cfg = config;
    server_cfg.role = Role::Server;
    BenchConfig impl_cfg = config;
    impl_cfg.role = Role::Implement;
    Receiver server_rx(server_cfg, server.now_ms());
    Receiver impl_rx(impl_cfg, implement.now_ms());

    server.set_callback([&](const tc::ProcessValue&, uint64_t sender, tc::Channel ch) {
        if (ch != config.channel) return;
        std::lock_guard lock(mutex);
        server_rx.on_sample(sender, server.now_ms());
    });
    implement.set_callback([&](const tc::ProcessValue&, uint64_t sender, tc::Channel ch) {
        if (ch != config.channel) return;
        std::lock_guard lock(mutex);
        impl_rx.on_sample(sender, implement.now_ms());
    });

    SendLoop server_loop(Role::Server, server.self_name, config.element_count);
    SendLoop impl_loop(Role::Implement, implement.self_name, config.element_count);
    uint64_t next_send_ms = server.now_ms();
    double send_interval = config.rate ? 1000.0 / config.rate : 0.0;
    double send_credit = 0.0;

    for (;;) {
        uint64_t now = server.now_ms();
        {
            std::lock_guard lock(mutex);
            if (server_rx.finished(now) && impl_rx.finished(implement.now_ms())) break;
            if (server_rx.no_traffic(now) || impl_rx.no_traffic(implement.now_ms()))
                return Error{Errc::NO_TRAFFIC, "no samples within 30 s"};
        }
        if (config.rate && now < next_send_ms) {
            server.idle(next_send_ms - now);
            continue;
        }
        server.send(server_loop.next());
        implement.send(impl_loop.next());
        if (config.rate) {
            send_credit += send_interval;
            uint64_t whole = uint64_t(send_credit);
            send_credit -= double(whole);
            next_send_ms += whole;
        } else if (server.idle) {
            server.idle(0);
        }
    }
    server.set_callback(nullptr);
    implement.set_callback(nullptr);
    std::lock_guard lock(mutex);
    auto a = server_rx.records();
    auto b = impl_rx.records();
    if (!a) return a;
    if (!b) return b;
    std::vector<BenchRecord> out = std::move(a.value());
    out.insert(out.end(), b.value().begin(), b.value().end());
    if (!config.log_path.empty()) {
        auto st = write_csv(out, config.log_path);
        if (!st.ok()) return st.error();
    }
    return out;
}

std::vector<Summary> summarize(const std::vector<BenchRecord>& records) {
    std::map<std::pair<std::string, std::string>, std::vector<uint64_t>> groups;
    for (const auto& r : records) groups[{r.config, r.channel}].push_back(r.samples);
    std::vector<Summary> out;
    for (const auto& [key, counts] : groups) {
        Summary s;
        s.config = key.first;
        s.channel = key.second;
        s.buckets = counts.size();
        double sum = 0.0;
        for (auto c : counts) sum += double(c);
        s.mean = sum / double(counts.size());
        double var = 0.0;
        for (auto c : counts) var += (double(c) - s.mean) * (double(c) - s.mean);
        s.stdev = counts.size() > 1 ? std::sqrt(var / double(counts.size() - 1)) : 0.0;
        out.push_back(std::move(s));
    }
    return out;
}

Status write_csv(const std::vector<BenchRecord>& records, const std::string& path) {
    std::ofstream f(path);
    if (!f) return Error{Errc::IO_ERROR, "cannot open " + path};
    f << "config,channel,role,sender_name,timestep,samples\n";
    for (const auto& r : records)
        f << r.config << ',' << r.channel << ',' << r.role << ',' << tc::partition_name(r.sender_name)
          << ',' << r.timestep << ',' << r.samples << '\n';
    if (!f.good()) return Error{Errc::IO_ERROR, "write failed: " + path};
    return Status::success();
}

Result<std::vector<BenchRecord>> read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) return Error{Errc::IO_ERROR, "cannot open " + path};
    std::string line;
    if (!std::getline(f, line) || line != "config,channel,role,sender_name,timestep,samples")
        return Error{Errc::IO_ERROR, "bad CSV header in " + path};
    std::vector<BenchRecord> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        BenchRecord r;
        std::string name, timestep, samples;
        if (!std::getline(ss, r.config, ',') || !std::getline(ss, r.channel, ',') ||
            !std::getline(ss, r.role, ',') || !std::getline(ss, name, ',') ||
            !std::getline(ss, timestep, ',') || !std::getline(ss, samples))
            return Error{Errc::IO_ERROR, "bad CSV row: " + line};
        r.sender_name = std::stoull(name, nullptr, 16);
        r.timestep = uint32_t(std::stoul(timestep));
        r.samples = std::stoull(samples);
        out.push_back(std::move(r));
    }
    return out;
}

Status write_summary(const std::vector<Summary>& summaries, const std::string& path) {
    std::ofstream f(path);
    if (!f) return Error{Errc::IO_ERROR, "cannot open " + path};
    f << "# config channel mean stdev buckets\n";
    for (const auto& s : summaries)
        f << s.config << ' ' << s.channel << ' ' << s.mean << ' ' << s.stdev << ' ' << s.buckets
          << '\n';
    if (!f.good()) return Error{Errc::IO_ERROR, "write failed: " + path};
    return Status::success();
}

}  // namespace agribus::bench
