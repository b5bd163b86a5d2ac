#pragma once

#include <functional>
#include <map>
#include <optional>

#include "agribus/tc/protocol.hpp"

namespace agribus::bench {

enum class Role { Server, Implement };
enum class SecurityMode { Encrypt, Sign, None, NotUsed };

const char* role_name(Role r);                   // "server" / "implement"
const char* security_mode_name(SecurityMode m);  // "ENCRYPT" / "SIGN" / "NONE" / "NOT_USED"
const char* channel_name(tc::Channel c);         // "best_effort" / "reliable"

struct BenchConfig {
    Role role = Role::Implement;
    tc::Channel channel = tc::Channel::BestEffort;
    SecurityMode security = SecurityMode::NotUsed;
    uint32_t element_count = 100;
    uint32_t warmup_s = 2;
    uint32_t measure_s = 10;
    uint32_t cooldown_s = 2;
    std::string log_path;
    uint32_t rate = 0;  // samples/s pacing; 0 = saturating

    std::string config_label() const { return security_mode_name(security); }
};

struct BenchRecord {
    std::string config;
    std::string channel;
    std::string role;
    uint64_t sender_name = 0;
    uint32_t timestep = 0;  // 1..measure_s
    uint64_t samples = 0;

    bool operator==(const BenchRecord&) const = default;
};

/// The cyclic send loop's value generator: one shared counter value,
/// element_num incrementing with wraparound to zero at element_count.
class SendLoop {
  public:
    SendLoop(Role role, uint64_t device_name, uint32_t element_count = 100);
    tc::ProcessValue next();
    uint64_t sent() const { return sent_; }

  private:
    tc::ProcessValue current_;
    uint32_t element_count_;
    uint64_t sent_ = 0;
};

/// Receive-side phase accounting. Feed every arriving process-data sample;
/// the timer starts at the first one. Samples during the warmup and cooldown
/// phases are ignored; the measurement phase fills one bucket per second per
/// sender, half-open [t, t+1).
class Receiver {
  public:
    Receiver(const BenchConfig& config, uint64_t start_ms);

    void on_sample(uint64_t sender_name, uint64_t now_ms);

    /// Measurement plus cooldown finished (requires a first sample).
    bool finished(uint64_t now_ms) const;
    /// No first sample within 30 s of start.
    bool no_traffic(uint64_t now_ms) const;

    Result<std::vector<BenchRecord>> records() const;

  private:
    BenchConfig config_;
    uint64_t start_ms_;
    std::optional<uint64_t> first_sample_ms_;
    std::map<uint64_t, std::vector<uint64_t>> buckets_;  // sender -> per-second counts
};

/// Hooks the benchmark onto a running session without binding to its type.
struct BenchIo {
    std::function<Result<uint64_t>(const tc::ProcessValue&)> send;
    std::function<void(tc::ProcessValueCallback)> set_callback;
    std::function<uint64_t()> now_ms;
    tc::IdleFn idle;
    uint64_t self_name = 0;
};

/// Runs the send loop and receive counting concurrently until the receiver
/// completes; returns the per-second records. NO_TRAFFIC after 30 s silence.
Result<std::vector<BenchRecord>> run_bench(const BenchConfig& config, const BenchIo& io);

/// Single-process variant driving both roles: each loop iteration sends one
/// sample per side; each side's receiver counts the other's traffic. The
/// config's role field is ignored; records carry the counting side's role.
Result<std::vector<BenchRecord>> run_bench_duplex(const BenchConfig& config,
                                                  const BenchIo& server,
                                                  const BenchIo& implement);

struct Summary {
    std::string config;
    std::string channel;
    double mean = 0.0;
    double stdev = 0.0;
    uint64_t buckets = 0;
};

/// Mean and sample standard deviation of bucket counts per (config, channel).
std::vector<Summary> summarize(const std::vector<BenchRecord>& records);

/// CSV with header `config,channel,role,sender_name,timestep,samples`.
Status write_csv(const std::vector<BenchRecord>& records, const std::string& path);
Result<std::vector<BenchRecord>> read_csv(const std::string& path);

/// Gnuplot-compatible data file: `config channel mean stdev` per line.
Status write_summary(const std::vector<Summary>& summaries, const std::string& path);

}  // namespace agribus::bench
