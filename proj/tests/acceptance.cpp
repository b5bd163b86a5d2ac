// Acceptance harness: runs the ten release criteria and prints one PASS/FAIL
// line per criterion. argv[1] = path to the agribus CLI, argv[2] = path to
// the 103-element DDOP fixture.

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "agribus/bench/bench.hpp"
#include "agribus/core/participant.hpp"
#include "agribus/tc/protocol.hpp"
#include "agribus/transport/sim.hpp"
#include "test_util.hpp"

using namespace agribus;

namespace {

std::string g_cli;
std::string g_fixture;
int g_failures = 0;

void report(bool ok, const std::string& what) {
    std::printf("%s: %s\n", ok ? "PASS" : "FAIL", what.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

// --- subprocess helpers ---

pid_t spawn(const std::vector<std::string>& args, const std::string& log_path) {
    pid_t pid = fork();
    if (pid != 0) return pid;
    int fd = open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
        dup2(fd, STDOUT_FILENO);
        dup2(fd, STDERR_FILENO);
        close(fd);
    }
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    execv(argv[0], argv.data());
    _exit(127);
}

int wait_exit(pid_t pid, int timeout_s) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(timeout_s);
    for (;;) {
        int status = 0;
        pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            return -1;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
}

void terminate(pid_t pid) {
    if (pid <= 0) return;
    kill(pid, SIGTERM);
    if (wait_exit(pid, 3) == -1) {}  // escalated to SIGKILL inside
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

bool wait_for_text(const std::string& path, const std::string& needle, int timeout_ms) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        if (slurp(path).find(needle) != std::string::npos) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    return false;
}

// --- in-process sim scaffolding ---

struct Node {
    std::shared_ptr<transport::SimTransport> transport;
    std::shared_ptr<core::Participant> participant;
};

struct World {
    transport::SimNetwork net;
    std::vector<std::shared_ptr<Node>> nodes;

    explicit World(transport::SimNetworkConfig cfg = {}) : net(cfg) {
        net.set_capture_payloads(false);
    }

    std::shared_ptr<Node> add(uint64_t name,
                              std::optional<security::SecurityConfig> sec = {}) {
        auto node = std::make_shared<Node>();
        node->transport = net.create_node(0);
        core::ParticipantConfig cfg;
        cfg.name = name;
        cfg.security = std::move(sec);
        cfg.guid_salt = uint32_t(nodes.size() + 1);
        node->participant = core::Participant::create(cfg, node->transport).value();
        nodes.push_back(node);
        net.add_step_callback([node] { node->participant->tick(); });
        return node;
    }

    tc::IdleFn idle() {
        return [this](uint64_t ms) { net.advance(ms ? ms : 1); };
    }
};

struct Creds {
    security::CertificateAuthority ca = security::CertificateAuthority::create();
    security::GovernanceDocument governance;

    explicit Creds(const std::string& profile = "default", uint32_t domain = 0) {
        governance = security::make_governance_profile(profile, domain).value();
        (void)ca.sign_governance(governance);
    }

    security::SecurityConfig issue(uint64_t name) const {
        auto keys = security::SigningKeyPair::generate();
        int64_t now = int64_t(std::time(nullptr));
        security::SecurityConfig cfg;
        cfg.identity = ca.issue_identity(name, keys.public_key, now - 3600, now + 86400).value();
        cfg.identity_private_key = keys.private_key;
        security::PermissionsDocument p;
        p.subject_name = name;
        p.valid_from = now - 3600;
        p.valid_to = now + 86400;
        p.grants.push_back({true, security::GrantAction::Publish, "*", {"*", ""}});
        p.grants.push_back({true, security::GrantAction::Subscribe, "*", {"*", ""}});
        (void)ca.sign_permissions(p);
        cfg.permissions = p;
        cfg.governance = governance;
        cfg.ca_public_key = ca.public_key();
        return cfg;
    }
};

core::TopicDescriptor pd_topic() {
    core::TopicDescriptor t;
    t.name = "t_test_values";
    t.type = tc::values_type();
    return t;
}

wire::Record pv(uint64_t elem, float value) {
    return tc::to_record(tc::ProcessValue{
        {1, elem}, tc::HandlingGroup::Speed, tc::HandlingFeature::Actual, {}, value});
}

// --- criterion 1: plug-and-play over loopback, both start orders ---

bool plug_and_play(bool server_first, uint32_t domain) {
    std::string dom = std::to_string(domain);
    std::string slog = "/tmp/acc1_server_" + dom + ".log";
    std::string clog = "/tmp/acc1_client_" + dom + ".log";
    std::vector<std::string> server_args{g_cli, "tc-server", "--domain", dom};
    std::vector<std::string> client_args{g_cli, "tc-client", "--domain", dom,
                                         "--ddop", g_fixture};
    pid_t first = spawn(server_first ? server_args : client_args, server_first ? slog : clog);
    std::this_thread::sleep_for(std::chrono::milliseconds(500));
    pid_t second = spawn(server_first ? client_args : server_args, server_first ? clog : slog);
    bool ok = wait_for_text(slog, ": 103 elements, 100 capabilities", 5000);
    terminate(first);
    terminate(second);
    return ok;
}

void criterion_1() {
    bool ok = plug_and_play(true, 81) && plug_and_play(false, 82);
    report(ok, "1. plug-and-play: server reconstructs the 103-element DDOP within 5 s "
               "in both start orders");
}

// --- criterion 2: security-configuration throughput ordering ---

void criterion_2() {
    std::string creds = "/tmp/acc2_creds";
    std::filesystem::remove_all(creds);
    pid_t ca = spawn({g_cli, "ca", "init", "--out", creds, "--names", "A5,F1",
                      "--domain", "83"},
                     "/tmp/acc2_ca.log");
    if (wait_exit(ca, 30) != 0) {
        report(false, "2. security ordering: credential setup failed");
        return;
    }
    std::map<std::string, double> mean;
    bool ran = true;
    for (std::string mode : {"not-used", "none", "sign", "encrypt"}) {
        std::string csv = "/tmp/acc2_" + mode + ".csv";
        std::vector<std::string> args{g_cli,        "bench", "--domain", "83",
                                      "--channel",  "best-effort", "--security", mode,
                                      "--log",      csv};
        if (mode != "not-used") {
            args.push_back("--creds");
            args.push_back(creds);
        }
        if (wait_exit(spawn(args, csv + ".log"), 120) != 0) {
            ran = false;
            break;
        }
        auto records = bench::read_csv(csv);
        if (!records || records.value().empty()) {
            ran = false;
            break;
        }
        auto sums = bench::summarize(records.value());
        if (sums.size() != 1) {
            ran = false;
            break;
        }
        mean[sums[0].config] = sums[0].mean;
    }
    bool ok = ran && mean.size() == 4;
    if (ok) {
        double nu = mean["NOT_USED"], no = mean["NONE"], si = mean["SIGN"], en = mean["ENCRYPT"];
        ok = std::fabs(nu - no) <= 0.10 * std::max(nu, no) && si >= en && no > en &&
             nu >= 4000.0;
    }
    report(ok, "2. security ordering: NOT_USED~NONE within 10%, SIGN>=ENCRYPT, "
               "NONE>ENCRYPT, NOT_USED>=4000 samples/s on loopback");
}

// --- criterion 3: reliable delivery under loss 0.3 with reordering ---

void criterion_3() {
    transport::SimNetworkConfig ncfg;
    ncfg.loss_probability = 0.3;
    ncfg.delay_min_ms = 0;
    ncfg.delay_max_ms = 20;
    ncfg.reorder = true;
    ncfg.seed = 7;
    World w(ncfg);
    auto a = w.add(0xA1);
    auto b = w.add(0xB2);
    core::QosProfile qos;
    qos.reliability = core::Reliability::Reliable;
    qos.history = core::HistoryKind::KeepAll;

    std::vector<uint64_t> got;
    auto reader = b->participant
                      ->create_reader(pd_topic(), qos,
                                      [&](const wire::Record& rec, const core::SampleInfo&) {
                                          auto v = tc::value_from_record(rec);
                                          if (v) got.push_back(uint64_t(v.value().value));
                                      })
                      .value();
    auto writer = a->participant->create_writer(pd_topic(), qos).value();
    w.net.advance(1500);

    const uint64_t kTotal = 10000;
    for (uint64_t i = 0; i < kTotal; ++i) {
        (void)writer.write(pv(1, float(i)));
        if (i % 25 == 0) w.net.advance(5);
    }
    for (int spin = 0; spin < 600 && got.size() < kTotal; ++spin) w.net.advance(100);

    bool ok = got.size() == kTotal;
    for (uint64_t i = 0; ok && i < kTotal; ++i) ok = got[i] == i;
    report(ok, "3. reliable delivery: 10,000 samples arrive complete and in order "
               "under 30% loss with reordering");
}

// --- criterion 4: qos matching truth table vs hand oracle ---

void criterion_4() {
    using core::Durability;
    using core::QosProfile;
    using core::Reliability;
    struct DeadlineCase {
        std::optional<uint64_t> offered, requested;
    };
    const Reliability rel[2] = {Reliability::BestEffort, Reliability::Reliable};
    const Durability dur[3] = {Durability::Volatile, Durability::TransientLocal,
                               Durability::Durable};
    const DeadlineCase dl[3] = {{{}, {}}, {10, 100}, {100, 10}};
    const std::pair<std::vector<std::string>, std::vector<std::string>> part[3] = {
        {{}, {}}, {{"A"}, {"A"}}, {{"A"}, {"B"}}};

    bool ok = true;
    int checked = 0;
    for (auto ro : rel)
        for (auto rr : rel)
            for (auto doff : dur)
                for (auto dreq : dur)
                    for (const auto& d : dl)
                        for (const auto& p : part) {
                            QosProfile offered, requested;
                            offered.reliability = ro;
                            requested.reliability = rr;
                            offered.durability = doff;
                            requested.durability = dreq;
                            offered.deadline_ms = d.offered;
                            requested.deadline_ms = d.requested;
                            offered.partitions = p.first;
                            requested.partitions = p.second;
                            // hand oracle: offer >= request on every axis,
                            // partitions must share a name
                            bool exp = uint8_t(ro) >= uint8_t(rr) &&
                                       uint8_t(doff) >= uint8_t(dreq) &&
                                       (!d.requested ||
                                        (d.offered && *d.offered <= *d.requested)) &&
                                       p.first == p.second;
                            auto got = core::qos_compatible(offered, requested);
                            if (got.compatible != exp) ok = false;
                            if (exp && got.reason != core::IncompatibleReason::None)
                                ok = false;
                            ++checked;
                        }
    // the deadline pairing called out in the requirements
    QosProfile o, r;
    o.deadline_ms = 100;
    r.deadline_ms = 10;
    auto m = core::qos_compatible(o, r);
    if (m.compatible || m.reason != core::IncompatibleReason::Deadline) ok = false;
    ok = ok && checked == 324;
    report(ok, "4. qos matching: full lattice agrees with the hand-written oracle, "
               "including the 100 ms offer vs 10 ms request deadline rejection");
}

// --- criterion 5: partition isolation between two implements ---

void criterion_5() {
    World w;
    auto sp = w.add(0xA5);
    auto ap = w.add(0xFF0001);
    auto bp = w.add(0xFF0002);
    tc::SessionConfig cfg;
    cfg.idle = w.idle();

    auto mk_ddop = [](uint64_t name) {
        tc::Ddop d;
        d.device_name = name;
        d.rows.push_back({{name, 0}, "root", {name, 0}});
        d.capabilities.push_back({{name, 0},
                                  tc::HandlingGroup::ApplicationRate,
                                  {tc::UnitAtom::Kilogram, tc::UnitAtom::SquareMetre}});
        return d;
    };
    auto server = std::move(tc::ServerSession::start(sp->participant, cfg).value());
    auto ia = std::move(tc::ImplementSession::start(ap->participant, mk_ddop(0xFF0001), cfg).value());
    auto ib = std::move(tc::ImplementSession::start(bp->participant, mk_ddop(0xFF0002), cfg).value());

    std::set<uint64_t> seen_a, seen_b, seen_server;
    ia->on_process_value(
        [&](const tc::ProcessValue&, uint64_t sender, tc::Channel) { seen_a.insert(sender); });
    ib->on_process_value(
        [&](const tc::ProcessValue&, uint64_t sender, tc::Channel) { seen_b.insert(sender); });
    server->on_process_value([&](const tc::ProcessValue&, uint64_t sender, tc::Channel) {
        seen_server.insert(sender);
    });

    // an extra cache on B's partition to audit writers directly
    auto spec = tc::pd_values_topic(tc::Channel::BestEffort, "FF0002");
    auto audit = bp->participant->create_reader(spec.topic, spec.qos).value();

    bool ok = bool(ia->await_server(1, 10000)) && bool(ib->await_server(1, 10000)) &&
              bool(server->await_ddop(0xFF0001, 10000)) &&
              bool(server->await_ddop(0xFF0002, 10000));

    for (int i = 0; ok && i < 50; ++i) {
        tc::ProcessValue spv{{0xFF0001, 0},
                             tc::HandlingGroup::ApplicationRate,
                             tc::HandlingFeature::Setpoint,
                             {tc::UnitAtom::Kilogram, tc::UnitAtom::SquareMetre},
                             float(i)};
        ok = ok && bool(server->send_process_value(0xFF0001, spv));
        spv.element.name = 0xFF0002;
        ok = ok && bool(server->send_process_value(0xFF0002, spv));
        spv.feature = tc::HandlingFeature::Actual;
        spv.element.name = 0xFF0001;
        ok = ok && bool(ia->send_process_value(spv));
        spv.element.name = 0xFF0002;
        ok = ok && bool(ib->send_process_value(spv));
        w.net.advance(10);
    }
    w.net.advance(500);

    ok = ok && seen_a == std::set<uint64_t>{0xA5} && seen_b == std::set<uint64_t>{0xA5} &&
         seen_server == std::set<uint64_t>{0xFF0001, 0xFF0002};
    for (const auto& row : audit.read_state())
        for (const auto& s : row.samples) {
            auto who = bp->participant->peer_name(s.info.writer.prefix);
            bool local = s.info.writer.prefix == bp->participant->guid_prefix();
            if (!local && (!who || (*who != 0xA5 && *who != 0xFF0002))) ok = false;
            if (who && *who == 0xFF0001) ok = false;
        }
    report(ok, "5. partition isolation: zero samples cross between the FF0001 and "
               "FF0002 partitions");
}

// --- criterion 6: black-channel tamper rejection ---

struct CacheShape {
    std::vector<std::tuple<wire::KeyHash, uint64_t, size_t>> rows;
    bool operator==(const CacheShape&) const = default;
};

CacheShape shape_of(const core::Reader& r) {
    CacheShape s;
    for (const auto& row : r.read_state())
        s.rows.push_back({row.key_hash, row.last_sn, row.samples.size()});
    return s;
}

void criterion_6() {
    Creds creds("default");
    World w;
    auto a = w.add(0xA1, creds.issue(0xA1));
    auto b = w.add(0xB2, creds.issue(0xB2));
    core::QosProfile qos;
    qos.reliability = core::Reliability::Reliable;
    qos.history = core::HistoryKind::KeepAll;
    auto reader = b->participant->create_reader(pd_topic(), qos).value();
    auto writer = a->participant->create_writer(pd_topic(), qos).value();
    w.net.advance(3000);  // authenticate and match

    w.net.set_capture_payloads(true);
    w.net.clear_trace();
    for (int i = 0; i < 300; ++i) {
        (void)writer.write(pv(1, float(i)));
        w.net.advance(2);
    }
    w.net.advance(500);
    w.net.set_capture_payloads(false);

    // corpus: protected unicast datagrams delivered to B
    uint32_t b_node = b->transport->node_id();
    std::vector<Bytes> corpus;
    for (const auto& e : w.net.trace()) {
        if (e.dropped || e.multicast || e.to_node != b_node || e.bytes.empty()) continue;
        auto msg = wire::decode_message(e.bytes);
        if (!msg) continue;
        bool all_env = !msg.value().submessages.empty();
        for (const auto& s : msg.value().submessages)
            if (s.kind != uint8_t(wire::SubmessageKind::SecureEnvelope)) all_env = false;
        if (all_env) corpus.push_back(e.bytes);
    }

    bool ok = corpus.size() >= 100 && reader.read_state().size() == 1;
    auto before_shape = shape_of(reader);
    auto before = b->participant->security_stats();

    std::mt19937_64 rng(42);
    const uint64_t kMutations = 10000;
    for (uint64_t i = 0; i < kMutations && ok; ++i) {
        Bytes bytes = corpus[rng() % corpus.size()];
        size_t bit = rng() % (bytes.size() * 8);
        bytes[bit / 8] ^= uint8_t(1u << (bit % 8));
        w.net.inject(b_node, std::move(bytes));
        if (i % 100 == 99) w.net.advance(1);
    }
    w.net.advance(10);

    auto after = b->participant->security_stats();
    uint64_t rejected = after.total_rejected() - before.total_rejected();
    ok = ok && rejected == kMutations && shape_of(reader) == before_shape;
    report(ok, "6. tamper rejection: 10,000 single-bit mutations all rejected, "
               "topic cache untouched");
}

// --- criterion 7: unauthenticated exclusion ---

void criterion_7() {
    Creds creds("default");
    World w;
    auto secure = w.add(0xA1, creds.issue(0xA1));
    auto rogue = w.add(0xB2);  // no CA-signed identity
    core::QosProfile qos;
    auto wtr = secure->participant->create_writer(pd_topic(), qos).value();
    auto rdr = rogue->participant->create_reader(pd_topic(), qos).value();
    w.net.advance(5000);
    bool ok = secure->participant->matched_endpoint_count() == 0 &&
              rogue->participant->matched_endpoint_count() == 0 &&
              secure->participant->security_stats().unauthenticated_ignored > 0;
    report(ok, "7. unauthenticated exclusion: a peer without CA-signed identity gets "
               "zero endpoint matches");
}

// --- criterion 8: instance matrix vs replay oracle ---

void criterion_8() {
    World w;
    auto a = w.add(0xA1);
    auto b = w.add(0xB2);
    core::QosProfile qos;
    qos.reliability = core::Reliability::Reliable;
    qos.history = core::HistoryKind::KeepLast;
    qos.history_depth = 1;
    auto reader = b->participant->create_reader(pd_topic(), qos).value();
    auto writer = a->participant->create_writer(pd_topic(), qos).value();
    w.net.advance(1500);

    std::mt19937_64 rng(99);
    std::map<uint64_t, wire::Record> oracle;  // key -> last write
    for (int i = 0; i < 1000; ++i) {
        uint64_t key = rng() % 100;
        std::uniform_real_distribution<float> d(-1e3f, 1e3f);
        auto rec = pv(key, d(rng));
        (void)writer.write(rec);
        oracle[key] = rec;
        if (i % 50 == 0) w.net.advance(10);
    }
    w.net.advance(2000);

    auto rows = reader.read_state();
    bool ok = rows.size() == oracle.size();
    for (const auto& row : rows) {
        if (row.samples.size() != 1) ok = false;
        if (!ok) break;
        auto v = tc::value_from_record(row.samples[0].value);
        if (!v || !oracle.count(v.value().element.element_num) ||
            oracle[v.value().element.element_num] != row.samples[0].value)
            ok = false;
    }
    report(ok, "8. instance matrix: 1,000 writes over 100 keys with KEEP_LAST(1) "
               "match the replay oracle exactly");
}

// --- criterion 9: benchmark phase accounting at a scripted rate ---

void criterion_9() {
    // self-wired loopback on a virtual clock
    uint64_t clock = 0;
    tc::ProcessValueCallback cb;
    bench::BenchIo io;
    io.self_name = 0xF1;
    io.now_ms = [&] { return clock; };
    io.idle = [&](uint64_t ms) { clock += ms ? ms : 1; };
    io.set_callback = [&](tc::ProcessValueCallback c) { cb = std::move(c); };
    io.send = [&](const tc::ProcessValue& v) -> Result<uint64_t> {
        if (cb) cb(v, 0xF1, tc::Channel::BestEffort);
        return uint64_t(0);
    };
    bench::BenchConfig cfg;
    cfg.rate = 500;
    cfg.warmup_s = 2;
    cfg.measure_s = 10;
    cfg.cooldown_s = 2;
    auto records = bench::run_bench(cfg, io);
    bool ok = records && records.value().size() == 10;
    if (ok)
        for (const auto& r : records.value())
            if (r.samples < 499 || r.samples > 501) ok = false;
    report(ok, "9. benchmark accounting: a scripted 500 samples/s sender yields ten "
               "buckets of 500 +/- 1");
}

// --- criterion 10: wire round-trip fuzz ---

void criterion_10() {
    std::mt19937_64 rng(2024);
    auto types = testutil::all_tc_types();
    bool ok = true;
    for (int i = 0; ok && i < 100000; ++i) {
        const auto& type = *types[rng() % types.size()];
        auto rec = testutil::random_record(type, rng);
        auto bytes = wire::encode_sample(type, rec);
        if (!bytes) {
            ok = false;
            break;
        }
        auto back = wire::decode_sample(type, bytes.value());
        if (!back || back.value() != rec) ok = false;
    }
    for (int i = 0; ok && i < 100000; ++i) {
        const auto& type = *types[rng() % types.size()];
        Bytes junk(rng() % 256);
        for (auto& c : junk) c = uint8_t(rng());
        (void)wire::decode_sample(type, junk);  // must not crash; errors are fine
    }
    report(ok, "10. wire fuzz: 100,000 round-trips are identity and 100,000 random "
               "buffers never crash the decoder");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: acceptance <agribus-cli> <fixture103.json>\n");
        return 2;
    }
    g_cli = argv[1];
    g_fixture = argv[2];

    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();

    if (g_failures) std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures ? 1 : 0;
}
