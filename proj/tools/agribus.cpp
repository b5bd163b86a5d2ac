// agribus: operator CLI — CA tooling, TC server/client, benchmark runner,
// and a network inspector.

#include <atomic>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "agribus/bench/bench.hpp"
#include "agribus/core/participant.hpp"
#include "agribus/security/documents.hpp"
#include "agribus/tc/protocol.hpp"
#include "agribus/transport/sim.hpp"
#include "agribus/transport/udp.hpp"

namespace fs = std::filesystem;
using namespace agribus;

namespace {

// Exit codes: 0 success, 2 config error, 3 security error, 4 protocol error.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSecurity = 3;
constexpr int kExitProtocol = 4;

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::CONFIG_INVALID:
        case Errc::SECURITY_CONFIG_INVALID:
        case Errc::IO_ERROR:
            return kExitConfig;
        case Errc::CERT_INVALID:
        case Errc::SIGNATURE_INVALID:
        case Errc::MAC_INVALID:
        case Errc::NONCE_REPLAYED:
        case Errc::KIND_MISMATCH:
        case Errc::PERMISSION_DENIED:
        case Errc::BAD_KEY:
            return kExitSecurity;
        default:
            return kExitProtocol;
    }
}

int fail(const Error& e) {
    std::cerr << "error: " << e.to_string() << "\n";
    return exit_code_for(e.code);
}

Result<uint64_t> parse_name(const std::string& hex) {
    if (hex.empty()) return Error{Errc::CONFIG_INVALID, "empty NAME"};
    uint64_t v = 0;
    size_t pos = 0;
    try {
        v = std::stoull(hex, &pos, 16);
    } catch (const std::exception&) {
        return Error{Errc::CONFIG_INVALID, "NAME is not hexadecimal: " + hex};
    }
    if (pos != hex.size() || v == 0)
        return Error{Errc::CONFIG_INVALID, "bad NAME (nonzero hex expected): " + hex};
    return v;
}

std::string identity_dir(const std::string& creds, uint64_t name) {
    return creds + "/" + tc::partition_name(name);
}

// --- CA tooling ---

Result<security::CertificateAuthority> load_ca(const std::string& dir) {
    auto priv = security::load_key_json(dir + "/ca_private.json", "ca_private");
    if (!priv) return priv.error();
    auto pub = security::load_key_json(dir + "/ca_public.json", "ca_public");
    if (!pub) return pub.error();
    security::CertificateAuthority ca;
    ca.keys_ = {pub.value(), priv.value()};
    ca.issuer_id_ = "agribus-root-ca";
    return ca;
}

Status ca_issue_one(const security::CertificateAuthority& ca, const std::string& dir,
                    uint64_t name, int64_t days) {
    auto keys = security::SigningKeyPair::generate();
    int64_t now = int64_t(std::time(nullptr));
    auto cert = ca.issue_identity(name, keys.public_key, now - 3600, now + days * 86400);
    if (!cert) return cert.error();
    std::string d = identity_dir(dir, name);
    fs::create_directories(d);
    auto st = security::save_json(d + "/identity.json", cert.value());
    if (!st.ok()) return st;
    return security::save_key_json(d + "/identity_key.json", "identity_private",
                                   keys.private_key);
}

Status ca_sign_permissions_one(const security::CertificateAuthority& ca,
                               const std::string& dir, uint64_t name,
                               std::vector<security::Grant> grants, int64_t days) {
    security::PermissionsDocument p;
    p.subject_name = name;
    int64_t now = int64_t(std::time(nullptr));
    p.valid_from = now - 3600;
    p.valid_to = now + days * 86400;
    p.grants = std::move(grants);
    auto st = ca.sign_permissions(p);
    if (!st.ok()) return st;
    std::string d = identity_dir(dir, name);
    fs::create_directories(d);
    return security::save_json(d + "/permissions.json", p);
}

std::vector<security::Grant> default_grants() {
    // publish + subscribe on every topic in any partition
    return {{true, security::GrantAction::Publish, "*", {"*", ""}},
            {true, security::GrantAction::Subscribe, "*", {"*", ""}}};
}

Result<std::vector<security::Grant>> load_grants(const std::string& path) {
    std::ifstream f(path);
    if (!f) return Error{Errc::IO_ERROR, "cannot open " + path};
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        return Error{Errc::CONFIG_INVALID, std::string("bad grants JSON: ") + e.what()};
    }
    std::vector<security::Grant> out;
    for (const auto& g : j) {
        security::Grant grant;
        grant.allow = g.value("allow", true);
        std::string action = g.value("action", "publish");
        if (action == "publish")
            grant.action = security::GrantAction::Publish;
        else if (action == "subscribe")
            grant.action = security::GrantAction::Subscribe;
        else
            return Error{Errc::CONFIG_INVALID, "bad grant action: " + action};
        grant.topic_pattern = g.value("topic", "*");
        if (g.contains("partitions"))
            for (const auto& p : g["partitions"]) grant.partition_patterns.push_back(p);
        out.push_back(std::move(grant));
    }
    return out;
}

Status ca_sign_governance_one(const security::CertificateAuthority& ca,
                              const std::string& dir, const std::string& profile,
                              uint32_t domain) {
    auto g = security::make_governance_profile(profile, domain);
    if (!g) return g.error();
    auto st = ca.sign_governance(g.value());
    if (!st.ok()) return st;
    return security::save_json(dir + "/governance_" + profile + ".json", g.value());
}

int cmd_ca_init(const std::string& dir, const std::string& names_csv, uint32_t domain) {
    fs::create_directories(dir);
    auto ca = security::CertificateAuthority::create();
    auto st = security::save_key_json(dir + "/ca_private.json", "ca_private", ca.private_key());
    if (st.ok())
        st = security::save_key_json(dir + "/ca_public.json", "ca_public", ca.public_key());
    if (!st.ok()) return fail(st.error());

    std::vector<uint64_t> names;
    std::stringstream ss(names_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        auto n = parse_name(tok);
        if (!n) return fail(n.error());
        names.push_back(n.value());
    }
    for (uint64_t name : names) {
        st = ca_issue_one(ca, dir, name, 3650);
        if (st.ok()) st = ca_sign_permissions_one(ca, dir, name, default_grants(), 3650);
        if (!st.ok()) return fail(st.error());
    }
    for (const char* profile : {"default", "encrypt", "sign", "none"}) {
        st = ca_sign_governance_one(ca, dir, profile, domain);
        if (!st.ok()) return fail(st.error());
    }
    std::cout << "credential set written to " << dir << " for " << names.size()
              << " identities (governance profiles: default encrypt sign none)\n";
    return kExitOk;
}

// --- credential loading for participants ---

Result<std::optional<security::SecurityConfig>> load_security(const std::string& selector,
                                                              const std::string& creds,
                                                              uint64_t name) {
    if (selector == "not-used") return std::optional<security::SecurityConfig>{};
    if (selector != "encrypt" && selector != "sign" && selector != "none" &&
        selector != "default")
        return Error{Errc::CONFIG_INVALID, "bad --security value: " + selector};
    if (creds.empty())
        return Error{Errc::CONFIG_INVALID, "--creds required unless --security not-used"};
    security::SecurityConfig cfg;
    std::string d = identity_dir(creds, name);
    auto cert = security::load_identity_json(d + "/identity.json");
    if (!cert) return cert.error();
    cfg.identity = cert.value();
    auto key = security::load_key_json(d + "/identity_key.json", "identity_private");
    if (!key) return key.error();
    cfg.identity_private_key = key.value();
    auto perms = security::load_permissions_json(d + "/permissions.json");
    if (!perms) return perms.error();
    cfg.permissions = perms.value();
    auto gov = security::load_governance_json(creds + "/governance_" + selector + ".json");
    if (!gov) return gov.error();
    cfg.governance = gov.value();
    auto ca = security::load_key_json(creds + "/ca_public.json", "ca_public");
    if (!ca) return ca.error();
    cfg.ca_public_key = ca.value();
    auto st = cfg.validate(name, int64_t(std::time(nullptr)));
    if (!st.ok()) return st.error();
    return std::optional<security::SecurityConfig>{std::move(cfg)};
}

struct CommonFlags {
    uint32_t domain = 0;
    std::string name_hex;
    std::string creds;
    std::string security = "not-used";
    std::string channel = "best-effort";
    std::string ddop;
    std::string log;
    bool sim = false;
    uint64_t seed = 1;
    double loss = 0.0;
    uint64_t duration_s = 0;  // 0 = run until SIGINT
};

void add_common_flags(CLI::App* app, CommonFlags& f) {
    app->add_option("--domain", f.domain, "domain id");
    app->add_option("--name", f.name_hex, "64-bit device NAME, hex");
    app->add_option("--creds", f.creds, "credential directory");
    app->add_option("--security", f.security, "encrypt|sign|none|not-used")
        ->check(CLI::IsMember({"encrypt", "sign", "none", "default", "not-used"}));
    app->add_option("--channel", f.channel, "best-effort|reliable")
        ->check(CLI::IsMember({"best-effort", "reliable"}));
    app->add_option("--ddop", f.ddop, "DDOP JSON file");
    app->add_option("--log", f.log, "log/CSV output path");
    app->add_flag("--sim", f.sim, "use the in-process simulated transport");
    app->add_option("--seed", f.seed, "simulator RNG seed");
    app->add_option("--loss", f.loss, "simulator loss probability");
    app->add_option("--duration", f.duration_s, "run time in seconds (0 = until SIGINT)");
}

tc::Channel parse_channel(const std::string& s) {
    return s == "reliable" ? tc::Channel::Reliable : tc::Channel::BestEffort;
}

Result<std::shared_ptr<core::Participant>> make_participant(const CommonFlags& f,
                                                            uint64_t name) {
    auto sec = load_security(f.security, f.creds, name);
    if (!sec) return sec.error();
    core::ParticipantConfig cfg;
    cfg.domain_id = f.domain;
    cfg.name = name;
    cfg.security = sec.value();
    transport::TransportConfig tcfg;
    tcfg.domain_id = f.domain;
    auto transport = transport::UdpTransport::open(tcfg);
    if (!transport) return transport.error();
    auto p = core::Participant::create(cfg, transport.value());
    if (!p) return p;
    p.value()->start();
    return p;
}

// --- tc-server ---

int cmd_tc_server(const CommonFlags& f) {
    auto name = parse_name(f.name_hex.empty() ? "A5" : f.name_hex);
    if (!name) return fail(name.error());
    auto participant = make_participant(f, name.value());
    if (!participant) return fail(participant.error());

    tc::SessionConfig scfg;
    scfg.channel = parse_channel(f.channel);
    auto server = tc::ServerSession::start(participant.value(), scfg);
    if (!server) return fail(server.error());
    std::cout << "tc-server " << tc::partition_name(name.value()) << " up on domain "
              << f.domain << "\n";

    std::atomic<uint64_t> pd_count{0};
    server.value()->on_process_value(
        [&](const tc::ProcessValue&, uint64_t, tc::Channel) { ++pd_count; });

    std::set<uint64_t> reported;
    uint64_t end = participant.value()->now_ms() + f.duration_s * 1000;
    while (!g_stop && (f.duration_s == 0 || participant.value()->now_ms() < end)) {
        for (uint64_t impl : server.value()->implement_names()) {
            if (reported.count(impl)) continue;
            auto ddop = server.value()->ddop_for(impl);
            if (ddop) {
                std::cout << "reconstructed DDOP for implement "
                          << tc::partition_name(impl) << ": " << ddop.value().rows.size()
                          << " elements, " << ddop.value().capabilities.size()
                          << " capabilities\n"
                          << std::flush;
                reported.insert(impl);
            }
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    std::cout << "tc-server shutting down; process values received: " << pd_count << "\n";
    participant.value()->stop();
    return kExitOk;
}

// --- tc-client ---

int cmd_tc_client(const CommonFlags& f) {
    if (f.ddop.empty()) {
        std::cerr << "error: tc-client requires --ddop FILE\n";
        return kExitConfig;
    }
    uint64_t flag_name = 0;
    if (!f.name_hex.empty()) {
        auto n = parse_name(f.name_hex);
        if (!n) return fail(n.error());
        flag_name = n.value();
    }
    auto ddop = tc::load_ddop_json(f.ddop, flag_name);
    if (!ddop) return fail(ddop.error());
    uint64_t name = ddop.value().device_name;
    auto participant = make_participant(f, name);
    if (!participant) return fail(participant.error());

    tc::SessionConfig scfg;
    scfg.channel = parse_channel(f.channel);
    auto session = tc::ImplementSession::start(participant.value(), ddop.value(), scfg);
    if (!session) return fail(session.error());
    std::cout << "tc-client " << tc::partition_name(name) << " announced "
              << ddop.value().rows.size() << " elements in partition "
              << session.value()->partition() << "\n";

    auto server = session.value()->await_server(1, f.duration_s ? f.duration_s * 1000 : 30000);
    if (!server) return fail(server.error());
    std::cout << "discovered TC server " << tc::partition_name(server.value().name) << "\n";

    // report an Actual for the first capability once per 100 ms
    tc::ProcessValue pv;
    if (!ddop.value().capabilities.empty()) {
        const auto& cap = ddop.value().capabilities.front();
        pv = {cap.element, cap.group, tc::HandlingFeature::Actual, cap.unit, 0.0f};
    } else {
        pv = {{name, 0}, tc::HandlingGroup::WorkState, tc::HandlingFeature::Actual, {}, 0.0f};
    }
    uint64_t sent = 0;
    uint64_t end = participant.value()->now_ms() + f.duration_s * 1000;
    while (!g_stop && (f.duration_s == 0 || participant.value()->now_ms() < end)) {
        pv.value += 1.0f;
        auto sn = session.value()->send_process_value(pv);
        if (!sn) {
            participant.value()->stop();
            return fail(sn.error());
        }
        ++sent;
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    std::cout << "tc-client shutting down; process values sent: " << sent << "\n";
    participant.value()->stop();
    return kExitOk;
}

// --- bench ---

tc::Ddop bench_ddop(uint64_t name) {
    tc::Ddop d;
    d.device_name = name;
    d.rows.push_back({{name, 0}, "bench", {name, 0}});
    d.capabilities.push_back(
        {{name, 0}, tc::HandlingGroup::ApplicationRate,
         {tc::UnitAtom::Kilogram, tc::UnitAtom::SquareMetre}});
    return d;
}

int cmd_bench(const CommonFlags& f, uint32_t rate) {
    uint64_t server_name = 0xA5, impl_name = 0xF1;
    if (!f.name_hex.empty()) {
        auto n = parse_name(f.name_hex);
        if (!n) return fail(n.error());
        impl_name = n.value();
    }

    bench::BenchConfig cfg;
    cfg.channel = parse_channel(f.channel);
    cfg.security = f.security == "encrypt" ? bench::SecurityMode::Encrypt
                   : f.security == "sign"  ? bench::SecurityMode::Sign
                   : f.security == "none"  ? bench::SecurityMode::None
                                           : bench::SecurityMode::NotUsed;
    cfg.log_path = f.log.empty() ? "bench.csv" : f.log;
    cfg.rate = rate;

    // both roles hosted in this process, over loopback UDP or the simulator
    std::shared_ptr<core::Participant> sp, ip;
    tc::IdleFn idle;
    std::shared_ptr<transport::SimNetwork> net;
    auto build = [&](uint64_t name) -> Result<std::shared_ptr<core::Participant>> {
        auto sec = load_security(f.security, f.creds, name);
        if (!sec) return sec.error();
        core::ParticipantConfig pcfg;
        pcfg.domain_id = f.domain;
        pcfg.name = name;
        pcfg.security = sec.value();
        std::shared_ptr<transport::Transport> tr;
        if (f.sim) {
            tr = net->create_node(f.domain);
        } else {
            transport::TransportConfig tcfg;
            tcfg.domain_id = f.domain;
            auto udp = transport::UdpTransport::open(tcfg);
            if (!udp) return udp.error();
            tr = udp.value();
        }
        auto p = core::Participant::create(pcfg, tr);
        if (!p) return p;
        if (!f.sim) p.value()->start();
        return p;
    };

    if (f.sim) {
        transport::SimNetworkConfig ncfg;
        ncfg.seed = f.seed;
        ncfg.loss_probability = f.loss;
        net = std::make_shared<transport::SimNetwork>(ncfg);
        net->set_capture_payloads(false);
        idle = [&](uint64_t ms) { net->advance(ms ? ms : 1); };
    } else {
        idle = [](uint64_t ms) {
            std::this_thread::sleep_for(std::chrono::milliseconds(ms));
        };
    }

    auto spr = build(server_name);
    if (!spr) return fail(spr.error());
    sp = spr.value();
    auto ipr = build(impl_name);
    if (!ipr) return fail(ipr.error());
    ip = ipr.value();
    if (f.sim) {
        net->add_step_callback([sp] { sp->tick(); });
        net->add_step_callback([ip] { ip->tick(); });
    }

    tc::SessionConfig scfg;
    scfg.channel = cfg.channel;
    scfg.idle = idle;
    auto server = tc::ServerSession::start(sp, scfg);
    if (!server) return fail(server.error());
    auto impl = tc::ImplementSession::start(ip, bench_ddop(impl_name), scfg);
    if (!impl) return fail(impl.error());

    auto found = impl.value()->await_server(1, 15000);
    if (!found) return fail(found.error());

    bench::BenchIo sio{
        [&](const tc::ProcessValue& v) {
            return server.value()->send_process_value(impl_name, v, cfg.channel);
        },
        [&](tc::ProcessValueCallback cb) { server.value()->on_process_value(std::move(cb)); },
        [&] { return sp->now_ms(); }, idle, server_name};
    bench::BenchIo iio{
        [&](const tc::ProcessValue& v) {
            return impl.value()->send_process_value(v, cfg.channel);
        },
        [&](tc::ProcessValueCallback cb) { impl.value()->on_process_value(std::move(cb)); },
        [&] { return ip->now_ms(); }, idle, impl_name};

    auto records = bench::run_bench_duplex(cfg, sio, iio);
    if (!records) {
        sp->stop();
        ip->stop();
        return fail(records.error());
    }
    auto summaries = bench::summarize(records.value());
    auto st = bench::write_summary(summaries, cfg.log_path + ".summary");
    if (!st.ok()) return fail(st.error());
    for (const auto& s : summaries)
        std::cout << s.config << " " << s.channel << ": mean " << s.mean
                  << " samples/s, stdev " << s.stdev << " over " << s.buckets
                  << " buckets\n";
    std::cout << "records written to " << cfg.log_path << "\n";
    sp->stop();
    ip->stop();
    return kExitOk;
}

// --- inspect ---

int cmd_inspect(const CommonFlags& f) {
    auto name = parse_name(f.name_hex.empty() ? "1A" : f.name_hex);
    if (!name) return fail(name.error());
    auto participant = make_participant(f, name.value());
    if (!participant) return fail(participant.error());
    uint64_t watch_ms = f.duration_s ? f.duration_s * 1000 : 3000;
    uint64_t end = participant.value()->now_ms() + watch_ms;
    while (!g_stop && participant.value()->now_ms() < end)
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    std::string dump = participant.value()->dump_json();
    if (!f.log.empty()) {
        std::ofstream out(f.log);
        out << dump << "\n";
    }
    std::cout << dump << "\n";
    participant.value()->stop();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    CLI::App app{"agribus: pub-sub middleware and agricultural task-controller tools"};
    app.require_subcommand(1);

    // ca
    auto* ca = app.add_subcommand("ca", "certificate authority tooling");
    ca->require_subcommand(1);
    std::string ca_dir = "creds", ca_names = "A5,F1", ca_profile = "default",
                ca_name_hex, ca_grants;
    uint32_t ca_domain = 0;
    int64_t ca_days = 3650;
    auto* ca_init = ca->add_subcommand("init", "create CA plus a full credential set");
    ca_init->add_option("--out", ca_dir, "output directory");
    ca_init->add_option("--names", ca_names, "comma-separated hex NAMEs to issue");
    ca_init->add_option("--domain", ca_domain, "domain id for governance");
    auto* ca_issue = ca->add_subcommand("issue", "issue one identity");
    ca_issue->add_option("--out", ca_dir, "credential directory");
    ca_issue->add_option("--name", ca_name_hex, "hex NAME")->required();
    ca_issue->add_option("--days", ca_days, "validity in days");
    auto* ca_gov = ca->add_subcommand("sign-governance", "sign a governance profile");
    ca_gov->add_option("--out", ca_dir, "credential directory");
    ca_gov->add_option("--profile", ca_profile, "default|encrypt|sign|none")->required();
    ca_gov->add_option("--domain", ca_domain, "domain id");
    auto* ca_perm = ca->add_subcommand("sign-permissions", "sign a permissions document");
    ca_perm->add_option("--out", ca_dir, "credential directory");
    ca_perm->add_option("--name", ca_name_hex, "hex NAME")->required();
    ca_perm->add_option("--grants", ca_grants, "grants JSON file (default: allow all)");
    ca_perm->add_option("--days", ca_days, "validity in days");

    CommonFlags server_f, client_f, bench_f, inspect_f;
    auto* server = app.add_subcommand("tc-server", "run a task-controller server");
    add_common_flags(server, server_f);
    auto* client = app.add_subcommand("tc-client", "run an implement (TC client)");
    add_common_flags(client, client_f);
    auto* bench = app.add_subcommand("bench", "run the throughput benchmark (both roles)");
    add_common_flags(bench, bench_f);
    uint32_t bench_rate = 0;
    bench->add_option("--rate", bench_rate, "paced samples/s (0 = saturating)");
    auto* inspect = app.add_subcommand("inspect", "dump the live domain graph as JSON");
    add_common_flags(inspect, inspect_f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (ca_init->parsed()) return cmd_ca_init(ca_dir, ca_names, ca_domain);
        if (ca_issue->parsed() || ca_perm->parsed() || ca_gov->parsed()) {
            auto loaded = load_ca(ca_dir);
            if (!loaded) return fail(loaded.error());
            if (ca_gov->parsed()) {
                auto st = ca_sign_governance_one(loaded.value(), ca_dir, ca_profile, ca_domain);
                if (!st.ok()) return fail(st.error());
                std::cout << "governance_" << ca_profile << ".json written\n";
                return kExitOk;
            }
            auto name = parse_name(ca_name_hex);
            if (!name) return fail(name.error());
            if (ca_issue->parsed()) {
                auto st = ca_issue_one(loaded.value(), ca_dir, name.value(), ca_days);
                if (!st.ok()) return fail(st.error());
                std::cout << "identity for " << tc::partition_name(name.value())
                          << " written\n";
                return kExitOk;
            }
            std::vector<security::Grant> grants = default_grants();
            if (!ca_grants.empty()) {
                auto g = load_grants(ca_grants);
                if (!g) return fail(g.error());
                grants = g.value();
            }
            auto st = ca_sign_permissions_one(loaded.value(), ca_dir, name.value(),
                                              std::move(grants), ca_days);
            if (!st.ok()) return fail(st.error());
            std::cout << "permissions for " << tc::partition_name(name.value())
                      << " written\n";
            return kExitOk;
        }
        if (server->parsed()) return cmd_tc_server(server_f);
        if (client->parsed()) return cmd_tc_client(client_f);
        if (bench->parsed()) return cmd_bench(bench_f, bench_rate);
        if (inspect->parsed()) return cmd_inspect(inspect_f);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProtocol;
    }
    return kExitConfig;
}
