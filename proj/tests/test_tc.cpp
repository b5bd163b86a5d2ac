#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <set>

#include "agribus/core/participant.hpp"
#include "agribus/tc/protocol.hpp"
#include "agribus/transport/sim.hpp"
#include "test_util.hpp"

using namespace agribus;
using namespace agribus::tc;

namespace {

const char* kFixtureEnv = "AGRIBUS_FIXTURE103";

std::string fixture_path() {
    if (const char* p = std::getenv(kFixtureEnv)) return p;
    return std::string(FIXTURE103_PATH);
}

struct TcWorld {
    transport::SimNetwork net;
    std::vector<std::shared_ptr<core::Participant>> parts;

    TcWorld() { net.set_capture_payloads(false); }

    std::shared_ptr<core::Participant> add(uint64_t name) {
        core::ParticipantConfig cfg;
        cfg.name = name;
        cfg.guid_salt = uint32_t(parts.size() + 1);
        auto p = core::Participant::create(cfg, net.create_node(0)).value();
        parts.push_back(p);
        net.add_step_callback([p] { p->tick(); });
        return p;
    }

    IdleFn idle() {
        return [this](uint64_t ms) { net.advance(ms ? ms : 1); };
    }
};

Ddop tiny_ddop(uint64_t name) {
    Ddop d;
    d.device_name = name;
    d.rows.push_back({{name, 0}, "root", {name, 0}});
    d.rows.push_back({{name, 1}, "boom", {name, 0}});
    d.rows.push_back({{name, 2}, "section", {name, 1}});
    d.capabilities.push_back(
        {{name, 2}, HandlingGroup::ApplicationRate, {UnitAtom::Kilogram, UnitAtom::SquareMetre}});
    d.capabilities.push_back({{name, 1}, HandlingGroup::WorkState, {}});
    return d;
}

std::vector<std::string> rules_of(const std::vector<DdopIssue>& issues) {
    std::set<std::string> rules;
    for (const auto& i : issues) rules.insert(i.rule);
    return {rules.begin(), rules.end()};
}

}  // namespace

TEST_CASE("unit_text renders every atom pair canonically") {
    int checked = 0;
    for (uint32_t n = 0; n <= kUnitAtomMax; ++n) {
        for (uint32_t d = 0; d <= kUnitAtomMax; ++d) {
            Unit u{static_cast<UnitAtom>(n), static_cast<UnitAtom>(d)};
            if (!u.valid()) continue;
            std::string expected;
            if (u.denominator == UnitAtom::None)
                expected = unit_atom_symbol(u.numerator);  // "1" when dimensionless
            else
                expected = std::string(unit_atom_symbol(u.numerator)) + "/" +
                           unit_atom_symbol(u.denominator);
            CHECK(unit_text(u) == expected);
            ++checked;
        }
    }
    CHECK(checked == 73);  // 81 pairs minus the 8 invalid (None, x) combinations
    CHECK(unit_text({UnitAtom::Kilogram, UnitAtom::SquareMetre}) == "kg/m2");
    CHECK(unit_text({UnitAtom::None, UnitAtom::None}) == "1");
    CHECK(unit_text({UnitAtom::Count, UnitAtom::Second}) == "count/s");
}

TEST_CASE("pure denominators must use Count as numerator") {
    CHECK(!Unit{UnitAtom::None, UnitAtom::Second}.valid());
    CHECK(Unit{UnitAtom::Count, UnitAtom::Second}.valid());
}

TEST_CASE("the validator accepts well-formed trees") {
    CHECK(validate_ddop(tiny_ddop(0xFF0001)).empty());
    std::mt19937_64 rng(55);
    for (int i = 0; i < 50; ++i)
        CHECK(validate_ddop(testutil::random_ddop(rng, 200)).empty());
}

TEST_CASE("each defect class is flagged with its own rule") {
    auto base = tiny_ddop(0xFF0001);

    SUBCASE("zero device NAME") {
        auto d = base;
        d.device_name = 0;
        for (auto& r : d.rows) r.element.name = r.parent.name = 0;
        for (auto& c : d.capabilities) c.element.name = 0;
        auto rules = rules_of(validate_ddop(d));
        CHECK(rules == std::vector<std::string>{"BAD_NAME"});
    }
    SUBCASE("row from another device") {
        auto d = base;
        d.rows[2].element.name = 0xBEEF;
        auto rules = rules_of(validate_ddop(d));
        CHECK(std::find(rules.begin(), rules.end(), "NAME_MISMATCH") != rules.end());
    }
    SUBCASE("display name over 100 bytes") {
        auto d = base;
        d.rows[1].display_name = std::string(101, 'x');
        CHECK(rules_of(validate_ddop(d)) == std::vector<std::string>{"NAME_TOO_LONG"});
    }
    SUBCASE("duplicate element number") {
        auto d = base;
        d.rows.push_back(d.rows[2]);
        CHECK(rules_of(validate_ddop(d)) == std::vector<std::string>{"DUPLICATE_ELEMENT"});
    }
    SUBCASE("root pointing at a parent") {
        auto d = base;
        d.rows[0].parent.element_num = 1;
        auto rules = rules_of(validate_ddop(d));
        CHECK(std::find(rules.begin(), rules.end(), "BAD_ROOT") != rules.end());
    }
    SUBCASE("missing root") {
        auto d = base;
        d.rows.erase(d.rows.begin());
        auto rules = rules_of(validate_ddop(d));
        CHECK(std::find(rules.begin(), rules.end(), "SINGLE_ROOT") != rules.end());
    }
    SUBCASE("dangling parent") {
        auto d = base;
        d.rows[2].parent.element_num = 77;
        CHECK(rules_of(validate_ddop(d)) == std::vector<std::string>{"DANGLING_PARENT"});
    }
    SUBCASE("parent cycle") {
        auto d = base;
        d.rows.push_back({{d.device_name, 10}, "a", {d.device_name, 11}});
        d.rows.push_back({{d.device_name, 11}, "b", {d.device_name, 10}});
        auto rules = rules_of(validate_ddop(d));
        CHECK(std::find(rules.begin(), rules.end(), "CYCLE") != rules.end());
    }
    SUBCASE("capability on an unknown element") {
        auto d = base;
        d.capabilities[0].element.element_num = 99;
        CHECK(rules_of(validate_ddop(d)) == std::vector<std::string>{"DANGLING_CAPABILITY"});
    }
    SUBCASE("invalid unit") {
        auto d = base;
        d.capabilities[0].unit = {UnitAtom::None, UnitAtom::Second};
        CHECK(rules_of(validate_ddop(d)) == std::vector<std::string>{"BAD_UNIT"});
    }
}

TEST_CASE("random mutation: exactly the injected defect class is flagged") {
    std::mt19937_64 rng(77);
    for (int iter = 0; iter < 100; ++iter) {
        auto d = testutil::random_ddop(rng, 200);
        REQUIRE(validate_ddop(d).empty());
        switch (rng() % 4) {
            case 0: {
                d.rows[rng() % d.rows.size()].display_name = std::string(150, 'y');
                CHECK(rules_of(validate_ddop(d)) ==
                      std::vector<std::string>{"NAME_TOO_LONG"});
                break;
            }
            case 1: {
                auto copy = d.rows[1 + rng() % (d.rows.size() - 1)];
                d.rows.push_back(copy);
                CHECK(rules_of(validate_ddop(d)) ==
                      std::vector<std::string>{"DUPLICATE_ELEMENT"});
                break;
            }
            case 2: {
                size_t i = 1 + rng() % (d.rows.size() - 1);
                d.rows[i].parent.element_num = 1000000 + rng() % 100;
                CHECK(rules_of(validate_ddop(d)) ==
                      std::vector<std::string>{"DANGLING_PARENT"});
                break;
            }
            case 3: {
                d.capabilities.push_back({{d.device_name, 2000000},
                                          HandlingGroup::Speed,
                                          {UnitAtom::Metre, UnitAtom::Second}});
                CHECK(rules_of(validate_ddop(d)) ==
                      std::vector<std::string>{"DANGLING_CAPABILITY"});
                break;
            }
        }
    }
}

TEST_CASE("ddop to samples and back is lossless under shuffling") {
    std::mt19937_64 rng(31);
    for (int iter = 0; iter < 50; ++iter) {
        auto d = testutil::random_ddop(rng, 80);
        auto samples = ddop_to_samples(d);
        REQUIRE(samples);
        auto h = samples.value().hierarchy;
        auto l = samples.value().linking;
        std::shuffle(h.begin(), h.end(), rng);
        std::shuffle(l.begin(), l.end(), rng);
        auto back = samples_to_ddop(d.device_name, h, l);
        REQUIRE(back);
        CHECK(ddop_equivalent(d, back.value()));
    }
}

TEST_CASE("reconstruction reports INCOMPLETE until every parent has arrived") {
    auto d = tiny_ddop(0xFF0001);
    auto samples = ddop_to_samples(d).value();
    auto partial = samples.hierarchy;
    partial.erase(partial.begin() + 1);  // drop the boom: section's parent missing
    auto r = samples_to_ddop(d.device_name, partial, samples.linking);
    REQUIRE(!r);
    CHECK(r.error().code == Errc::INCOMPLETE);
    auto full = samples_to_ddop(d.device_name, samples.hierarchy, samples.linking);
    REQUIRE(full);
    CHECK(ddop_equivalent(d, full.value()));
}

TEST_CASE("the 103-element fixture loads, validates, and round-trips in under 10 ms") {
    auto t0 = std::chrono::steady_clock::now();
    auto d = load_ddop_json(fixture_path(), 0);
    REQUIRE(d);
    CHECK(d.value().device_name == 0xFF0001);
    CHECK(d.value().rows.size() == 103);
    CHECK(d.value().capabilities.size() == 100);
    CHECK(validate_ddop(d.value()).empty());
    auto samples = ddop_to_samples(d.value()).value();
    auto back = samples_to_ddop(0xFF0001, samples.hierarchy, samples.linking);
    REQUIRE(back);
    CHECK(ddop_equivalent(d.value(), back.value()));
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
    CHECK(elapsed < 10);
}

TEST_CASE("partition names are uppercase hex without prefix") {
    CHECK(partition_name(0xFF0001) == "FF0001");
    CHECK(partition_name(0xA5) == "A5");
    CHECK(partition_name(1) == "1");
}

TEST_CASE("frozen topic qos profiles") {
    auto sd = service_discovery_topic();
    CHECK(sd.qos.reliability == core::Reliability::Reliable);
    CHECK(sd.qos.durability == core::Durability::TransientLocal);
    CHECK(sd.qos.history_depth == 1);
    CHECK(sd.qos.partitions.empty());

    auto hier = ddop_hierarchy_topic("FF0001");
    CHECK(hier.qos.durability == core::Durability::Durable);
    CHECK(hier.qos.history == core::HistoryKind::KeepAll);
    CHECK(hier.qos.partitions == std::vector<std::string>{"FF0001"});

    auto pd_be = pd_values_topic(Channel::BestEffort, "FF0001");
    CHECK(pd_be.qos.reliability == core::Reliability::BestEffort);
    CHECK(pd_be.qos.durability == core::Durability::Volatile);
    CHECK(pd_be.qos.history_depth == 16);
    auto pd_rel = pd_values_topic(Channel::Reliable, "FF0001");
    CHECK(pd_rel.qos.reliability == core::Reliability::Reliable);
}

TEST_CASE("server reconstructs the client's DDOP and both exchange process data") {
    TcWorld w;
    auto server_p = w.add(0xA5);
    auto client_p = w.add(0xFF0001);
    SessionConfig cfg;
    cfg.idle = w.idle();

    auto server = std::move(ServerSession::start(server_p, cfg).value());
    auto ddop = tiny_ddop(0xFF0001);
    auto client = std::move(ImplementSession::start(client_p, ddop, cfg).value());

    auto found = client->await_server(1, 10000);
    REQUIRE(found);
    CHECK(found.value().name == 0xA5);
    auto seen_client = server->await_client(1, 10000);
    REQUIRE(seen_client);
    CHECK(seen_client.value().name == 0xFF0001);

    auto got = server->await_ddop(0xFF0001, 10000);
    REQUIRE(got);
    CHECK(ddop_equivalent(got.value(), ddop));

    // setpoint down, actual up, on both channels
    std::vector<std::pair<uint64_t, float>> at_client;
    client->on_process_value([&](const ProcessValue& v, uint64_t sender, Channel) {
        at_client.push_back({sender, v.value});
    });
    std::vector<std::pair<uint64_t, float>> at_server;
    server->on_process_value([&](const ProcessValue& v, uint64_t sender, Channel) {
        at_server.push_back({sender, v.value});
    });

    ProcessValue sp{{0xFF0001, 2}, HandlingGroup::ApplicationRate, HandlingFeature::Setpoint,
                    {UnitAtom::Kilogram, UnitAtom::SquareMetre}, 2.5f};
    REQUIRE(server->send_process_value(0xFF0001, sp, Channel::Reliable));
    ProcessValue act = sp;
    act.feature = HandlingFeature::Actual;
    act.value = 2.4f;
    REQUIRE(client->send_process_value(act, Channel::BestEffort));
    w.net.advance(200);

    REQUIRE(at_client.size() == 1);
    CHECK(at_client[0] == std::pair<uint64_t, float>{0xA5, 2.5f});
    REQUIRE(at_server.size() == 1);
    CHECK(at_server[0] == std::pair<uint64_t, float>{0xFF0001, 2.4f});
    CHECK(!client->conflict_detected());
}

TEST_CASE("two servers: clients pick the lowest NAME deterministically") {
    TcWorld w;
    auto s1 = w.add(0xB0);
    auto s2 = w.add(0xA0);
    auto c = w.add(0xFF0002);
    SessionConfig cfg;
    cfg.idle = w.idle();
    auto server1 = std::move(ServerSession::start(s1, cfg).value());
    auto server2 = std::move(ServerSession::start(s2, cfg).value());
    auto client = std::move(ImplementSession::start(c, tiny_ddop(0xFF0002), cfg).value());
    auto found = client->await_server(1, 10000);
    REQUIRE(found);
    CHECK(found.value().name == 0xA0);
}

TEST_CASE("await_server times out with NO_PEER when no server exists") {
    TcWorld w;
    auto c = w.add(0xFF0003);
    SessionConfig cfg;
    cfg.idle = w.idle();
    auto client = std::move(ImplementSession::start(c, tiny_ddop(0xFF0003), cfg).value());
    auto r = client->await_server(1, 1500);
    REQUIRE(!r);
    CHECK(r.error().code == Errc::NO_PEER);
}

TEST_CASE("a second DDOP publisher in the same partition raises a conflict") {
    TcWorld w;
    auto c1 = w.add(0xFF0004);
    auto c2 = w.add(0xFF0004);  // same NAME, same partition
    SessionConfig cfg;
    cfg.idle = w.idle();
    auto s1 = std::move(ImplementSession::start(c1, tiny_ddop(0xFF0004), cfg).value());
    w.net.advance(500);
    auto s2 = std::move(ImplementSession::start(c2, tiny_ddop(0xFF0004), cfg).value());
    w.net.advance(3000);
    CHECK(s1->conflict_detected());
    ProcessValue v{{0xFF0004, 2}, HandlingGroup::ApplicationRate, HandlingFeature::Actual,
                   {UnitAtom::Kilogram, UnitAtom::SquareMetre}, 1.f};
    auto r = s1->send_process_value(v);
    REQUIRE(!r);
    CHECK(r.error().code == Errc::PARTITION_CONFLICT);
}

TEST_CASE("distributed client: a pd-only participant joins without conflicting") {
    TcWorld w;
    auto server_p = w.add(0xA5);
    auto main_p = w.add(0xFF0005);
    auto aux_p = w.add(0xE0);  // second device of the same implement
    SessionConfig cfg;
    cfg.idle = w.idle();
    auto server = std::move(ServerSession::start(server_p, cfg).value());
    auto main = std::move(ImplementSession::start(main_p, tiny_ddop(0xFF0005), cfg).value());

    // the auxiliary participant publishes only process data into the
    // implement's partition: no DDOP of its own, so no conflict is raised
    SessionConfig aux_cfg = cfg;
    aux_cfg.publish_ddop = false;
    aux_cfg.implement_name = 0xFF0005;
    auto aux = std::move(ImplementSession::start(aux_p, Ddop{}, aux_cfg).value());
    CHECK(aux->name() == 0xFF0005);
    CHECK(aux->partition() == "FF0005");

    REQUIRE(server->await_client(1, 10000));
    REQUIRE(aux->await_server(1, 10000));
    REQUIRE(server->await_ddop(0xFF0005, 10000));

    std::vector<uint64_t> senders;
    server->on_process_value(
        [&](const ProcessValue&, uint64_t sender, Channel) { senders.push_back(sender); });
    ProcessValue v{{0xFF0005, 2}, HandlingGroup::ApplicationRate, HandlingFeature::Actual,
                   {UnitAtom::Kilogram, UnitAtom::SquareMetre}, 7.f};
    REQUIRE(aux->send_process_value(v));
    w.net.advance(500);

    REQUIRE(senders.size() == 1);
    CHECK(senders[0] == 0xE0);  // resolved to the aux device's NAME
    CHECK(!main->conflict_detected());
    CHECK(!aux->conflict_detected());
}
