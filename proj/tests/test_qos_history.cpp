#include <doctest.h>

#include <map>

#include "agribus/core/history.hpp"
#include "agribus/core/qos.hpp"
#include "test_util.hpp"

using namespace agribus;
using namespace agribus::core;

namespace {

QosProfile qos(Reliability r, Durability d, std::optional<uint64_t> deadline = {},
               std::vector<std::string> parts = {}) {
    QosProfile q;
    q.reliability = r;
    q.durability = d;
    q.deadline_ms = deadline;
    q.partitions = std::move(parts);
    return q;
}

wire::Guid guid(uint8_t tag, uint32_t entity = wire::kFirstUserEntityId) {
    wire::Guid g;
    g.prefix.fill(tag);
    g.entity_id = entity;
    return g;
}

}  // namespace

TEST_CASE("request-offer matching truth table") {
    auto be = Reliability::BestEffort;
    auto rel = Reliability::Reliable;
    auto vol = Durability::Volatile;
    auto tl = Durability::TransientLocal;
    auto dur = Durability::Durable;

    struct Row {
        QosProfile offered, requested;
        bool ok;
        IncompatibleReason reason;
    };
    const Row table[] = {
        // reliability: offer must meet or exceed the request
        {qos(be, vol), qos(be, vol), true, IncompatibleReason::None},
        {qos(rel, vol), qos(be, vol), true, IncompatibleReason::None},
        {qos(be, vol), qos(rel, vol), false, IncompatibleReason::Reliability},
        {qos(rel, vol), qos(rel, vol), true, IncompatibleReason::None},
        // durability ladder
        {qos(rel, vol), qos(rel, tl), false, IncompatibleReason::Durability},
        {qos(rel, tl), qos(rel, vol), true, IncompatibleReason::None},
        {qos(rel, tl), qos(rel, dur), false, IncompatibleReason::Durability},
        {qos(rel, dur), qos(rel, tl), true, IncompatibleReason::None},
        // deadline: offered period must be <= requested period
        {qos(rel, vol, 100), qos(rel, vol, 10), false, IncompatibleReason::Deadline},
        {qos(rel, vol, 10), qos(rel, vol, 100), true, IncompatibleReason::None},
        {qos(rel, vol, {}), qos(rel, vol, 10), false, IncompatibleReason::Deadline},
        {qos(rel, vol, 10), qos(rel, vol, {}), true, IncompatibleReason::None},
        // partitions: string intersection, empty set = default partition
        {qos(be, vol, {}, {"FF0001"}), qos(be, vol, {}, {"FF0001"}), true,
         IncompatibleReason::None},
        {qos(be, vol, {}, {"FF0001"}), qos(be, vol, {}, {"FF0002"}), false,
         IncompatibleReason::Partition},
        {qos(be, vol, {}, {}), qos(be, vol, {}, {"FF0001"}), false,
         IncompatibleReason::Partition},
        {qos(be, vol, {}, {"*"}), qos(be, vol, {}, {"FF0002"}), true,
         IncompatibleReason::None},
    };
    for (const auto& row : table) {
        auto m = qos_compatible(row.offered, row.requested);
        CHECK(m.compatible == row.ok);
        CHECK(m.reason == row.reason);
    }

    QosProfile shared = qos(be, vol);
    QosProfile excl = shared;
    excl.ownership = Ownership::Exclusive;
    auto m = qos_compatible(shared, excl);
    CHECK(!m.compatible);
    CHECK(m.reason == IncompatibleReason::Ownership);
    CHECK(qos_compatible(excl, excl).compatible);
}

TEST_CASE("qos encodes and decodes losslessly") {
    QosProfile q = qos(Reliability::Reliable, Durability::TransientLocal, 250,
                       {"FF0001", "FF0002"});
    q.history = HistoryKind::KeepLast;
    q.history_depth = 16;
    q.ownership = Ownership::Exclusive;
    q.ownership_strength = 9;
    ByteWriter w;
    encode_qos(w, q);
    ByteReader r(w.bytes());
    auto back = decode_qos(r);
    REQUIRE(back);
    CHECK(back.value() == q);
}

TEST_CASE("keep-last(1) keeps exactly the latest sample per key") {
    QosProfile q;
    q.history_depth = 1;
    InstanceCache cache(tc::values_type(), q);
    tc::ProcessValue v{{1, 7}, tc::HandlingGroup::Speed, tc::HandlingFeature::Actual, {}, 1.0f};
    SampleInfo info;
    info.writer = guid(1);
    for (int i = 0; i < 5; ++i) {
        v.value = float(i);
        info.sn = uint64_t(i + 1);
        info.key_hash = wire::compute_key_hash(*tc::values_type(), tc::to_record(v)).value();
        CHECK(cache.insert(tc::to_record(v), info));
    }
    auto rows = cache.rows();
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0]->samples.size() == 1);
    CHECK(rows[0]->samples.back().value == tc::to_record(v));
    CHECK(rows[0]->last_sn == 5);
}

TEST_CASE("randomized cache state equals a single-threaded replay oracle") {
    std::mt19937_64 rng(2024);
    for (uint32_t depth : {1u, 3u}) {
        QosProfile q;
        q.history_depth = depth;
        InstanceCache cache(tc::values_type(), q);
        std::map<uint64_t, std::vector<float>> oracle;  // key -> retained values
        SampleInfo info;
        info.writer = guid(2);
        for (int i = 0; i < 1000; ++i) {
            tc::ProcessValue v{{1, rng() % 100}, tc::HandlingGroup::FlowRate,
                               tc::HandlingFeature::Actual, {}, float(i)};
            info.sn = uint64_t(i + 1);
            info.key_hash =
                wire::compute_key_hash(*tc::values_type(), tc::to_record(v)).value();
            REQUIRE(cache.insert(tc::to_record(v), info));
            auto& kept = oracle[v.element.element_num];
            kept.push_back(v.value);
            if (kept.size() > depth) kept.erase(kept.begin());
        }
        auto rows = cache.rows();
        REQUIRE(rows.size() == oracle.size());
        for (const auto* row : rows) {
            auto pv = tc::value_from_record(row->samples.back().value).value();
            const auto& kept = oracle.at(pv.element.element_num);
            REQUIRE(row->samples.size() == kept.size());
            size_t i = 0;
            for (const auto& s : row->samples) {
                CHECK(tc::value_from_record(s.value).value().value == kept[i]);
                ++i;
            }
        }
    }
}

TEST_CASE("dispose clears the row's samples and marks it disposed") {
    QosProfile q;
    q.history_depth = 4;
    InstanceCache cache(tc::values_type(), q);
    tc::ProcessValue v{{1, 1}, tc::HandlingGroup::WorkState, tc::HandlingFeature::Actual,
                       {}, 1.0f};
    SampleInfo info;
    info.writer = guid(3);
    info.sn = 1;
    info.key_hash = wire::compute_key_hash(*tc::values_type(), tc::to_record(v)).value();
    CHECK(cache.insert(tc::to_record(v), info));
    info.sn = 2;
    info.dispose = true;
    CHECK(cache.insert(tc::to_record(v), info));
    CHECK(cache.rows().empty());  // disposed rows are hidden from readers
    auto& raw = cache.mutable_rows();
    REQUIRE(raw.size() == 1);
    CHECK(raw.begin()->second.disposed);
    CHECK(raw.begin()->second.samples.empty());
}

TEST_CASE("exclusive ownership: strength wins, then lower guid; losers rejected") {
    QosProfile q;
    q.ownership = Ownership::Exclusive;
    q.history_depth = 8;
    InstanceCache cache(tc::values_type(), q);
    tc::ProcessValue v{{1, 1}, tc::HandlingGroup::Speed, tc::HandlingFeature::Actual, {}, 0.f};
    auto key = wire::compute_key_hash(*tc::values_type(), tc::to_record(v)).value();

    SampleInfo low;
    low.writer = guid(5);
    low.writer_strength = 1;
    low.sn = 1;
    low.key_hash = key;
    CHECK(cache.insert(tc::to_record(v), low));  // first writer becomes owner

    SampleInfo high;
    high.writer = guid(9);
    high.writer_strength = 2;
    high.sn = 1;
    high.key_hash = key;
    CHECK(cache.insert(tc::to_record(v), high));  // stronger writer takes over

    low.sn = 2;
    CHECK(!cache.insert(tc::to_record(v), low));  // weaker writer now rejected

    SampleInfo equal;
    equal.writer = guid(3);  // lower guid, equal strength
    equal.writer_strength = 2;
    equal.sn = 1;
    equal.key_hash = key;
    CHECK(cache.insert(tc::to_record(v), equal));

    high.sn = 2;
    CHECK(!cache.insert(tc::to_record(v), high));

    cache.release_ownership(equal.writer);
    high.sn = 3;
    CHECK(cache.insert(tc::to_record(v), high));  // ownership reverts on release
}

TEST_CASE("take_new drains unread samples in arrival order exactly once") {
    QosProfile q;
    q.history_depth = 8;
    InstanceCache cache(tc::values_type(), q);
    SampleInfo info;
    info.writer = guid(6);
    for (int i = 0; i < 6; ++i) {
        tc::ProcessValue v{{1, uint64_t(i % 2)}, tc::HandlingGroup::Speed,
                           tc::HandlingFeature::Actual, {}, float(i)};
        info.sn = uint64_t(i + 1);
        info.key_hash = wire::compute_key_hash(*tc::values_type(), tc::to_record(v)).value();
        cache.insert(tc::to_record(v), info);
    }
    auto batch = cache.take_new();
    REQUIRE(batch.size() == 6);
    for (size_t i = 0; i < batch.size(); ++i)
        CHECK(tc::value_from_record(batch[i].value).value().value == float(i));
    CHECK(cache.take_new().empty());
}
