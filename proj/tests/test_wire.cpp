#include <doctest.h>

#include "agribus/wire/codec.hpp"
#include "agribus/wire/message.hpp"
#include "test_util.hpp"

using namespace agribus;
using namespace agribus::wire;

TEST_CASE("device element encodes to 16 little-endian bytes") {
    Record elem{uint64_t{0xFF0001}, uint64_t{100}};
    auto bytes = encode_sample(*tc::device_element_type(), elem);
    REQUIRE(bytes);
    const auto& b = bytes.value();
    REQUIRE(b.size() == 16);
    CHECK(b[0] == 0x01);
    CHECK(b[1] == 0x00);
    CHECK(b[2] == 0xFF);
    for (size_t i = 3; i < 8; ++i) CHECK(b[i] == 0);
    CHECK(b[8] == 100);
    for (size_t i = 9; i < 16; ++i) CHECK(b[i] == 0);
}

TEST_CASE("hierarchy row round-trips with display name and parent") {
    tc::HierarchyRow row{{0xFF0001, 100}, "Main Boom", {0xFF0001, 0}};
    auto bytes = encode_sample(*tc::hierarchy_type(), tc::to_record(row));
    REQUIRE(bytes);
    auto decoded = decode_sample(*tc::hierarchy_type(), bytes.value());
    REQUIRE(decoded);
    auto back = tc::hierarchy_from_record(decoded.value());
    REQUIRE(back);
    CHECK(back.value().display_name == "Main Boom");
    CHECK(back.value().parent.element_num == 0);
    CHECK(back.value() == row);
}

TEST_CASE("process value round-trips exactly") {
    tc::ProcessValue v{{0xFF0001, 100},
                       tc::HandlingGroup::WorkingHeight,
                       tc::HandlingFeature::Setpoint,
                       {tc::UnitAtom::Metre, tc::UnitAtom::None},
                       1.5f};
    auto bytes = encode_sample(*tc::values_type(), tc::to_record(v));
    REQUIRE(bytes);
    auto decoded = decode_sample(*tc::values_type(), bytes.value());
    REQUIRE(decoded);
    auto back = tc::value_from_record(decoded.value());
    REQUIRE(back);
    CHECK(back.value() == v);
}

TEST_CASE("random round-trip identity over every declared type") {
    std::mt19937_64 rng(42);
    for (const auto& type : testutil::all_tc_types()) {
        for (int i = 0; i < 2000; ++i) {
            auto rec = testutil::random_record(*type, rng);
            auto bytes = encode_sample(*type, rec);
            REQUIRE(bytes);
            auto back = decode_sample(*type, bytes.value());
            REQUIRE(back);
            CHECK(back.value() == rec);
        }
    }
}

TEST_CASE("decoding errors are structured, never out-of-bounds") {
    auto type = tc::values_type();

    SUBCASE("empty buffer is TRUNCATED") {
        auto r = decode_sample(*type, std::span<const uint8_t>{});
        REQUIRE(!r);
        CHECK(r.error().code == Errc::TRUNCATED);
    }

    SUBCASE("every strict prefix of a valid encoding is TRUNCATED") {
        std::mt19937_64 rng(7);
        auto rec = testutil::random_record(*type, rng);
        auto bytes = encode_sample(*type, rec).value();
        for (size_t len = 0; len < bytes.size(); ++len) {
            auto r = decode_sample(*type, std::span(bytes.data(), len));
            REQUIRE(!r);
            CHECK(r.error().code == Errc::TRUNCATED);
        }
    }

    SUBCASE("out-of-range enum ordinal is BAD_ENUM_ORDINAL") {
        tc::ProcessValue v{{1, 2}, tc::HandlingGroup::Speed, tc::HandlingFeature::Actual,
                           {}, 0.0f};
        auto bytes = encode_sample(*type, tc::to_record(v)).value();
        // handling_feature is the second top-level field after the nested key
        // (16 bytes) and handling_group (4 bytes)
        bytes[20] = 0x0F;
        bytes[21] = 0x27;  // 9999
        auto r = decode_sample(*type, bytes);
        REQUIRE(!r);
        CHECK(r.error().code == Errc::BAD_ENUM_ORDINAL);
    }

    SUBCASE("over-long text is TEXT_TOO_LONG on encode") {
        tc::HierarchyRow row{{1, 1}, std::string(101, 'x'), {1, 0}};
        auto r = encode_sample(*tc::hierarchy_type(), tc::to_record(row));
        REQUIRE(!r);
        CHECK(r.error().code == Errc::TEXT_TOO_LONG);
    }

    SUBCASE("invalid UTF-8 rejected") {
        tc::HierarchyRow row{{1, 1}, std::string("\xff\xfe"), {1, 0}};
        auto r = encode_sample(*tc::hierarchy_type(), tc::to_record(row));
        REQUIRE(!r);
        CHECK(r.error().code == Errc::BAD_UTF8);
    }
}

TEST_CASE("key hash depends only on key fields") {
    auto type = tc::values_type();
    tc::ProcessValue a{{0xFF0001, 201}, tc::HandlingGroup::ApplicationRate,
                       tc::HandlingFeature::Setpoint,
                       {tc::UnitAtom::Kilogram, tc::UnitAtom::SquareMetre}, 1.0f};
    tc::ProcessValue b = a;
    b.value = 99.0f;
    b.feature = tc::HandlingFeature::Actual;
    auto ha = compute_key_hash(*type, tc::to_record(a));
    auto hb = compute_key_hash(*type, tc::to_record(b));
    REQUIRE(ha);
    REQUIRE(hb);
    CHECK(ha.value() == hb.value());

    tc::ProcessValue c = a;
    c.element.element_num = 202;
    auto hc = compute_key_hash(*type, tc::to_record(c));
    REQUIRE(hc);
    CHECK(ha.value() != hc.value());
}

TEST_CASE("services-row key hash golden vector") {
    auto rec = tc::to_record(tc::ServicesRow{0xFF0001, 1, 0, 0});
    auto h = compute_key_hash(*tc::services_type(), rec);
    REQUIRE(h);
    const KeyHash expected{0xa9, 0x40, 0x3f, 0xd9, 0x8b, 0xb3, 0xd2, 0x32,
                           0xe3, 0xe5, 0x95, 0xc4, 0xcd, 0xfa, 0xf5, 0x81};
    CHECK(h.value() == expected);
}

TEST_CASE("keyless type yields NO_KEY_FIELDS") {
    TypeDescriptor t;
    t.name = "keyless";
    t.fields.push_back({"x", FieldKind::U64, false, 0, 0, nullptr});
    auto r = compute_key_hash(t, Record{Value{uint64_t{1}}});
    REQUIRE(!r);
    CHECK(r.error().code == Errc::NO_KEY_FIELDS);
}

TEST_CASE("message framing round-trips ordered submessages, unknown kinds survive") {
    Message m;
    m.sender = GuidPrefix{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};

    DataSub d;
    d.writer = {m.sender, kFirstUserEntityId};
    d.sn = {7};
    d.key_hash = KeyHash{0xAA};
    d.dispose = true;
    d.payload = {1, 2, 3};
    m.submessages.push_back(d.to_submessage());

    HeartbeatSub hb;
    hb.writer = d.writer;
    hb.first = {1};
    hb.last = {7};
    hb.count = 3;
    m.submessages.push_back(hb.to_submessage());

    AckNackSub an;
    an.reader = {m.sender, kFirstUserEntityId + 1};
    an.writer = d.writer;
    an.base = {5};
    an.missing = {5, 6};
    m.submessages.push_back(an.to_submessage());

    m.submessages.push_back(Submessage{0xEE, 0, Bytes{9, 9, 9}});  // unknown kind

    auto bytes = encode_message(m);
    auto back = decode_message(bytes);
    REQUIRE(back);
    CHECK(back.value() == m);

    auto d2 = DataSub::parse(back.value().submessages[0]);
    REQUIRE(d2);
    CHECK(d2.value().dispose);
    CHECK(d2.value().payload == d.payload);
    auto hb2 = HeartbeatSub::parse(back.value().submessages[1]);
    REQUIRE(hb2);
    CHECK(hb2.value().last.value == 7);
    auto an2 = AckNackSub::parse(back.value().submessages[2]);
    REQUIRE(an2);
    CHECK(an2.value().missing == an.missing);
}

TEST_CASE("bad magic rejected; random bytes never crash the decoders") {
    Bytes junk{'X', 'X', 'X', 'X', 1, 0};
    auto r = decode_message(junk);
    REQUIRE(!r);
    CHECK(r.error().code == Errc::BAD_MAGIC);

    std::mt19937_64 rng(1234);
    auto types = testutil::all_tc_types();
    for (int i = 0; i < 5000; ++i) {
        std::uniform_int_distribution<size_t> len(0, 128);
        Bytes b(len(rng));
        for (auto& x : b) x = uint8_t(rng());
        decode_message(b);
        decode_sample(*types[i % types.size()], b);
    }
}
