#pragma once

#include "agribus/wire/types.hpp"

namespace agribus::wire {

inline constexpr char kProtocolMagic[4] = {'A', 'G', 'R', 'B'};
inline constexpr uint8_t kVersionMajor = 1;
inline constexpr uint8_t kVersionMinor = 0;

enum class SubmessageKind : uint8_t {
    Data = 1,
    Heartbeat = 2,
    AckNack = 3,
    ParticipantAnnounce = 4,
    EndpointAnnounce = 5,
    Handshake = 6,
    SecureEnvelope = 7,
};

struct Submessage {
    uint8_t kind = 0;  // raw on the wire so unknown kinds survive framing
    uint8_t flags = 0;
    Bytes body;

    bool operator==(const Submessage&) const = default;
};

struct Message {
    GuidPrefix sender{};
    std::vector<Submessage> submessages;

    bool operator==(const Message&) const = default;
};

Bytes encode_message(const Message& m);
Result<Message> decode_message(std::span<const uint8_t> bytes);

// --- submessage payloads ---

// flag bits for Data
inline constexpr uint8_t kDataFlagDispose = 0x01;

struct DataSub {
    Guid writer;
    SequenceNumber sn;
    KeyHash key_hash{};
    bool dispose = false;
    Bytes payload;

    Submessage to_submessage() const;
    static Result<DataSub> parse(const Submessage& s);
};

struct HeartbeatSub {
    Guid writer;
    SequenceNumber first;  // oldest retained
    SequenceNumber last;   // newest written
    uint32_t count = 0;

    Submessage to_submessage() const;
    static Result<HeartbeatSub> parse(const Submessage& s);
};

struct AckNackSub {
    Guid reader;
    Guid writer;
    SequenceNumber base;            // everything below base is acknowledged
    std::vector<uint64_t> missing;  // explicit list of missing sequence numbers >= base

    Submessage to_submessage() const;
    static Result<AckNackSub> parse(const Submessage& s);
};

void write_guid(ByteWriter& w, const Guid& g);
Result<Guid> read_guid(ByteReader& r);

}  // namespace agribus::wire
