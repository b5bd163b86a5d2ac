#pragma once

#include "agribus/wire/types.hpp"

namespace agribus::wire {

/// Deterministic little-endian encoding of a record in declaration order.
/// Text is length-prefixed UTF-8 with a declared maximum, enums are 32-bit
/// unsigned ordinals, nested records are inlined.
Result<Bytes> encode_sample(const TypeDescriptor& type, const Record& value);

/// Inverse of encode_sample; never reads past the buffer.
Result<Record> decode_sample(const TypeDescriptor& type, std::span<const uint8_t> bytes);

/// 16-byte digest over the concatenated encoded key fields only.
Result<KeyHash> compute_key_hash(const TypeDescriptor& type, const Record& value);

}  // namespace agribus::wire
