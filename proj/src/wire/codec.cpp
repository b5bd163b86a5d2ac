#include "agribus/wire/codec.hpp"

#include <openssl/sha.h>

namespace agribus::wire {

namespace {

Status encode_field(const FieldDescriptor& fd, const Value& val, ByteWriter& w) {
    switch (fd.kind) {
    case FieldKind::U64:
        if (!std::holds_alternative<uint64_t>(val.v)) return {Errc::TYPE_MISMATCH, fd.name};
        w.u64(val.as_u64());
        return Status::success();
    case FieldKind::U32:
    case FieldKind::Enum:
        if (!std::holds_alternative<uint32_t>(val.v)) return {Errc::TYPE_MISMATCH, fd.name};
        if (fd.kind == FieldKind::Enum && val.as_u32() > fd.enum_max)
            return {Errc::BAD_ENUM_ORDINAL, fd.name};
        w.u32(val.as_u32());
        return Status::success();
    case FieldKind::F32:
        if (!std::holds_alternative<float>(val.v)) return {Errc::TYPE_MISMATCH, fd.name};
        w.f32(val.as_f32());
        return Status::success();
    case FieldKind::Text: {
        if (!std::holds_alternative<std::string>(val.v)) return {Errc::TYPE_MISMATCH, fd.name};
        const std::string& s = val.as_text();
        if (s.size() > fd.text_max) return {Errc::TEXT_TOO_LONG, fd.name};
        if (!is_valid_utf8({reinterpret_cast<const uint8_t*>(s.data()), s.size()}))
            return {Errc::BAD_UTF8, fd.name};
        w.text(s);
        return Status::success();
    }
    case FieldKind::Nested: {
        if (!std::holds_alternative<std::vector<Value>>(val.v))
            return {Errc::TYPE_MISMATCH, fd.name};
        const auto& rec = val.as_record();
        if (rec.size() != fd.nested->fields.size()) return {Errc::TYPE_MISMATCH, fd.name};
        for (size_t i = 0; i < rec.size(); ++i) {
            if (auto st = encode_field(fd.nested->fields[i], rec[i], w); !st) return st;
        }
        return Status::success();
    }
    }
    return {Errc::TYPE_MISMATCH, fd.name};
}

Result<Value> decode_field(const FieldDescriptor& fd, ByteReader& r) {
    switch (fd.kind) {
    case FieldKind::U64: {
        auto v = r.u64();
        if (!v) return v.error();
        return Value(v.value());
    }
    case FieldKind::U32: {
        auto v = r.u32();
        if (!v) return v.error();
        return Value(v.value());
    }
    case FieldKind::Enum: {
        auto v = r.u32();
        if (!v) return v.error();
        if (v.value() > fd.enum_max) return Error{Errc::BAD_ENUM_ORDINAL, fd.name};
        return Value(v.value());
    }
    case FieldKind::F32: {
        auto v = r.f32();
        if (!v) return v.error();
        return Value(v.value());
    }
    case FieldKind::Text: {
        auto b = r.blob();
        if (!b) return b.error();
        if (b.value().size() > fd.text_max) return Error{Errc::TEXT_TOO_LONG, fd.name};
        if (!is_valid_utf8(b.value())) return Error{Errc::BAD_UTF8, fd.name};
        return Value(std::string(b.value().begin(), b.value().end()));
    }
    case FieldKind::Nested: {
        Record rec;
        rec.reserve(fd.nested->fields.size());
        for (const auto& nf : fd.nested->fields) {
            auto v = decode_field(nf, r);
            if (!v) return v.error();
            rec.push_back(std::move(v.value()));
        }
        return Value(std::move(rec));
    }
    }
    return Error{Errc::TYPE_MISMATCH, fd.name};
}

std::array<uint8_t, 16> digest16(std::span<const uint8_t> data) {
    uint8_t full[SHA256_DIGEST_LENGTH];
    SHA256(data.data(), data.size(), full);
    std::array<uint8_t, 16> out;
    std::copy_n(full, 16, out.begin());
    return out;
}

void describe(const TypeDescriptor& t, ByteWriter& w) {
    w.text(t.name);
    w.u32(static_cast<uint32_t>(t.fields.size()));
    for (const auto& f : t.fields) {
        w.text(f.name);
        w.u8(static_cast<uint8_t>(f.kind));
        w.u8(f.is_key ? 1 : 0);
        w.u32(f.enum_max);
        w.u32(f.text_max);
        if (f.kind == FieldKind::Nested) describe(*f.nested, w);
    }
}

}  // namespace

std::array<uint8_t, 16> TypeDescriptor::digest() const {
    ByteWriter w;
    describe(*this, w);
    return digest16(w.bytes());
}

Result<Bytes> encode_sample(const TypeDescriptor& type, const Record& value) {
    if (value.size() != type.fields.size())
        return Error{Errc::TYPE_MISMATCH, "field count mismatch for " + type.name};
    ByteWriter w;
    for (size_t i = 0; i < value.size(); ++i) {
        if (auto st = encode_field(type.fields[i], value[i], w); !st) return st.error();
    }
    return w.take();
}

Result<Record> decode_sample(const TypeDescriptor& type, std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    Record rec;
    rec.reserve(type.fields.size());
    for (const auto& fd : type.fields) {
        auto v = decode_field(fd, r);
        if (!v) return v.error();
        rec.push_back(std::move(v.value()));
    }
    return rec;
}

Result<KeyHash> compute_key_hash(const TypeDescriptor& type, const Record& value) {
    if (!type.has_key()) return Error{Errc::NO_KEY_FIELDS, type.name};
    if (value.size() != type.fields.size())
        return Error{Errc::TYPE_MISMATCH, "field count mismatch for " + type.name};
    ByteWriter w;
    for (size_t i = 0; i < value.size(); ++i) {
        if (!type.fields[i].is_key) continue;
        if (auto st = encode_field(type.fields[i], value[i], w); !st) return st.error();
    }
    return digest16(w.bytes());
}

Guid make_participant_guid(uint64_t name, uint32_t random_salt) {
    Guid g;
    for (size_t i = 0; i < 8; ++i) g.prefix[i] = static_cast<uint8_t>(name >> (8 * i));
    for (size_t i = 0; i < 4; ++i) g.prefix[8 + i] = static_cast<uint8_t>(random_salt >> (8 * i));
    g.entity_id = kEntityParticipant;
    return g;
}

}  // namespace agribus::wire
