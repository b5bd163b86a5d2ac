#pragma once

#include <cassert>
#include <optional>
#include <string>
#include <utility>
#include <variant>

namespace agribus {

enum class Errc {
    // wire
    TEXT_TOO_LONG,
    TRUNCATED,
    BAD_ENUM_ORDINAL,
    BAD_UTF8,
    BAD_MAGIC,
    NO_KEY_FIELDS,
    // transport
    OVERSIZE_DATAGRAM,
    PORT_EXHAUSTED,
    MULTICAST_JOIN_FAILED,
    // core
    TYPE_MISMATCH,
    OWNERSHIP_VIOLATION,
    SECURITY_CONFIG_INVALID,
    // security
    BAD_KEY,
    EXPIRED_REQUEST,
    CERT_INVALID,
    SIGNATURE_INVALID,
    TIMEOUT,
    MAC_INVALID,
    NONCE_REPLAYED,
    KIND_MISMATCH,
    UNSUPPORTED,
    PERMISSION_DENIED,
    // tc
    VALIDATION_FAILED,
    INCOMPLETE,
    PARTITION_CONFLICT,
    NO_PEER,
    // bench
    NO_TRAFFIC,
    // cli / io
    IO_ERROR,
    CONFIG_INVALID,
};

const char* errc_name(Errc c);

struct Error {
    Errc code;
    std::string detail;

    std::string to_string() const {
        std::string s = errc_name(code);
        if (!detail.empty()) {
            s += ": ";
            s += detail;
        }
        return s;
    }
};

/// Value-or-error return type used throughout the library.
template <class T>
class Result {
  public:
    Result(T value) : v_(std::move(value)) {}
    Result(Error err) : v_(std::move(err)) {}
    Result(Errc code, std::string detail = {}) : v_(Error{code, std::move(detail)}) {}

    bool ok() const { return std::holds_alternative<T>(v_); }
    explicit operator bool() const { return ok(); }

    T& value() {
        assert(ok());
        return std::get<T>(v_);
    }
    const T& value() const {
        assert(ok());
        return std::get<T>(v_);
    }
    const Error& error() const {
        assert(!ok());
        return std::get<Error>(v_);
    }
    T value_or(T fallback) const { return ok() ? std::get<T>(v_) : std::move(fallback); }

  private:
    std::variant<T, Error> v_;
};

/// Result for operations with no payload.
class Status {
  public:
    Status() = default;
    Status(Error err) : err_(std::move(err)) {}
    Status(Errc code, std::string detail = {}) : err_(Error{code, std::move(detail)}) {}

    static Status success() { return Status(); }

    bool ok() const { return !err_.has_value(); }
    explicit operator bool() const { return ok(); }
    const Error& error() const {
        assert(!ok());
        return *err_;
    }

  private:
    std::optional<Error> err_;
};

inline const char* errc_name(Errc c) {
    switch (c) {
    case Errc::TEXT_TOO_LONG: return "TEXT_TOO_LONG";
    case Errc::TRUNCATED: return "TRUNCATED";
    case Errc::BAD_ENUM_ORDINAL: return "BAD_ENUM_ORDINAL";
    case Errc::BAD_UTF8: return "BAD_UTF8";
    case Errc::BAD_MAGIC: return "BAD_MAGIC";
    case Errc::NO_KEY_FIELDS: return "NO_KEY_FIELDS";
    case Errc::OVERSIZE_DATAGRAM: return "OVERSIZE_DATAGRAM";
    case Errc::PORT_EXHAUSTED: return "PORT_EXHAUSTED";
    case Errc::MULTICAST_JOIN_FAILED: return "MULTICAST_JOIN_FAILED";
    case Errc::TYPE_MISMATCH: return "TYPE_MISMATCH";
    case Errc::OWNERSHIP_VIOLATION: return "OWNERSHIP_VIOLATION";
    case Errc::SECURITY_CONFIG_INVALID: return "SECURITY_CONFIG_INVALID";
    case Errc::BAD_KEY: return "BAD_KEY";
    case Errc::EXPIRED_REQUEST: return "EXPIRED_REQUEST";
    case Errc::CERT_INVALID: return "CERT_INVALID";
    case Errc::SIGNATURE_INVALID: return "SIGNATURE_INVALID";
    case Errc::TIMEOUT: return "TIMEOUT";
    case Errc::MAC_INVALID: return "MAC_INVALID";
    case Errc::NONCE_REPLAYED: return "NONCE_REPLAYED";
    case Errc::KIND_MISMATCH: return "KIND_MISMATCH";
    case Errc::UNSUPPORTED: return "UNSUPPORTED";
    case Errc::PERMISSION_DENIED: return "PERMISSION_DENIED";
    case Errc::VALIDATION_FAILED: return "VALIDATION_FAILED";
    case Errc::INCOMPLETE: return "INCOMPLETE";
    case Errc::PARTITION_CONFLICT: return "PARTITION_CONFLICT";
    case Errc::NO_PEER: return "NO_PEER";
    case Errc::NO_TRAFFIC: return "NO_TRAFFIC";
    case Errc::IO_ERROR: return "IO_ERROR";
    case Errc::CONFIG_INVALID: return "CONFIG_INVALID";
    }
    return "UNKNOWN";
}

}  // namespace agribus
