#pragma once

#include <deque>
#include <map>
#include <optional>

#include "agribus/core/qos.hpp"
#include "agribus/wire/codec.hpp"

namespace agribus::core {

struct SampleInfo {
    wire::Guid writer;
    uint64_t sn = 0;
    wire::KeyHash key_hash{};
    bool dispose = false;
    uint32_t writer_strength = 0;
    uint64_t arrival_ms = 0;
};

struct Sample {
    wire::Record value;
    SampleInfo info;
    bool read = false;
    uint64_t arrival_seq = 0;  // cache-local arrival order
};

/// One keyed row of the topic matrix.
struct InstanceRow {
    wire::KeyHash key_hash{};
    wire::Record key_value;  // key fields of the most recent sample
    std::deque<Sample> samples;  // oldest front, newest back
    wire::Guid last_writer;
    uint64_t last_sn = 0;
    std::optional<std::pair<wire::Guid, uint32_t>> owner;  // EXCLUSIVE only
    bool disposed = false;
    uint64_t last_arrival_ms = 0;
    bool deadline_flagged = false;
};

/// The per-topic matrix of keyed rows (rows = distinct key values, columns =
/// type fields), trimmed per the history policy.
class InstanceCache {
  public:
    InstanceCache(std::shared_ptr<const wire::TypeDescriptor> type, QosProfile qos);

    /// Returns true if the sample was accepted into a row (ownership may
    /// reject samples from non-owners on EXCLUSIVE topics).
    bool insert(const wire::Record& value, const SampleInfo& info);

    /// Releases instance ownership held by a writer (on unmatch/loss).
    void release_ownership(const wire::Guid& writer);

    std::vector<const InstanceRow*> rows() const;
    std::map<wire::KeyHash, InstanceRow>& mutable_rows() { return rows_; }
    size_t row_count() const;

    /// Drains unread samples in arrival order, marking them read.
    std::vector<Sample> take_new();

    const QosProfile& qos() const { return qos_; }
    const wire::TypeDescriptor& type() const { return *type_; }

  private:
    wire::Record extract_key(const wire::Record& value) const;

    std::shared_ptr<const wire::TypeDescriptor> type_;
    QosProfile qos_;
    std::map<wire::KeyHash, InstanceRow> rows_;
    uint64_t arrival_counter_ = 0;
};

}  // namespace agribus::core
