#include "agribus/core/history.hpp"

#include <algorithm>

namespace agribus::core {

InstanceCache::InstanceCache(std::shared_ptr<const wire::TypeDescriptor> type, QosProfile qos)
    : type_(std::move(type)), qos_(std::move(qos)) {}

wire::Record InstanceCache::extract_key(const wire::Record& value) const {
    wire::Record key;
    for (size_t i = 0; i < type_->fields.size() && i < value.size(); ++i)
        if (type_->fields[i].is_key) key.push_back(value[i]);
    return key;
}

bool InstanceCache::insert(const wire::Record& value, const SampleInfo& info) {
    auto& row = rows_[info.key_hash];
    row.key_hash = info.key_hash;

    if (qos_.ownership == Ownership::Exclusive) {
        // Highest strength owns the instance; ties break on lower Guid.
        if (!row.owner.has_value()) {
            row.owner = {info.writer, info.writer_strength};
        } else if (row.owner->first != info.writer) {
            bool takes_over = info.writer_strength > row.owner->second ||
                              (info.writer_strength == row.owner->second &&
                               info.writer < row.owner->first);
            if (!takes_over) return false;
            row.owner = {info.writer, info.writer_strength};
        }
    }

    if (info.dispose) {
        row.disposed = true;
        row.samples.clear();
        row.last_writer = info.writer;
        row.last_sn = info.sn;
        return true;
    }

    row.disposed = false;
    row.key_value = extract_key(value);
    Sample s;
    s.value = value;
    s.info = info;
    s.arrival_seq = ++arrival_counter_;
    row.samples.push_back(std::move(s));
    if (qos_.history == HistoryKind::KeepLast) {
        while (row.samples.size() > qos_.history_depth) row.samples.pop_front();
    }
    row.last_writer = info.writer;
    row.last_sn = info.sn;
    row.last_arrival_ms = info.arrival_ms;
    row.deadline_flagged = false;
    return true;
}

void InstanceCache::release_ownership(const wire::Guid& writer) {
    for (auto& [kh, row] : rows_)
        if (row.owner.has_value() && row.owner->first == writer) row.owner.reset();
}

std::vector<const InstanceRow*> InstanceCache::rows() const {
    std::vector<const InstanceRow*> out;
    for (const auto& [kh, row] : rows_)
        if (!row.disposed) out.push_back(&row);
    return out;
}

size_t InstanceCache::row_count() const { return rows().size(); }

std::vector<Sample> InstanceCache::take_new() {
    std::vector<Sample> out;
    for (auto& [kh, row] : rows_)
        for (auto& s : row.samples)
            if (!s.read) {
                s.read = true;
                out.push_back(s);
            }
    std::sort(out.begin(), out.end(),
              [](const Sample& a, const Sample& b) { return a.arrival_seq < b.arrival_seq; });
    return out;
}

}  // namespace agribus::core
