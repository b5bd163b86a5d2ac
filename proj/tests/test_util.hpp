#pragma once

#include <random>
#include <string>
#include <vector>

#include "agribus/tc/model.hpp"
#include "agribus/wire/codec.hpp"

namespace testutil {

using agribus::wire::FieldKind;
using agribus::wire::Record;
using agribus::wire::TypeDescriptor;
using agribus::wire::Value;

inline std::string random_text(std::mt19937_64& rng, uint32_t max_len) {
    std::uniform_int_distribution<uint32_t> len(0, max_len);
    std::uniform_int_distribution<int> ch('a', 'z');
    std::string s(len(rng), ' ');
    for (auto& c : s) c = char(ch(rng));
    return s;
}

inline Record random_record(const TypeDescriptor& type, std::mt19937_64& rng) {
    Record rec;
    for (const auto& f : type.fields) {
        switch (f.kind) {
            case FieldKind::U64: rec.emplace_back(uint64_t(rng())); break;
            case FieldKind::U32: rec.emplace_back(uint32_t(rng())); break;
            case FieldKind::F32: {
                std::uniform_real_distribution<float> d(-1e6f, 1e6f);
                rec.emplace_back(d(rng));
                break;
            }
            case FieldKind::Enum: {
                std::uniform_int_distribution<uint32_t> d(0, f.enum_max);
                rec.emplace_back(d(rng));
                break;
            }
            case FieldKind::Text: rec.emplace_back(random_text(rng, f.text_max)); break;
            case FieldKind::Nested: rec.emplace_back(random_record(*f.nested, rng)); break;
        }
    }
    return rec;
}

inline std::vector<std::shared_ptr<const TypeDescriptor>> all_tc_types() {
    return {agribus::tc::device_element_type(), agribus::tc::unit_type(),
            agribus::tc::services_type(),       agribus::tc::hierarchy_type(),
            agribus::tc::capabilities_type(),   agribus::tc::values_type()};
}

/// Random valid DDOP tree of up to max_nodes elements (plus the root), with a
/// random capability subset.
inline agribus::tc::Ddop random_ddop(std::mt19937_64& rng, size_t max_nodes,
                                     uint64_t name = 0xFF0001) {
    using namespace agribus::tc;
    Ddop d;
    d.device_name = name;
    d.rows.push_back({{name, 0}, "root", {name, 0}});
    std::uniform_int_distribution<size_t> count(0, max_nodes);
    size_t n = count(rng);
    std::vector<uint64_t> nums{0};
    for (size_t i = 0; i < n; ++i) {
        uint64_t num = i + 1;
        std::uniform_int_distribution<size_t> pick(0, nums.size() - 1);
        uint64_t parent = nums[pick(rng)];
        d.rows.push_back({{name, num}, random_text(rng, 20), {name, parent}});
        nums.push_back(num);
    }
    for (uint64_t num : nums) {
        if (rng() % 3 != 0) continue;
        std::uniform_int_distribution<uint32_t> g(1, kHandlingGroupMax);
        std::uniform_int_distribution<uint32_t> a(0, kUnitAtomMax);
        Unit u{static_cast<UnitAtom>(a(rng)), static_cast<UnitAtom>(a(rng))};
        if (!u.valid()) u.numerator = UnitAtom::Count;
        d.capabilities.push_back({{name, num}, static_cast<HandlingGroup>(g(rng)), u});
    }
    return d;
}

}  // namespace testutil
