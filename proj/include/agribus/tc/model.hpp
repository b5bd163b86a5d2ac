#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agribus/wire/types.hpp"

namespace agribus::tc {

// Decomposed-DDI enums. Serialized ordinals are frozen; new values append only.
enum class HandlingGroup : uint32_t {
    None = 0,
    WorkingHeight = 1,
    ApplicationRate = 2,
    TillageDepth = 3,
    WorkingWidth = 4,
    WorkState = 5,
    Geometry = 6,
    FlowRate = 7,
    Speed = 8,
    FillLevel = 9,
};
inline constexpr uint32_t kHandlingGroupMax = 9;

enum class HandlingFeature : uint32_t {
    None = 0,
    Setpoint = 1,
    Actual = 2,
    Minimum = 3,
    Maximum = 4,
    Default = 5,
};
inline constexpr uint32_t kHandlingFeatureMax = 5;

enum class UnitAtom : uint32_t {
    None = 0,
    Metre = 1,
    SquareMetre = 2,
    CubicMetre = 3,
    Kilogram = 4,
    Second = 5,
    Count = 6,
    Kelvin = 7,
    Ampere = 8,
};
inline constexpr uint32_t kUnitAtomMax = 8;

const char* handling_group_name(HandlingGroup g);
const char* handling_feature_name(HandlingFeature f);
const char* unit_atom_symbol(UnitAtom a);  // "1", "m", "m2", "m3", "kg", "s", "count", "K", "A"

struct Unit {
    UnitAtom numerator = UnitAtom::None;
    UnitAtom denominator = UnitAtom::None;

    /// A pure denominator must use numerator Count; (None, x != None) is invalid.
    bool valid() const {
        return !(numerator == UnitAtom::None && denominator != UnitAtom::None);
    }
    auto operator<=>(const Unit&) const = default;
};

/// Canonical rendering: "kg/m2", "m", "1" for dimensionless.
std::string unit_text(const Unit& u);

struct DeviceElementRef {
    uint64_t name = 0;         // 64-bit device NAME
    uint64_t element_num = 0;  // 0 designates the device root

    auto operator<=>(const DeviceElementRef&) const = default;
};

inline constexpr size_t kDisplayNameMax = 100;

struct HierarchyRow {
    DeviceElementRef element;  // key
    std::string display_name;
    DeviceElementRef parent;  // root's parent is itself

    bool operator==(const HierarchyRow&) const = default;
};

struct Capability {
    DeviceElementRef element;  // key
    HandlingGroup group = HandlingGroup::None;
    Unit unit;

    auto operator<=>(const Capability&) const = default;
};

struct ProcessValue {
    DeviceElementRef element;  // key
    HandlingGroup group = HandlingGroup::None;
    HandlingFeature feature = HandlingFeature::None;
    Unit unit;
    float value = 0.0f;

    bool operator==(const ProcessValue&) const = default;
};

struct ServicesRow {
    uint64_t name = 0;  // key
    uint32_t v_tc_client = 0;  // 0 = not supported
    uint32_t v_tc_server = 0;
    uint32_t v_tim_server = 0;

    bool operator==(const ServicesRow&) const = default;
};

struct Ddop {
    uint64_t device_name = 0;
    std::vector<HierarchyRow> rows;  // includes the explicit root row (element 0)
    std::vector<Capability> capabilities;
};

struct DdopIssue {
    std::string rule;  // e.g. "DANGLING_PARENT"
    size_t row_index = 0;
    std::string detail;
};

/// Order-independent structural validation; empty result means valid.
std::vector<DdopIssue> validate_ddop(const Ddop& ddop);
Status validate_ddop_status(const Ddop& ddop);

/// Tree isomorphism plus capability-set equality, ignoring row order.
bool ddop_equivalent(const Ddop& a, const Ddop& b);

// --- type descriptors (field layout frozen) ---
std::shared_ptr<const wire::TypeDescriptor> device_element_type();
std::shared_ptr<const wire::TypeDescriptor> unit_type();
std::shared_ptr<const wire::TypeDescriptor> services_type();
std::shared_ptr<const wire::TypeDescriptor> hierarchy_type();
std::shared_ptr<const wire::TypeDescriptor> capabilities_type();
std::shared_ptr<const wire::TypeDescriptor> values_type();

// --- record conversions ---
wire::Record to_record(const ServicesRow& r);
wire::Record to_record(const HierarchyRow& r);
wire::Record to_record(const Capability& c);
wire::Record to_record(const ProcessValue& v);
Result<ServicesRow> services_from_record(const wire::Record& r);
Result<HierarchyRow> hierarchy_from_record(const wire::Record& r);
Result<Capability> capability_from_record(const wire::Record& r);
Result<ProcessValue> value_from_record(const wire::Record& r);

struct DdopSamples {
    std::vector<wire::Record> hierarchy;
    std::vector<wire::Record> linking;
};

/// Requires a valid DDOP; emits one hierarchy sample per row (root included)
/// and one linking sample per capability.
Result<DdopSamples> ddop_to_samples(const Ddop& ddop);

/// Rebuilds the tree from parent references. Returns INCOMPLETE while
/// referenced parents are still missing — callers retry as samples arrive.
Result<Ddop> samples_to_ddop(uint64_t device_name, const std::vector<wire::Record>& hierarchy,
                             const std::vector<wire::Record>& linking);

/// Loads a DDOP authoring file: JSON with `elements` [{element_num,
/// display_name, parent_num}] and `capabilities` [{element_num,
/// handling_group, unit {num, den}}]. `device_name` is used when the file
/// has no `name` field.
Result<Ddop> load_ddop_json(const std::string& path, uint64_t device_name);

}  // namespace agribus::tc
