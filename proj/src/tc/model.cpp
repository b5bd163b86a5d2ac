#include "agribus/tc/model.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

namespace agribus::tc {

const char* handling_group_name(HandlingGroup g) {
    switch (g) {
    case HandlingGroup::None: return "None";
    case HandlingGroup::WorkingHeight: return "WorkingHeight";
    case HandlingGroup::ApplicationRate: return "ApplicationRate";
    case HandlingGroup::TillageDepth: return "TillageDepth";
    case HandlingGroup::WorkingWidth: return "WorkingWidth";
    case HandlingGroup::WorkState: return "WorkState";
    case HandlingGroup::Geometry: return "Geometry";
    case HandlingGroup::FlowRate: return "FlowRate";
    case HandlingGroup::Speed: return "Speed";
    case HandlingGroup::FillLevel: return "FillLevel";
    }
    return "?";
}

const char* handling_feature_name(HandlingFeature f) {
    switch (f) {
    case HandlingFeature::None: return "None";
    case HandlingFeature::Setpoint: return "Setpoint";
    case HandlingFeature::Actual: return "Actual";
    case HandlingFeature::Minimum: return "Minimum";
    case HandlingFeature::Maximum: return "Maximum";
    case HandlingFeature::Default: return "Default";
    }
    return "?";
}

const char* unit_atom_symbol(UnitAtom a) {
    switch (a) {
    case UnitAtom::None: return "1";
    case UnitAtom::Metre: return "m";
    case UnitAtom::SquareMetre: return "m2";
    case UnitAtom::CubicMetre: return "m3";
    case UnitAtom::Kilogram: return "kg";
    case UnitAtom::Second: return "s";
    case UnitAtom::Count: return "count";
    case UnitAtom::Kelvin: return "K";
    case UnitAtom::Ampere: return "A";
    }
    return "?";
}

std::string unit_text(const Unit& u) {
    if (u.denominator == UnitAtom::None) return unit_atom_symbol(u.numerator);
    return std::string(unit_atom_symbol(u.numerator)) + "/" + unit_atom_symbol(u.denominator);
}

// --- validation ---

std::vector<DdopIssue> validate_ddop(const Ddop& ddop) {
    std::vector<DdopIssue> issues;
    auto flag = [&issues](std::string rule, size_t idx, std::string detail) {
        issues.push_back({std::move(rule), idx, std::move(detail)});
    };

    if (ddop.device_name == 0) flag("BAD_NAME", 0, "device NAME must be nonzero");

    std::map<uint64_t, size_t> by_num;
    size_t roots = 0;
    for (size_t i = 0; i < ddop.rows.size(); ++i) {
        const auto& row = ddop.rows[i];
        if (row.element.name != ddop.device_name)
            flag("NAME_MISMATCH", i, "row belongs to a different device");
        if (row.parent.name != row.element.name)
            flag("NAME_MISMATCH", i, "parent names a different device");
        if (row.display_name.size() > kDisplayNameMax)
            flag("NAME_TOO_LONG", i, row.display_name.substr(0, 16) + "...");
        if (by_num.count(row.element.element_num))
            flag("DUPLICATE_ELEMENT", i, std::to_string(row.element.element_num));
        else
            by_num[row.element.element_num] = i;
        if (row.element.element_num == 0) {
            ++roots;
            if (row.parent.element_num != 0)
                flag("BAD_ROOT", i, "root's parent must be itself");
        }
    }
    if (roots == 0) flag("SINGLE_ROOT", 0, "no root row (element 0)");
    if (roots > 1) flag("SINGLE_ROOT", 0, "multiple root rows");

    for (size_t i = 0; i < ddop.rows.size(); ++i) {
        const auto& row = ddop.rows[i];
        if (row.element.element_num == 0) continue;
        if (!by_num.count(row.parent.element_num)) {
            flag("DANGLING_PARENT", i, std::to_string(row.parent.element_num));
            continue;
        }
        // walk to the root; a revisit means a cycle
        std::set<uint64_t> seen{row.element.element_num};
        uint64_t cur = row.parent.element_num;
        while (cur != 0) {
            if (seen.count(cur)) {
                flag("CYCLE", i, "through element " + std::to_string(cur));
                break;
            }
            seen.insert(cur);
            auto it = by_num.find(cur);
            if (it == by_num.end()) break;  // already reported as dangling elsewhere
            cur = ddop.rows[it->second].parent.element_num;
        }
    }

    for (size_t i = 0; i < ddop.capabilities.size(); ++i) {
        const auto& cap = ddop.capabilities[i];
        if (cap.element.name != ddop.device_name)
            flag("NAME_MISMATCH", i, "capability belongs to a different device");
        if (!by_num.count(cap.element.element_num))
            flag("DANGLING_CAPABILITY", i, std::to_string(cap.element.element_num));
        if (!cap.unit.valid()) flag("BAD_UNIT", i, unit_text(cap.unit));
    }
    return issues;
}

Status validate_ddop_status(const Ddop& ddop) {
    auto issues = validate_ddop(ddop);
    if (issues.empty()) return Status::success();
    std::string detail;
    for (const auto& i : issues) {
        if (!detail.empty()) detail += "; ";
        detail += i.rule + " at row " + std::to_string(i.row_index);
        if (!i.detail.empty()) detail += " (" + i.detail + ")";
    }
    return Error{Errc::VALIDATION_FAILED, detail};
}

bool ddop_equivalent(const Ddop& a, const Ddop& b) {
    if (a.device_name != b.device_name) return false;
    auto rows_sorted = [](const Ddop& d) {
        auto rows = d.rows;
        std::sort(rows.begin(), rows.end(), [](const HierarchyRow& x, const HierarchyRow& y) {
            return x.element.element_num < y.element.element_num;
        });
        return rows;
    };
    if (rows_sorted(a) != rows_sorted(b)) return false;
    auto caps_sorted = [](const Ddop& d) {
        auto caps = d.capabilities;
        std::sort(caps.begin(), caps.end());
        return caps;
    };
    return caps_sorted(a) == caps_sorted(b);
}

// --- type descriptors ---

namespace {

std::shared_ptr<const wire::TypeDescriptor> make_device_element_type() {
    auto t = std::make_shared<wire::TypeDescriptor>();
    t->name = "DeviceElement_t";
    t->fields = {
        {"name", wire::FieldKind::U64, false, 0, 0, nullptr},
        {"element_num", wire::FieldKind::U64, false, 0, 0, nullptr},
    };
    return t;
}

std::shared_ptr<const wire::TypeDescriptor> make_unit_type() {
    auto t = std::make_shared<wire::TypeDescriptor>();
    t->name = "Unit_t";
    t->fields = {
        {"numerator", wire::FieldKind::Enum, false, kUnitAtomMax, 0, nullptr},
        {"denominator", wire::FieldKind::Enum, false, kUnitAtomMax, 0, nullptr},
    };
    return t;
}

}  // namespace

std::shared_ptr<const wire::TypeDescriptor> device_element_type() {
    static auto t = make_device_element_type();
    return t;
}

std::shared_ptr<const wire::TypeDescriptor> unit_type() {
    static auto t = make_unit_type();
    return t;
}

std::shared_ptr<const wire::TypeDescriptor> services_type() {
    static auto t = [] {
        auto d = std::make_shared<wire::TypeDescriptor>();
        d->name = "Services_t";
        d->fields = {
            {"name", wire::FieldKind::U64, true, 0, 0, nullptr},
            {"v_tc_client", wire::FieldKind::U32, false, 0, 0, nullptr},
            {"v_tc_server", wire::FieldKind::U32, false, 0, 0, nullptr},
            {"v_tim_server", wire::FieldKind::U32, false, 0, 0, nullptr},
        };
        return d;
    }();
    return t;
}

std::shared_ptr<const wire::TypeDescriptor> hierarchy_type() {
    static auto t = [] {
        auto d = std::make_shared<wire::TypeDescriptor>();
        d->name = "ElementHierarchy_t";
        d->fields = {
            {"element_reference", wire::FieldKind::Nested, true, 0, 0, device_element_type()},
            {"display_name", wire::FieldKind::Text, false, 0, kDisplayNameMax, nullptr},
            {"parent_reference", wire::FieldKind::Nested, false, 0, 0, device_element_type()},
        };
        return d;
    }();
    return t;
}

std::shared_ptr<const wire::TypeDescriptor> capabilities_type() {
    static auto t = [] {
        auto d = std::make_shared<wire::TypeDescriptor>();
        d->name = "ControlHandlingCapabilities_t";
        d->fields = {
            {"element_reference", wire::FieldKind::Nested, true, 0, 0, device_element_type()},
            {"handling_group", wire::FieldKind::Enum, false, kHandlingGroupMax, 0, nullptr},
            {"unit", wire::FieldKind::Nested, false, 0, 0, unit_type()},
        };
        return d;
    }();
    return t;
}

std::shared_ptr<const wire::TypeDescriptor> values_type() {
    static auto t = [] {
        auto d = std::make_shared<wire::TypeDescriptor>();
        d->name = "ControlHandlingValues_t";
        d->fields = {
            {"element_reference", wire::FieldKind::Nested, true, 0, 0, device_element_type()},
            {"handling_group", wire::FieldKind::Enum, false, kHandlingGroupMax, 0, nullptr},
            {"handling_feature", wire::FieldKind::Enum, false, kHandlingFeatureMax, 0, nullptr},
            {"unit", wire::FieldKind::Nested, false, 0, 0, unit_type()},
            {"value", wire::FieldKind::F32, false, 0, 0, nullptr},
        };
        return d;
    }();
    return t;
}

// --- record conversions ---

namespace {

wire::Value element_value(const DeviceElementRef& e) {
    return wire::Value{std::vector<wire::Value>{wire::Value{e.name}, wire::Value{e.element_num}}};
}

wire::Value unit_value(const Unit& u) {
    return wire::Value{std::vector<wire::Value>{
        wire::Value{static_cast<uint32_t>(u.numerator)},
        wire::Value{static_cast<uint32_t>(u.denominator)}}};
}

Result<DeviceElementRef> element_from(const wire::Value& v) {
    const auto* rec = std::get_if<std::vector<wire::Value>>(&v.v);
    if (!rec || rec->size() != 2) return Error{Errc::TYPE_MISMATCH, "DeviceElement_t shape"};
    DeviceElementRef e;
    e.name = (*rec)[0].as_u64();
    e.element_num = (*rec)[1].as_u64();
    return e;
}

Result<Unit> unit_from(const wire::Value& v) {
    const auto* rec = std::get_if<std::vector<wire::Value>>(&v.v);
    if (!rec || rec->size() != 2) return Error{Errc::TYPE_MISMATCH, "Unit_t shape"};
    uint32_t num = (*rec)[0].as_u32();
    uint32_t den = (*rec)[1].as_u32();
    if (num > kUnitAtomMax || den > kUnitAtomMax)
        return Error{Errc::BAD_ENUM_ORDINAL, "unit atom"};
    return Unit{static_cast<UnitAtom>(num), static_cast<UnitAtom>(den)};
}

}  // namespace

wire::Record to_record(const ServicesRow& r) {
    return {wire::Value{r.name}, wire::Value{r.v_tc_client}, wire::Value{r.v_tc_server},
            wire::Value{r.v_tim_server}};
}

wire::Record to_record(const HierarchyRow& r) {
    return {element_value(r.element), wire::Value{r.display_name}, element_value(r.parent)};
}

wire::Record to_record(const Capability& c) {
    return {element_value(c.element), wire::Value{static_cast<uint32_t>(c.group)},
            unit_value(c.unit)};
}

wire::Record to_record(const ProcessValue& v) {
    return {element_value(v.element), wire::Value{static_cast<uint32_t>(v.group)},
            wire::Value{static_cast<uint32_t>(v.feature)}, unit_value(v.unit),
            wire::Value{v.value}};
}

Result<ServicesRow> services_from_record(const wire::Record& r) {
    if (r.size() != 4) return Error{Errc::TYPE_MISMATCH, "Services_t shape"};
    ServicesRow out;
    out.name = r[0].as_u64();
    out.v_tc_client = r[1].as_u32();
    out.v_tc_server = r[2].as_u32();
    out.v_tim_server = r[3].as_u32();
    return out;
}

Result<HierarchyRow> hierarchy_from_record(const wire::Record& r) {
    if (r.size() != 3) return Error{Errc::TYPE_MISMATCH, "ElementHierarchy_t shape"};
    auto element = element_from(r[0]);
    if (!element) return element.error();
    auto parent = element_from(r[2]);
    if (!parent) return parent.error();
    HierarchyRow out;
    out.element = element.value();
    out.display_name = r[1].as_text();
    out.parent = parent.value();
    return out;
}

Result<Capability> capability_from_record(const wire::Record& r) {
    if (r.size() != 3) return Error{Errc::TYPE_MISMATCH, "ControlHandlingCapabilities_t shape"};
    auto element = element_from(r[0]);
    if (!element) return element.error();
    if (r[1].as_u32() > kHandlingGroupMax) return Error{Errc::BAD_ENUM_ORDINAL, "handling group"};
    auto unit = unit_from(r[2]);
    if (!unit) return unit.error();
    Capability out;
    out.element = element.value();
    out.group = static_cast<HandlingGroup>(r[1].as_u32());
    out.unit = unit.value();
    return out;
}

Result<ProcessValue> value_from_record(const wire::Record& r) {
    if (r.size() != 5) return Error{Errc::TYPE_MISMATCH, "ControlHandlingValues_t shape"};
    auto element = element_from(r[0]);
    if (!element) return element.error();
    if (r[1].as_u32() > kHandlingGroupMax) return Error{Errc::BAD_ENUM_ORDINAL, "handling group"};
    if (r[2].as_u32() > kHandlingFeatureMax)
        return Error{Errc::BAD_ENUM_ORDINAL, "handling feature"};
    auto unit = unit_from(r[3]);
    if (!unit) return unit.error();
    ProcessValue out;
    out.element = element.value();
    out.group = static_cast<HandlingGroup>(r[1].as_u32());
    out.feature = static_cast<HandlingFeature>(r[2].as_u32());
    out.unit = unit.value();
    out.value = r[4].as_f32();
    return out;
}

// --- DDOP <-> samples ---

Result<DdopSamples> ddop_to_samples(const Ddop& ddop) {
    if (auto st = validate_ddop_status(ddop); !st) return st.error();
    DdopSamples out;
    for (const auto& row : ddop.rows) out.hierarchy.push_back(to_record(row));
    for (const auto& cap : ddop.capabilities) out.linking.push_back(to_record(cap));
    return out;
}

Result<Ddop> samples_to_ddop(uint64_t device_name, const std::vector<wire::Record>& hierarchy,
                             const std::vector<wire::Record>& linking) {
    Ddop ddop;
    ddop.device_name = device_name;
    std::set<uint64_t> have;
    for (const auto& rec : hierarchy) {
        auto row = hierarchy_from_record(rec);
        if (!row) return row.error();
        if (row.value().element.name != device_name) continue;
        have.insert(row.value().element.element_num);
        ddop.rows.push_back(std::move(row.value()));
    }
    if (!have.count(0)) return Error{Errc::INCOMPLETE, "root row not yet received"};
    for (const auto& row : ddop.rows)
        if (!have.count(row.parent.element_num))
            return Error{Errc::INCOMPLETE,
                         "parent " + std::to_string(row.parent.element_num) + " not yet received"};
    for (const auto& rec : linking) {
        auto cap = capability_from_record(rec);
        if (!cap) return cap.error();
        if (cap.value().element.name != device_name) continue;
        if (!have.count(cap.value().element.element_num))
            return Error{Errc::INCOMPLETE, "capability element " +
                                               std::to_string(cap.value().element.element_num) +
                                               " not yet received"};
        ddop.capabilities.push_back(std::move(cap.value()));
    }
    if (auto st = validate_ddop_status(ddop); !st) return st.error();
    return ddop;
}

// --- authoring file ---

namespace {

Result<uint32_t> parse_handling_group(const nlohmann::json& j) {
    if (j.is_number_unsigned()) {
        uint32_t v = j.get<uint32_t>();
        if (v > kHandlingGroupMax) return Error{Errc::BAD_ENUM_ORDINAL, "handling_group"};
        return v;
    }
    if (j.is_string()) {
        auto s = j.get<std::string>();
        for (uint32_t v = 0; v <= kHandlingGroupMax; ++v)
            if (s == handling_group_name(static_cast<HandlingGroup>(v))) return v;
    }
    return Error{Errc::CONFIG_INVALID, "unknown handling_group"};
}

Result<uint32_t> parse_unit_atom(const nlohmann::json& j) {
    if (j.is_number_unsigned()) {
        uint32_t v = j.get<uint32_t>();
        if (v > kUnitAtomMax) return Error{Errc::BAD_ENUM_ORDINAL, "unit atom"};
        return v;
    }
    if (j.is_string()) {
        auto s = j.get<std::string>();
        for (uint32_t v = 0; v <= kUnitAtomMax; ++v)
            if (s == unit_atom_symbol(static_cast<UnitAtom>(v))) return v;
        if (s == "None" || s.empty()) return 0u;
    }
    return Error{Errc::CONFIG_INVALID, "unknown unit atom"};
}

}  // namespace

Result<Ddop> load_ddop_json(const std::string& path, uint64_t device_name) {
    std::ifstream in(path);
    if (!in) return Error{Errc::IO_ERROR, "cannot open " + path};
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        return Error{Errc::CONFIG_INVALID, std::string("bad DDOP JSON: ") + e.what()};
    }
    Ddop ddop;
    ddop.device_name = device_name;
    if (j.contains("name")) {
        if (j["name"].is_string())
            ddop.device_name = std::stoull(j["name"].get<std::string>(), nullptr, 16);
        else
            ddop.device_name = j["name"].get<uint64_t>();
    }
    if (!j.contains("elements") || !j["elements"].is_array())
        return Error{Errc::CONFIG_INVALID, "DDOP file needs an elements array"};
    for (const auto& e : j["elements"]) {
        HierarchyRow row;
        row.element = {ddop.device_name, e.at("element_num").get<uint64_t>()};
        row.display_name = e.value("display_name", std::string{});
        row.parent = {ddop.device_name, e.value("parent_num", uint64_t{0})};
        if (row.element.element_num == 0) row.parent.element_num = 0;
        ddop.rows.push_back(std::move(row));
    }
    for (const auto& c : j.value("capabilities", nlohmann::json::array())) {
        Capability cap;
        cap.element = {ddop.device_name, c.at("element_num").get<uint64_t>()};
        auto group = parse_handling_group(c.at("handling_group"));
        if (!group) return group.error();
        cap.group = static_cast<HandlingGroup>(group.value());
        if (c.contains("unit")) {
            auto num = parse_unit_atom(c["unit"].value("num", nlohmann::json(0u)));
            auto den = parse_unit_atom(c["unit"].value("den", nlohmann::json(0u)));
            if (!num) return num.error();
            if (!den) return den.error();
            cap.unit = {static_cast<UnitAtom>(num.value()), static_cast<UnitAtom>(den.value())};
        }
        ddop.capabilities.push_back(std::move(cap));
    }
    if (auto st = validate_ddop_status(ddop); !st) return st.error();
    return ddop;
}

}  // namespace agribus::tc
