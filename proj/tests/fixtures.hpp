#pragma once

#include "bimshare/model.hpp"
#include "bimshare/schema.hpp"

#include <string>
#include <utility>
#include <vector>

namespace fx {

using namespace bimshare;

// Deterministic 22-character id from a short tag.
inline std::string gid(const std::string& tag) {
    std::string id = tag;
    while (id.size() < 22) id.push_back('0');
    return id.substr(0, 22);
}

inline Label make(Model& m, const std::string& type, const std::string& global_id,
                  std::vector<std::pair<std::string, AttrValue>> values = {}) {
    const Schema& s = m.schema();
    const auto& defs = s.all_attrs(type);
    Entity e;
    e.type = type;
    e.attrs.assign(defs.size(), AttrValue{});
    if (!global_id.empty()) e.attrs[*s.attr_index(type, "GlobalId")] = global_id;
    for (auto& [name, v] : values) e.attrs[*s.attr_index(type, name)] = std::move(v);
    return m.insert(std::move(e));
}

inline Label resource(Model& m, const std::string& type,
                      std::vector<std::pair<std::string, AttrValue>> values = {}) {
    return make(m, type, "", std::move(values));
}

inline void set_attr(Model& m, Label l, const std::string& name, AttrValue v) {
    Entity& e = m.at(l);
    e.attrs[*m.schema().attr_index(e.type, name)] = std::move(v);
}

inline std::vector<Ref> refs(std::vector<Label> ls) {
    std::vector<Ref> out;
    for (Label l : ls) out.push_back(Ref{l});
    return out;
}

// Two zone tasks, two columns, a beam and a slab under one storey, with
// process-assignment relations per zone: 8 rooted entities plus the storey
// and its containment relation.
struct ZoneFixture {
    Model m;
    Label task_a, task_b, col1, col2, beam, slab, assign_a, assign_b;

    explicit ZoneFixture(const Schema& s, bool with_storey = false) : m(s) {
        task_a = make(m, "IfcTask", gid("taskA"), {{"Name", std::string("Zone A")}});
        task_b = make(m, "IfcTask", gid("taskB"), {{"Name", std::string("Zone B")}});
        col1 = make(m, "IfcColumn", gid("col1"), {{"Name", std::string("Column 1")},
                                                  {"Tag", std::string("C-1")}});
        col2 = make(m, "IfcColumn", gid("col2"), {{"Name", std::string("Column 2")},
                                                  {"Tag", std::string("C-2")}});
        beam = make(m, "IfcBeam", gid("beam1"), {{"Name", std::string("Beam 1")}});
        slab = make(m, "IfcSlab", gid("slab1"), {{"Name", std::string("Slab 1")}});
        assign_a = make(m, "IfcRelAssignsToProcess", gid("assignA"),
                        {{"RelatedObjects", refs({col1, slab})}, {"RelatingProcess", Ref{task_a}}});
        assign_b = make(m, "IfcRelAssignsToProcess", gid("assignB"),
                        {{"RelatedObjects", refs({col2, beam})}, {"RelatingProcess", Ref{task_b}}});
        if (with_storey) {
            Label storey = make(m, "IfcBuildingStorey", gid("storey"),
                                {{"Name", std::string("Storey 1")}, {"Elevation", 0.0}});
            make(m, "IfcRelContainedInSpatialStructure", gid("contain"),
                 {{"RelatedElements", refs({col1, col2, beam, slab})},
                  {"RelatingStructure", Ref{storey}}});
        }
        m.validate();
    }
};

// A column with the placement -> axis -> point resource chain.
inline Label column_with_placement(Model& m, const std::string& id_tag) {
    Label pt = resource(m, "IfcCartesianPoint", {{"X", 1.0}, {"Y", 2.0}, {"Z", 3.0}});
    Label ax = resource(m, "IfcAxis2Placement3D", {{"Location", Ref{pt}}});
    Label pl = resource(m, "IfcLocalPlacement", {{"RelativePlacement", Ref{ax}}});
    return make(m, "IfcColumn", gid(id_tag),
                {{"Name", std::string("Column ") + id_tag}, {"ObjectPlacement", Ref{pl}}});
}

} // namespace fx
