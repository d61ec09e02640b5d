#include "bimshare/schema.hpp"

#include "bimshare/errors.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace bimshare {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::string strip_comment(const std::string& line) {
    auto pos = line.find("//");
    return pos == std::string::npos ? line : line.substr(0, pos);
}

AttrDef parse_kind(AttrDef def, const std::string& spec, int line_no) {
    if (spec == "STRING") {
        def.kind = AttrKind::String;
    } else if (spec == "INTEGER") {
        def.kind = AttrKind::Integer;
    } else if (spec == "REAL") {
        def.kind = AttrKind::Real;
    } else if (spec == "BOOLEAN") {
        def.kind = AttrKind::Boolean;
    } else if (spec.rfind("ENUM(", 0) == 0 && spec.back() == ')') {
        def.kind = AttrKind::Enum;
        std::string body = spec.substr(5, spec.size() - 6);
        std::istringstream in(body);
        std::string tag;
        while (std::getline(in, tag, ',')) {
            if (!tag.empty()) def.enum_tags.push_back(tag);
        }
        if (def.enum_tags.empty())
            throw ParseError("empty enum tag set for attribute " + def.name, line_no);
    } else if (spec.rfind("REF(", 0) == 0 && spec.back() == ')') {
        def.kind = AttrKind::Reference;
        def.target_type = spec.substr(4, spec.size() - 5);
    } else if (spec.rfind("LIST(", 0) == 0 && spec.back() == ')') {
        def.kind = AttrKind::ListOfReference;
        def.target_type = spec.substr(5, spec.size() - 6);
    } else {
        throw ParseError("unknown attribute kind '" + spec + "'", line_no);
    }
    return def;
}

} // namespace

Schema Schema::load(const std::string& text) {
    Schema schema;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    TypeDef* current = nullptr;

    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = strip_comment(raw);
        auto toks = split_ws(line);
        if (toks.empty()) continue;

        if (toks[0] == "SCHEMA") {
            if (toks.size() != 2) throw ParseError("SCHEMA expects one name", line_no);
            schema.name_ = toks[1];
        } else if (toks[0] == "TYPE") {
            if (current) throw ParseError("TYPE before END of previous type", line_no);
            if (toks.size() < 2) throw ParseError("TYPE expects a name", line_no);
            TypeDef def;
            def.name = toks[1];
            size_t i = 2;
            if (i + 1 < toks.size() + 1 && i < toks.size() && toks[i] == "EXTENDS") {
                if (i + 1 >= toks.size()) throw ParseError("EXTENDS expects a name", line_no);
                def.supertype = toks[i + 1];
                i += 2;
            }
            for (; i < toks.size(); ++i) {
                if (toks[i] == "ABSTRACT") def.abstract = true;
                else if (toks[i] == "ROOT") def.rooted_base = true;
                else throw ParseError("unexpected token '" + toks[i] + "'", line_no);
            }
            schema.types_.push_back(std::move(def));
            current = &schema.types_.back();
        } else if (toks[0] == "ATTR") {
            if (!current) throw ParseError("ATTR outside TYPE block", line_no);
            // ATTR <name> : <kind> [OPTIONAL]
            if (toks.size() < 4 || toks[2] != ":")
                throw ParseError("malformed ATTR line", line_no);
            AttrDef def;
            def.name = toks[1];
            def = parse_kind(std::move(def), toks[3], line_no);
            for (size_t i = 4; i < toks.size(); ++i) {
                if (toks[i] == "OPTIONAL") def.optional = true;
                else throw ParseError("unexpected token '" + toks[i] + "'", line_no);
            }
            current->attrs.push_back(std::move(def));
        } else if (toks[0] == "END") {
            if (!current) throw ParseError("END outside TYPE block", line_no);
            current = nullptr;
        } else {
            throw ParseError("unexpected token '" + toks[0] + "'", line_no);
        }
    }
    if (current) throw ParseError("missing END for type " + current->name, line_no);

    schema.validate_and_index();
    return schema;
}

void Schema::validate_and_index() {
    by_name_.clear();
    for (size_t i = 0; i < types_.size(); ++i) {
        if (!by_name_.emplace(types_[i].name, i).second)
            throw ValidationError("duplicate type name " + types_[i].name);
    }

    int rooted_bases = 0;
    for (const auto& t : types_) {
        if (t.rooted_base) {
            ++rooted_bases;
            rooted_base_ = t.name;
        }
        if (!t.supertype.empty() && !by_name_.count(t.supertype))
            throw ValidationError("unresolved supertype " + t.supertype + " of " + t.name);
        for (const auto& a : t.attrs) {
            if ((a.kind == AttrKind::Reference || a.kind == AttrKind::ListOfReference) &&
                !by_name_.count(a.target_type))
                throw ValidationError("unresolved reference target " + a.target_type +
                                      " in " + t.name + "." + a.name);
        }
    }
    if (rooted_bases != 1)
        throw ValidationError("schema must mark exactly one ROOT base type, found " +
                              std::to_string(rooted_bases));

    // Cycle check + flattened attribute lists.
    for (const auto& t : types_) {
        std::vector<const TypeDef*> chain;
        const TypeDef* cur = &t;
        while (cur) {
            if (std::find(chain.begin(), chain.end(), cur) != chain.end())
                throw ValidationError("cyclic inheritance involving " + cur->name);
            chain.push_back(cur);
            cur = cur->supertype.empty() ? nullptr : &types_[by_name_.at(cur->supertype)];
        }
        std::vector<AttrDef> flat;
        for (auto it = chain.rbegin(); it != chain.rend(); ++it)
            flat.insert(flat.end(), (*it)->attrs.begin(), (*it)->attrs.end());
        flat_attrs_.emplace(t.name, std::move(flat));
    }

    // Every concrete relationship type must name at least one Relating-
    // and one Related-prefixed attribute.
    for (const auto& t : types_) {
        if (t.abstract || !is_relationship(t.name)) continue;
        bool relating = false, related = false;
        for (const auto& a : flat_attrs_.at(t.name)) {
            if (a.name.rfind("Relating", 0) == 0) relating = true;
            if (a.name.rfind("Related", 0) == 0 && a.name.rfind("Relating", 0) != 0)
                related = true;
        }
        if (!relating || !related)
            throw ValidationError("relationship type " + t.name +
                                  " must declare Relating- and Related-prefixed attributes");
    }
}

const TypeDef* Schema::find(const std::string& type_name) const {
    auto it = by_name_.find(type_name);
    return it == by_name_.end() ? nullptr : &types_[it->second];
}

const TypeDef& Schema::at(const std::string& type_name) const {
    const TypeDef* t = find(type_name);
    if (!t) throw NotFoundError("unknown type " + type_name);
    return *t;
}

bool Schema::is_subtype_of(const std::string& type_name, const std::string& base) const {
    const TypeDef* t = find(type_name);
    while (t) {
        if (t->name == base) return true;
        t = t->supertype.empty() ? nullptr : find(t->supertype);
    }
    return false;
}

bool Schema::is_rooted(const std::string& type_name) const {
    return is_subtype_of(type_name, rooted_base_);
}

bool Schema::is_relationship(const std::string& type_name) const {
    return type_name != kRelationshipBase && is_subtype_of(type_name, kRelationshipBase);
}

RelationKind Schema::relation_kind(const std::string& type_name) const {
    if (!is_relationship(type_name)) return RelationKind::None;
    for (const auto& a : all_attrs(type_name)) {
        if (a.name.rfind("Related", 0) == 0 && a.name.rfind("Relating", 0) != 0 &&
            a.kind == AttrKind::ListOfReference)
            return RelationKind::OneToMany;
    }
    return RelationKind::OneToOne;
}

const std::vector<AttrDef>& Schema::all_attrs(const std::string& type_name) const {
    auto it = flat_attrs_.find(type_name);
    if (it == flat_attrs_.end()) throw NotFoundError("unknown type " + type_name);
    return it->second;
}

std::optional<size_t> Schema::attr_index(const std::string& type_name,
                                         const std::string& attr_name) const {
    const auto& attrs = all_attrs(type_name);
    for (size_t i = 0; i < attrs.size(); ++i)
        if (attrs[i].name == attr_name) return i;
    return std::nullopt;
}

const std::string& mini_ifc_schema_text() {
    static const std::string text = R"(SCHEMA MINI_IFC

TYPE IfcRoot ABSTRACT ROOT
  ATTR GlobalId : STRING
  ATTR OwnerHistory : REF(IfcOwnerHistory) OPTIONAL
  ATTR Name : STRING OPTIONAL
  ATTR Description : STRING OPTIONAL
END

TYPE IfcOwnerHistory
  ATTR OwningParty : STRING
  ATTR ChangeAction : ENUM(NOCHANGE,ADDED,MODIFIED,DELETED,NOTDEFINED) OPTIONAL
  ATTR CreationDate : INTEGER
END

TYPE IfcObject EXTENDS IfcRoot ABSTRACT
END

TYPE IfcProject EXTENDS IfcObject
  ATTR Phase : STRING OPTIONAL
END

TYPE IfcSpatialStructureElement EXTENDS IfcObject ABSTRACT
END

TYPE IfcBuildingStorey EXTENDS IfcSpatialStructureElement
  ATTR Elevation : REAL OPTIONAL
END

TYPE IfcProcess EXTENDS IfcObject ABSTRACT
END

TYPE IfcTask EXTENDS IfcProcess
  ATTR TaskId : STRING OPTIONAL
  ATTR Status : STRING OPTIONAL
END

TYPE IfcActor EXTENDS IfcObject
  ATTR TheOrganization : REF(IfcOrganization)
END

TYPE IfcOrganization
  ATTR Identification : STRING OPTIONAL
  ATTR Name : STRING
END

TYPE IfcProduct EXTENDS IfcObject ABSTRACT
  ATTR ObjectPlacement : REF(IfcLocalPlacement) OPTIONAL
END

TYPE IfcBuildingElement EXTENDS IfcProduct ABSTRACT
  ATTR Tag : STRING OPTIONAL
END

TYPE IfcColumn EXTENDS IfcBuildingElement
END

TYPE IfcBeam EXTENDS IfcBuildingElement
END

TYPE IfcSlab EXTENDS IfcBuildingElement
  ATTR PredefinedType : ENUM(FLOOR,ROOF,LANDING,NOTDEFINED) OPTIONAL
END

TYPE IfcOpeningElement EXTENDS IfcBuildingElement
END

TYPE IfcLocalPlacement
  ATTR PlacementRelTo : REF(IfcLocalPlacement) OPTIONAL
  ATTR RelativePlacement : REF(IfcAxis2Placement3D)
END

TYPE IfcAxis2Placement3D
  ATTR Location : REF(IfcCartesianPoint)
  ATTR Axis : REF(IfcDirection) OPTIONAL
END

TYPE IfcCartesianPoint
  ATTR X : REAL
  ATTR Y : REAL
  ATTR Z : REAL
END

TYPE IfcDirection
  ATTR X : REAL
  ATTR Y : REAL
  ATTR Z : REAL
END

TYPE IfcRelationship EXTENDS IfcRoot ABSTRACT
END

TYPE IfcRelAggregates EXTENDS IfcRelationship
  ATTR RelatingObject : REF(IfcObject)
  ATTR RelatedObjects : LIST(IfcObject)
END

TYPE IfcRelContainedInSpatialStructure EXTENDS IfcRelationship
  ATTR RelatedElements : LIST(IfcProduct)
  ATTR RelatingStructure : REF(IfcSpatialStructureElement)
END

TYPE IfcRelAssignsToProcess EXTENDS IfcRelationship
  ATTR RelatedObjects : LIST(IfcObject)
  ATTR RelatingProcess : REF(IfcProcess)
END

TYPE IfcRelFillsElement EXTENDS IfcRelationship
  ATTR RelatingOpeningElement : REF(IfcOpeningElement)
  ATTR RelatedBuildingElement : REF(IfcBuildingElement)
END
)";
    return text;
}

const Schema& mini_ifc_schema() {
    static const Schema schema = Schema::load(mini_ifc_schema_text());
    return schema;
}

} // namespace bimshare
