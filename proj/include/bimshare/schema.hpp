#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace bimshare {

enum class AttrKind {
    String,
    Integer,
    Real,
    Boolean,
    Enum,
    Reference,
    ListOfReference,
};

struct AttrDef {
    std::string name;
    AttrKind kind = AttrKind::String;
    bool optional = false;
    std::vector<std::string> enum_tags; // Enum only
    std::string target_type;            // Reference / ListOfReference only
};

struct TypeDef {
    std::string name;
    std::string supertype; // empty for base types
    bool abstract = false;
    bool rooted_base = false;
    std::vector<AttrDef> attrs; // own attributes, declaration order
};

enum class RelationKind { None, OneToOne, OneToMany };

// A validated declarative schema. Immutable after load; all queries are
// pure and safe for unrestricted concurrent use.
class Schema {
public:
    // Parses the line-oriented schema format:
    //   SCHEMA <Name>              (optional, once)
    //   TYPE <Name> [EXTENDS <Super>] [ABSTRACT] [ROOT]
    //     ATTR <name> : <kind> [OPTIONAL]
    //   END
    // Kinds: STRING|INTEGER|REAL|BOOLEAN|ENUM(a,b,...)|REF(Type)|LIST(Type)
    static Schema load(const std::string& text);

    const std::string& name() const { return name_; }
    const std::vector<TypeDef>& types() const { return types_; }

    const TypeDef* find(const std::string& type_name) const;
    const TypeDef& at(const std::string& type_name) const; // throws NotFoundError

    bool is_subtype_of(const std::string& type_name, const std::string& base) const;
    bool is_rooted(const std::string& type_name) const;
    bool is_relationship(const std::string& type_name) const;
    RelationKind relation_kind(const std::string& type_name) const;

    // Own + inherited attributes, supertype attributes first.
    const std::vector<AttrDef>& all_attrs(const std::string& type_name) const;
    // Index into all_attrs, or nullopt.
    std::optional<size_t> attr_index(const std::string& type_name,
                                     const std::string& attr_name) const;

    const std::string& rooted_base() const { return rooted_base_; }
    static constexpr const char* kRelationshipBase = "IfcRelationship";

private:
    std::string name_;
    std::string rooted_base_;
    std::vector<TypeDef> types_;
    std::unordered_map<std::string, size_t> by_name_;
    std::unordered_map<std::string, std::vector<AttrDef>> flat_attrs_;

    void validate_and_index();
};

// The schema bundled with the artifact: a small IFC-flavoured vocabulary
// covering spatial structure, building elements, tasks and the four
// relationship types the engine exercises.
const std::string& mini_ifc_schema_text();
const Schema& mini_ifc_schema();

} // namespace bimshare
