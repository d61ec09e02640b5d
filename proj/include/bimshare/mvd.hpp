#pragma once

#include "bimshare/model.hpp"
#include "bimshare/schema.hpp"

#include <string>
#include <vector>

namespace bimshare {

enum class PredKind { Eq, Contains, InSet, Exists };

struct AttributeConstraint {
    std::vector<std::string> path; // attribute names, navigating references
    PredKind pred = PredKind::Exists;
    std::vector<std::string> values; // Eq/Contains use [0]; InSet uses all
    bool operator==(const AttributeConstraint&) const = default;
};

// A finite and/or tree over attribute constraints.
struct ConstraintExpr {
    enum Kind { Leaf, And, Or } kind = Leaf;
    AttributeConstraint leaf;
    std::vector<ConstraintExpr> children;

    static ConstraintExpr make_leaf(AttributeConstraint c) {
        ConstraintExpr e;
        e.kind = Leaf;
        e.leaf = std::move(c);
        return e;
    }
    static ConstraintExpr make_and(std::vector<ConstraintExpr> cs) {
        ConstraintExpr e;
        e.kind = And;
        e.children = std::move(cs);
        return e;
    }
    static ConstraintExpr make_or(std::vector<ConstraintExpr> cs) {
        ConstraintExpr e;
        e.kind = Or;
        e.children = std::move(cs);
        return e;
    }
};

using Clause = std::vector<AttributeConstraint>; // conjunction

// Union-of-intersections form; clauses deduplicated and subsumption-pruned
// (no clause is a superset of another). An empty conjunction matches
// everything of the rule's type.
std::vector<Clause> to_dnf(const ConstraintExpr& expr);

struct ConceptRule {
    std::string entity_type;
    std::vector<Clause> clauses; // disjunction of conjunctions
};

struct ModelView {
    std::string name;
    std::vector<ConceptRule> rules; // entity types distinct
    std::vector<std::string> provenance; // exchange-requirement names, optional
};

// Parses the MVD-XML dialect:
//   <ModelView name="..."> <Rule type="T"> <And>/<Or> groups over
//   <Eq path="A.B" value=".."/> <Contains .../> <In path=".." values="a|b"/>
//   <Exists path=".."/> </Rule> ... </ModelView>
// Bare constraints under <Rule> form a conjunction. Duplicate-type rules are
// merged (clause union). All paths are schema-checked.
ModelView parse_mvd(const std::string& xml, const Schema& schema);

std::string write_mvd(const ModelView& view);

// True iff some clause of the rule holds for the entity. Path navigation
// through an absent optional attribute makes the constraint false.
bool matches(const ConceptRule& rule, const Entity& entity, const Model& model);

// True iff some rule whose type is a supertype (or exact type) of the entity
// matches it.
bool matches_view(const ModelView& view, const Entity& entity, const Model& model);

bool eval_constraint(const AttributeConstraint& c, const Entity& entity, const Model& model);

// Checks that every constraint path in the view resolves against the schema.
void check_view(const ModelView& view, const Schema& schema);

} // namespace bimshare
