#pragma once

#include "bimshare/extract.hpp"
#include "bimshare/model.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace bimshare {

enum class EntityState { Add, Update, Delete };

const char* to_string(EntityState s);

// EntityId -> state, one entry per rooted entity in the sub-model.
using StateMap = std::map<std::string, EntityState>;

struct RelationEdit {
    enum Kind { DeleteRelation, Narrow, Widen } kind;
    std::string relation_id;
    std::vector<std::string> endpoint_ids; // removed (Narrow) / added (Widen)
};

struct IntegrationPlan {
    StateMap states;
    std::vector<RelationEdit> edits;
};

// DELETE if the entity carries a DELETE change mark; else UPDATE if its id
// exists in base; else ADD.
StateMap analyze_states(const Model& sub, const Model& base);

// Pre-correction over relations present in the sub-model:
//   rule 1: [1:1] relation with a DELETE-marked endpoint is deleted.
//   rule 2: [1:n] relation whose relating entity is DELETE-marked is deleted.
//   rule 5: DELETE-marked related entities are removed from [1:n] lists.
//   rule 6: newly ADDed related entities are recorded as widen edits.
IntegrationPlan precorrect(const Model& sub, const StateMap& states);

// Applies ADD / UPDATE / DELETE plus the plan's relation edits.
// UPDATE replaces the exchangeable entity wholesale, except that Related
// lists of [1:n] relations merge against the base: base members absent from
// the sub-model survive, members present in the sub-model but dropped from
// the list are removed, new members are appended.
// A DELETE-marked [1:n] relation with only some of its related entities in
// the sub-model is narrowed instead of removed (rule 4).
Model apply_plan(const Model& base, const Model& sub, const IntegrationPlan& plan);

// Post-correction:
//   rule 3: a [1:1] relation whose endpoints are both in the sub-model while
//           the relation itself is not is deleted.
//   rules 1-2 recheck: relations with deleted endpoints are deleted.
//   rule 5 recheck: deleted ids are removed from [1:n] Related lists.
//   rule 7: a [1:n] relation with an empty Related list is deleted.
// Iterated to a fixed point, then the model is fully re-validated.
struct PostContext {
    std::set<std::string> sub_ids;     // rooted ids present in the sub-model
    std::set<std::string> deleted_ids; // ids removed during apply
    std::set<std::string> unresolved_ids;
};
Model postcorrect(Model integrated, const PostContext& ctx = {});

// analyze -> precorrect -> apply -> postcorrect.
Model integrate(const Model& base, const Model& sub);
Model integrate(const Model& base, const SubModel& sub);

} // namespace bimshare
