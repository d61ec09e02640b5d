#include "bimshare/integrate.hpp"

#include "bimshare/errors.hpp"

#include <algorithm>
#include <set>

namespace bimshare {

const char* to_string(EntityState s) {
    switch (s) {
    case EntityState::Add: return "ADD";
    case EntityState::Update: return "UPDATE";
    default: return "DELETE";
    }
}

StateMap analyze_states(const Model& sub, const Model& base) {
    StateMap states;
    for (const auto& [gid, label] : sub.rooted_index()) {
        const Entity& e = sub.at(label);
        if (change_action(sub, e) == ChangeAction::Deleted)
            states[gid] = EntityState::Delete; // mark wins regardless of existence
        else if (base.find_rooted(gid))
            states[gid] = EntityState::Update;
        else
            states[gid] = EntityState::Add;
    }
    return states;
}

namespace {

EntityState state_of(const StateMap& states, const std::string& gid, EntityState fallback) {
    auto it = states.find(gid);
    return it == states.end() ? fallback : it->second;
}

std::vector<std::string> gids_of(const Model& m, const std::vector<Label>& labels) {
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (Label l : labels) out.push_back(global_id(m, m.at(l)));
    return out;
}

} // namespace

IntegrationPlan precorrect(const Model& sub, const StateMap& states) {
    IntegrationPlan plan;
    plan.states = states;
    const Schema& schema = sub.schema();

    for (const auto& [gid, label] : sub.rooted_index()) {
        const Entity& rel = sub.at(label);
        RelationKind kind = schema.relation_kind(rel.type);
        if (kind == RelationKind::None) continue;

        auto relating = gids_of(sub, relating_targets(sub, rel));
        auto related = gids_of(sub, related_targets(sub, rel));
        auto deleted_in_sub = [&](const std::string& id) {
            return state_of(states, id, EntityState::Update) == EntityState::Delete;
        };

        if (kind == RelationKind::OneToOne) {
            // Rule 1: deleted endpoint kills the relation.
            bool endpoint_deleted =
                std::any_of(relating.begin(), relating.end(), deleted_in_sub) ||
                std::any_of(related.begin(), related.end(), deleted_in_sub);
            if (endpoint_deleted)
                plan.edits.push_back({RelationEdit::DeleteRelation, gid, {}});
            continue;
        }

        // [1:n]
        if (std::any_of(relating.begin(), relating.end(), deleted_in_sub)) {
            // Rule 2: deleted relating entity kills the relation.
            plan.edits.push_back({RelationEdit::DeleteRelation, gid, {}});
            continue;
        }
        std::vector<std::string> narrow, widen;
        for (const auto& id : related) {
            EntityState s = state_of(states, id, EntityState::Update);
            if (s == EntityState::Delete) narrow.push_back(id); // Rule 5
            else if (s == EntityState::Add) widen.push_back(id); // Rule 6
        }
        if (!narrow.empty())
            plan.edits.push_back({RelationEdit::Narrow, gid, std::move(narrow)});
        if (!widen.empty())
            plan.edits.push_back({RelationEdit::Widen, gid, std::move(widen)});
    }
    return plan;
}

namespace {

struct ApplyResult {
    Model model;
    PostContext ctx;
};

// Resource closure of a rooted entity, skipping references whose targets are
// already gone (entities erased earlier in the same apply/correct round may
// leave dangling refs behind until post-correction finishes).
std::vector<Label> resource_closure(const Model& m, Label root) {
    const Schema& schema = m.schema();
    std::vector<Label> out, stack{root};
    std::set<Label> seen{root};
    while (!stack.empty()) {
        Label l = stack.back();
        stack.pop_back();
        auto visit = [&](const Ref& r) {
            if (!m.has(r.label) || seen.count(r.label)) return;
            if (schema.is_rooted(m.at(r.label).type)) return;
            seen.insert(r.label);
            out.push_back(r.label);
            stack.push_back(r.label);
        };
        for (const AttrValue& v : m.at(l).attrs) {
            if (const auto* r = std::get_if<Ref>(&v)) visit(*r);
            else if (const auto* list = std::get_if<std::vector<Ref>>(&v))
                for (const Ref& r : *list) visit(r);
        }
    }
    return out;
}

void erase_closure(Model& m, Label root) {
    for (Label r : resource_closure(m, root)) m.erase(r);
    m.erase(root);
}

// Related-prefixed list attribute positions for a type.
std::vector<size_t> related_list_positions(const Schema& s, const std::string& type) {
    std::vector<size_t> out;
    const auto& defs = s.all_attrs(type);
    for (size_t i = 0; i < defs.size(); ++i)
        if (defs[i].name.rfind("Related", 0) == 0 && defs[i].name.rfind("Relating", 0) != 0 &&
            defs[i].kind == AttrKind::ListOfReference)
            out.push_back(i);
    return out;
}

ApplyResult apply_impl(const Model& base, const Model& sub, const IntegrationPlan& plan) {
    ApplyResult res{base, {}};
    Model& out = res.model;
    const Schema& schema = base.schema();

    for (const auto& [gid, label] : sub.rooted_index()) res.ctx.sub_ids.insert(gid);

    std::set<std::string> plan_deleted;
    for (const auto& edit : plan.edits)
        if (edit.kind == RelationEdit::DeleteRelation) plan_deleted.insert(edit.relation_id);

    auto remove_id = [&](const std::string& gid) {
        auto l = out.find_rooted(gid);
        if (!l) return false;
        erase_closure(out, *l);
        res.ctx.deleted_ids.insert(gid);
        return true;
    };

    // Relation deletes decided by pre-correction rules 1 and 2.
    for (const auto& gid : plan_deleted) remove_id(gid);

    // Base Related lists captured before any replacement, for merge semantics.
    auto capture_lists = [&](Label l) {
        std::map<size_t, std::vector<std::string>> lists;
        const Entity& e = out.at(l);
        for (size_t pos : related_list_positions(schema, e.type)) {
            std::vector<std::string> gids;
            for (const Ref& r : std::get<std::vector<Ref>>(e.attrs[pos]))
                if (out.has(r.label)) gids.push_back(global_id(out, out.at(r.label)));
            lists[pos] = std::move(gids);
        }
        return lists;
    };

    auto apply_one = [&](const std::string& gid, Label sub_label, EntityState state) {
        const Entity& se = sub.at(sub_label);
        RelationKind kind = schema.relation_kind(se.type);
        switch (state) {
        case EntityState::Delete: {
            auto l = out.find_rooted(gid);
            if (!l) return; // already gone: deleting twice is a no-op
            if (kind == RelationKind::OneToMany) {
                // Rule 4: a deleted [1:n] relation with related entities
                // missing from the sub-model is narrowed, not removed.
                const Entity& be = out.at(*l);
                std::vector<std::string> base_related;
                for (Label t : related_targets(out, be))
                    if (out.has(t)) base_related.push_back(global_id(out, out.at(t)));
                bool all_in_sub =
                    std::all_of(base_related.begin(), base_related.end(),
                                [&](const std::string& id) { return res.ctx.sub_ids.count(id); });
                if (!all_in_sub) {
                    Entity& target = out.at(*l);
                    for (size_t pos : related_list_positions(schema, target.type)) {
                        auto& list = std::get<std::vector<Ref>>(target.attrs[pos]);
                        std::erase_if(list, [&](const Ref& r) {
                            return out.has(r.label) &&
                                   res.ctx.sub_ids.count(global_id(out, out.at(r.label)));
                        });
                    }
                    return;
                }
            }
            remove_id(gid);
            return;
        }
        case EntityState::Update: {
            auto l = out.find_rooted(gid);
            if (!l)
                throw ConflictError("UPDATE target " + gid +
                                    " was concurrently removed from the base model");
            auto base_lists = capture_lists(*l);
            erase_closure(out, *l);
            std::vector<std::string> unresolved;
            import_exchangeable(out, sub, sub_label, &unresolved, *l);
            for (auto& u : unresolved) res.ctx.unresolved_ids.insert(u);
            // Merge [1:n] Related lists: base members stay unless the
            // sub-model carries the member but dropped it from the list.
            Entity& ne = out.at(*l);
            for (size_t pos : related_list_positions(schema, ne.type)) {
                auto& sub_list = std::get<std::vector<Ref>>(ne.attrs[pos]);
                std::vector<std::string> sub_gids;
                for (const Ref& r : sub_list)
                    if (out.has(r.label)) sub_gids.push_back(global_id(out, out.at(r.label)));
                std::vector<std::string> merged;
                auto bit = base_lists.find(pos);
                if (bit != base_lists.end()) {
                    for (const auto& id : bit->second) {
                        bool dropped_deliberately =
                            res.ctx.sub_ids.count(id) &&
                            std::find(sub_gids.begin(), sub_gids.end(), id) == sub_gids.end();
                        if (!dropped_deliberately) merged.push_back(id);
                    }
                }
                for (const auto& id : sub_gids)
                    if (std::find(merged.begin(), merged.end(), id) == merged.end())
                        merged.push_back(id);
                std::vector<Ref> refs;
                for (const auto& id : merged) {
                    auto tl = out.find_rooted(id);
                    if (tl) refs.push_back(Ref{*tl});
                    else res.ctx.unresolved_ids.insert(id);
                }
                sub_list = std::move(refs);
            }
            return;
        }
        case EntityState::Add: {
            if (out.find_rooted(gid)) return; // integrating twice: already there
            std::vector<std::string> unresolved;
            import_exchangeable(out, sub, sub_label, &unresolved);
            for (auto& u : unresolved) res.ctx.unresolved_ids.insert(u);
            return;
        }
        }
    };

    // Non-relation entities first so relation endpoint references resolve,
    // each group in GlobalId order for determinism.
    std::vector<std::pair<std::string, Label>> ordered(sub.rooted_index().begin(),
                                                       sub.rooted_index().end());
    std::sort(ordered.begin(), ordered.end());
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& [gid, sub_label] : ordered) {
            bool is_rel = schema.is_relationship(sub.at(sub_label).type);
            if (is_rel != (pass == 1)) continue;
            if (plan_deleted.count(gid)) continue;
            auto it = plan.states.find(gid);
            if (it == plan.states.end()) continue;
            apply_one(gid, sub_label, it->second);
        }
    }

    // Rule 5 narrow edits: DELETE-marked members leave the Related lists.
    for (const auto& edit : plan.edits) {
        if (edit.kind != RelationEdit::Narrow) continue;
        auto l = out.find_rooted(edit.relation_id);
        if (!l) continue;
        std::set<std::string> remove(edit.endpoint_ids.begin(), edit.endpoint_ids.end());
        Entity& rel = out.at(*l);
        for (size_t pos : related_list_positions(schema, rel.type)) {
            auto& list = std::get<std::vector<Ref>>(rel.attrs[pos]);
            std::erase_if(list, [&](const Ref& r) {
                return out.has(r.label) && remove.count(global_id(out, out.at(r.label)));
            });
        }
    }
    // Rule 6 widen edits: make sure new members ended up in the lists.
    for (const auto& edit : plan.edits) {
        if (edit.kind != RelationEdit::Widen) continue;
        auto l = out.find_rooted(edit.relation_id);
        if (!l) continue;
        Entity& rel = out.at(*l);
        auto positions = related_list_positions(schema, rel.type);
        if (positions.empty()) continue;
        auto& list = std::get<std::vector<Ref>>(rel.attrs[positions.front()]);
        for (const auto& id : edit.endpoint_ids) {
            auto tl = out.find_rooted(id);
            if (!tl) continue;
            if (std::none_of(list.begin(), list.end(),
                             [&](const Ref& r) { return r.label == *tl; }))
                list.push_back(Ref{*tl});
        }
    }

    return res;
}

} // namespace

Model apply_plan(const Model& base, const Model& sub, const IntegrationPlan& plan) {
    return apply_impl(base, sub, plan).model;
}

Model postcorrect(Model integrated, const PostContext& ctx) {
    const Schema& schema = integrated.schema();

    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<Label> relations;
        for (const auto& [label, e] : integrated.entities())
            if (schema.is_relationship(e.type)) relations.push_back(label);

        for (Label rl : relations) {
            if (!integrated.has(rl)) continue; // removed by an earlier closure erase
            const Entity& rel = integrated.at(rl);
            RelationKind kind = schema.relation_kind(rel.type);
            const auto& defs = schema.all_attrs(rel.type);

            bool drop = false;
            for (size_t i = 0; i < defs.size() && !drop; ++i) {
                bool is_relating = defs[i].name.rfind("Relating", 0) == 0;
                bool is_related = !is_relating && defs[i].name.rfind("Related", 0) == 0;
                if (!is_relating && !is_related) continue;
                const AttrValue& v = rel.attrs[i];
                if (std::holds_alternative<std::monostate>(v)) {
                    // An endpoint pruned at import time; without it the
                    // relation is meaningless (rules 1-2 recheck).
                    if (!defs[i].optional) drop = true;
                } else if (std::holds_alternative<Ref>(v)) {
                    if (!integrated.has(std::get<Ref>(v).label)) drop = true;
                } else if (std::holds_alternative<std::vector<Ref>>(v)) {
                    auto& list = std::get<std::vector<Ref>>(integrated.at(rl).attrs[i]);
                    size_t before = list.size();
                    // Rule 5 recheck: deleted members leave the list.
                    std::erase_if(list, [&](const Ref& r) { return !integrated.has(r.label); });
                    if (list.size() != before) changed = true;
                    if (is_related && list.empty()) drop = true; // Rule 7
                }
            }

            if (!drop && kind == RelationKind::OneToOne) {
                // Rule 3: both endpoints travelled in the sub-model while the
                // relation itself did not.
                const std::string& rel_gid = global_id(integrated, rel);
                if (!ctx.sub_ids.count(rel_gid)) {
                    auto relating = relating_targets(integrated, rel);
                    auto related = related_targets(integrated, rel);
                    auto all_in_sub = [&](const std::vector<Label>& ls) {
                        return !ls.empty() &&
                               std::all_of(ls.begin(), ls.end(), [&](Label l) {
                                   return ctx.sub_ids.count(
                                       global_id(integrated, integrated.at(l)));
                               });
                    };
                    if (all_in_sub(relating) && all_in_sub(related)) drop = true;
                }
            }

            if (drop) {
                erase_closure(integrated, rl);
                changed = true;
            }
        }
    }

    integrated.validate(); // surfaces e.g. shared-resource deletion violations
    return integrated;
}

Model integrate(const Model& base, const Model& sub) {
    StateMap states = analyze_states(sub, base);
    IntegrationPlan plan = precorrect(sub, states);
    ApplyResult applied = apply_impl(base, sub, plan);
    return postcorrect(std::move(applied.model), applied.ctx);
}

Model integrate(const Model& base, const SubModel& sub) {
    return integrate(base, sub.model);
}

} // namespace bimshare
