#include "bimshare/extract.hpp"

#include "bimshare/errors.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <vector>

namespace bimshare {

namespace {

struct Selection {
    std::set<Label> selected;    // non-relation rooted entities
    std::set<Label> constrained; // subset selected by a clause with >= 1 constraint
};

// Rule candidates: rooted, non-relation instances of the rule type or a
// descendant, in label order.
std::vector<Label> candidates_for(const Model& model, const ConceptRule& rule) {
    std::vector<Label> out;
    const Schema& s = model.schema();
    for (const auto& [label, e] : model.entities()) {
        if (!s.is_rooted(e.type) || s.is_relationship(e.type)) continue;
        if (s.is_subtype_of(e.type, rule.entity_type)) out.push_back(label);
    }
    return out;
}

void apply_rule(const Model& model, const ConceptRule& rule, const std::vector<Label>& cand,
                Selection& sel) {
    bool has_constrained_clause = false;
    bool has_type_only_clause = false;
    for (const auto& c : rule.clauses)
        (c.empty() ? has_type_only_clause : has_constrained_clause) = true;
    for (Label l : cand) {
        const Entity& e = model.at(l);
        if (has_type_only_clause) {
            sel.selected.insert(l);
            if (!has_constrained_clause) continue;
        }
        // Constrained membership needs a satisfied non-empty clause.
        bool constrained_hit = false;
        for (const Clause& clause : rule.clauses) {
            if (clause.empty()) continue;
            bool all = true;
            for (const auto& c : clause)
                if (!eval_constraint(c, e, model)) {
                    all = false;
                    break;
                }
            if (all) {
                constrained_hit = true;
                break;
            }
        }
        if (constrained_hit) {
            sel.selected.insert(l);
            sel.constrained.insert(l);
        }
    }
}

Selection phase1(const Model& model, const ModelView& view) {
    Selection sel;
    for (const auto& rule : view.rules)
        apply_rule(model, rule, candidates_for(model, rule), sel);
    return sel;
}

// Relation retention to a fixed point: every Relating endpoint and at least
// one Related endpoint must lie in selection-or-retained.
std::set<Label> phase2(const Model& model, const std::set<Label>& selected) {
    const Schema& s = model.schema();
    std::vector<Label> relations;
    for (const auto& [label, e] : model.entities())
        if (s.is_relationship(e.type)) relations.push_back(label);

    std::set<Label> kept = selected;
    std::set<Label> retained;
    bool changed = true;
    while (changed) {
        changed = false;
        for (Label rl : relations) {
            if (retained.count(rl)) continue;
            const Entity& rel = model.at(rl);
            auto relating = relating_targets(model, rel);
            auto related = related_targets(model, rel);
            if (relating.empty() || related.empty()) continue;
            bool all_relating = std::all_of(relating.begin(), relating.end(),
                                            [&](Label l) { return kept.count(l) != 0; });
            bool any_related = std::any_of(related.begin(), related.end(),
                                           [&](Label l) { return kept.count(l) != 0; });
            if (all_relating && any_related) {
                retained.insert(rl);
                kept.insert(rl);
                changed = true;
            }
        }
    }
    return retained;
}

SubModel finish(const Model& model, const ModelView& view, ExtractionMode mode,
                Selection sel) {
    std::set<Label> retained = phase2(model, sel.selected);

    if (mode == ExtractionMode::Strict) {
        // Drop type-only survivors not one hop away from a constrained match
        // through a retained relation.
        std::set<Label> keep = sel.constrained;
        for (Label rl : retained) {
            const Entity& rel = model.at(rl);
            std::vector<Label> ends = relating_targets(model, rel);
            auto rt = related_targets(model, rel);
            ends.insert(ends.end(), rt.begin(), rt.end());
            bool touches_constrained = std::any_of(ends.begin(), ends.end(), [&](Label l) {
                return sel.constrained.count(l) != 0;
            });
            if (!touches_constrained) continue;
            for (Label l : ends)
                if (sel.selected.count(l)) keep.insert(l);
        }
        if (keep != sel.selected) {
            sel.selected = std::move(keep);
            retained = phase2(model, sel.selected);
        }
    }

    SubModel out(model.schema());
    out.view_name = view.name;

    // Non-relation roots first so endpoint references resolve during import;
    // import drops references to entities outside the output set, which is
    // exactly the narrowing of [1:n] Related lists.
    std::vector<std::string> unresolved;
    for (Label l : sel.selected) import_exchangeable(out.model, model, l, &unresolved);
    std::set<Label> pending = retained;
    bool progress = true;
    while (!pending.empty() && progress) {
        progress = false;
        for (auto it = pending.begin(); it != pending.end();) {
            const Entity& rel = model.at(*it);
            // Wait for retained relation-typed endpoints to land first so a
            // relation-to-relation reference is kept rather than narrowed away.
            std::vector<Label> ends = relating_targets(model, rel);
            auto rt = related_targets(model, rel);
            ends.insert(ends.end(), rt.begin(), rt.end());
            bool ready = std::all_of(ends.begin(), ends.end(), [&](Label l) {
                return !retained.count(l) ||
                       out.model.find_rooted(global_id(model, model.at(l))).has_value();
            });
            if (!ready) {
                ++it;
                continue;
            }
            import_exchangeable(out.model, model, *it, &unresolved);
            it = pending.erase(it);
            progress = true;
        }
    }
    for (Label l : pending) import_exchangeable(out.model, model, l, &unresolved);

    // Extracted entities start unmarked: never carry DELETE marks out.
    std::vector<Label> rooted_labels;
    for (const auto& [gid, label] : out.model.rooted_index()) rooted_labels.push_back(label);
    for (Label l : rooted_labels)
        if (change_action(out.model, out.model.at(l)) == ChangeAction::Deleted)
            set_change_action(out.model, l, ChangeAction::NoChange);

    out.model.validate();
    return out;
}

} // namespace

SubModel extract(const Model& model, const ModelView& view, ExtractionMode mode) {
    return finish(model, view, mode, phase1(model, view));
}

namespace {

Selection phase1_instance_parallel(const Model& model, const ModelView& view, int workers) {
    Selection sel;
    for (const auto& rule : view.rules) {
        std::vector<Label> cand = candidates_for(model, rule);
        std::vector<char> hit(cand.size(), 0);        // any clause
        std::vector<char> hit_constrained(cand.size(), 0);
        bool has_type_only = false;
        for (const auto& c : rule.clauses)
            if (c.empty()) has_type_only = true;
#pragma omp parallel for schedule(static) num_threads(workers)
        for (long i = 0; i < static_cast<long>(cand.size()); ++i) {
            const Entity& e = model.at(cand[i]);
            for (const Clause& clause : rule.clauses) {
                if (clause.empty()) continue;
                bool all = true;
                for (const auto& c : clause)
                    if (!eval_constraint(c, e, model)) {
                        all = false;
                        break;
                    }
                if (all) {
                    hit_constrained[i] = 1;
                    break;
                }
            }
            if (has_type_only || hit_constrained[i]) hit[i] = 1;
        }
        for (size_t i = 0; i < cand.size(); ++i) {
            if (hit[i]) sel.selected.insert(cand[i]);
            if (hit_constrained[i]) sel.constrained.insert(cand[i]);
        }
    }
    return sel;
}

Selection phase1_type_parallel(const Model& model, const ModelView& view, int workers) {
    std::vector<Selection> partial(view.rules.size());
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (long i = 0; i < static_cast<long>(view.rules.size()); ++i) {
        const auto& rule = view.rules[i];
        apply_rule(model, rule, candidates_for(model, rule), partial[i]);
    }
    Selection sel;
    for (const auto& p : partial) {
        sel.selected.insert(p.selected.begin(), p.selected.end());
        sel.constrained.insert(p.constrained.begin(), p.constrained.end());
    }
    return sel;
}

Selection phase1_server_parallel(const std::vector<const Model*>& replicas,
                                 const ModelView& view, int workers) {
    const size_t n = replicas.size();
    // Per-replica rule groups; partial selections carried as GlobalIds so
    // they merge across label spaces.
    std::vector<std::set<std::string>> sel_ids(n), con_ids(n);
#pragma omp parallel for schedule(static) num_threads(workers)
    for (long k = 0; k < static_cast<long>(n); ++k) {
        const Model& m = *replicas[k];
        Selection local;
        for (size_t i = k; i < view.rules.size(); i += n)
            apply_rule(m, view.rules[i], candidates_for(m, view.rules[i]), local);
        for (Label l : local.selected) sel_ids[k].insert(global_id(m, m.at(l)));
        for (Label l : local.constrained) con_ids[k].insert(global_id(m, m.at(l)));
    }

    // Post-merge consistency check: every selected entity must exist,
    // attribute-identical, on every replica.
    const Model& primary = *replicas[0];
    Selection sel;
    for (size_t k = 0; k < n; ++k) {
        for (const std::string& gid : sel_ids[k]) {
            auto l0 = primary.find_rooted(gid);
            if (!l0)
                throw ConflictError("replica divergence: " + gid +
                                    " selected on replica " + std::to_string(k) +
                                    " is absent from replica 0");
            for (size_t j = 0; j < n; ++j) {
                auto lj = replicas[j]->find_rooted(gid);
                if (!lj || !entity_equal(primary, primary.at(*l0), *replicas[j],
                                         replicas[j]->at(*lj)))
                    throw ConflictError("replica divergence: " + gid +
                                        " differs on replica " + std::to_string(j));
            }
            sel.selected.insert(*l0);
            if (con_ids[k].count(gid)) sel.constrained.insert(*l0);
        }
    }
    return sel;
}

} // namespace

SubModel extract_parallel(const std::vector<const Model*>& replicas, const ModelView& view,
                          ExtractionMode mode, ParallelLevel level, int workers) {
    if (replicas.empty()) throw ValidationError("at least one replica is required");
    if (workers < 1) throw ValidationError("workers must be positive");
    const Model& primary = *replicas[0];
    Selection sel;
    switch (level) {
    case ParallelLevel::Server:
        sel = phase1_server_parallel(replicas, view, workers);
        break;
    case ParallelLevel::Type:
        sel = phase1_type_parallel(primary, view, workers);
        break;
    case ParallelLevel::Instance:
        sel = phase1_instance_parallel(primary, view, workers);
        break;
    }
    return finish(primary, view, mode, std::move(sel));
}

SubModel extract_parallel(const Model& model, const ModelView& view, ExtractionMode mode,
                          ParallelLevel level, int workers) {
    std::vector<const Model*> replicas{&model};
    return extract_parallel(replicas, view, mode, level, workers);
}

} // namespace bimshare
