#pragma once

// The 18 one-relation integration situations: a base model holding either a
// one-to-one relation A-R-B or a one-to-many relation A-R-[B,C], integrated
// with sub-models that carry various combinations of the endpoints, the
// relation, and DELETE change marks. Each case states exactly which entities
// survive and what the relation's related list must look like.

#include "bimshare/integrate.hpp"
#include "bimshare/model.hpp"

#include "fixtures.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace situations {

using namespace bimshare;

struct Result {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline const std::string A = fx::gid("entityA");
inline const std::string B = fx::gid("entityB");
inline const std::string C = fx::gid("entityC");
inline const std::string D = fx::gid("entityD");
inline const std::string R = fx::gid("relR");

// [1:1]: A fills-opening relation between an opening A and a column B.
inline Model base_1to1(const Schema& s) {
    Model m(s);
    Label a = fx::make(m, "IfcOpeningElement", A, {{"Name", std::string("A")}});
    Label b = fx::make(m, "IfcColumn", B, {{"Name", std::string("B")}});
    fx::make(m, "IfcRelFillsElement", R,
             {{"RelatingOpeningElement", Ref{a}}, {"RelatedBuildingElement", Ref{b}}});
    m.validate();
    return m;
}

// [1:n]: storey A contains columns B and C.
inline Model base_1ton(const Schema& s) {
    Model m(s);
    Label a = fx::make(m, "IfcBuildingStorey", A, {{"Name", std::string("A")}});
    Label b = fx::make(m, "IfcColumn", B, {{"Name", std::string("B")}});
    Label c = fx::make(m, "IfcColumn", C, {{"Name", std::string("C")}});
    fx::make(m, "IfcRelContainedInSpatialStructure", R,
             {{"RelatedElements", fx::refs({b, c})}, {"RelatingStructure", Ref{a}}});
    m.validate();
    return m;
}

// Copies the named entities out of base into a fresh sub-model.
inline Model pick(const Model& base, const std::vector<std::string>& ids) {
    std::vector<Label> roots;
    for (const auto& id : ids) roots.push_back(*base.find_rooted(id));
    return build_submodel(base, roots);
}

inline void mark_deleted(Model& m, const std::string& id) {
    set_change_action(m, *m.find_rooted(id), ChangeAction::Deleted, "tester");
}

struct Expect {
    std::set<std::string> present;
    std::set<std::string> absent;
    // When set, R must exist with exactly these related ids (in any order).
    std::optional<std::set<std::string>> related;
};

inline Result check(const std::string& name, const Model& base, const Model& sub,
                    const Expect& want) {
    Result res{name, false, ""};
    Model out(base.schema());
    try {
        out = integrate(base, sub);
    } catch (const std::exception& e) {
        res.detail = std::string("integrate threw: ") + e.what();
        return res;
    }
    std::ostringstream why;
    for (const auto& id : want.present)
        if (!out.find_rooted(id)) why << id.substr(0, 7) << " missing; ";
    for (const auto& id : want.absent)
        if (out.find_rooted(id)) why << id.substr(0, 7) << " survived; ";
    if (want.related) {
        auto rl = out.find_rooted(R);
        if (!rl) {
            why << "relation missing; ";
        } else {
            std::set<std::string> got;
            for (Label t : related_targets(out, out.at(*rl)))
                got.insert(global_id(out, out.at(t)));
            if (got != *want.related) {
                why << "related list { ";
                for (const auto& g : got) why << g.substr(0, 7) << ' ';
                why << "}; ";
            }
        }
    }
    try {
        out.validate();
    } catch (const std::exception& e) {
        why << "result invalid: " << e.what();
    }
    res.detail = why.str();
    res.pass = res.detail.empty();
    return res;
}

} // namespace detail

inline std::vector<Result> run_all(const Schema& schema) {
    using namespace detail;
    std::vector<Result> out;
    auto add = [&](const std::string& name, bool one_to_one,
                   const std::function<Model(const Model&)>& make_sub, const Expect& want) {
        Model base = one_to_one ? base_1to1(schema) : base_1ton(schema);
        try {
            out.push_back(check(name, base, make_sub(base), want));
        } catch (const std::exception& e) {
            out.push_back({name, false, std::string("setup threw: ") + e.what()});
        }
    };

    // --- one-to-one -------------------------------------------------------
    add("1.1 sub {A}", true, [](const Model& b) { return pick(b, {A}); },
        {{A, B, R}, {}, {{B}}});
    add("1.2 sub {A deleted}", true,
        [](const Model& b) {
            Model s = pick(b, {A});
            mark_deleted(s, A);
            return s;
        },
        {{B}, {A, R}, std::nullopt});
    add("1.3 sub {A,B}, R left behind", true,
        [](const Model& b) { return pick(b, {A, B}); }, {{A, B}, {R}, std::nullopt});
    add("1.4 sub {A, B deleted}", true,
        [](const Model& b) {
            Model s = pick(b, {A, B});
            mark_deleted(s, B);
            return s;
        },
        {{A}, {B, R}, std::nullopt});
    add("1.5 sub {A,B,R}", true, [](const Model& b) { return pick(b, {A, B, R}); },
        {{A, B, R}, {}, {{B}}});
    add("1.6 sub {A, B deleted, R}", true,
        [](const Model& b) {
            Model s = pick(b, {A, B, R});
            mark_deleted(s, B);
            return s;
        },
        {{A}, {B, R}, std::nullopt});

    // --- one-to-many --------------------------------------------------------
    add("2.1 sub {A}", false, [](const Model& b) { return pick(b, {A}); },
        {{A, B, C, R}, {}, {{B, C}}});
    add("2.2 sub {A deleted}", false,
        [](const Model& b) {
            Model s = pick(b, {A});
            mark_deleted(s, A);
            return s;
        },
        {{B, C}, {A, R}, std::nullopt});
    add("2.3 sub {A deleted, B}", false,
        [](const Model& b) {
            Model s = pick(b, {A, B});
            mark_deleted(s, A);
            return s;
        },
        {{B, C}, {A, R}, std::nullopt});
    add("2.4 sub {A deleted, B deleted}", false,
        [](const Model& b) {
            Model s = pick(b, {A, B});
            mark_deleted(s, A);
            mark_deleted(s, B);
            return s;
        },
        {{C}, {A, B, R}, std::nullopt});
    add("2.5 sub {A,B,C,R}", false, [](const Model& b) { return pick(b, {A, B, C, R}); },
        {{A, B, C, R}, {}, {{B, C}}});
    add("2.6 deleted endpoint narrows / deleted relation narrows", false,
        [](const Model& b) {
            Model s = pick(b, {A, B, C, R});
            mark_deleted(s, B);
            return s;
        },
        {{A, C, R}, {B}, {{C}}});
    // 2.6 second reading: the relation itself is DELETE-marked while naming
    // only B; entities outside the sub-model keep the narrowed relation.
    add("2.6b sub {A, B, R[B] deleted}", false,
        [](const Model& b) {
            Model s = pick(b, {A, B});
            // the sub's copy of R names only B (C stays outside the sub)
            fx::make(s, "IfcRelContainedInSpatialStructure", R,
                     {{"RelatedElements", fx::refs({*s.find_rooted(B)})},
                      {"RelatingStructure", Ref{*s.find_rooted(A)}}});
            mark_deleted(s, R);
            return s;
        },
        {{A, B, C, R}, {}, {{C}}});
    add("2.7 sub {A,B,C,R modified}", false,
        [](const Model& b) {
            Model s = pick(b, {A, B, C, R});
            fx::set_attr(s, *s.find_rooted(R), "Name", std::string("renamed"));
            return s;
        },
        {{A, B, C, R}, {}, {{B, C}}});
    add("2.8 sub {A,B,C,R deleted}", false,
        [](const Model& b) {
            Model s = pick(b, {A, B, C, R});
            mark_deleted(s, R);
            return s;
        },
        {{A, B, C}, {R}, std::nullopt});
    add("2.9 sub adds D to R", false,
        [](const Model& b) {
            Model s = pick(b, {A, B, C, R});
            Label d = fx::make(s, "IfcColumn", D, {{"Name", std::string("D")}});
            Label rl = *s.find_rooted(R);
            fx::set_attr(s, rl, "RelatedElements",
                         fx::refs({*s.find_rooted(B), *s.find_rooted(C), d}));
            return s;
        },
        {{A, B, C, D, R}, {}, {{B, C, D}}});
    add("2.10 sub {A, B deleted}, R left behind", false,
        [](const Model& b) {
            Model s = pick(b, {A, B});
            mark_deleted(s, B);
            return s;
        },
        {{A, C, R}, {B}, {{C}}});
    add("2.11 sub {A,B,C,R[C]} removes B from R", false,
        [](const Model& b) {
            Model s = pick(b, {A, B, C, R});
            fx::set_attr(s, *s.find_rooted(R), "RelatedElements",
                         fx::refs({*s.find_rooted(C)}));
            return s;
        },
        {{A, B, C, R}, {}, {{C}}});
    add("2.12 sub {B deleted} alone", false,
        [](const Model& b) {
            Model s = pick(b, {B});
            mark_deleted(s, B);
            return s;
        },
        {{A, C, R}, {B}, {{C}}});

    return out;
}

} // namespace situations
