#include "bimshare/errors.hpp"
#include "bimshare/model.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <set>

using namespace bimshare;

TEST_CASE("global id encoding is 22 chars over the base-64 alphabet") {
    std::string id = encode_global_id(0xFFFFFFFFFFFFFFFFull, 0xFFFFFFFFFFFFFFFFull);
    CHECK(id.size() == 22);
    CHECK(is_valid_global_id(id));
    CHECK(encode_global_id(0, 0) == std::string(22, '0'));
    CHECK(is_valid_global_id(random_global_id()));
    CHECK_FALSE(is_valid_global_id("short"));
    CHECK_FALSE(is_valid_global_id(std::string(21, '0') + "!"));
}

TEST_CASE("exchangeable closure follows resources and stops at rooted entities") {
    Model m(mini_ifc_schema());
    Label col = fx::column_with_placement(m, "colA");
    Label other = fx::make(m, "IfcColumn", fx::gid("colB"));
    m.validate();

    ExchangeableEntity ex = expand_exchangeable(m, col);
    CHECK(ex.root == col);
    CHECK(ex.resources.size() == 3); // placement, axis, point

    ExchangeableEntity bare = expand_exchangeable(m, other);
    CHECK(bare.resources.empty());

    // Rooted references do not join the closure.
    Label opening = fx::make(m, "IfcOpeningElement", fx::gid("open1"));
    Label rel = fx::make(m, "IfcRelFillsElement", fx::gid("fill1"),
                         {{"RelatingOpeningElement", Ref{opening}},
                          {"RelatedBuildingElement", Ref{col}}});
    ExchangeableEntity rex = expand_exchangeable(m, rel);
    CHECK(rex.resources.empty());

    CHECK_THROWS_AS(expand_exchangeable(m, fx::gid("nosuch")), NotFoundError);
}

TEST_CASE("exchangeable closures plus relations partition the model") {
    fx::ZoneFixture z(mini_ifc_schema(), true);
    std::set<Label> covered;
    for (const auto& [id, label] : z.m.rooted_index()) {
        ExchangeableEntity ex = expand_exchangeable(z.m, label);
        covered.insert(ex.root);
        covered.insert(ex.resources.begin(), ex.resources.end());
    }
    CHECK(covered.size() == z.m.size());
}

TEST_CASE("validation rejects dangling references and duplicate ids") {
    Model m(mini_ifc_schema());
    Label col = fx::make(m, "IfcColumn", fx::gid("colA"));
    fx::set_attr(m, col, "ObjectPlacement", Ref{999});
    CHECK_THROWS_AS(m.validate(), ValidationError);

    Model dup(mini_ifc_schema());
    fx::make(dup, "IfcColumn", fx::gid("same"));
    CHECK_THROWS_AS(fx::make(dup, "IfcBeam", fx::gid("same")), ValidationError);
}

TEST_CASE("change actions read and write through owner history") {
    Model m(mini_ifc_schema());
    Label col = fx::make(m, "IfcColumn", fx::gid("colA"));
    CHECK(change_action(m, m.at(col)) == ChangeAction::NoChange);
    set_change_action(m, col, ChangeAction::Deleted, "party-x");
    CHECK(change_action(m, m.at(col)) == ChangeAction::Deleted);
    set_change_action(m, col, ChangeAction::NoChange);
    CHECK(change_action(m, m.at(col)) == ChangeAction::NoChange);
    m.validate();
}

TEST_CASE("structural equality ignores labels") {
    Model a(mini_ifc_schema());
    fx::column_with_placement(a, "colA");
    Model b(mini_ifc_schema());
    fx::make(b, "IfcBeam", fx::gid("padding")); // shift labels
    fx::column_with_placement(b, "colA");
    Label bcol = *b.find_rooted(fx::gid("colA"));
    CHECK(entity_equal(a, a.at(*a.find_rooted(fx::gid("colA"))), b, b.at(bcol)));
    CHECK_FALSE(model_equal(a, b)); // b has the extra beam

    fx::set_attr(b, bcol, "Name", std::string("renamed"));
    CHECK_FALSE(entity_equal(a, a.at(*a.find_rooted(fx::gid("colA"))), b, b.at(bcol)));
}

TEST_CASE("import resolves rooted references through the destination index") {
    fx::ZoneFixture z(mini_ifc_schema());
    Model dst(mini_ifc_schema());
    // Copy endpoints first, then the relation: its references re-bind.
    import_exchangeable(dst, z.m, z.task_b);
    import_exchangeable(dst, z.m, z.col2);
    import_exchangeable(dst, z.m, z.beam);
    import_exchangeable(dst, z.m, z.assign_b);
    dst.validate();
    Label rel = *dst.find_rooted(fx::gid("assignB"));
    CHECK(related_targets(dst, dst.at(rel)).size() == 2);

    // Unresolvable list members are narrowed away and reported.
    Model partial(mini_ifc_schema());
    import_exchangeable(partial, z.m, z.task_b);
    import_exchangeable(partial, z.m, z.col2);
    std::vector<std::string> unresolved;
    import_exchangeable(partial, z.m, z.assign_b, &unresolved);
    partial.validate();
    REQUIRE(unresolved.size() == 1);
    CHECK(unresolved[0] == fx::gid("beam1"));

    // Without an unresolved sink the same import refuses.
    Model strict_dst(mini_ifc_schema());
    CHECK_THROWS_AS(import_exchangeable(strict_dst, z.m, z.assign_b), NotFoundError);
}

TEST_CASE("build_submodel emits a self-contained fragment") {
    fx::ZoneFixture z(mini_ifc_schema());
    Model sub = build_submodel(z.m, {z.task_b, z.col2, z.beam, z.assign_b});
    sub.validate();
    CHECK(sub.rooted_index().size() == 4);
    CHECK(sub.find_rooted(fx::gid("assignB")).has_value());
    CHECK_FALSE(sub.find_rooted(fx::gid("taskA")).has_value());
}
