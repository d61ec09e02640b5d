#include "bimshare/errors.hpp"
#include "bimshare/mvd.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <functional>
#include <random>

using namespace bimshare;

namespace {

const char* kZoneViewXml =
    "<ModelView name=\"zone-b\">"
    "<Rule type=\"IfcTask\"><Eq path=\"Name\" value=\"Zone B\"/></Rule>"
    "<Rule type=\"IfcColumn\"/>"
    "</ModelView>";

} // namespace

TEST_CASE("parsing the zone view yields two rules") {
    ModelView v = parse_mvd(kZoneViewXml, mini_ifc_schema());
    CHECK(v.name == "zone-b");
    REQUIRE(v.rules.size() == 2);
    CHECK(v.rules[0].entity_type == "IfcTask");
    REQUIRE(v.rules[0].clauses.size() == 1);
    REQUIRE(v.rules[0].clauses[0].size() == 1);
    CHECK(v.rules[0].clauses[0][0].pred == PredKind::Eq);
    CHECK(v.rules[1].clauses.size() == 1);
    CHECK(v.rules[1].clauses[0].empty()); // type-only
}

TEST_CASE("unknown types and bad paths are rejected") {
    CHECK_THROWS_AS(parse_mvd("<ModelView name=\"x\"><Rule type=\"IfcFoo\"/></ModelView>",
                              mini_ifc_schema()),
                    NotFoundError);
    CHECK_THROWS_AS(
        parse_mvd("<ModelView name=\"x\"><Rule type=\"IfcTask\">"
                  "<Eq path=\"NoSuchAttr\" value=\"1\"/></Rule></ModelView>",
                  mini_ifc_schema()),
        ValidationError);
    CHECK_THROWS_AS(parse_mvd("<ModelView name=\"x\"><Rule", mini_ifc_schema()), ParseError);
}

TEST_CASE("duplicate-type rules merge their clauses") {
    ModelView v = parse_mvd(
        "<ModelView name=\"m\">"
        "<Rule type=\"IfcTask\"><Eq path=\"Name\" value=\"a\"/></Rule>"
        "<Rule type=\"IfcTask\"><Eq path=\"Name\" value=\"b\"/></Rule>"
        "</ModelView>",
        mini_ifc_schema());
    REQUIRE(v.rules.size() == 1);
    CHECK(v.rules[0].clauses.size() == 2);
}

TEST_CASE("dnf distribution and subsumption") {
    AttributeConstraint a{{"Name"}, PredKind::Eq, {"a"}};
    AttributeConstraint b{{"Name"}, PredKind::Eq, {"b"}};
    AttributeConstraint c{{"Name"}, PredKind::Eq, {"c"}};

    auto dnf = to_dnf(ConstraintExpr::make_and(
        {ConstraintExpr::make_leaf(a),
         ConstraintExpr::make_or({ConstraintExpr::make_leaf(b), ConstraintExpr::make_leaf(c)})}));
    REQUIRE(dnf.size() == 2);
    CHECK(dnf[0] == Clause{a, b});
    CHECK(dnf[1] == Clause{a, c});

    CHECK(to_dnf(ConstraintExpr::make_leaf(a)) == std::vector<Clause>{{a}});

    // a OR (a AND b) collapses to a by subsumption.
    auto pruned = to_dnf(ConstraintExpr::make_or(
        {ConstraintExpr::make_leaf(a),
         ConstraintExpr::make_and({ConstraintExpr::make_leaf(a), ConstraintExpr::make_leaf(b)})}));
    REQUIRE(pruned.size() == 1);
    CHECK(pruned[0] == Clause{a});
}

TEST_CASE("matching on the zone fixture") {
    fx::ZoneFixture z(mini_ifc_schema());
    ModelView v = parse_mvd(kZoneViewXml, mini_ifc_schema());
    CHECK(matches_view(v, z.m.at(z.task_b), z.m));
    CHECK_FALSE(matches_view(v, z.m.at(z.task_a), z.m));
    CHECK(matches_view(v, z.m.at(z.col1), z.m)); // type-only rule
    CHECK_FALSE(matches_view(v, z.m.at(z.beam), z.m));
}

TEST_CASE("rules match subtype instances") {
    fx::ZoneFixture z(mini_ifc_schema());
    ModelView v = parse_mvd("<ModelView name=\"p\"><Rule type=\"IfcProduct\"/></ModelView>",
                            mini_ifc_schema());
    CHECK(matches_view(v, z.m.at(z.col1), z.m));
    CHECK(matches_view(v, z.m.at(z.slab), z.m));
    CHECK_FALSE(matches_view(v, z.m.at(z.task_a), z.m));
}

TEST_CASE("path navigation through absent attributes is false, not an error") {
    Model m(mini_ifc_schema());
    Label bare = fx::make(m, "IfcColumn", fx::gid("colA"));
    Label placed = fx::column_with_placement(m, "colB");
    ModelView v = parse_mvd(
        "<ModelView name=\"p\"><Rule type=\"IfcColumn\">"
        "<Eq path=\"ObjectPlacement.RelativePlacement.Location.X\" value=\"1.0\"/>"
        "</Rule></ModelView>",
        mini_ifc_schema());
    CHECK_FALSE(matches_view(v, m.at(bare), m));
    CHECK(matches_view(v, m.at(placed), m));
}

TEST_CASE("real equality uses a relative tolerance") {
    Model m(mini_ifc_schema());
    Label s = fx::make(m, "IfcBuildingStorey", fx::gid("stor"),
                       {{"Elevation", 3.2000000000001}});
    ModelView v = parse_mvd("<ModelView name=\"p\"><Rule type=\"IfcBuildingStorey\">"
                            "<Eq path=\"Elevation\" value=\"3.2\"/></Rule></ModelView>",
                            mini_ifc_schema());
    CHECK(matches_view(v, m.at(s), m));
}

TEST_CASE("contains, in-set and exists predicates") {
    fx::ZoneFixture z(mini_ifc_schema());
    ModelView v = parse_mvd(
        "<ModelView name=\"p\">"
        "<Rule type=\"IfcTask\"><Contains path=\"Name\" value=\"Zone\"/></Rule>"
        "<Rule type=\"IfcColumn\"><In path=\"Tag\" values=\"C-1|C-9\"/></Rule>"
        "<Rule type=\"IfcBeam\"><Exists path=\"Name\"/></Rule>"
        "</ModelView>",
        mini_ifc_schema());
    CHECK(matches_view(v, z.m.at(z.task_a), z.m));
    CHECK(matches_view(v, z.m.at(z.col1), z.m));
    CHECK_FALSE(matches_view(v, z.m.at(z.col2), z.m));
    CHECK(matches_view(v, z.m.at(z.beam), z.m));
}

TEST_CASE("dnf evaluation equals direct tree evaluation on random trees") {
    // Four boolean atoms realized as Exists checks over optional attributes.
    std::mt19937_64 rng(7);
    const std::vector<AttributeConstraint> atoms = {
        {{"Name"}, PredKind::Exists, {}},
        {{"Description"}, PredKind::Exists, {}},
        {{"Tag"}, PredKind::Exists, {}},
        {{"ObjectPlacement"}, PredKind::Exists, {}},
    };

    std::function<ConstraintExpr(int)> gen = [&](int depth) {
        if (depth == 0 || rng() % 3 == 0)
            return ConstraintExpr::make_leaf(atoms[rng() % atoms.size()]);
        std::vector<ConstraintExpr> kids;
        int n = 2 + static_cast<int>(rng() % 2);
        for (int i = 0; i < n; ++i) kids.push_back(gen(depth - 1));
        return rng() % 2 ? ConstraintExpr::make_and(std::move(kids))
                         : ConstraintExpr::make_or(std::move(kids));
    };

    std::function<bool(const ConstraintExpr&, const Entity&, const Model&)> eval_tree =
        [&](const ConstraintExpr& e, const Entity& ent, const Model& m) -> bool {
        switch (e.kind) {
        case ConstraintExpr::Leaf: return eval_constraint(e.leaf, ent, m);
        case ConstraintExpr::And:
            for (const auto& k : e.children)
                if (!eval_tree(k, ent, m)) return false;
            return true;
        default:
            for (const auto& k : e.children)
                if (eval_tree(k, ent, m)) return true;
            return false;
        }
    };

    for (int round = 0; round < 200; ++round) {
        ConstraintExpr tree = gen(3);
        auto clauses = to_dnf(tree);
        // Random column with a random subset of the optional attributes set.
        Model m(mini_ifc_schema());
        std::vector<std::pair<std::string, AttrValue>> vals;
        if (rng() % 2) vals.push_back({"Name", std::string("n")});
        if (rng() % 2) vals.push_back({"Description", std::string("d")});
        if (rng() % 2) vals.push_back({"Tag", std::string("t")});
        Label col = fx::make(m, "IfcColumn", fx::gid("c"), vals);
        if (rng() % 2) {
            Label pt = fx::resource(m, "IfcCartesianPoint", {{"X", 0.0}, {"Y", 0.0}, {"Z", 0.0}});
            Label ax = fx::resource(m, "IfcAxis2Placement3D", {{"Location", Ref{pt}}});
            Label pl = fx::resource(m, "IfcLocalPlacement", {{"RelativePlacement", Ref{ax}}});
            fx::set_attr(m, col, "ObjectPlacement", Ref{pl});
        }

        bool direct = eval_tree(tree, m.at(col), m);
        bool via_dnf = false;
        for (const auto& clause : clauses) {
            bool all = true;
            for (const auto& c : clause)
                if (!eval_constraint(c, m.at(col), m)) {
                    all = false;
                    break;
                }
            if (all) {
                via_dnf = true;
                break;
            }
        }
        REQUIRE(direct == via_dnf);
    }
}

TEST_CASE("views round-trip through their XML serialization") {
    ModelView v = parse_mvd(kZoneViewXml, mini_ifc_schema());
    ModelView back = parse_mvd(write_mvd(v), mini_ifc_schema());
    CHECK(back.name == v.name);
    REQUIRE(back.rules.size() == v.rules.size());
    for (size_t i = 0; i < v.rules.size(); ++i) {
        CHECK(back.rules[i].entity_type == v.rules[i].entity_type);
        CHECK(back.rules[i].clauses == v.rules[i].clauses);
    }
}
