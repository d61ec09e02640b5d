#include "bimshare/errors.hpp"
#include "bimshare/federation.hpp"
#include "bimshare/party.hpp"
#include "bimshare/spf.hpp"
#include "bimshare/tcp.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bimshare;

namespace {

const Schema& schema() {
    static Schema s = mini_ifc_schema();
    return s;
}

PartyConfig cfg(const std::string& id, const std::string& requirements = {}) {
    return PartyConfig{id, "mgr-" + id, "mem-" + id, requirements, id};
}

const std::string kShareAll =
    R"(<ModelView name="all"><Rule type="IfcObject"/></ModelView>)";

std::string view_for(std::initializer_list<const char*> types) {
    std::string xml = "<ModelView name=\"req\">";
    for (const char* t : types) xml += std::string("<Rule type=\"") + t + "\"/>";
    return xml + "</ModelView>";
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// One-column payload for write tests.
Model column_payload(const std::string& gid, const std::string& tag) {
    Model m(schema());
    fx::make(m, "IfcColumn", gid, {{"Tag", std::string(tag)}});
    return m;
}

} // namespace

TEST_CASE("uploading stores entities privately; re-upload bumps versions") {
    PartyNode node(schema(), cfg("party-1"));
    fx::ZoneFixture z(schema());
    std::string spf = write_spf(z.m);

    CHECK(node.upload_model(spf) == 8);
    CHECK(node.count(Access::Private) == 8);
    CHECK(node.count(Access::Shared) == 0);
    const auto& meta = node.metadata().at(fx::gid("col1"));
    CHECK(meta.access == Access::Private);
    CHECK(meta.origin == "party-1");
    CHECK(meta.version == 1);
    CHECK(model_equal(node.model(), z.m));

    CHECK(node.upload_model(spf) == 8);
    CHECK(node.metadata().at(fx::gid("col1")).version == 2);
    CHECK(node.count(Access::Private) == 8);
}

TEST_CASE("sharing demands the manager credential") {
    Federation fed(schema());
    PartyNode& p1 = fed.add_party(cfg("party-1"));
    fx::ZoneFixture z(schema());
    p1.upload_model(write_spf(z.m));
    CHECK_THROWS_AS(p1.share(kShareAll, "mem-party-1"), AuthError);
    CHECK_THROWS_AS(p1.share(kShareAll, "wrong"), AuthError);
    CHECK(p1.share(kShareAll, "mgr-party-1") == 8);
    CHECK(p1.count(Access::Shared) == 8);
    CHECK(p1.count(Access::Private) == 0);
}

TEST_CASE("shared entities replicate to the parties whose requirements match") {
    Federation fed(schema());
    PartyNode& p1 = fed.add_party(cfg("party-1"));
    PartyNode& p2 = fed.add_party(cfg(
        "party-2", view_for({"IfcBuildingStorey", "IfcColumn",
                             "IfcRelContainedInSpatialStructure"})));
    fx::ZoneFixture z(schema(), /*with_storey=*/true);
    p1.upload_model(write_spf(z.m));
    p1.share(kShareAll, "mgr-party-1");
    fed.settle();

    // Columns, the storey, and the containment relation arrive; nothing else.
    CHECK(p2.count(Access::External) == 4);
    for (const char* tag : {"col1", "col2", "storey", "contain"}) {
        auto it = p2.metadata().find(fx::gid(tag));
        REQUIRE(it != p2.metadata().end());
        CHECK(it->second.access == Access::External);
        CHECK(it->second.origin == "party-1");
    }
    CHECK(p2.metadata().count(fx::gid("beam1")) == 0);
    CHECK(p2.metadata().count(fx::gid("taskA")) == 0);
    p2.model().validate();

    // The controller heard the replicas confirm storage.
    auto acks = fed.controller().replica_versions(fx::gid("col1"));
    CHECK(acks.at("party-2") == 1);
}

TEST_CASE("replication ingress is idempotent and version-gated") {
    PartyNode node(schema(), cfg("party-2", view_for({"IfcColumn"})));
    std::string id = fx::gid("repcol");

    CHECK(node.on_replicate(column_payload(id, "C-1"), "party-2", {{id, 1}}) == 0); // own origin
    CHECK(node.on_replicate(column_payload(id, "C-1"), "party-1", {{id, 1}}) == 1);
    CHECK(node.metadata().at(id).version == 1);
    // Redelivery and regressions are no-ops.
    CHECK(node.on_replicate(column_payload(id, "C-1"), "party-1", {{id, 1}}) == 0);
    CHECK(node.on_replicate(column_payload(id, "C-0"), "party-1", {{id, 0}}) == 0);
    // A newer version replaces the replica.
    CHECK(node.on_replicate(column_payload(id, "C-9"), "party-1", {{id, 3}}) == 1);
    CHECK(node.metadata().at(id).version == 3);
    Label l = *node.model().find_rooted(id);
    const AttrValue* tag = attr(node.model(), node.model().at(l), "Tag");
    REQUIRE(tag != nullptr);
    CHECK(*tag == AttrValue{std::string("C-9")});

    // Entities outside this party's requirements are not stored.
    Model beam(schema());
    fx::make(beam, "IfcBeam", fx::gid("repbeam"));
    CHECK(node.on_replicate(beam, "party-1", {}) == 0);
    CHECK(node.metadata().count(fx::gid("repbeam")) == 0);
}

TEST_CASE("owner writes propagate; replicas and strangers cannot write") {
    Federation fed(schema());
    PartyNode& p1 = fed.add_party(cfg("party-1"));
    PartyNode& p2 = fed.add_party(cfg("party-2", view_for({"IfcColumn"})));
    fx::ZoneFixture z(schema());
    p1.upload_model(write_spf(z.m));
    p1.share(kShareAll, "mgr-party-1");
    fed.settle();

    std::string id = fx::gid("col1");
    REQUIRE(p2.metadata().at(id).access == Access::External);

    CHECK_THROWS_AS(p2.local_write("mgr-party-2", column_payload(id, "C-X"), id), AuthError);
    CHECK_THROWS_AS(p1.local_write("intruder", column_payload(id, "C-X"), id), AuthError);
    CHECK_THROWS_AS(p1.local_write("mem-party-1", column_payload(fx::gid("nosuch"), "C"),
                                   fx::gid("nosuch")),
                    NotFoundError);

    int v = p1.local_write("mem-party-1", column_payload(id, "C-1b"), id);
    CHECK(v == 2);
    fed.settle();

    CHECK(p2.metadata().at(id).version == 2);
    Label l = *p2.model().find_rooted(id);
    const AttrValue* tag = attr(p2.model(), p2.model().at(l), "Tag");
    REQUIRE(tag != nullptr);
    CHECK(*tag == AttrValue{std::string("C-1b")});
    CHECK(fed.controller().replica_versions(id).at("party-2") == 2);
}

TEST_CASE("checkpoints restore to an identical store") {
    PartyNode node(schema(), cfg("party-1", view_for({"IfcColumn"})));
    fx::ZoneFixture z(schema(), /*with_storey=*/true);
    node.upload_model(write_spf(z.m));
    node.on_replicate(column_payload(fx::gid("extcol"), "C-E"), "party-9",
                      {{fx::gid("extcol"), 4}});

    auto dir = std::filesystem::temp_directory_path() / "bimshare-ckpt-test";
    std::filesystem::remove_all(dir);
    node.checkpoint(dir);

    PartyNode back = PartyNode::restore(schema(), cfg("party-1", view_for({"IfcColumn"})), dir);
    CHECK(model_equal(back.model(), node.model()));
    REQUIRE(back.metadata().size() == node.metadata().size());
    for (const auto& [gid, m] : node.metadata()) {
        const auto& r = back.metadata().at(gid);
        CHECK(r.access == m.access);
        CHECK(r.origin == m.origin);
        CHECK(r.version == m.version);
    }

    // A second checkpoint of the restored node is byte-identical.
    auto dir2 = std::filesystem::temp_directory_path() / "bimshare-ckpt-test-2";
    std::filesystem::remove_all(dir2);
    back.checkpoint(dir2);
    CHECK(slurp(dir2 / "model.ifc") == slurp(dir / "model.ifc"));
    CHECK(slurp(dir2 / "meta.tsv") == slurp(dir / "meta.tsv"));
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("cross-party extraction merges remote data and keeps local work local") {
    Federation fed(schema());
    PartyNode& p1 = fed.add_party(cfg("party-1"));
    PartyNode& p2 = fed.add_party(cfg("party-2"));
    fx::ZoneFixture z(schema());
    p1.upload_model(write_spf(z.m));

    Model remote(schema());
    fx::make(remote, "IfcTask", fx::gid("p2task"), {{"Name", std::string("Remote task")}});
    fx::make(remote, "IfcTask", fx::gid("p2priv"), {{"Name", std::string("Hidden task")}});
    p2.upload_model(write_spf(remote));
    // Only one of the two remote tasks is shared.
    p2.share(R"(<ModelView name="one"><Rule type="IfcTask">)"
             R"(<Eq path="Name" value="Remote task"/>)"
             R"(</Rule></ModelView>)",
             "mgr-party-2");
    fed.settle();

    ModelView tasks = parse_mvd(view_for({"IfcTask"}), schema());
    auto report = p1.cross_party_extract(tasks, ExtractionMode::Broad);
    CHECK(report.warnings.empty());
    report.sub.model.validate();

    // Local tasks come from the local store; the shared remote one is fetched.
    CHECK(report.sub.model.find_rooted(fx::gid("taskA")).has_value());
    CHECK(report.sub.model.find_rooted(fx::gid("taskB")).has_value());
    CHECK(report.sub.model.find_rooted(fx::gid("p2task")).has_value());
    CHECK_FALSE(report.sub.model.find_rooted(fx::gid("p2priv")).has_value());
    CHECK(report.sub.provenance.at(fx::gid("taskA")) == "party-1");
    CHECK(report.sub.provenance.at(fx::gid("p2task")) == "party-2");

    // Locality: exactly one fetch, aimed at the remote host, never at self.
    int fetches = 0;
    for (const auto& call : p1.remote_call_log()) {
        CHECK(call.find("-> party-1") == std::string::npos);
        if (call.rfind("FetchEntities", 0) == 0) {
            ++fetches;
            CHECK(call == "FetchEntities -> party-2");
        }
    }
    CHECK(fetches == 1);
}

TEST_CASE("fetch requests only ever expose shared data") {
    PartyNode node(schema(), cfg("party-2"));
    Model m(schema());
    fx::make(m, "IfcTask", fx::gid("p2priv"), {{"Name", std::string("Hidden")}});
    node.upload_model(write_spf(m));

    Message req{MsgKind::FetchEntities, 1, "party-1",
                {{"entity_ids", {fx::gid("p2priv")}}, {"context_ids", nlohmann::json::array()}}};
    Message rep = node.handle(req);
    REQUIRE(rep.kind == MsgKind::Ack);
    CHECK(rep.body.at("denied") == std::vector<std::string>{fx::gid("p2priv")});
    Model payload = parse_spf_model(rep.body.at("payload").get<std::string>(), schema());
    CHECK(payload.entities().empty());
}

TEST_CASE("the controller protocol behaves the same over TCP as in-process") {
    GlobalController ctl(schema());
    ctl.register_party({"party-1", "addr-1", ""});
    Model m(schema());
    std::string id = fx::gid("tcpcol");
    fx::make(m, "IfcColumn", id, {{"Tag", std::string("C-1")}});
    ctl.register_shared("party-1", {id}, m);

    TcpServer server(0, [&](const Message& req) { return ctl.handle(req); });
    server.start();

    TcpChannel tcp("127.0.0.1", server.port());
    LocalChannel local([&](const Message& req) { return ctl.handle(req); });

    Message req{MsgKind::Locate, 1, "party-1", {{"entity_id", id}}};
    Message via_tcp = tcp.request(req);
    Message via_local = local.request(req);
    CHECK(via_tcp.kind == via_local.kind);
    CHECK(via_tcp.body == via_local.body);

    Message miss{MsgKind::Locate, 2, "party-1", {{"entity_id", fx::gid("nosuch")}}};
    Message err = tcp.request(miss);
    CHECK(err.kind == MsgKind::Error);
    CHECK(err.body.at("code") == errc::NOT_FOUND);

    server.stop();
}
