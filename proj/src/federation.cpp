#include "bimshare/federation.hpp"

#include "bimshare/errors.hpp"
#include "bimshare/extract.hpp"
#include "bimshare/spf.hpp"
#include "bimshare/synth.hpp"

#include <chrono>
#include <set>

namespace bimshare {

Federation::Federation(const Schema& schema, SimNet::Options net_opts)
    : schema_(&schema), controller_(schema), net_(net_opts) {}

PartyNode& Federation::add_party(PartyConfig cfg) {
    auto node = std::make_unique<PartyNode>(*schema_, std::move(cfg));
    PartyNode* raw = node.get();
    const std::string id = raw->id();

    raw->connect_controller(std::make_shared<LocalChannel>(
        [this](const Message& m) { return controller_.handle(m); }));
    raw->set_sender([this, id](const std::string& to, Message msg) {
        net_.send(id, to, std::move(msg));
    });
    net_.attach(id, [raw](const std::string& from, Message&& msg) {
        raw->on_message(from, std::move(msg));
    });
    for (auto& other : parties_) {
        PartyNode* peer = other.get();
        raw->connect_peer(peer->id(), std::make_shared<LocalChannel>(
                                          [peer](const Message& m) { return peer->handle(m); }));
        peer->connect_peer(id, std::make_shared<LocalChannel>(
                                   [raw](const Message& m) { return raw->handle(m); }));
    }
    raw->register_with_controller();
    parties_.push_back(std::move(node));
    return *raw;
}

PartyNode& Federation::party(const std::string& id) {
    for (auto& p : parties_)
        if (p->id() == id) return *p;
    throw NotFoundError("no such party: " + id);
}

namespace {

constexpr const char* kShareAllXml =
    "<ModelView name=\"share-all\"><Rule type=\"IfcObject\"/></ModelView>";

constexpr const char* kDemoExtractionXml =
    "<ModelView name=\"demo-extraction\">"
    "<Rule type=\"IfcBuildingStorey\"/>"
    "<Rule type=\"IfcColumn\"/>"
    "<Rule type=\"IfcBeam\"/>"
    "<Rule type=\"IfcSlab\"/>"
    "<Rule type=\"IfcTask\"/>"
    "</ModelView>";

double elapsed_ms(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

} // namespace

nlohmann::json run_demo(const Schema& schema, int parties, std::uint64_t seed) {
    Federation fed(schema);
    nlohmann::json failures = nlohmann::json::array();

    for (int i = 0; i < parties; ++i) {
        std::string id = "party-" + std::to_string(i + 1);
        PartyConfig cfg;
        cfg.party_id = id;
        cfg.manager_token = "mgr-" + id;
        cfg.member_token = "mem-" + id;
        cfg.requirements_xml = synth_requirements_xml(i, parties);
        fed.add_party(std::move(cfg));
    }

    for (int i = 0; i < parties; ++i) {
        PartyNode& p = *fed.parties()[i];
        SynthOptions opt;
        opt.seed = seed * 7919 + i;
        opt.storeys = 2;
        opt.columns_per_storey = 6;
        opt.beams_per_storey = 4;
        opt.slabs_per_storey = 3;
        opt.openings_per_storey = 2;
        opt.zones = 2;
        opt.name_prefix = p.id();
        p.upload_model(write_spf(synth_model(schema, opt)));
        p.share(kShareAllXml, "mgr-" + p.id());
    }
    fed.settle();

    // Requirement-driven distribution: each party's External set must equal
    // the brute-force filter of all foreign Shared entities through its view.
    for (auto& p : fed.parties()) {
        std::set<std::string> expected;
        for (auto& q : fed.parties()) {
            if (q->id() == p->id()) continue;
            for (const auto& [gid, meta] : q->metadata()) {
                if (meta.access != Access::Shared || meta.origin != q->id()) continue;
                const Entity& e = q->model().at(*q->model().find_rooted(gid));
                if (p->requirements() && matches_view(*p->requirements(), e, q->model()))
                    expected.insert(gid);
            }
        }
        std::set<std::string> actual;
        for (const auto& [gid, meta] : p->metadata())
            if (meta.access == Access::External) actual.insert(gid);
        if (expected != actual)
            failures.push_back(p->id() + ": external store diverges from requirement filter (" +
                               std::to_string(actual.size()) + " stored, " +
                               std::to_string(expected.size()) + " expected)");
    }

    // Cross-party extraction from the first party's point of view.
    ModelView view = parse_mvd(kDemoExtractionXml, schema);
    nlohmann::json extract_ms;
    if (!fed.parties().empty()) {
        PartyNode& p0 = *fed.parties()[0];
        auto t0 = std::chrono::steady_clock::now();
        SubModel seq = extract(p0.model(), view, ExtractionMode::Broad);
        extract_ms["sequential"] = elapsed_ms(t0);
        t0 = std::chrono::steady_clock::now();
        SubModel par = extract_parallel(p0.model(), view, ExtractionMode::Broad,
                                        ParallelLevel::Instance, 4);
        extract_ms["parallel"] = elapsed_ms(t0);
        if (!model_equal(seq.model, par.model))
            failures.push_back("parallel extraction diverges from sequential");

        auto report = p0.cross_party_extract(view, ExtractionMode::Broad);
        try {
            report.sub.model.validate();
        } catch (const Error& e) {
            failures.push_back(std::string("cross-party result not self-contained: ") +
                               e.what());
        }
        std::set<std::string> origins;
        for (const auto& [gid, origin] : report.sub.provenance) origins.insert(origin);
        if (parties > 1 && origins.size() < 2)
            failures.push_back("cross-party extraction drew from fewer than 2 origins");
    }

    nlohmann::json entity_counts = nlohmann::json::object();
    nlohmann::json index_counts = nlohmann::json::object();
    for (auto& p : fed.parties()) {
        entity_counts[p->id()] = p->model().size();
        index_counts[p->id()] = {{"shared", p->count(Access::Shared)},
                                 {"external", p->count(Access::External)}};
    }

    return nlohmann::json{
        {"report_version", 1},
        {"parties", parties},
        {"entity_counts", entity_counts},
        {"index_counts", index_counts},
        {"extract_ms", extract_ms},
        {"verification",
         {{"passed", failures.empty()}, {"failures", failures}}},
    };
}

} // namespace bimshare
