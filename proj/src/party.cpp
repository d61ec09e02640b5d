#include "bimshare/party.hpp"

#include "bimshare/errors.hpp"
#include "bimshare/integrate.hpp"
#include "bimshare/spf.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace bimshare {

namespace {

// Rooted ids of a model, non-relation entities first, each group sorted.
std::vector<std::pair<std::string, Label>> ordered_roots(const Model& m) {
    std::vector<std::pair<std::string, Label>> out(m.rooted_index().begin(),
                                                   m.rooted_index().end());
    std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
        bool ra = m.schema().is_relationship(m.at(a.second).type);
        bool rb = m.schema().is_relationship(m.at(b.second).type);
        if (ra != rb) return !ra;
        return a.first < b.first;
    });
    return out;
}

} // namespace

PartyNode::PartyNode(const Schema& schema, PartyConfig cfg)
    : schema_(&schema), cfg_(std::move(cfg)), model_(schema) {
    if (!cfg_.requirements_xml.empty())
        requirements_ = parse_mvd(cfg_.requirements_xml, schema);
}

void PartyNode::connect_peer(const std::string& party, std::shared_ptr<Channel> ch) {
    peers_[party] = std::move(ch);
}

bool PartyNode::is_manager(const std::string& credential) const {
    return !cfg_.manager_token.empty() && credential == cfg_.manager_token;
}

bool PartyNode::may_write(const std::string& credential) const {
    return is_manager(credential) ||
           (!cfg_.member_token.empty() && credential == cfg_.member_token);
}

Message PartyNode::controller_request(Message msg) {
    if (!controller_) throw Error("party " + cfg_.party_id + " has no controller connection");
    msg.id = next_request_++;
    msg.from = cfg_.party_id;
    remote_calls_.push_back(std::string(to_string(msg.kind)) + " -> controller");
    return expect_ok(controller_->request(msg));
}

void PartyNode::register_with_controller() {
    Message msg{MsgKind::RegisterParty, 0, cfg_.party_id,
                {{"party_id", cfg_.party_id},
                 {"address", cfg_.controller_address},
                 {"requirements", cfg_.requirements_xml}}};
    controller_request(std::move(msg));
}

std::size_t PartyNode::upload_model(const std::string& spf_text) {
    Model incoming = parse_spf_model(spf_text, *schema_);
    std::size_t n = 0;
    for (const auto& [gid, src_label] : ordered_roots(incoming)) {
        auto existing = model_.find_rooted(gid);
        std::vector<std::string> unresolved;
        if (existing) {
            auto& meta = meta_.at(gid);
            if (meta.access == Access::External)
                throw ConflictError("upload would overwrite external replica " + gid);
            ExchangeableEntity old = expand_exchangeable(model_, *existing);
            for (Label r : old.resources) model_.erase(r);
            model_.erase(*existing);
            import_exchangeable(model_, incoming, src_label, &unresolved, *existing);
            ++meta.version;
        } else {
            import_exchangeable(model_, incoming, src_label, &unresolved);
            meta_[gid] = StoredMeta{Access::Private, cfg_.party_id, 1};
        }
        ++n;
    }
    model_.validate();
    return n;
}

std::string PartyNode::payload_for(const std::vector<std::string>& ids) const {
    std::vector<Label> roots;
    roots.reserve(ids.size());
    for (const auto& id : ids) {
        auto l = model_.find_rooted(id);
        if (!l) throw NotFoundError("entity " + id + " is not stored locally");
        roots.push_back(*l);
    }
    return write_spf(build_submodel(model_, roots));
}

void PartyNode::replicate_to(const std::string& target, const std::vector<std::string>& ids) {
    if (!sender_ || ids.empty()) return;
    std::map<std::string, int> versions;
    for (const auto& id : ids) versions[id] = meta_.at(id).version;
    Message msg{MsgKind::Replicate, next_request_++, cfg_.party_id,
                {{"payload", payload_for(ids)},
                 {"origin", cfg_.party_id},
                 {"versions", versions}}};
    remote_calls_.push_back(std::string("Replicate -> ") + target);
    sender_(target, std::move(msg));
}

std::size_t PartyNode::share(const std::string& view_xml, const std::string& credential) {
    return share(parse_mvd(view_xml, *schema_), credential);
}

std::size_t PartyNode::share(const ModelView& selector, const std::string& credential) {
    if (!is_manager(credential))
        throw AuthError("sharing requires the manager credential of " + cfg_.party_id);

    // Matching owned entities plus the relations retained for closure.
    SubModel sub = extract(model_, selector, ExtractionMode::Broad);
    std::vector<std::string> ids;
    for (const auto& [gid, label] : sub.model.rooted_index()) {
        auto it = meta_.find(gid);
        if (it == meta_.end() || it->second.access == Access::External) continue;
        ids.push_back(gid);
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) return 0;

    Message req{MsgKind::RegisterShared, 0, cfg_.party_id,
                {{"payload", write_spf(sub.model)}, {"entity_ids", ids}}};
    Message reply = controller_request(std::move(req));

    for (const auto& id : ids) {
        auto& meta = meta_.at(id);
        meta.access = Access::Shared;
        auto vit = reply.body["versions"].find(id);
        if (vit != reply.body["versions"].end()) meta.version = vit->get<int>();
    }

    if (reply.body.contains("addresses"))
        for (const auto& [p, addr] : reply.body["addresses"].items())
            addresses_[p] = addr.get<std::string>();

    // Fan the payload out once per routed target; receivers keep what their
    // own requirements match.
    std::set<std::string> targets;
    for (const auto& [id, parties] : reply.body["routes"].items())
        for (const auto& p : parties) targets.insert(p.get<std::string>());
    for (const auto& target : targets) replicate_to(target, ids);
    return ids.size();
}

int PartyNode::local_write(const std::string& credential, const Model& payload,
                           const std::string& entity_id) {
    if (!may_write(credential))
        throw AuthError("credential not accepted for writes at " + cfg_.party_id);
    auto mit = meta_.find(entity_id);
    if (mit == meta_.end()) throw NotFoundError("entity " + entity_id + " is not stored here");
    if (mit->second.access == Access::External)
        throw AuthError("entity " + entity_id + " is an external replica; only its owner writes");
    auto src_label = payload.find_rooted(entity_id);
    if (!src_label) throw ValidationError("write payload does not contain " + entity_id);

    Label old = *model_.find_rooted(entity_id);
    ExchangeableEntity ex = expand_exchangeable(model_, old);
    for (Label r : ex.resources) model_.erase(r);
    model_.erase(old);
    std::vector<std::string> unresolved;
    import_exchangeable(model_, payload, *src_label, &unresolved, old);
    model_.validate();
    int v = ++mit->second.version;

    if (mit->second.access == Access::Shared && controller_) {
        Message req{MsgKind::PropagateNotify, 0, cfg_.party_id,
                    {{"entity_id", entity_id}, {"new_version", v}}};
        Message reply = controller_request(std::move(req));
        if (reply.body.contains("addresses"))
            for (const auto& [p, addr] : reply.body["addresses"].items())
                addresses_[p] = addr.get<std::string>();
        std::vector<std::string> ids{entity_id};
        for (const auto& r : reply.body["replicas"])
            replicate_to(r.get<std::string>(), ids);
    }
    return v;
}

std::size_t PartyNode::on_replicate(const Model& payload, const std::string& origin,
                                    const std::map<std::string, int>& versions) {
    if (origin == cfg_.party_id) return 0;
    std::size_t stored = 0;
    std::vector<std::string> acked;
    for (const auto& [gid, src_label] : ordered_roots(payload)) {
        const Entity& e = payload.at(src_label);
        auto vit = versions.find(gid);
        int v = vit == versions.end() ? 1 : vit->second;

        auto mit = meta_.find(gid);
        if (mit != meta_.end()) {
            if (mit->second.access != Access::External) continue; // owned locally
            if (v <= mit->second.version) continue; // redelivery or regression
            Label old = *model_.find_rooted(gid);
            ExchangeableEntity ex = expand_exchangeable(model_, old);
            for (Label r : ex.resources) model_.erase(r);
            model_.erase(old);
            std::vector<std::string> unresolved;
            import_exchangeable(model_, payload, src_label, &unresolved, old);
            mit->second.version = v;
            mit->second.origin = origin;
            ++stored;
            acked.push_back(gid);
            continue;
        }

        if (!requirements_ || !matches_view(*requirements_, e, payload))
            continue; // requirement-driven: unneeded data is not stored
        if (schema_->is_relationship(e.type)) {
            // Only keep relations whose required endpoints resolve locally.
            bool ok = true;
            for (Label t : relating_targets(payload, e))
                if (!model_.find_rooted(global_id(payload, payload.at(t)))) ok = false;
            if (schema_->relation_kind(e.type) == RelationKind::OneToOne)
                for (Label t : related_targets(payload, e))
                    if (!model_.find_rooted(global_id(payload, payload.at(t)))) ok = false;
            if (!ok) continue;
        }
        std::vector<std::string> unresolved;
        import_exchangeable(model_, payload, src_label, &unresolved);
        meta_[gid] = StoredMeta{Access::External, origin, v};
        ++stored;
        acked.push_back(gid);
    }
    if (stored) model_.validate();
    if (controller_) {
        for (const auto& gid : acked) {
            Message req{MsgKind::PropagateNotify, 0, cfg_.party_id,
                        {{"entity_id", gid}, {"ack_version", meta_.at(gid).version}}};
            try {
                controller_request(std::move(req));
            } catch (const Error&) {
                // convergence bookkeeping is best-effort
            }
        }
    }
    return stored;
}

PartyNode::ExtractReport PartyNode::cross_party_extract(const ModelView& view,
                                                        ExtractionMode mode) {
    ExtractReport report{SubModel(*schema_), {}};
    report.sub = extract(model_, view, mode);
    report.sub.origin = cfg_.party_id;
    for (const auto& [gid, label] : report.sub.model.rooted_index()) {
        auto it = meta_.find(gid);
        report.sub.provenance[gid] = it == meta_.end() ? cfg_.party_id : it->second.origin;
    }
    if (!controller_) return report;

    // Ask the index for matching-type entities we do not hold locally.
    Message reply = controller_request(Message{MsgKind::Locate, 0, cfg_.party_id,
                                               {{"list", true}}});
    std::map<std::string, std::vector<std::string>> wanted_by_host; // host -> ids
    std::map<std::string, std::string> owner_of;
    for (const auto& rec : reply.body["records"]) {
        std::string id = rec["entity_id"].get<std::string>();
        std::string type = rec["entity_type"].get<std::string>();
        if (model_.find_rooted(id)) continue; // locality: never re-fetch local data
        bool type_matches = std::any_of(
            view.rules.begin(), view.rules.end(),
            [&](const ConceptRule& r) { return schema_->is_subtype_of(type, r.entity_type); });
        if (!type_matches) continue;

        Message auth = controller_request(Message{
            MsgKind::Authorize, 0, cfg_.party_id, {{"entity_id", id}, {"intent", "read"}}});
        if (!auth.body.value("granted", false)) {
            report.warnings.push_back("access denied: " + id);
            continue;
        }
        std::string host = rec["host_server"].get<std::string>();
        if (rec.contains("host_address") && rec["host_address"].is_string())
            addresses_[host] = rec["host_address"].get<std::string>();
        wanted_by_host[host].push_back(id);
        owner_of[id] = rec["owner_party"].get<std::string>();
    }

    // Context ids let the host retain relations bridging into our data.
    std::vector<std::string> context;
    for (const auto& [gid, label] : report.sub.model.rooted_index()) context.push_back(gid);

    for (const auto& [host, ids] : wanted_by_host) {
        auto ch = peers_.find(host);
        if (ch == peers_.end() && peer_factory_ && addresses_.count(host)) {
            peers_[host] = peer_factory_(host, addresses_[host]);
            ch = peers_.find(host);
        }
        if (ch == peers_.end()) {
            for (const auto& id : ids) report.warnings.push_back("host unreachable: " + id);
            continue;
        }
        Message req{MsgKind::FetchEntities, next_request_++, cfg_.party_id,
                    {{"entity_ids", ids}, {"context_ids", context}}};
        remote_calls_.push_back("FetchEntities -> " + host);
        Message resp;
        try {
            resp = expect_ok(ch->second->request(req));
        } catch (const Error& e) {
            for (const auto& id : ids)
                report.warnings.push_back("fetch failed for " + id + ": " + e.what());
            continue;
        }
        for (const auto& denied : resp.body.value("denied", std::vector<std::string>{}))
            report.warnings.push_back("access denied: " + denied);
        Model fetched = parse_spf_model(resp.body.value("payload", std::string{}), *schema_);
        std::map<std::string, std::string> fetched_origin;
        for (const auto& [gid, label] : fetched.rooted_index())
            fetched_origin[gid] = owner_of.count(gid) ? owner_of[gid] : host;
        report.sub.model = integrate(report.sub.model, fetched);
        for (const auto& [gid, org] : fetched_origin)
            if (report.sub.model.find_rooted(gid) && !report.sub.provenance.count(gid))
                report.sub.provenance[gid] = org;
    }
    // Provenance only for entities that survived integration.
    for (auto it = report.sub.provenance.begin(); it != report.sub.provenance.end();)
        it = report.sub.model.find_rooted(it->first) ? std::next(it)
                                                     : report.sub.provenance.erase(it);
    return report;
}

Message PartyNode::handle(const Message& req) {
    try {
        switch (req.kind) {
        case MsgKind::FetchEntities: {
            auto ids = req.body.value("entity_ids", std::vector<std::string>{});
            auto context = req.body.value("context_ids", std::vector<std::string>{});
            std::set<std::string> retained(ids.begin(), ids.end());
            retained.insert(context.begin(), context.end());

            std::vector<std::string> denied;
            std::vector<Label> roots;
            std::set<std::string> included;
            auto try_include = [&](const std::string& id, bool report_denied) {
                if (included.count(id)) return true;
                auto l = model_.find_rooted(id);
                auto mit = meta_.find(id);
                // Only Shared data leaves the store; Private stays private
                // and External replicas are fetched from their own host.
                if (!l || mit == meta_.end() || mit->second.access != Access::Shared) {
                    if (report_denied) denied.push_back(id);
                    return false;
                }
                roots.push_back(*l);
                included.insert(id);
                return true;
            };
            for (const auto& id : ids) try_include(id, true);

            // Shared relations whose endpoints all lie in the requested or
            // context set travel along, plus any of their endpoints we hold.
            for (const auto& [gid, label] : ordered_roots(model_)) {
                const Entity& e = model_.at(label);
                if (!schema_->is_relationship(e.type)) continue;
                auto mit = meta_.find(gid);
                if (mit == meta_.end() || mit->second.access != Access::Shared) continue;
                auto endpoint_ids = [&](const std::vector<Label>& ls) {
                    std::vector<std::string> out;
                    for (Label l : ls) out.push_back(global_id(model_, model_.at(l)));
                    return out;
                };
                auto relating = endpoint_ids(relating_targets(model_, e));
                auto related = endpoint_ids(related_targets(model_, e));
                bool keep = !relating.empty() &&
                            std::all_of(relating.begin(), relating.end(),
                                        [&](const std::string& id) { return retained.count(id); }) &&
                            std::any_of(related.begin(), related.end(),
                                        [&](const std::string& id) { return retained.count(id); });
                if (!keep) continue;
                // Self-containment: pull in every endpoint we may serve.
                bool complete = true;
                for (const auto& id : relating)
                    if (!try_include(id, false)) complete = false;
                std::size_t related_in = 0;
                for (const auto& id : related)
                    if (try_include(id, false)) ++related_in;
                if (!complete || related_in == 0) continue;
                try_include(gid, false);
            }

            std::string payload =
                roots.empty() ? write_spf(Model(*schema_)) : write_spf(build_submodel(model_, roots));
            nlohmann::json versions = nlohmann::json::object();
            for (const auto& id : included) versions[id] = meta_.at(id).version;
            Message ack = make_ack(req, {{"payload", payload},
                                         {"versions", versions},
                                         {"denied", denied}});
            ack.from = cfg_.party_id;
            return ack;
        }
        case MsgKind::Replicate: {
            Model payload = parse_spf_model(req.body.value("payload", std::string{}), *schema_);
            std::map<std::string, int> versions;
            if (req.body.contains("versions"))
                versions = req.body["versions"].get<std::map<std::string, int>>();
            std::size_t stored =
                on_replicate(payload, req.body.value("origin", req.from), versions);
            Message ack = make_ack(req, {{"stored", stored}});
            ack.from = cfg_.party_id;
            return ack;
        }
        default: {
            Message err = make_error(req, errc::UNKNOWN_KIND,
                                     std::string("party cannot serve ") + to_string(req.kind));
            err.from = cfg_.party_id;
            return err;
        }
        }
    } catch (const Error& e) {
        Message err = make_error(req, errc::BAD_PAYLOAD, e.what());
        err.from = cfg_.party_id;
        return err;
    }
}

void PartyNode::on_message(const std::string& from, Message&& msg) {
    if (msg.kind == MsgKind::Replicate) {
        handle(msg);
        return;
    }
    (void)from; // Ack/Error and anything else on the async plane is ignored
}

std::size_t PartyNode::count(Access level) const {
    std::size_t n = 0;
    for (const auto& [id, meta] : meta_)
        if (meta.access == level) ++n;
    return n;
}

void PartyNode::checkpoint(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream mf(dir / "model.ifc", std::ios::binary);
    mf << write_spf(model_);
    std::ofstream meta(dir / "meta.tsv", std::ios::binary);
    for (const auto& [gid, m] : meta_)
        meta << gid << '\t' << to_string(m.access) << '\t' << m.origin << '\t' << m.version
             << '\n';
}

PartyNode PartyNode::restore(const Schema& schema, PartyConfig cfg,
                             const std::filesystem::path& dir) {
    PartyNode node(schema, std::move(cfg));
    std::ifstream mf(dir / "model.ifc", std::ios::binary);
    if (!mf) throw NotFoundError("checkpoint model missing in " + dir.string());
    std::stringstream ss;
    ss << mf.rdbuf();
    node.model_ = parse_spf_model(ss.str(), schema);
    std::ifstream meta(dir / "meta.tsv");
    std::string line;
    int lineno = 0;
    while (std::getline(meta, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string gid, access, origin, version;
        if (!std::getline(ls, gid, '\t') || !std::getline(ls, access, '\t') ||
            !std::getline(ls, origin, '\t') || !std::getline(ls, version))
            throw ParseError("malformed metadata line", lineno);
        node.meta_[gid] = StoredMeta{access_from_string(access), origin, std::stoi(version)};
    }
    return node;
}

} // namespace bimshare
