#include "bimshare/controller.hpp"

#include "bimshare/errors.hpp"
#include "bimshare/spf.hpp"

#include <algorithm>

namespace bimshare {

const char* to_string(Access a) {
    switch (a) {
    case Access::Private: return "Private";
    case Access::Shared: return "Shared";
    default: return "External";
    }
}

Access access_from_string(const std::string& s) {
    if (s == "Private") return Access::Private;
    if (s == "Shared") return Access::Shared;
    if (s == "External") return Access::External;
    throw ValidationError("unknown access level '" + s + "'");
}

void GlobalController::register_party(const PartyRegistration& reg) {
    if (parties_.count(reg.party_id))
        throw ConflictError("party id '" + reg.party_id + "' already registered");
    PartyInfo info{reg, std::nullopt};
    if (!reg.requirements_xml.empty())
        info.requirements = parse_mvd(reg.requirements_xml, *schema_);
    parties_.emplace(reg.party_id, std::move(info));
}

std::vector<std::string> GlobalController::route(const std::string& owner, const Model& payload,
                                                 Label root) const {
    std::vector<std::string> out;
    const Entity& e = payload.at(root);
    for (const auto& [pid, info] : parties_) {
        if (pid == owner || !info.requirements) continue;
        if (matches_view(*info.requirements, e, payload)) out.push_back(pid);
    }
    return out;
}

GlobalController::ShareResult GlobalController::register_shared(
    const std::string& party, const std::vector<std::string>& ids, const Model& payload) {
    if (!parties_.count(party)) throw NotFoundError("party '" + party + "' is not registered");
    // Validate the whole batch before mutating anything.
    for (const auto& id : ids) {
        auto it = index_.find(id);
        if (it != index_.end() && it->second.owner_party != party) {
            audit("register_shared", party, id, false);
            throw ConflictError("entity " + id + " is already owned by " +
                                it->second.owner_party);
        }
        if (!payload.find_rooted(id))
            throw ValidationError("entity " + id + " is missing from the share payload");
    }
    ShareResult res;
    for (const auto& id : ids) {
        Label root = *payload.find_rooted(id);
        auto replicas = route(party, payload, root);
        auto it = index_.find(id);
        if (it == index_.end()) {
            IndexRecord rec;
            rec.entity_id = id;
            rec.entity_type = payload.at(root).type;
            rec.owner_party = party;
            rec.host_server = party;
            rec.version = 1;
            it = index_.emplace(id, std::move(rec)).first;
        }
        it->second.replica_servers = {replicas.begin(), replicas.end()};
        it->second.updated_at = ++clock_;
        res.versions[id] = it->second.version;
        res.routes[id] = std::move(replicas);
        audit("register_shared", party, id, true);
    }
    return res;
}

const IndexRecord& GlobalController::locate(const std::string& entity_id) const {
    auto it = index_.find(entity_id);
    if (it == index_.end()) throw NotFoundError("entity " + entity_id + " is not indexed");
    return it->second;
}

std::vector<IndexRecord> GlobalController::list_index(const std::string& owner_filter) const {
    std::vector<IndexRecord> out;
    for (const auto& [id, rec] : index_)
        if (owner_filter.empty() || rec.owner_party == owner_filter) out.push_back(rec);
    return out;
}

bool GlobalController::authorize(const std::string& party, const std::string& entity_id,
                                 bool write) const {
    if (!parties_.count(party)) throw NotFoundError("party '" + party + "' is not registered");
    const IndexRecord& rec = locate(entity_id);
    if (write) return party == rec.owner_party;
    return party == rec.owner_party || rec.access_level == Access::Shared;
}

const IndexRecord& GlobalController::transfer_ownership(const std::string& entity_id,
                                                        const std::string& from_party,
                                                        const std::string& to_party) {
    auto it = index_.find(entity_id);
    if (it == index_.end()) throw NotFoundError("entity " + entity_id + " is not indexed");
    if (!parties_.count(to_party))
        throw NotFoundError("party '" + to_party + "' is not registered");
    IndexRecord& rec = it->second;
    if (rec.owner_party != from_party) {
        audit("transfer_ownership", from_party, entity_id, false);
        throw AuthError(from_party + " does not own " + entity_id);
    }
    rec.owner_party = to_party;
    rec.host_server = to_party;
    rec.replica_servers.erase(to_party);
    rec.replica_servers.insert(from_party); // old owner keeps a read-only copy
    ++rec.version;
    rec.updated_at = ++clock_;
    audit("transfer_ownership", from_party, entity_id, true);
    return rec;
}

std::vector<std::string> GlobalController::propagate_change(const std::string& owner,
                                                            const std::string& entity_id,
                                                            int new_version) {
    auto it = index_.find(entity_id);
    if (it == index_.end()) throw NotFoundError("entity " + entity_id + " is not indexed");
    IndexRecord& rec = it->second;
    if (rec.owner_party != owner) {
        audit("propagate_change", owner, entity_id, false);
        throw AuthError(owner + " does not own " + entity_id);
    }
    if (new_version != rec.version + 1) {
        audit("propagate_change", owner, entity_id, false);
        throw ConflictError("stale version for " + entity_id + ": current " +
                            std::to_string(rec.version) + ", submitted " +
                            std::to_string(new_version));
    }
    rec.version = new_version;
    rec.updated_at = ++clock_;
    audit("propagate_change", owner, entity_id, true);
    return {rec.replica_servers.begin(), rec.replica_servers.end()};
}

void GlobalController::acknowledge(const std::string& party, const std::string& entity_id,
                                   int version) {
    auto& v = acks_[entity_id][party];
    v = std::max(v, version);
}

std::map<std::string, int> GlobalController::replica_versions(
    const std::string& entity_id) const {
    auto it = acks_.find(entity_id);
    return it == acks_.end() ? std::map<std::string, int>{} : it->second;
}

void GlobalController::audit(const std::string& op, const std::string& party,
                             const std::string& id, bool accepted) {
    audit_.push_back({op, party, id, accepted});
}

namespace {

nlohmann::json record_to_json(const IndexRecord& rec) {
    return {
        {"entity_id", rec.entity_id},
        {"entity_type", rec.entity_type},
        {"owner_party", rec.owner_party},
        {"host_server", rec.host_server},
        {"replica_servers", std::vector<std::string>(rec.replica_servers.begin(),
                                                     rec.replica_servers.end())},
        {"access_level", to_string(rec.access_level)},
        {"version", rec.version},
        {"updated_at", rec.updated_at},
    };
}

} // namespace

Message GlobalController::handle(const Message& req) {
    try {
        switch (req.kind) {
        case MsgKind::RegisterParty: {
            PartyRegistration reg;
            reg.party_id = req.body.value("party_id", req.from);
            reg.address = req.body.value("address", std::string{});
            reg.requirements_xml = req.body.value("requirements", std::string{});
            register_party(reg);
            return make_ack(req);
        }
        case MsgKind::RegisterShared: {
            if (!req.body.contains("payload") || !req.body.contains("entity_ids"))
                return make_error(req, errc::BAD_PAYLOAD, "payload and entity_ids required");
            Model payload = parse_spf_model(req.body["payload"].get<std::string>(), *schema_);
            auto ids = req.body["entity_ids"].get<std::vector<std::string>>();
            ShareResult res = register_shared(req.from, ids, payload);
            nlohmann::json addresses = nlohmann::json::object();
            for (const auto& [id, parties] : res.routes)
                for (const auto& p : parties) addresses[p] = parties_.at(p).reg.address;
            return make_ack(req, {{"versions", res.versions},
                                  {"routes", res.routes},
                                  {"addresses", addresses}});
        }
        case MsgKind::Locate: {
            auto with_address = [this](const IndexRecord& rec) {
                nlohmann::json j = record_to_json(rec);
                auto it = parties_.find(rec.host_server);
                j["host_address"] = it == parties_.end() ? "" : it->second.reg.address;
                return j;
            };
            if (req.body.value("list", false)) {
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& rec : list_index(req.body.value("owner", std::string{})))
                    arr.push_back(with_address(rec));
                return make_ack(req, {{"records", arr}});
            }
            return make_ack(req, with_address(locate(req.body.at("entity_id"))));
        }
        case MsgKind::Authorize: {
            bool write = req.body.value("intent", std::string{"read"}) == "write";
            bool granted = authorize(req.from, req.body.at("entity_id"), write);
            return make_ack(req, {{"granted", granted}});
        }
        case MsgKind::TransferOwner: {
            const IndexRecord& rec = transfer_ownership(
                req.body.at("entity_id"), req.body.value("from", req.from),
                req.body.at("to"));
            return make_ack(req, record_to_json(rec));
        }
        case MsgKind::PropagateNotify: {
            if (req.body.contains("ack_version")) {
                acknowledge(req.from, req.body.at("entity_id"),
                            req.body["ack_version"].get<int>());
                return make_ack(req);
            }
            auto replicas = propagate_change(req.from, req.body.at("entity_id"),
                                             req.body.at("new_version").get<int>());
            nlohmann::json addresses = nlohmann::json::object();
            for (const auto& p : replicas) addresses[p] = parties_.at(p).reg.address;
            return make_ack(req, {{"replicas", replicas}, {"addresses", addresses}});
        }
        default:
            return make_error(req, errc::UNKNOWN_KIND,
                              std::string("controller cannot serve ") + to_string(req.kind));
        }
    } catch (const AuthError& e) {
        std::string what = e.what();
        bool ownership = what.find("does not own") != std::string::npos;
        return make_error(req, ownership ? errc::NOT_OWNER : errc::AUTH_DENIED, what);
    } catch (const NotFoundError& e) {
        return make_error(req, errc::NOT_FOUND, e.what());
    } catch (const ConflictError& e) {
        std::string what = e.what();
        bool stale = what.find("stale version") != std::string::npos;
        return make_error(req, stale ? errc::STALE_VERSION : errc::OWNERSHIP_CLASH, what);
    } catch (const ProtocolError& e) {
        return make_error(req, e.code(), e.what());
    } catch (const std::exception& e) {
        return make_error(req, errc::BAD_PAYLOAD, e.what());
    }
}

} // namespace bimshare
