#pragma once

#include "bimshare/access.hpp"
#include "bimshare/model.hpp"
#include "bimshare/mvd.hpp"
#include "bimshare/wire.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bimshare {

// Index entry for one shared exchangeable entity. Metadata only; the
// controller never retains entity payloads.
struct IndexRecord {
    std::string entity_id;
    std::string entity_type;
    std::string owner_party;
    std::string host_server;
    std::set<std::string> replica_servers; // never contains host_server
    Access access_level = Access::Shared;
    int version = 1;
    std::uint64_t updated_at = 0; // logical clock of the last mutation
};

struct PartyRegistration {
    std::string party_id;
    std::string address;
    std::string requirements_xml; // ModelView the party wants replicated
};

// Global data controller: party registry, object-level index of shared
// entities, ownership and authorization decisions, change-propagation
// fan-out. All operations throw on error; the handle() adapter maps
// exceptions onto wire Error messages.
class GlobalController {
public:
    explicit GlobalController(const Schema& schema) : schema_(&schema) {}

    void register_party(const PartyRegistration& reg);
    bool has_party(const std::string& party_id) const { return parties_.count(party_id) != 0; }

    struct ShareResult {
        std::map<std::string, int> versions;
        // entity_id -> parties whose requirements match it (replica targets)
        std::map<std::string, std::vector<std::string>> routes;
    };
    // Registers metadata for the payload's rooted non-relation entities
    // owned by `party`. The payload is inspected only to evaluate each
    // registered party's requirements; it is not stored.
    ShareResult register_shared(const std::string& party, const std::vector<std::string>& ids,
                                const Model& payload);

    const IndexRecord& locate(const std::string& entity_id) const; // NotFoundError
    std::vector<IndexRecord> list_index(const std::string& owner_filter = {}) const;

    bool authorize(const std::string& party, const std::string& entity_id, bool write) const;

    const IndexRecord& transfer_ownership(const std::string& entity_id,
                                          const std::string& from_party,
                                          const std::string& to_party);

    // Returns the replica servers to notify; the caller delivers payloads.
    std::vector<std::string> propagate_change(const std::string& owner,
                                              const std::string& entity_id, int new_version);
    // A replica confirms it stored `version`; convergence bookkeeping.
    void acknowledge(const std::string& party, const std::string& entity_id, int version);
    std::map<std::string, int> replica_versions(const std::string& entity_id) const;

    struct AuditEntry {
        std::string op;
        std::string party;
        std::string entity_id;
        bool accepted = false;
    };
    const std::vector<AuditEntry>& audit_log() const { return audit_; }

    Message handle(const Message& req);

private:
    struct PartyInfo {
        PartyRegistration reg;
        std::optional<ModelView> requirements;
    };

    std::vector<std::string> route(const std::string& owner, const Model& payload,
                                   Label root) const;
    void audit(const std::string& op, const std::string& party, const std::string& id,
               bool accepted);

    const Schema* schema_;
    std::map<std::string, PartyInfo> parties_;
    std::map<std::string, IndexRecord> index_;
    // entity_id -> replica party -> last acknowledged version
    std::map<std::string, std::map<std::string, int>> acks_;
    std::vector<AuditEntry> audit_;
    std::uint64_t clock_ = 0;
};

} // namespace bimshare
