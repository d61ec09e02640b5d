#pragma once

#include "bimshare/access.hpp"
#include "bimshare/extract.hpp"
#include "bimshare/model.hpp"
#include "bimshare/mvd.hpp"
#include "bimshare/wire.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bimshare {

struct PartyConfig {
    std::string party_id;
    std::string manager_token;
    std::string member_token;
    std::string requirements_xml; // ModelView driving replication to this party
    std::string controller_address;
};

// Per-entity bookkeeping alongside the local model store.
struct StoredMeta {
    Access access = Access::Private;
    std::string origin; // party id that produced the entity
    int version = 1;
};

// A party's server: one closed local model holding its own Private/Shared
// entities alongside External replicas of foreign data, plus the share /
// replicate / cross-party-extract workflows.
class PartyNode {
public:
    PartyNode(const Schema& schema, PartyConfig cfg);

    const std::string& id() const { return cfg_.party_id; }
    const PartyConfig& config() const { return cfg_; }
    const Model& model() const { return model_; }
    const std::map<std::string, StoredMeta>& metadata() const { return meta_; }
    const std::optional<ModelView>& requirements() const { return requirements_; }

    // --- wiring ---------------------------------------------------------
    void connect_controller(std::shared_ptr<Channel> ch) { controller_ = std::move(ch); }
    void connect_peer(const std::string& party, std::shared_ptr<Channel> ch);
    // Asynchronous data-plane sender (Replicate fan-out).
    using Sender = std::function<void(const std::string& to, Message msg)>;
    void set_sender(Sender s) { sender_ = std::move(s); }
    // Fallback for reaching a party without a pre-wired channel (TCP mode):
    // given (party id, address), builds a synchronous channel.
    using PeerFactory =
        std::function<std::shared_ptr<Channel>(const std::string& party, const std::string& address)>;
    void set_peer_factory(PeerFactory f) { peer_factory_ = std::move(f); }
    // Party id -> address, learned from controller replies.
    const std::map<std::string, std::string>& address_book() const { return addresses_; }

    void register_with_controller();

    // --- data management --------------------------------------------------
    std::size_t upload_model(const std::string& spf_text);
    // Matching Private entities (plus relations retained for closure) become
    // Shared, are registered at the controller, and are replicated to every
    // party whose requirements match. Manager-only.
    std::size_t share(const ModelView& selector, const std::string& credential);
    std::size_t share(const std::string& view_xml, const std::string& credential);

    // Replaces one owned exchangeable entity; the payload must contain
    // exactly one rooted non-relation entity. Returns the new version.
    int local_write(const std::string& credential, const Model& payload,
                    const std::string& entity_id);

    struct ExtractReport {
        SubModel sub;
        std::vector<std::string> warnings; // access-denied / unreachable ids
    };
    ExtractReport cross_party_extract(const ModelView& view, ExtractionMode mode);

    // --- replication ingress ---------------------------------------------
    // Stores payload entities matching this party's requirements as External
    // replicas; version regressions and redeliveries are no-ops.
    std::size_t on_replicate(const Model& payload, const std::string& origin,
                             const std::map<std::string, int>& versions);

    // Wire adapters. handle() serves synchronous requests (FetchEntities);
    // on_message() consumes asynchronous traffic (Replicate).
    Message handle(const Message& req);
    void on_message(const std::string& from, Message&& msg);

    // --- persistence -------------------------------------------------------
    void checkpoint(const std::filesystem::path& dir) const;
    static PartyNode restore(const Schema& schema, PartyConfig cfg,
                             const std::filesystem::path& dir);

    // Remote operations issued, for locality checks ("kind -> target").
    const std::vector<std::string>& remote_call_log() const { return remote_calls_; }

    std::size_t count(Access level) const;

private:
    bool is_manager(const std::string& credential) const;
    bool may_write(const std::string& credential) const;
    Message controller_request(Message msg);
    void replicate_to(const std::string& target, const std::vector<std::string>& ids);
    std::string payload_for(const std::vector<std::string>& ids) const;

    const Schema* schema_;
    PartyConfig cfg_;
    Model model_;
    std::map<std::string, StoredMeta> meta_;
    std::optional<ModelView> requirements_;
    std::shared_ptr<Channel> controller_;
    std::map<std::string, std::shared_ptr<Channel>> peers_;
    std::map<std::string, std::string> addresses_;
    PeerFactory peer_factory_;
    Sender sender_;
    std::uint64_t next_request_ = 1;
    std::vector<std::string> remote_calls_;
};

} // namespace bimshare
