#pragma once

#include "bimshare/controller.hpp"
#include "bimshare/party.hpp"
#include "bimshare/simnet.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace bimshare {

// A controller plus party nodes wired over the in-process simulated network:
// synchronous control-plane channels straight into the controller, and an
// asynchronous data plane (Replicate) through SimNet. Peers reach each other
// with synchronous channels for FetchEntities.
class Federation {
public:
    explicit Federation(const Schema& schema, SimNet::Options net_opts = SimNet::Options{});

    PartyNode& add_party(PartyConfig cfg);
    PartyNode& party(const std::string& id);
    const std::vector<std::unique_ptr<PartyNode>>& parties() const { return parties_; }

    GlobalController& controller() { return controller_; }
    SimNet& net() { return net_; }

    // Drains the data plane to quiescence.
    void settle() { net_.deliver_all(); }

private:
    const Schema* schema_;
    GlobalController controller_;
    SimNet net_;
    std::vector<std::unique_ptr<PartyNode>> parties_;
};

// Runs the scripted multi-party demo: N parties with generated requirement
// views, each uploading a seeded synthetic model, sharing it, settling
// replication, then a cross-party extraction. Returns the versioned report:
// {report_version, parties, entity_counts, index_counts{shared,external},
//  extract_ms{sequential,parallel}, verification{passed,failures[]}}.
nlohmann::json run_demo(const Schema& schema, int parties, std::uint64_t seed);

} // namespace bimshare
