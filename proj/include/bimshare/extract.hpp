#pragma once

#include "bimshare/model.hpp"
#include "bimshare/mvd.hpp"

#include <map>
#include <string>
#include <vector>

namespace bimshare {

enum class ExtractionMode {
    Broad,  // keep everything matching any rule
    Strict, // drop type-only matches not connected to a constrained match
};

enum class ParallelLevel { Server, Type, Instance };

// A self-contained entity set (rooted + relation + resource entities);
// every reference resolves within the fragment.
struct SubModel {
    Model model;
    std::string origin;    // source model / party identity
    std::string view_name;
    std::map<std::string, std::string> provenance; // EntityId -> origin party

    explicit SubModel(const Schema& schema) : model(schema) {}
};

// Serial reference implementation.
//
// Phase 1: rooted non-relation entities matching any rule are selected.
// Phase 2: relation entities whose Relating endpoints and at least one
//          Related endpoint lie in the selection are retained, iterated to a
//          fixed point; retained [1:n] relations are narrowed to selected
//          Related endpoints.
// Phase 3 (strict only): entities selected solely by type-only rules are
//          dropped unless a retained relation connects them to an entity
//          selected by a constrained rule; phase 2 is then recomputed.
// Phase 4: each survivor is expanded to its exchangeable entity.
SubModel extract(const Model& model, const ModelView& view, ExtractionMode mode);

// Parallel extraction. Result is entity-for-entity equal to extract().
//   Server:   rule groups partitioned across attribute-identical replicas,
//             partial selections unioned before phase 2.
//   Type:     per-type rule groups evaluated concurrently.
//   Instance: instances of each type partitioned across workers.
// Replica divergence is detected by a post-merge consistency check.
SubModel extract_parallel(const std::vector<const Model*>& replicas, const ModelView& view,
                          ExtractionMode mode, ParallelLevel level, int workers);

SubModel extract_parallel(const Model& model, const ModelView& view, ExtractionMode mode,
                          ParallelLevel level, int workers);

} // namespace bimshare
