#pragma once

#include "bimshare/model.hpp"
#include "bimshare/mvd.hpp"
#include "bimshare/schema.hpp"

#include <cstdint>
#include <string>

namespace bimshare {

// Seeded synthetic building-model generator: a project aggregating storeys,
// products (columns/beams/slabs with placement resource chains), zone tasks
// assigning products, and openings filled by elements. Identical options
// produce an identical model.
struct SynthOptions {
    std::uint64_t seed = 1;
    int storeys = 3;
    int columns_per_storey = 12;
    int beams_per_storey = 8;
    int slabs_per_storey = 4;
    int openings_per_storey = 2;
    int zones = 3; // tasks named "Zone A", "Zone B", ...
    std::string name_prefix = "Synth";
};

Model synth_model(const Schema& schema, const SynthOptions& opt);

// Roughly how many entities (rooted + resources) synth_model(opt) creates.
std::size_t synth_entity_estimate(const SynthOptions& opt);

// Picks options so synth_model produces at least `min_entities` entities.
SynthOptions synth_options_for(std::size_t min_entities, std::uint64_t seed);

// Deterministic requirement view for party #index of `parties`, selecting a
// slice of product types plus the relations connecting them. All generated
// views check out against the schema.
std::string synth_requirements_xml(int index, int parties);

} // namespace bimshare
