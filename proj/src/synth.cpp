#include "bimshare/synth.hpp"

#include "bimshare/errors.hpp"

#include <random>
#include <sstream>
#include <vector>

namespace bimshare {

namespace {

class Builder {
public:
    Builder(Model& m, std::mt19937_64& rng) : m_(m), rng_(rng) {}

    Label make(const std::string& type,
               std::vector<std::pair<std::string, AttrValue>> values, bool rooted = true) {
        const Schema& s = m_.schema();
        const auto& defs = s.all_attrs(type);
        Entity e;
        e.type = type;
        e.attrs.assign(defs.size(), AttrValue{});
        if (rooted) {
            auto gi = s.attr_index(type, "GlobalId");
            e.attrs[*gi] = encode_global_id(rng_(), rng_());
        }
        for (auto& [name, v] : values) {
            auto i = s.attr_index(type, name);
            if (!i) throw NotFoundError(type + " has no attribute " + name);
            e.attrs[*i] = std::move(v);
        }
        return m_.insert(std::move(e));
    }

    Label placement(double x, double y, double z) {
        Label pt = make("IfcCartesianPoint", {{"X", x}, {"Y", y}, {"Z", z}}, false);
        Label ax = make("IfcAxis2Placement3D", {{"Location", Ref{pt}}}, false);
        return make("IfcLocalPlacement", {{"RelativePlacement", Ref{ax}}}, false);
    }

private:
    Model& m_;
    std::mt19937_64& rng_;
};

std::vector<Ref> refs(const std::vector<Label>& ls) {
    std::vector<Ref> out;
    out.reserve(ls.size());
    for (Label l : ls) out.push_back(Ref{l});
    return out;
}

std::string zone_name(int i) {
    std::string name = "Zone ";
    if (i < 26) name += static_cast<char>('A' + i);
    else name += std::to_string(i + 1);
    return name;
}

} // namespace

Model synth_model(const Schema& schema, const SynthOptions& opt) {
    Model m(schema);
    std::mt19937_64 rng(opt.seed);
    Builder b(m, rng);

    Label project = b.make("IfcProject", {{"Name", opt.name_prefix + " Project"},
                                          {"Phase", std::string("design")}});

    std::vector<Label> storeys;
    std::vector<Label> all_products;
    for (int s = 0; s < opt.storeys; ++s) {
        Label storey = b.make("IfcBuildingStorey",
                              {{"Name", "Storey " + std::to_string(s + 1)},
                               {"Elevation", 3.2 * s}});
        storeys.push_back(storey);

        std::vector<Label> contained;
        auto add_products = [&](const std::string& type, int n, const char* tag) {
            for (int i = 0; i < n; ++i) {
                std::vector<std::pair<std::string, AttrValue>> vals = {
                    {"Name", type.substr(3) + " " + std::to_string(s + 1) + "." +
                                 std::to_string(i + 1)},
                    {"Tag", std::string(tag) + "-" + std::to_string(s + 1) + "-" +
                                std::to_string(i + 1)},
                    {"ObjectPlacement",
                     Ref{b.placement(i * 1.5, s * 2.0, 3.2 * s)}},
                };
                if (type == "IfcSlab")
                    vals.push_back({"PredefinedType", EnumValue{"FLOOR"}});
                contained.push_back(b.make(type, std::move(vals)));
            }
        };
        add_products("IfcColumn", opt.columns_per_storey, "C");
        add_products("IfcBeam", opt.beams_per_storey, "B");
        add_products("IfcSlab", opt.slabs_per_storey, "S");

        // Openings filled by the first columns of the storey.
        int fills = std::min(opt.openings_per_storey, opt.columns_per_storey);
        for (int i = 0; i < opt.openings_per_storey; ++i) {
            Label opening = b.make("IfcOpeningElement",
                                   {{"Name", "Opening " + std::to_string(s + 1) + "." +
                                                 std::to_string(i + 1)},
                                    {"Tag", "O-" + std::to_string(s + 1) + "-" +
                                                std::to_string(i + 1)}});
            contained.push_back(opening);
            if (i < fills)
                b.make("IfcRelFillsElement", {{"RelatingOpeningElement", Ref{opening}},
                                              {"RelatedBuildingElement", Ref{contained[i]}}});
        }

        if (!contained.empty())
            b.make("IfcRelContainedInSpatialStructure",
                   {{"RelatedElements", refs(contained)}, {"RelatingStructure", Ref{storey}}});
        all_products.insert(all_products.end(), contained.begin(), contained.end());
    }

    if (!storeys.empty())
        b.make("IfcRelAggregates",
               {{"RelatingObject", Ref{project}}, {"RelatedObjects", refs(storeys)}});

    // Zone tasks round-robin over all products.
    for (int z = 0; z < opt.zones; ++z) {
        Label task = b.make("IfcTask", {{"Name", zone_name(z)},
                                        {"TaskId", "T-" + std::to_string(z + 1)},
                                        {"Status", std::string("planned")}});
        std::vector<Label> assigned;
        for (std::size_t i = z; i < all_products.size(); i += opt.zones)
            assigned.push_back(all_products[i]);
        if (!assigned.empty())
            b.make("IfcRelAssignsToProcess",
                   {{"RelatedObjects", refs(assigned)}, {"RelatingProcess", Ref{task}}});
    }

    m.validate();
    return m;
}

std::size_t synth_entity_estimate(const SynthOptions& opt) {
    std::size_t per_storey =
        1 + // storey
        4u * (opt.columns_per_storey + opt.beams_per_storey + opt.slabs_per_storey) +
        opt.openings_per_storey * 2u + // opening + fills relation (approx)
        1;                             // containment relation
    return 1 + opt.storeys * per_storey + 1 + 2u * opt.zones;
}

SynthOptions synth_options_for(std::size_t min_entities, std::uint64_t seed) {
    SynthOptions opt;
    opt.seed = seed;
    opt.storeys = 8;
    opt.zones = 6;
    // Scale columns per storey until the estimate clears the target.
    while (synth_entity_estimate(opt) < min_entities) {
        opt.columns_per_storey += 64;
        opt.beams_per_storey += 32;
        opt.slabs_per_storey += 16;
    }
    return opt;
}

std::string synth_requirements_xml(int index, int parties) {
    // Slices overlap so several parties want the same shared data.
    static const char* kProductTypes[] = {"IfcColumn", "IfcBeam", "IfcSlab",
                                          "IfcOpeningElement"};
    std::ostringstream xml;
    xml << "<ModelView name=\"party-" << index << "-requirements\">\n";
    xml << "  <Rule type=\"IfcBuildingStorey\"/>\n";
    int picks = 1 + index % 3;
    for (int k = 0; k < picks; ++k)
        xml << "  <Rule type=\"" << kProductTypes[(index + k) % 4] << "\"/>\n";
    if (index % 2 == 0) xml << "  <Rule type=\"IfcTask\"/>\n";
    // A containment rule keeps spatial relations flowing with the products;
    // its endpoints (storeys/products) are covered by the rules above.
    xml << "  <Rule type=\"IfcRelContainedInSpatialStructure\"/>\n";
    xml << "</ModelView>\n";
    (void)parties;
    return xml.str();
}

} // namespace bimshare
