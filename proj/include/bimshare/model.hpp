#pragma once

#include "bimshare/schema.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace bimshare {

using Label = std::int64_t; // file-scoped positive instance label

struct Ref {
    Label label = 0;
    bool operator==(const Ref&) const = default;
};

struct EnumValue {
    std::string tag;
    bool operator==(const EnumValue&) const = default;
};

// std::monostate encodes an absent optional attribute ($ in SPF).
using AttrValue = std::variant<std::monostate, std::string, std::int64_t, double, bool,
                               EnumValue, Ref, std::vector<Ref>>;

struct Entity {
    Label label = 0;
    std::string type;
    std::vector<AttrValue> attrs; // schema order (inherited first)
};

enum class ChangeAction { NoChange, Added, Modified, Deleted, NotDefined };

// 22-character GlobalId encoding of a 128-bit identifier.
std::string encode_global_id(std::uint64_t hi, std::uint64_t lo);
std::string random_global_id();
bool is_valid_global_id(const std::string& id);

// A typed entity graph bound to a schema. Entities are keyed by label;
// rooted entities are additionally indexed by GlobalId.
class Model {
public:
    explicit Model(const Schema& schema) : schema_(&schema) {}

    const Schema& schema() const { return *schema_; }

    // Assigns a fresh label when e.label == 0. Maintains the rooted index.
    Label insert(Entity e);
    void erase(Label label);

    bool has(Label label) const { return entities_.count(label) != 0; }
    const Entity& at(Label label) const;
    Entity& at(Label label);

    const std::map<Label, Entity>& entities() const { return entities_; }
    size_t size() const { return entities_.size(); }

    std::optional<Label> find_rooted(const std::string& global_id) const;
    const std::unordered_map<std::string, Label>& rooted_index() const { return rooted_; }

    Label fresh_label() { return next_label_++; }

    // Full semantic check: attribute arity/kinds, reference closure,
    // reference target subtyping, GlobalId uniqueness and shape.
    void validate() const;

private:
    const Schema* schema_;
    std::map<Label, Entity> entities_;
    std::unordered_map<std::string, Label> rooted_;
    Label next_label_ = 1;
};

// --- Attribute helpers -----------------------------------------------------

std::optional<size_t> attr_pos(const Schema& s, const Entity& e, const std::string& name);
const AttrValue* attr(const Model& m, const Entity& e, const std::string& name);

// GlobalId of a rooted entity; throws for non-rooted types.
const std::string& global_id(const Model& m, const Entity& e);

// Reads ChangeAction through the OwnerHistory reference; NoChange when
// either is absent.
ChangeAction change_action(const Model& m, const Entity& e);

// Sets ChangeAction, creating an OwnerHistory resource when missing.
void set_change_action(Model& m, Label rooted_label, ChangeAction action,
                       const std::string& owning_party = "");

const char* to_string(ChangeAction a);

// --- Exchangeable entities -------------------------------------------------

struct ExchangeableEntity {
    Label root = 0;
    std::vector<Label> resources; // ascending label order
};

// Root plus the resource-only reference closure (stops at rooted entities).
ExchangeableEntity expand_exchangeable(const Model& m, const std::string& root_id);
ExchangeableEntity expand_exchangeable(const Model& m, Label root_label);

RelationKind is_relation(const Schema& s, const Entity& e);

// All labels of Relating-prefixed reference attributes (present values only).
std::vector<Label> relating_targets(const Model& m, const Entity& e);
// All labels of Related-prefixed attributes, scalar or list.
std::vector<Label> related_targets(const Model& m, const Entity& e);

// --- Structural equality ---------------------------------------------------

// Label-independent equality: scalars compare by value, rooted references by
// GlobalId, resource references by recursive structure.
bool entity_equal(const Model& ma, const Entity& a, const Model& mb, const Entity& b);

// Same rooted-id set and pairwise entity_equal.
bool model_equal(const Model& a, const Model& b);

// --- Cross-model copying ---------------------------------------------------

// Copies the exchangeable entity rooted at src_root into dst with fresh
// labels. References to rooted entities outside the closure are resolved via
// dst's rooted index; unresolvable ones are reported through *unresolved
// (attribute value left as an absent/pruned reference) or throw when
// unresolved == nullptr.
// forced_dst_label pins the new root's label (0 assigns a fresh one); the
// slot must be free.
Label import_exchangeable(Model& dst, const Model& src, Label src_root,
                          std::vector<std::string>* unresolved = nullptr,
                          Label forced_dst_label = 0);

// Builds a self-contained model from the given rooted entities of src
// (resources duplicated per root, relation endpoint references remapped).
Model build_submodel(const Model& src, const std::vector<Label>& roots);

} // namespace bimshare
