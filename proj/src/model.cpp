#include "bimshare/model.hpp"

#include "bimshare/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <set>

namespace bimshare {

namespace {

// IFC GlobalId alphabet (base 64, '_' and '$' in the top slots).
constexpr char kGidAlphabet[] =
    "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_$";

} // namespace

std::string encode_global_id(std::uint64_t hi, std::uint64_t lo) {
    // 128 bits into 22 characters of 6 bits; the first character carries the
    // top 4 bits only, so it stays in [0, 16).
    std::string out(22, '0');
    unsigned __int128 v = (static_cast<unsigned __int128>(hi) << 64) | lo;
    for (int i = 21; i >= 0; --i) {
        out[i] = kGidAlphabet[static_cast<unsigned>(v & 0x3f)];
        v >>= 6;
    }
    return out;
}

std::string random_global_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    return encode_global_id(rng(), rng());
}

bool is_valid_global_id(const std::string& id) {
    if (id.size() != 22) return false;
    for (char c : id)
        if (!std::strchr(kGidAlphabet, c)) return false;
    return true;
}

Label Model::insert(Entity e) {
    if (e.label == 0) e.label = next_label_++;
    if (e.label <= 0) throw ValidationError("labels must be positive");
    next_label_ = std::max(next_label_, e.label + 1);
    if (entities_.count(e.label))
        throw ValidationError("duplicate label #" + std::to_string(e.label));
    if (schema_->is_rooted(e.type)) {
        if (e.attrs.empty() || !std::holds_alternative<std::string>(e.attrs[0]))
            throw ValidationError("rooted entity #" + std::to_string(e.label) +
                                  " lacks a GlobalId");
        const auto& gid = std::get<std::string>(e.attrs[0]);
        auto [it, fresh] = rooted_.emplace(gid, e.label);
        if (!fresh)
            throw ValidationError("duplicate GlobalId " + gid);
    }
    Label label = e.label;
    entities_.emplace(label, std::move(e));
    return label;
}

void Model::erase(Label label) {
    auto it = entities_.find(label);
    if (it == entities_.end()) return;
    if (schema_->is_rooted(it->second.type) && !it->second.attrs.empty() &&
        std::holds_alternative<std::string>(it->second.attrs[0]))
        rooted_.erase(std::get<std::string>(it->second.attrs[0]));
    entities_.erase(it);
}

const Entity& Model::at(Label label) const {
    auto it = entities_.find(label);
    if (it == entities_.end())
        throw NotFoundError("no entity #" + std::to_string(label));
    return it->second;
}

Entity& Model::at(Label label) {
    auto it = entities_.find(label);
    if (it == entities_.end())
        throw NotFoundError("no entity #" + std::to_string(label));
    return it->second;
}

std::optional<Label> Model::find_rooted(const std::string& gid) const {
    auto it = rooted_.find(gid);
    if (it == rooted_.end()) return std::nullopt;
    return it->second;
}

void Model::validate() const {
    for (const auto& [label, e] : entities_) {
        const auto& attrs = schema_->all_attrs(e.type); // throws on unknown type
        if (schema_->at(e.type).abstract)
            throw ValidationError("instance #" + std::to_string(label) +
                                  " of abstract type " + e.type);
        if (e.attrs.size() != attrs.size())
            throw ValidationError("arity mismatch on #" + std::to_string(label) + " (" +
                                  e.type + "): got " + std::to_string(e.attrs.size()) +
                                  ", want " + std::to_string(attrs.size()));
        for (size_t i = 0; i < attrs.size(); ++i) {
            const AttrDef& def = attrs[i];
            const AttrValue& v = e.attrs[i];
            auto where = [&] {
                return e.type + "." + def.name + " on #" + std::to_string(label);
            };
            if (std::holds_alternative<std::monostate>(v)) {
                if (!def.optional)
                    throw ValidationError("missing required attribute " + where());
                continue;
            }
            auto check_ref = [&](const Ref& r) {
                auto it = entities_.find(r.label);
                if (it == entities_.end())
                    throw ValidationError("dangling reference #" + std::to_string(r.label) +
                                          " in " + where());
                if (!schema_->is_subtype_of(it->second.type, def.target_type))
                    throw ValidationError("reference in " + where() + " targets " +
                                          it->second.type + ", not a " + def.target_type);
            };
            switch (def.kind) {
            case AttrKind::String:
                if (!std::holds_alternative<std::string>(v))
                    throw ValidationError("expected string in " + where());
                break;
            case AttrKind::Integer:
                if (!std::holds_alternative<std::int64_t>(v))
                    throw ValidationError("expected integer in " + where());
                break;
            case AttrKind::Real:
                if (!std::holds_alternative<double>(v))
                    throw ValidationError("expected real in " + where());
                break;
            case AttrKind::Boolean:
                if (!std::holds_alternative<bool>(v))
                    throw ValidationError("expected boolean in " + where());
                break;
            case AttrKind::Enum: {
                if (!std::holds_alternative<EnumValue>(v))
                    throw ValidationError("expected enum in " + where());
                const auto& tag = std::get<EnumValue>(v).tag;
                if (std::find(def.enum_tags.begin(), def.enum_tags.end(), tag) ==
                    def.enum_tags.end())
                    throw ValidationError("enum tag ." + tag + ". not allowed in " + where());
                break;
            }
            case AttrKind::Reference:
                if (!std::holds_alternative<Ref>(v))
                    throw ValidationError("expected reference in " + where());
                check_ref(std::get<Ref>(v));
                break;
            case AttrKind::ListOfReference:
                if (!std::holds_alternative<std::vector<Ref>>(v))
                    throw ValidationError("expected reference list in " + where());
                for (const Ref& r : std::get<std::vector<Ref>>(v)) check_ref(r);
                break;
            }
        }
        if (schema_->is_rooted(e.type)) {
            const auto& gid = std::get<std::string>(e.attrs[0]);
            if (!is_valid_global_id(gid))
                throw ValidationError("malformed GlobalId '" + gid + "' on #" +
                                      std::to_string(label));
        }
    }
}

std::optional<size_t> attr_pos(const Schema& s, const Entity& e, const std::string& name) {
    return s.attr_index(e.type, name);
}

const AttrValue* attr(const Model& m, const Entity& e, const std::string& name) {
    auto pos = m.schema().attr_index(e.type, name);
    if (!pos || *pos >= e.attrs.size()) return nullptr;
    return &e.attrs[*pos];
}

const std::string& global_id(const Model& m, const Entity& e) {
    if (!m.schema().is_rooted(e.type))
        throw ValidationError(e.type + " is not a rooted type");
    return std::get<std::string>(e.attrs.at(0));
}

ChangeAction change_action(const Model& m, const Entity& e) {
    if (!m.schema().is_rooted(e.type)) return ChangeAction::NoChange;
    const AttrValue* oh = attr(m, e, "OwnerHistory");
    if (!oh || !std::holds_alternative<Ref>(*oh)) return ChangeAction::NoChange;
    const Entity& hist = m.at(std::get<Ref>(*oh).label);
    const AttrValue* ca = attr(m, hist, "ChangeAction");
    if (!ca || !std::holds_alternative<EnumValue>(*ca)) return ChangeAction::NoChange;
    const auto& tag = std::get<EnumValue>(*ca).tag;
    if (tag == "ADDED") return ChangeAction::Added;
    if (tag == "MODIFIED") return ChangeAction::Modified;
    if (tag == "DELETED") return ChangeAction::Deleted;
    if (tag == "NOTDEFINED") return ChangeAction::NotDefined;
    return ChangeAction::NoChange;
}

const char* to_string(ChangeAction a) {
    switch (a) {
    case ChangeAction::Added: return "ADDED";
    case ChangeAction::Modified: return "MODIFIED";
    case ChangeAction::Deleted: return "DELETED";
    case ChangeAction::NotDefined: return "NOTDEFINED";
    default: return "NOCHANGE";
    }
}

void set_change_action(Model& m, Label rooted_label, ChangeAction action,
                       const std::string& owning_party) {
    Entity& e = m.at(rooted_label);
    auto pos = m.schema().attr_index(e.type, "OwnerHistory");
    if (!pos) throw ValidationError(e.type + " has no OwnerHistory attribute");
    Label hist_label;
    if (std::holds_alternative<Ref>(e.attrs[*pos])) {
        hist_label = std::get<Ref>(e.attrs[*pos]).label;
    } else {
        Entity hist;
        hist.type = "IfcOwnerHistory";
        hist.attrs = {owning_party, AttrValue{std::monostate{}}, std::int64_t{0}};
        hist_label = m.insert(std::move(hist));
        m.at(rooted_label).attrs[*pos] = Ref{hist_label};
    }
    Entity& hist = m.at(hist_label);
    auto ca = m.schema().attr_index(hist.type, "ChangeAction");
    hist.attrs[*ca] = EnumValue{to_string(action)};
    if (!owning_party.empty()) {
        auto op = m.schema().attr_index(hist.type, "OwningParty");
        hist.attrs[*op] = owning_party;
    }
}

ExchangeableEntity expand_exchangeable(const Model& m, const std::string& root_id) {
    auto label = m.find_rooted(root_id);
    if (!label) throw NotFoundError("unknown GlobalId " + root_id);
    return expand_exchangeable(m, *label);
}

ExchangeableEntity expand_exchangeable(const Model& m, Label root_label) {
    const Entity& root = m.at(root_label);
    if (!m.schema().is_rooted(root.type))
        throw ValidationError("#" + std::to_string(root_label) + " (" + root.type +
                              ") is a resource entity, not a rooted one");
    std::set<Label> seen;
    std::vector<Label> stack{root_label};
    while (!stack.empty()) {
        Label cur = stack.back();
        stack.pop_back();
        for (const AttrValue& v : m.at(cur).attrs) {
            auto visit = [&](Label target) {
                if (m.schema().is_rooted(m.at(target).type)) return; // stop at rooted
                if (seen.insert(target).second) stack.push_back(target);
            };
            if (std::holds_alternative<Ref>(v)) visit(std::get<Ref>(v).label);
            else if (std::holds_alternative<std::vector<Ref>>(v))
                for (const Ref& r : std::get<std::vector<Ref>>(v)) visit(r.label);
        }
    }
    ExchangeableEntity out;
    out.root = root_label;
    out.resources.assign(seen.begin(), seen.end());
    return out;
}

RelationKind is_relation(const Schema& s, const Entity& e) {
    return s.relation_kind(e.type);
}

std::vector<Label> relating_targets(const Model& m, const Entity& e) {
    std::vector<Label> out;
    const auto& defs = m.schema().all_attrs(e.type);
    for (size_t i = 0; i < defs.size(); ++i) {
        if (defs[i].name.rfind("Relating", 0) != 0) continue;
        if (std::holds_alternative<Ref>(e.attrs[i]))
            out.push_back(std::get<Ref>(e.attrs[i]).label);
        else if (std::holds_alternative<std::vector<Ref>>(e.attrs[i]))
            for (const Ref& r : std::get<std::vector<Ref>>(e.attrs[i])) out.push_back(r.label);
    }
    return out;
}

std::vector<Label> related_targets(const Model& m, const Entity& e) {
    std::vector<Label> out;
    const auto& defs = m.schema().all_attrs(e.type);
    for (size_t i = 0; i < defs.size(); ++i) {
        if (defs[i].name.rfind("Related", 0) != 0 || defs[i].name.rfind("Relating", 0) == 0)
            continue;
        if (std::holds_alternative<Ref>(e.attrs[i]))
            out.push_back(std::get<Ref>(e.attrs[i]).label);
        else if (std::holds_alternative<std::vector<Ref>>(e.attrs[i]))
            for (const Ref& r : std::get<std::vector<Ref>>(e.attrs[i])) out.push_back(r.label);
    }
    return out;
}

namespace {

bool value_equal(const Model& ma, const AttrValue& a, const Model& mb, const AttrValue& b,
                 std::set<std::pair<Label, Label>>& visiting);

bool ref_equal(const Model& ma, Label la, const Model& mb, Label lb,
               std::set<std::pair<Label, Label>>& visiting) {
    const Entity& ea = ma.at(la);
    const Entity& eb = mb.at(lb);
    bool ra = ma.schema().is_rooted(ea.type);
    bool rb = mb.schema().is_rooted(eb.type);
    if (ra != rb) return false;
    if (ra) return global_id(ma, ea) == global_id(mb, eb);
    if (ea.type != eb.type || ea.attrs.size() != eb.attrs.size()) return false;
    if (!visiting.insert({la, lb}).second) return true; // cycle: assume equal
    for (size_t i = 0; i < ea.attrs.size(); ++i)
        if (!value_equal(ma, ea.attrs[i], mb, eb.attrs[i], visiting)) return false;
    visiting.erase({la, lb});
    return true;
}

bool value_equal(const Model& ma, const AttrValue& a, const Model& mb, const AttrValue& b,
                 std::set<std::pair<Label, Label>>& visiting) {
    if (a.index() != b.index()) return false;
    if (std::holds_alternative<Ref>(a))
        return ref_equal(ma, std::get<Ref>(a).label, mb, std::get<Ref>(b).label, visiting);
    if (std::holds_alternative<std::vector<Ref>>(a)) {
        const auto& la = std::get<std::vector<Ref>>(a);
        const auto& lb = std::get<std::vector<Ref>>(b);
        if (la.size() != lb.size()) return false;
        for (size_t i = 0; i < la.size(); ++i)
            if (!ref_equal(ma, la[i].label, mb, lb[i].label, visiting)) return false;
        return true;
    }
    return a == b;
}

} // namespace

bool entity_equal(const Model& ma, const Entity& a, const Model& mb, const Entity& b) {
    if (a.type != b.type || a.attrs.size() != b.attrs.size()) return false;
    std::set<std::pair<Label, Label>> visiting;
    for (size_t i = 0; i < a.attrs.size(); ++i)
        if (!value_equal(ma, a.attrs[i], mb, b.attrs[i], visiting)) return false;
    return true;
}

bool model_equal(const Model& a, const Model& b) {
    if (a.rooted_index().size() != b.rooted_index().size()) return false;
    for (const auto& [gid, la] : a.rooted_index()) {
        auto lb = b.find_rooted(gid);
        if (!lb) return false;
        if (!entity_equal(a, a.at(la), b, b.at(*lb))) return false;
    }
    return true;
}

Label import_exchangeable(Model& dst, const Model& src, Label src_root,
                          std::vector<std::string>* unresolved, Label forced_dst_label) {
    ExchangeableEntity ex = expand_exchangeable(src, src_root);

    std::map<Label, Label> remap; // src resource label -> dst label
    for (Label r : ex.resources) remap[r] = dst.fresh_label();
    Label dst_root = forced_dst_label != 0 ? forced_dst_label : dst.fresh_label();
    remap[ex.root] = dst_root;

    auto remap_ref = [&](const Ref& r, const AttrDef& def, bool& drop) -> Ref {
        auto it = remap.find(r.label);
        if (it != remap.end()) return Ref{it->second};
        // Outside the closure: must be a rooted entity; rebind via GlobalId.
        const Entity& target = src.at(r.label);
        const std::string& gid = global_id(src, target);
        auto dl = dst.find_rooted(gid);
        if (dl) return Ref{*dl};
        if (!unresolved)
            throw NotFoundError("reference to " + gid + " (" + target.type +
                                ") cannot be resolved in the destination model (" +
                                def.name + ")");
        unresolved->push_back(gid);
        drop = true;
        return Ref{};
    };

    auto copy_entity = [&](Label src_label, Label dst_label) {
        const Entity& se = src.at(src_label);
        Entity de;
        de.label = dst_label;
        de.type = se.type;
        const auto& defs = src.schema().all_attrs(se.type);
        de.attrs.reserve(se.attrs.size());
        for (size_t i = 0; i < se.attrs.size(); ++i) {
            const AttrValue& v = se.attrs[i];
            if (std::holds_alternative<Ref>(v)) {
                bool drop = false;
                Ref r = remap_ref(std::get<Ref>(v), defs[i], drop);
                de.attrs.push_back(drop ? AttrValue{std::monostate{}} : AttrValue{r});
            } else if (std::holds_alternative<std::vector<Ref>>(v)) {
                std::vector<Ref> out;
                for (const Ref& r : std::get<std::vector<Ref>>(v)) {
                    bool drop = false;
                    Ref mapped = remap_ref(r, defs[i], drop);
                    if (!drop) out.push_back(mapped);
                }
                de.attrs.push_back(std::move(out));
            } else {
                de.attrs.push_back(v);
            }
        }
        dst.insert(std::move(de));
    };

    for (Label r : ex.resources) copy_entity(r, remap[r]);
    copy_entity(ex.root, dst_root);
    return dst_root;
}

Model build_submodel(const Model& src, const std::vector<Label>& roots) {
    Model out(src.schema());
    // Non-relation roots first so relation endpoint references resolve;
    // relations referencing relations settle in the retry loop.
    std::vector<Label> pending = roots;
    std::stable_sort(pending.begin(), pending.end(), [&](Label a, Label b) {
        bool ra = src.schema().is_relationship(src.at(a).type);
        bool rb = src.schema().is_relationship(src.at(b).type);
        if (ra != rb) return !ra;
        return a < b;
    });
    bool progress = true;
    while (!pending.empty() && progress) {
        progress = false;
        std::vector<Label> next;
        for (Label l : pending) {
            try {
                import_exchangeable(out, src, l);
                progress = true;
            } catch (const NotFoundError&) {
                next.push_back(l);
            }
        }
        pending = std::move(next);
    }
    if (!pending.empty())
        throw ValidationError("sub-model is not self-contained: " +
                              std::to_string(pending.size()) +
                              " entities have unresolved endpoints");
    return out;
}

} // namespace bimshare
