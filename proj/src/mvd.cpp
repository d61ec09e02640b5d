#include "bimshare/mvd.hpp"

#include "bimshare/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace bimshare {

// --- Minimal XML reader ------------------------------------------------
// Handles exactly what the dialect needs: nested elements, double-quoted
// attributes, self-closing tags, comments, and the five standard entities.

namespace {

struct XmlNode {
    std::string tag;
    std::map<std::string, std::string> attrs;
    std::vector<XmlNode> children;
};

class XmlReader {
public:
    explicit XmlReader(const std::string& text) : s_(text) {}

    XmlNode parse() {
        skip_prolog();
        XmlNode root = element();
        skip_space();
        if (i_ < s_.size()) fail("trailing content after root element");
        return root;
    }

private:
    XmlNode element() {
        if (!eat('<')) fail("expected '<'");
        XmlNode node;
        node.tag = name();
        while (true) {
            skip_space();
            if (eat('/')) {
                if (!eat('>')) fail("expected '>' after '/'");
                return node;
            }
            if (eat('>')) break;
            std::string key = name();
            skip_space();
            if (!eat('=')) fail("expected '=' in attribute");
            skip_space();
            if (!eat('"')) fail("expected '\"'");
            std::string value;
            while (i_ < s_.size() && s_[i_] != '"') value += s_[i_++];
            if (!eat('"')) fail("unterminated attribute value");
            node.attrs[key] = unescape(value);
        }
        // children / end tag
        while (true) {
            skip_space_and_text();
            if (i_ + 1 < s_.size() && s_[i_] == '<' && s_[i_ + 1] == '/') {
                i_ += 2;
                std::string closing = name();
                skip_space();
                if (!eat('>')) fail("expected '>'");
                if (closing != node.tag)
                    fail("mismatched closing tag </" + closing + "> for <" + node.tag + ">");
                return node;
            }
            if (i_ >= s_.size()) fail("unexpected end of input in <" + node.tag + ">");
            node.children.push_back(element());
        }
    }

    std::string name() {
        size_t start = i_;
        while (i_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_' ||
                s_[i_] == '-' || s_[i_] == ':'))
            ++i_;
        if (i_ == start) fail("expected a name");
        return s_.substr(start, i_ - start);
    }

    void skip_prolog() {
        skip_space();
        while (i_ + 1 < s_.size() && s_[i_] == '<' &&
               (s_[i_ + 1] == '?' || s_[i_ + 1] == '!')) {
            skip_directive();
            skip_space();
        }
    }

    void skip_space() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }

    void skip_space_and_text() {
        while (i_ < s_.size()) {
            if (s_[i_] == '<') {
                if (i_ + 3 < s_.size() && s_.compare(i_, 4, "<!--") == 0) {
                    auto end = s_.find("-->", i_);
                    if (end == std::string::npos) fail("unterminated comment");
                    i_ = end + 3;
                    continue;
                }
                return;
            }
            ++i_; // ignore text content
        }
    }

    void skip_directive() {
        auto end = s_.find('>', i_);
        if (end == std::string::npos) fail("unterminated directive");
        i_ = end + 1;
    }

    bool eat(char c) {
        if (i_ < s_.size() && s_[i_] == c) {
            ++i_;
            return true;
        }
        return false;
    }

    static std::string unescape(const std::string& v) {
        std::string out;
        for (size_t i = 0; i < v.size();) {
            if (v[i] != '&') {
                out += v[i++];
                continue;
            }
            auto semi = v.find(';', i);
            if (semi == std::string::npos) throw ParseError("bad XML entity", 1);
            std::string ent = v.substr(i + 1, semi - i - 1);
            if (ent == "amp") out += '&';
            else if (ent == "lt") out += '<';
            else if (ent == "gt") out += '>';
            else if (ent == "quot") out += '"';
            else if (ent == "apos") out += '\'';
            else throw ParseError("unknown XML entity &" + ent + ";", 1);
            i = semi + 1;
        }
        return out;
    }

    [[noreturn]] void fail(const std::string& msg) {
        int line = 1;
        for (size_t k = 0; k < i_ && k < s_.size(); ++k)
            if (s_[k] == '\n') ++line;
        throw ParseError("XML: " + msg, line);
    }

    const std::string& s_;
    size_t i_ = 0;
};

std::string xml_escape(const std::string& v) {
    std::string out;
    for (char c : v) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

} // namespace

// --- DNF ----------------------------------------------------------------

std::vector<Clause> to_dnf(const ConstraintExpr& expr) {
    std::vector<Clause> clauses;
    switch (expr.kind) {
    case ConstraintExpr::Leaf:
        clauses.push_back({expr.leaf});
        break;
    case ConstraintExpr::Or:
        for (const auto& child : expr.children) {
            auto sub = to_dnf(child);
            clauses.insert(clauses.end(), sub.begin(), sub.end());
        }
        if (expr.children.empty()) return {}; // empty disjunction: unsatisfiable
        break;
    case ConstraintExpr::And: {
        clauses.push_back({}); // empty conjunction: true
        for (const auto& child : expr.children) {
            auto sub = to_dnf(child);
            std::vector<Clause> next;
            for (const Clause& a : clauses)
                for (const Clause& b : sub) {
                    Clause merged = a;
                    for (const auto& c : b)
                        if (std::find(merged.begin(), merged.end(), c) == merged.end())
                            merged.push_back(c);
                    next.push_back(std::move(merged));
                }
            clauses = std::move(next);
        }
        break;
    }
    }
    // Subsumption pruning: drop any clause that is a superset of another.
    auto subset_of = [](const Clause& a, const Clause& b) {
        for (const auto& c : a)
            if (std::find(b.begin(), b.end(), c) == b.end()) return false;
        return true;
    };
    std::vector<Clause> pruned;
    for (size_t i = 0; i < clauses.size(); ++i) {
        bool keep = true;
        for (size_t j = 0; j < clauses.size() && keep; ++j) {
            if (i == j) continue;
            if (subset_of(clauses[j], clauses[i]) &&
                !(subset_of(clauses[i], clauses[j]) && i < j))
                keep = false; // j is strictly smaller, or an equal earlier clause
        }
        if (keep) pruned.push_back(clauses[i]);
    }
    return pruned;
}

// --- Parsing --------------------------------------------------------------

namespace {

AttributeConstraint leaf_from(const XmlNode& n) {
    AttributeConstraint c;
    auto path_it = n.attrs.find("path");
    if (path_it == n.attrs.end())
        throw ParseError("<" + n.tag + "> requires a path attribute", 1);
    c.path = split(path_it->second, '.');
    if (c.path.empty() || path_it->second.empty())
        throw ValidationError("empty constraint path");
    if (n.tag == "Eq") {
        c.pred = PredKind::Eq;
        c.values = {n.attrs.count("value") ? n.attrs.at("value") : std::string()};
    } else if (n.tag == "Contains") {
        c.pred = PredKind::Contains;
        c.values = {n.attrs.count("value") ? n.attrs.at("value") : std::string()};
    } else if (n.tag == "In") {
        c.pred = PredKind::InSet;
        c.values = split(n.attrs.count("values") ? n.attrs.at("values") : std::string(), '|');
    } else if (n.tag == "Exists") {
        c.pred = PredKind::Exists;
    } else {
        throw ParseError("unsupported predicate <" + n.tag + ">", 1);
    }
    return c;
}

ConstraintExpr expr_from(const XmlNode& n) {
    if (n.tag == "And" || n.tag == "Or") {
        std::vector<ConstraintExpr> children;
        for (const auto& child : n.children) children.push_back(expr_from(child));
        return n.tag == "And" ? ConstraintExpr::make_and(std::move(children))
                              : ConstraintExpr::make_or(std::move(children));
    }
    return ConstraintExpr::make_leaf(leaf_from(n));
}

void check_path(const AttributeConstraint& c, const std::string& start_type,
                const Schema& schema) {
    std::string cur = start_type;
    for (size_t i = 0; i < c.path.size(); ++i) {
        auto pos = schema.attr_index(cur, c.path[i]);
        if (!pos)
            throw ValidationError("attribute path segment '" + c.path[i] +
                                  "' does not resolve on " + cur);
        const AttrDef& def = schema.all_attrs(cur)[*pos];
        if (i + 1 < c.path.size()) {
            if (def.kind != AttrKind::Reference)
                throw ValidationError("path segment '" + c.path[i] +
                                      "' on " + cur + " is not a scalar reference");
            cur = def.target_type;
        }
    }
}

} // namespace

void check_view(const ModelView& view, const Schema& schema) {
    for (const auto& rule : view.rules) {
        schema.at(rule.entity_type); // throws NotFoundError for unknown types
        for (const auto& clause : rule.clauses)
            for (const auto& c : clause) check_path(c, rule.entity_type, schema);
    }
}

ModelView parse_mvd(const std::string& xml, const Schema& schema) {
    XmlNode root = XmlReader(xml).parse();
    if (root.tag != "ModelView")
        throw ParseError("root element must be <ModelView>, got <" + root.tag + ">", 1);

    ModelView view;
    if (root.attrs.count("name")) view.name = root.attrs.at("name");

    std::map<std::string, size_t> rule_index; // merge duplicate types
    for (const auto& child : root.children) {
        if (child.tag == "ExchangeRequirement") {
            if (child.attrs.count("name")) view.provenance.push_back(child.attrs.at("name"));
            continue;
        }
        if (child.tag != "Rule")
            throw ParseError("unexpected element <" + child.tag + "> under <ModelView>", 1);
        if (!child.attrs.count("type"))
            throw ParseError("<Rule> requires a type attribute", 1);
        std::string type = child.attrs.at("type");
        if (!schema.find(type)) throw NotFoundError("unknown entity type " + type);

        // Bare constraints form one conjunction; <And>/<Or> groups are
        // separate disjuncts.
        std::vector<ConstraintExpr> groups;
        std::vector<ConstraintExpr> bare;
        for (const auto& node : child.children) {
            if (node.tag == "And" || node.tag == "Or") groups.push_back(expr_from(node));
            else bare.push_back(ConstraintExpr::make_leaf(leaf_from(node)));
        }
        std::vector<Clause> clauses;
        if (groups.empty() && bare.empty()) {
            clauses.push_back({}); // type-only rule
        } else {
            std::vector<ConstraintExpr> disjuncts = std::move(groups);
            if (!bare.empty()) disjuncts.push_back(ConstraintExpr::make_and(std::move(bare)));
            clauses = to_dnf(ConstraintExpr::make_or(std::move(disjuncts)));
        }

        auto it = rule_index.find(type);
        if (it == rule_index.end()) {
            rule_index[type] = view.rules.size();
            view.rules.push_back(ConceptRule{type, std::move(clauses)});
        } else {
            auto& existing = view.rules[it->second].clauses;
            existing.insert(existing.end(), clauses.begin(), clauses.end());
        }
    }
    check_view(view, schema);
    return view;
}

std::string write_mvd(const ModelView& view) {
    std::ostringstream out;
    out << "<ModelView name=\"" << xml_escape(view.name) << "\">\n";
    for (const auto& name : view.provenance)
        out << "  <ExchangeRequirement name=\"" << xml_escape(name) << "\"/>\n";
    for (const auto& rule : view.rules) {
        bool type_only = rule.clauses.size() == 1 && rule.clauses[0].empty();
        if (type_only) {
            out << "  <Rule type=\"" << rule.entity_type << "\"/>\n";
            continue;
        }
        out << "  <Rule type=\"" << rule.entity_type << "\">\n";
        for (const auto& clause : rule.clauses) {
            out << "    <And>\n";
            for (const auto& c : clause) {
                std::string path;
                for (size_t i = 0; i < c.path.size(); ++i) {
                    if (i) path += '.';
                    path += c.path[i];
                }
                switch (c.pred) {
                case PredKind::Eq:
                    out << "      <Eq path=\"" << path << "\" value=\""
                        << xml_escape(c.values[0]) << "\"/>\n";
                    break;
                case PredKind::Contains:
                    out << "      <Contains path=\"" << path << "\" value=\""
                        << xml_escape(c.values[0]) << "\"/>\n";
                    break;
                case PredKind::InSet: {
                    std::string joined;
                    for (size_t i = 0; i < c.values.size(); ++i) {
                        if (i) joined += '|';
                        joined += c.values[i];
                    }
                    out << "      <In path=\"" << path << "\" values=\""
                        << xml_escape(joined) << "\"/>\n";
                    break;
                }
                case PredKind::Exists:
                    out << "      <Exists path=\"" << path << "\"/>\n";
                    break;
                }
            }
            out << "    </And>\n";
        }
        out << "  </Rule>\n";
    }
    out << "</ModelView>\n";
    return out.str();
}

// --- Evaluation -------------------------------------------------------------

namespace {

bool value_pred(const AttrValue& v, const AttributeConstraint& c) {
    auto eq_one = [&](const std::string& want) {
        if (std::holds_alternative<std::string>(v))
            return std::get<std::string>(v) == want; // case-sensitive
        if (std::holds_alternative<EnumValue>(v))
            return std::get<EnumValue>(v).tag == want;
        if (std::holds_alternative<std::int64_t>(v)) {
            try {
                return std::get<std::int64_t>(v) == std::stoll(want);
            } catch (...) {
                return false;
            }
        }
        if (std::holds_alternative<double>(v)) {
            char* end = nullptr;
            double w = std::strtod(want.c_str(), &end);
            if (end == want.c_str()) return false;
            double got = std::get<double>(v);
            double scale = std::max({std::fabs(got), std::fabs(w), 1.0});
            return std::fabs(got - w) <= 1e-9 * scale;
        }
        if (std::holds_alternative<bool>(v))
            return std::get<bool>(v) == (want == "true");
        return false;
    };
    switch (c.pred) {
    case PredKind::Exists:
        return !std::holds_alternative<std::monostate>(v);
    case PredKind::Eq:
        return eq_one(c.values[0]);
    case PredKind::Contains:
        return std::holds_alternative<std::string>(v) &&
               std::get<std::string>(v).find(c.values[0]) != std::string::npos;
    case PredKind::InSet:
        return std::any_of(c.values.begin(), c.values.end(), eq_one);
    }
    return false;
}

} // namespace

bool eval_constraint(const AttributeConstraint& c, const Entity& entity, const Model& model) {
    const Entity* cur = &entity;
    for (size_t i = 0; i + 1 < c.path.size(); ++i) {
        const AttrValue* v = attr(model, *cur, c.path[i]);
        if (!v || !std::holds_alternative<Ref>(*v)) return false; // absent navigation
        cur = &model.at(std::get<Ref>(*v).label);
    }
    const AttrValue* v = attr(model, *cur, c.path.back());
    if (!v) return false;
    return value_pred(*v, c);
}

bool matches(const ConceptRule& rule, const Entity& entity, const Model& model) {
    for (const Clause& clause : rule.clauses) {
        bool all = true;
        for (const AttributeConstraint& c : clause) {
            if (!eval_constraint(c, entity, model)) {
                all = false;
                break; // C_bi = intersection: short-circuit
            }
        }
        if (all) return true;
    }
    return false;
}

bool matches_view(const ModelView& view, const Entity& entity, const Model& model) {
    for (const auto& rule : view.rules)
        if (model.schema().is_subtype_of(entity.type, rule.entity_type) &&
            matches(rule, entity, model))
            return true;
    return false;
}

} // namespace bimshare
