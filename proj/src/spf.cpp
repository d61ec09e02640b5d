#include "bimshare/spf.hpp"

#include "bimshare/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <variant>

namespace bimshare {

std::string spf_encode_string(const std::string& utf8) {
    std::string out;
    size_t i = 0;
    bool in_x2 = false;
    auto close_x2 = [&] {
        if (in_x2) {
            out += "\\X0\\";
            in_x2 = false;
        }
    };
    while (i < utf8.size()) {
        unsigned char c = utf8[i];
        if (c < 0x80) {
            close_x2();
            if (c == '\'') out += "''";
            else if (c == '\\') out += "\\\\";
            else out += static_cast<char>(c);
            ++i;
            continue;
        }
        // Decode one UTF-8 sequence to a code point.
        uint32_t cp = 0;
        int len = 0;
        if ((c & 0xe0) == 0xc0) { cp = c & 0x1f; len = 2; }
        else if ((c & 0xf0) == 0xe0) { cp = c & 0x0f; len = 3; }
        else if ((c & 0xf8) == 0xf0) { cp = c & 0x07; len = 4; }
        else throw ValidationError("invalid UTF-8 in string value");
        if (i + len > utf8.size()) throw ValidationError("truncated UTF-8 sequence");
        for (int k = 1; k < len; ++k) cp = (cp << 6) | (utf8[i + k] & 0x3f);
        i += len;
        if (!in_x2) {
            out += "\\X2\\";
            in_x2 = true;
        }
        char buf[8];
        auto hex4 = [&](uint32_t v) {
            std::snprintf(buf, sizeof buf, "%04X", v);
            out += buf;
        };
        if (cp > 0xffff) { // surrogate pair as two UTF-16 units
            cp -= 0x10000;
            hex4(0xd800 + (cp >> 10));
            hex4(0xdc00 + (cp & 0x3ff));
        } else {
            hex4(cp);
        }
    }
    close_x2();
    return out;
}

namespace {

void append_utf8(std::string& out, uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xc0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xe0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
        out += static_cast<char>(0xf0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    }
}

} // namespace

std::string spf_decode_string(const std::string& s) {
    std::string out;
    size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '\\' && i + 3 < s.size() && s[i + 1] == 'X' && s[i + 2] == '2' &&
            s[i + 3] == '\\') {
            i += 4;
            uint32_t pending_high = 0;
            while (!(i + 3 < s.size() && s[i] == '\\' && s[i + 1] == 'X' && s[i + 2] == '0' &&
                     s[i + 3] == '\\')) {
                if (i + 4 > s.size()) throw ValidationError("unterminated \\X2\\ escape");
                uint32_t unit = 0;
                auto res = std::from_chars(s.data() + i, s.data() + i + 4, unit, 16);
                if (res.ec != std::errc{} || res.ptr != s.data() + i + 4)
                    throw ValidationError("bad hex in \\X2\\ escape");
                i += 4;
                if (unit >= 0xd800 && unit < 0xdc00) {
                    pending_high = unit;
                } else if (unit >= 0xdc00 && unit < 0xe000) {
                    if (!pending_high) throw ValidationError("stray low surrogate");
                    append_utf8(out, 0x10000 + ((pending_high - 0xd800) << 10) +
                                         (unit - 0xdc00));
                    pending_high = 0;
                } else {
                    append_utf8(out, unit);
                }
            }
            if (pending_high) throw ValidationError("stray high surrogate");
            i += 4;
        } else if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == '\\') {
            out += '\\';
            i += 2;
        } else if (s[i] == '\'' && i + 1 < s.size() && s[i + 1] == '\'') {
            out += '\'';
            i += 2;
        } else {
            out += s[i++];
        }
    }
    return out;
}

namespace {

// --- Lexer -------------------------------------------------------------

struct Token {
    enum Kind { Ident, Number, String, EnumTok, RefTok, LParen, RParen, Comma,
                Semi, Equal, Dollar, Star, Eof } kind;
    std::string text; // raw text (strings still escaped, numbers verbatim)
    Label label = 0;  // RefTok
    int line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& text) : s_(text) {}

    Token next() {
        skip_ws();
        Token t;
        t.line = line_;
        t.col = col_;
        if (i_ >= s_.size()) {
            t.kind = Token::Eof;
            return t;
        }
        char c = s_[i_];
        switch (c) {
        case '(': advance(); t.kind = Token::LParen; return t;
        case ')': advance(); t.kind = Token::RParen; return t;
        case ',': advance(); t.kind = Token::Comma; return t;
        case ';': advance(); t.kind = Token::Semi; return t;
        case '=': advance(); t.kind = Token::Equal; return t;
        case '$': advance(); t.kind = Token::Dollar; return t;
        case '*': advance(); t.kind = Token::Star; return t;
        case '#': {
            advance();
            size_t start = i_;
            while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) advance();
            if (i_ == start) fail("expected digits after '#'", t);
            t.kind = Token::RefTok;
            t.label = std::stoll(s_.substr(start, i_ - start));
            return t;
        }
        case '\'': {
            advance();
            std::string raw;
            while (true) {
                if (i_ >= s_.size()) fail("unterminated string", t);
                if (s_[i_] == '\'') {
                    if (i_ + 1 < s_.size() && s_[i_ + 1] == '\'') {
                        raw += "''";
                        advance();
                        advance();
                        continue;
                    }
                    advance();
                    break;
                }
                raw += s_[i_];
                advance();
            }
            t.kind = Token::String;
            t.text = std::move(raw);
            return t;
        }
        case '.': { // enum / boolean literal .X.
            advance();
            size_t start = i_;
            while (i_ < s_.size() && s_[i_] != '.') advance();
            if (i_ >= s_.size()) fail("unterminated enum literal", t);
            t.kind = Token::EnumTok;
            t.text = s_.substr(start, i_ - start);
            advance();
            return t;
        }
        default:
            if (c == '-' || c == '+' || std::isdigit(static_cast<unsigned char>(c))) {
                size_t start = i_;
                advance();
                while (i_ < s_.size() &&
                       (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.' ||
                        s_[i_] == 'e' || s_[i_] == 'E' ||
                        ((s_[i_] == '-' || s_[i_] == '+') &&
                         (s_[i_ - 1] == 'e' || s_[i_ - 1] == 'E'))))
                    advance();
                t.kind = Token::Number;
                t.text = s_.substr(start, i_ - start);
                return t;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                size_t start = i_;
                while (i_ < s_.size() &&
                       (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_' ||
                        s_[i_] == '-'))
                    advance();
                t.kind = Token::Ident;
                t.text = s_.substr(start, i_ - start);
                return t;
            }
            fail(std::string("unexpected character '") + c + "'", t);
        }
        return t; // unreachable
    }

private:
    void skip_ws() {
        while (i_ < s_.size()) {
            char c = s_[i_];
            if (c == '/' && i_ + 1 < s_.size() && s_[i_ + 1] == '*') {
                advance();
                advance();
                while (i_ + 1 < s_.size() && !(s_[i_] == '*' && s_[i_ + 1] == '/')) advance();
                if (i_ + 1 < s_.size()) { advance(); advance(); }
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }
    void advance() {
        if (s_[i_] == '\n') { ++line_; col_ = 1; }
        else ++col_;
        ++i_;
    }
    [[noreturn]] void fail(const std::string& msg, const Token& t) {
        throw ParseError(msg, t.line, t.col);
    }

    const std::string& s_;
    size_t i_ = 0;
    int line_ = 1, col_ = 1;
};

// --- Raw record values ---------------------------------------------------

struct RawValue;
using RawList = std::vector<RawValue>;
struct RawValue {
    std::variant<std::monostate, std::string /*string*/, std::int64_t, double,
                 std::string /*dup*/, Label, RawList>
        v;
    enum Tag { Absent, Str, Int, Real, Enum, RefL, List } tag = Absent;
    std::string text; // Str / Enum payload
    std::int64_t i = 0;
    double d = 0;
    Label label = 0;
    RawList list;
    int line = 0, col = 0;
};

struct RawRecord {
    Label label;
    std::string type; // uppercase, as written
    std::vector<RawValue> args;
    int line = 0;
};

RawValue parse_value_from(Lexer& lex, Token t) {
    RawValue v;
    v.line = t.line;
    v.col = t.col;
    switch (t.kind) {
    case Token::Dollar:
        v.tag = RawValue::Absent;
        return v;
    case Token::Star:
        throw ParseError("'*' (derived attribute) is not supported", t.line, t.col);
    case Token::String:
        v.tag = RawValue::Str;
        v.text = spf_decode_string(t.text);
        return v;
    case Token::EnumTok:
        v.tag = RawValue::Enum;
        v.text = t.text;
        return v;
    case Token::RefTok:
        v.tag = RawValue::RefL;
        v.label = t.label;
        return v;
    case Token::Number: {
        bool is_real = t.text.find_first_of(".eE") != std::string::npos;
        if (is_real) {
            v.tag = RawValue::Real;
            v.d = std::strtod(t.text.c_str(), nullptr);
        } else {
            v.tag = RawValue::Int;
            v.i = std::stoll(t.text);
        }
        return v;
    }
    case Token::LParen: {
        v.tag = RawValue::List;
        Token inner = lex.next();
        if (inner.kind != Token::RParen) {
            while (true) {
                v.list.push_back(parse_value_from(lex, inner));
                inner = lex.next();
                if (inner.kind == Token::RParen) break;
                if (inner.kind != Token::Comma)
                    throw ParseError("expected ',' or ')' in list", inner.line, inner.col);
                inner = lex.next();
            }
        }
        return v;
    }
    default:
        throw ParseError("unexpected token in attribute value", t.line, t.col);
    }
}

std::string upper(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    return out;
}

AttrValue convert(const RawValue& raw, const AttrDef& def, const std::string& type_name,
                  Label record_label) {
    auto mismatch = [&]() -> ParseError {
        return ParseError("value kind mismatch for " + type_name + "." + def.name +
                              " in #" + std::to_string(record_label),
                          raw.line, raw.col);
    };
    if (raw.tag == RawValue::Absent) {
        if (!def.optional) throw mismatch();
        return std::monostate{};
    }
    switch (def.kind) {
    case AttrKind::String:
        if (raw.tag != RawValue::Str) throw mismatch();
        return raw.text;
    case AttrKind::Integer:
        if (raw.tag != RawValue::Int) throw mismatch();
        return raw.i;
    case AttrKind::Real:
        if (raw.tag == RawValue::Real) return raw.d;
        if (raw.tag == RawValue::Int) return static_cast<double>(raw.i);
        throw mismatch();
    case AttrKind::Boolean:
        if (raw.tag != RawValue::Enum || (raw.text != "T" && raw.text != "F"))
            throw mismatch();
        return raw.text == "T";
    case AttrKind::Enum:
        if (raw.tag != RawValue::Enum) throw mismatch();
        return EnumValue{raw.text};
    case AttrKind::Reference:
        if (raw.tag != RawValue::RefL) throw mismatch();
        return Ref{raw.label};
    case AttrKind::ListOfReference: {
        if (raw.tag != RawValue::List) throw mismatch();
        std::vector<Ref> refs;
        for (const RawValue& item : raw.list) {
            if (item.tag != RawValue::RefL) throw mismatch();
            refs.push_back(Ref{item.label});
        }
        return refs;
    }
    }
    throw mismatch();
}

} // namespace

SpfParseResult parse_spf(const std::string& text, const Schema& schema) {
    Lexer lex(text);
    std::vector<std::string> warnings;

    auto expect = [&](Token::Kind kind, const char* what) {
        Token t = lex.next();
        if (t.kind != kind) throw ParseError(std::string("expected ") + what, t.line, t.col);
        return t;
    };
    auto expect_ident = [&](const char* word) {
        Token t = lex.next();
        if (t.kind != Token::Ident || upper(t.text) != word)
            throw ParseError(std::string("expected ") + word, t.line, t.col);
        return t;
    };

    expect_ident("ISO-10303-21");
    expect(Token::Semi, "';'");
    expect_ident("HEADER");
    expect(Token::Semi, "';'");

    // Header records until ENDSEC.
    std::string file_schema;
    while (true) {
        Token t = lex.next();
        if (t.kind == Token::Ident && upper(t.text) == "ENDSEC") {
            expect(Token::Semi, "';'");
            break;
        }
        if (t.kind != Token::Ident)
            throw ParseError("expected header record name", t.line, t.col);
        std::string record = upper(t.text);
        Token open = lex.next();
        if (open.kind != Token::LParen) throw ParseError("expected '('", open.line, open.col);
        RawValue args = parse_value_from(lex, open);
        expect(Token::Semi, "';'");
        if (record == "FILE_SCHEMA" && !args.list.empty()) {
            const RawValue& inner = args.list[0];
            if (inner.tag == RawValue::List && !inner.list.empty() &&
                inner.list[0].tag == RawValue::Str)
                file_schema = inner.list[0].text;
            else if (inner.tag == RawValue::Str)
                file_schema = inner.text;
        }
    }
    if (!file_schema.empty() && file_schema != schema.name())
        warnings.push_back("FILE_SCHEMA names '" + file_schema + "', loaded schema is '" +
                           schema.name() + "'");

    expect_ident("DATA");
    expect(Token::Semi, "';'");

    // Uppercase -> declared type name.
    std::map<std::string, std::string> by_upper;
    for (const auto& t : schema.types()) by_upper[upper(t.name)] = t.name;

    std::vector<RawRecord> records;
    std::map<Label, size_t> by_label;
    while (true) {
        Token t = lex.next();
        if (t.kind == Token::Ident && upper(t.text) == "ENDSEC") {
            expect(Token::Semi, "';'");
            break;
        }
        if (t.kind != Token::RefTok)
            throw ParseError("expected '#<label>' or ENDSEC", t.line, t.col);
        RawRecord rec;
        rec.label = t.label;
        rec.line = t.line;
        if (rec.label <= 0) throw ParseError("labels must be positive", t.line, t.col);
        expect(Token::Equal, "'='");
        Token name = expect(Token::Ident, "type name");
        rec.type = upper(name.text);
        Token open = lex.next();
        if (open.kind != Token::LParen) throw ParseError("expected '('", open.line, open.col);
        RawValue args = parse_value_from(lex, open);
        rec.args = std::move(args.list);
        expect(Token::Semi, "';'");
        if (by_label.count(rec.label))
            throw ParseError("duplicate label #" + std::to_string(rec.label), rec.line);
        by_label[rec.label] = records.size();
        records.push_back(std::move(rec));
    }
    expect_ident("END-ISO-10303-21");
    expect(Token::Semi, "';'");

    Model model(schema);
    // Insert in ascending label order so instance order is preserved.
    std::vector<const RawRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const RawRecord* a, const RawRecord* b) { return a->label < b->label; });
    for (const RawRecord* rec : sorted) {
        auto it = by_upper.find(rec->type);
        if (it == by_upper.end())
            throw ParseError("unknown type " + rec->type, rec->line);
        const std::string& type_name = it->second;
        const auto& defs = schema.all_attrs(type_name);
        if (rec->args.size() != defs.size())
            throw ParseError("arity mismatch for " + type_name + ": got " +
                                 std::to_string(rec->args.size()) + ", want " +
                                 std::to_string(defs.size()),
                             rec->line);
        Entity e;
        e.label = rec->label;
        e.type = type_name;
        for (size_t i = 0; i < defs.size(); ++i)
            e.attrs.push_back(convert(rec->args[i], defs[i], type_name, rec->label));
        model.insert(std::move(e));
    }
    model.validate(); // dangling references, target subtyping, GlobalId shape
    return SpfParseResult{std::move(model), std::move(warnings)};
}

Model parse_spf_model(const std::string& text, const Schema& schema) {
    return parse_spf(text, schema).model;
}

namespace {

std::string format_real(double d) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, d);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eE") == std::string::npos) s += '.';
    return s;
}

void write_value(std::string& out, const AttrValue& v,
                 const std::map<Label, Label>& relabel) {
    if (std::holds_alternative<std::monostate>(v)) {
        out += '$';
    } else if (std::holds_alternative<std::string>(v)) {
        out += '\'';
        out += spf_encode_string(std::get<std::string>(v));
        out += '\'';
    } else if (std::holds_alternative<std::int64_t>(v)) {
        out += std::to_string(std::get<std::int64_t>(v));
    } else if (std::holds_alternative<double>(v)) {
        out += format_real(std::get<double>(v));
    } else if (std::holds_alternative<bool>(v)) {
        out += std::get<bool>(v) ? ".T." : ".F.";
    } else if (std::holds_alternative<EnumValue>(v)) {
        out += '.';
        out += std::get<EnumValue>(v).tag;
        out += '.';
    } else if (std::holds_alternative<Ref>(v)) {
        out += '#';
        out += std::to_string(relabel.at(std::get<Ref>(v).label));
    } else {
        out += '(';
        const auto& list = std::get<std::vector<Ref>>(v);
        for (size_t i = 0; i < list.size(); ++i) {
            if (i) out += ',';
            out += '#';
            out += std::to_string(relabel.at(list[i].label));
        }
        out += ')';
    }
}

} // namespace

std::string write_spf(const Model& model) {
    const Schema& schema = model.schema();

    // Canonical label assignment: rooted entities sorted by GlobalId, then
    // resources in first-reference order walking the rooted entities.
    std::vector<std::pair<std::string, Label>> rooted(model.rooted_index().begin(),
                                                      model.rooted_index().end());
    std::sort(rooted.begin(), rooted.end());

    std::map<Label, Label> relabel;
    Label next = 1;
    for (const auto& [gid, label] : rooted) relabel[label] = next++;

    std::vector<Label> resource_order;
    auto visit_resources = [&](Label start, auto&& self) -> void {
        const Entity& e = model.at(start);
        for (const AttrValue& v : e.attrs) {
            auto touch = [&](Label target) {
                if (schema.is_rooted(model.at(target).type)) return;
                if (relabel.emplace(target, 0).second) {
                    resource_order.push_back(target);
                    self(target, self);
                }
            };
            if (std::holds_alternative<Ref>(v)) touch(std::get<Ref>(v).label);
            else if (std::holds_alternative<std::vector<Ref>>(v))
                for (const Ref& r : std::get<std::vector<Ref>>(v)) touch(r.label);
        }
    };
    for (const auto& [gid, label] : rooted) visit_resources(label, visit_resources);
    // Orphan resources (valid but unreferenced) go last, by original label.
    for (const auto& [label, e] : model.entities())
        if (!relabel.count(label)) resource_order.push_back(label);
    for (Label r : resource_order) relabel[r] = next++;

    std::string out;
    out += "ISO-10303-21;\n";
    out += "HEADER;\n";
    out += "FILE_DESCRIPTION((''),'2;1');\n";
    out += "FILE_NAME('','',(''),(''),'','','');\n";
    out += "FILE_SCHEMA(('" + schema.name() + "'));\n";
    out += "ENDSEC;\n";
    out += "DATA;\n";

    std::vector<std::pair<Label, Label>> ordered; // new label -> old label
    for (const auto& [old_label, new_label] : relabel) ordered.push_back({new_label, old_label});
    std::sort(ordered.begin(), ordered.end());
    for (const auto& [new_label, old_label] : ordered) {
        const Entity& e = model.at(old_label);
        out += '#';
        out += std::to_string(new_label);
        out += '=';
        out += upper(e.type);
        out += '(';
        for (size_t i = 0; i < e.attrs.size(); ++i) {
            if (i) out += ',';
            write_value(out, e.attrs[i], relabel);
        }
        out += ");\n";
    }
    out += "ENDSEC;\n";
    out += "END-ISO-10303-21;\n";
    return out;
}

} // namespace bimshare
