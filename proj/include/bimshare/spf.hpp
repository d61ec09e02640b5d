#pragma once

#include "bimshare/model.hpp"
#include "bimshare/schema.hpp"

#include <string>
#include <vector>

namespace bimshare {

struct SpfParseResult {
    Model model;
    std::vector<std::string> warnings; // e.g. FILE_SCHEMA mismatch
};

// Parses an ISO-10303-21 text against the given schema. Instance order is
// preserved as local_label order; `$` maps to an absent optional attribute;
// `*` is rejected.
SpfParseResult parse_spf(const std::string& text, const Schema& schema);
Model parse_spf_model(const std::string& text, const Schema& schema);

// Canonical serialization: labels ascend rooted entities first (by GlobalId),
// then resources in first-reference order; attributes in schema order;
// uppercase type names. parse(write(m)) is attribute-for-attribute equal to m.
std::string write_spf(const Model& model);

// Part-21 string escaping: '' for apostrophe, doubled backslash, and
// \X2\..\X0\ UTF-16 escapes for non-ASCII.
std::string spf_encode_string(const std::string& utf8);
std::string spf_decode_string(const std::string& escaped);

} // namespace bimshare
