#pragma once

#include <string>

namespace bimshare {

// Visibility of a stored entity from its owning party's point of view.
// External marks a read-only replica of another party's Shared entity.
enum class Access { Private, Shared, External };

const char* to_string(Access a);
Access access_from_string(const std::string& s); // throws ValidationError

} // namespace bimshare
