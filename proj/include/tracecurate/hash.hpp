#pragma once

#include <string>
#include <string_view>
#include <initializer_list>

namespace tracecurate {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

// Digest of several fields joined with an unambiguous separator.
std::string sha256_fields(std::initializer_list<std::string_view> fields);

}  // namespace tracecurate
