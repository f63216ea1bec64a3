#pragma once

#include <string>

namespace concentra {

/// SHA-1 of "blob <size>\0<content>", as git computes object ids; lowercase hex.
std::string git_blob_hash(const std::string& content);

}  // namespace concentra
