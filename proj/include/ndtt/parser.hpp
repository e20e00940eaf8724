#pragma once

#include <string>

#include "ndtt/ast.hpp"

namespace ndtt {

// Parses NDTT program text. Comments run from `%` to end of line.
// Throws Error(Syntax) with a 1-based line:column on malformed input and
// Error(UnsupportedExtension) on the `*` anonymous-entity syntax.
Ast parse_program(const std::string& text);

Ast parse_file(const std::string& path);

}  // namespace ndtt
