#pragma once

#include <string>

#include "muf/ast.hpp"

namespace muf {

// Parse a program. The result is already normalized: every operator,
// sample, observe, unfold and conditional argument is a value form, with
// intermediate results hoisted into lets over reserved %tN names.
Program parse_program(const std::string& source);

Program parse_file(const std::string& path);

// Set of builtin operator names the parser recognizes in call position.
bool is_builtin_op(const std::string& name);

}  // namespace muf
