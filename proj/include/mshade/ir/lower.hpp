#pragma once

#include "mshade/ir/ir.hpp"
#include "mshade/shader/ast.hpp"

namespace mshade::ir {

// Lowers a typechecked shader to SSA IR. User-function calls are inlined
// (the IR has intrinsic calls only); `in`/`out`/`uniform` globals become
// Input/Output/Uniform slots; mediump float expressions lower to f16 types
// unless `ignore_precision` is set (the pure-f32 relowering used as the
// half-promotion oracle).
Module lower(const ast::ShaderAst &shader, bool ignore_precision = false);

} // namespace mshade::ir
