#pragma once

// Tree-walking shader evaluator used as the independent oracle for the
// lowering + IR-execution path. It implements the documented language
// semantics directly on the AST (mediump evaluates as f32, matching the
// promotion strategy) and shares nothing with the lowering code.

#include "mshade/exec/exec.hpp"
#include "mshade/shader/ast.hpp"

namespace mshade::testsupport {

struct InterpResult {
    bool ok = false;
    bool trapped = false;
    std::string trap_reason;
    std::vector<exec::SlotValues> outputs; // sorted by name
    uint64_t output_hash = 0;
};

InterpResult interpret_shader(const ast::ShaderAst &shader, const exec::ExecEnv &env);

} // namespace mshade::testsupport
