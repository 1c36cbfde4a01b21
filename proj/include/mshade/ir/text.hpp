#pragma once

#include "mshade/ir/ir.hpp"
#include "mshade/support/result.hpp"

#include <string>

namespace mshade::ir {

// Textual IR: one instruction per line, `%id = opcode type operands`.
// This is the adapter wire format and the pass-trace snapshot format;
// printing canonicalizes value/block numbering. Grammar: docs/ir.md.

std::string print_module(const Module &m);

struct IrParseError {
    int line = 0;
    std::string message;
};

Result<Module, IrParseError> parse_module(const std::string &text);

} // namespace mshade::ir
