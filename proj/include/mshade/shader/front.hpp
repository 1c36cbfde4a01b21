#pragma once

#include "mshade/shader/ast.hpp"
#include "mshade/support/result.hpp"

#include <string>
#include <vector>

namespace mshade::ast {

// Front end for the shading-language subset. Grammar: docs/grammar.md.

struct SourceShader {
    std::string text;
    Stage stage = Stage::Fragment;
    std::string name;
};

struct ParseError {
    SourcePos pos;
    std::string message;
};

enum class TypeErrorKind {
    UndeclaredIdentifier,
    TypeMismatch,
    ArityMismatch,
    MultipleMain,
    InvalidQualifier,
};

struct TypeError {
    SourcePos pos;
    std::string message;
    TypeErrorKind kind;
};

const char *type_error_kind_name(TypeErrorKind k);

Result<ShaderAst, ParseError> parse(const SourceShader &src);

// Annotates every expression with its resolved type; on success the returned
// AST has typechecked = true and may carry warnings (e.g. never-written outs).
Result<ShaderAst, TypeError> typecheck(ShaderAst ast);

std::string pretty_print(const ShaderAst &ast);

// Parses and typechecks a whole corpus manifest (one "name path stage" entry
// per line, '#' comments). Paths are relative to the manifest's directory.
struct CorpusError {
    std::string message;
};

Result<std::vector<ShaderAst>, CorpusError> load_corpus(const std::string &manifest_path);

} // namespace mshade::ast
