#pragma once

#include "mshade/shader/ast.hpp"
#include "mshade/support/rng.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mshade::meta {

enum class TransformKind : uint8_t {
    MixWrap,
    IfToSwitch,
    ForToWhile,
    WhileToFor,
    SingleIterationLoopWrap,
    LoopUnroll,
    LoopSplit,
    CodeDonation,
};

const char *transform_name(TransformKind k);
std::optional<TransformKind> transform_from_name(const std::string &n);

// Everything a rewrite needs beyond (kind, path); replaying a recorded step
// reproduces the transform byte-for-byte.
struct TransformParams {
    uint64_t salt = 0; // drives literal/name derivations inside the rewrite

    // MixWrap
    int mix_mode = 0; // 0: literal unused operand, 1: clamp(var, 0, 1)
    std::string mix_var;

    // SingleIterationLoopWrap
    uint32_t wrap_len = 1;

    // LoopUnroll
    bool unroll_partial = false;

    // LoopSplit
    int32_t split_index = 1; // trip count of the first loop

    // CodeDonation
    std::string donor;
    ast::NodePath donor_block; // path of the block/case owning the region
    uint32_t start = 0;
    uint32_t len = 1;
};

struct ChainStep {
    TransformKind kind;
    ast::NodePath path;
    TransformParams params;
};

struct Candidate {
    TransformKind kind;
    ast::NodePath path;
};

// All (kind, site) pairs currently applicable. The AST must be typechecked.
std::vector<Candidate> enumerate_candidates(ast::ShaderAst &a,
                                            const std::vector<ast::ShaderAst> &corpus);

// Samples kind-specific parameters for a chosen site.
TransformParams sample_params(ast::ShaderAst &a, TransformKind kind, const ast::NodePath &path,
                              const std::vector<ast::ShaderAst> &corpus, Rng &rng);

// Applies one step in place. Returns false (with *err set) when the site or
// parameters no longer denote an applicable rewrite.
bool apply_transform(ast::ShaderAst &a, const ChainStep &step,
                     const std::vector<ast::ShaderAst> &corpus, std::string *err);

} // namespace mshade::meta
