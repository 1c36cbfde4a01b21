#pragma once

#include "mshade/exec/exec.hpp"
#include "mshade/metamorph/transforms.hpp"
#include "mshade/shader/front.hpp"
#include "mshade/support/result.hpp"

#include <string>
#include <vector>

namespace mshade::meta {

struct VariantRecipe {
    uint64_t seed = 0;
    std::vector<ChainStep> chain;
    std::vector<std::string> donor_names;
    uint64_t reference_hash = 0; // fnv of the reference's pretty-printed text
    uint64_t corpus_hash = 0;    // fnv over corpus names and texts

    std::string to_json() const;
    static Result<VariantRecipe, std::string> from_json(const std::string &text);
};

uint64_t content_hash(const ast::ShaderAst &a);
uint64_t corpus_content_hash(const std::vector<ast::ShaderAst> &corpus);

struct VariantShader {
    ast::ShaderAst ast;
    VariantRecipe recipe;
    std::string reference_name;
};

// Optional generation-time checks: the variant must execute within the step
// budget under the campaign's environment and reproduce the reference hash
// on the reference's output interface. Budget overruns reject the candidate
// (a fresh attempt is made); a hash mismatch is a transform-engine defect
// and fails hard.
struct GenValidation {
    exec::ExecEnv env;
    uint64_t reference_hash = 0;
    std::vector<std::string> reference_outputs;
};

enum class GenErrorKind : uint8_t {
    GenerationExhausted, // 16 rejected attempts
    PreservationViolated, // internal transform defect; never expected
};

struct GenError {
    GenErrorKind kind;
    std::string message;
};

inline constexpr int kMaxGenerationRetries = 16;

Result<VariantShader, GenError> generate_variant(const ast::ShaderAst &reference,
                                                 const std::vector<ast::ShaderAst> &corpus,
                                                 uint64_t seed, int depth,
                                                 const GenValidation *validation = nullptr);

struct ReplayError {
    bool recipe_mismatch = false; // content hashes differ
    std::string message;
};

Result<VariantShader, ReplayError> replay_recipe(const ast::ShaderAst &reference,
                                                 const std::vector<ast::ShaderAst> &corpus,
                                                 const VariantRecipe &recipe);

// Replays a subsequence of a recipe's chain (minimizer trials). Fails when a
// retained step no longer applies.
Result<VariantShader, ReplayError> replay_chain(const ast::ShaderAst &reference,
                                                const std::vector<ast::ShaderAst> &corpus,
                                                const VariantRecipe &base,
                                                const std::vector<ChainStep> &chain);

} // namespace mshade::meta
