#include "mshade/metamorph/generate.hpp"
#include "mshade/ir/lower.hpp"
#include "mshade/opt/passes.hpp"
#include "mshade/support/fnv.hpp"

#include <json.hpp>

namespace mshade::meta {

using nlohmann::json;

uint64_t content_hash(const ast::ShaderAst &a) { return fnv1a64(ast::pretty_print(a)); }

uint64_t corpus_content_hash(const std::vector<ast::ShaderAst> &corpus) {
    uint64_t h = kFnvOffset;
    for (auto &s : corpus) {
        h = fnv1a64(s.name, h);
        h = fnv1a64("\n", h);
        h = fnv1a64(ast::pretty_print(s), h);
        h = fnv1a64(std::string_view("\0", 1), h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Recipe serialization

namespace {

json step_to_json(const ChainStep &s) {
    json j;
    j["kind"] = transform_name(s.kind);
    j["path"] = s.path;
    json p;
    p["salt"] = s.params.salt;
    switch (s.kind) {
    case TransformKind::MixWrap:
        p["mode"] = s.params.mix_mode;
        if (s.params.mix_mode == 1)
            p["var"] = s.params.mix_var;
        break;
    case TransformKind::SingleIterationLoopWrap:
        p["len"] = s.params.wrap_len;
        break;
    case TransformKind::LoopUnroll:
        p["partial"] = s.params.unroll_partial;
        break;
    case TransformKind::LoopSplit:
        p["at"] = s.params.split_index;
        break;
    case TransformKind::CodeDonation:
        p["donor"] = s.params.donor;
        p["block"] = s.params.donor_block;
        p["start"] = s.params.start;
        p["len"] = s.params.len;
        break;
    default:
        break;
    }
    j["params"] = p;
    return j;
}

Result<ChainStep, std::string> step_from_json(const json &j) {
    ChainStep s;
    auto k = transform_from_name(j.value("kind", ""));
    if (!k)
        return std::string("unknown transform kind");
    s.kind = *k;
    s.path = j.value("path", std::vector<uint32_t>{});
    const json &p = j.at("params");
    s.params.salt = p.value("salt", 0ull);
    s.params.mix_mode = p.value("mode", 0);
    s.params.mix_var = p.value("var", "");
    s.params.wrap_len = p.value("len", 1u);
    s.params.unroll_partial = p.value("partial", false);
    s.params.split_index = p.value("at", 1);
    s.params.donor = p.value("donor", "");
    s.params.donor_block = p.value("block", std::vector<uint32_t>{});
    s.params.start = p.value("start", 0u);
    if (s.kind == TransformKind::CodeDonation)
        s.params.len = p.value("len", 1u);
    return s;
}

} // namespace

std::string VariantRecipe::to_json() const {
    json j;
    j["seed"] = seed;
    j["reference_hash"] = reference_hash;
    j["corpus_hash"] = corpus_hash;
    j["donors"] = donor_names;
    json chain_j = json::array();
    for (auto &s : chain)
        chain_j.push_back(step_to_json(s));
    j["chain"] = chain_j;
    return j.dump();
}

Result<VariantRecipe, std::string> VariantRecipe::from_json(const std::string &text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        return std::string("recipe is not valid JSON");
    VariantRecipe r;
    r.seed = j.value("seed", 0ull);
    r.reference_hash = j.value("reference_hash", 0ull);
    r.corpus_hash = j.value("corpus_hash", 0ull);
    r.donor_names = j.value("donors", std::vector<std::string>{});
    if (!j.contains("chain") || !j["chain"].is_array())
        return std::string("recipe lacks a chain array");
    for (auto &sj : j["chain"]) {
        auto s = step_from_json(sj);
        if (!s.ok())
            return s.error();
        r.chain.push_back(s.take());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

// Step-budget / hash validation on the unoptimized (promotion-only) module.
enum class Validation { Accept, RejectBudget, HardMismatch };

Validation validate_variant(const ast::ShaderAst &variant, const GenValidation &v,
                            std::string *detail) {
    ir::Module m = ir::lower(variant);
    auto [pm, changed] = opt::half_promote(m);
    exec::ExecResult r = exec::execute(pm, v.env);
    if (r.status == exec::ExecStatus::StepBudgetExceeded)
        return Validation::RejectBudget;
    if (r.status != exec::ExecStatus::Ok) {
        if (detail)
            *detail = std::string("variant trapped: ") + exec::trap_reason_text(r.trap);
        return Validation::RejectBudget; // data-dependent trap from donated code
    }
    uint64_t h = exec::canonical_hash_restricted(r.outputs, v.reference_outputs);
    if (h != v.reference_hash) {
        if (detail)
            *detail = "variant hash diverges from reference under the interpreter";
        return Validation::HardMismatch;
    }
    return Validation::Accept;
}

} // namespace

Result<VariantShader, GenError> generate_variant(const ast::ShaderAst &reference,
                                                 const std::vector<ast::ShaderAst> &corpus,
                                                 uint64_t seed, int depth,
                                                 const GenValidation *validation) {
    if (depth < 1 || depth > 32)
        return GenError{GenErrorKind::GenerationExhausted,
                        "depth must be between 1 and 32"};
    std::string last_reject;
    for (int attempt = 0; attempt <= kMaxGenerationRetries; attempt++) {
        Rng rng(derive64(seed, static_cast<uint64_t>(attempt), 0xA17Eull));
        ast::ShaderAst variant = ast::clone(reference);
        VariantRecipe recipe;
        recipe.seed = seed;
        recipe.reference_hash = content_hash(reference);
        recipe.corpus_hash = corpus_content_hash(corpus);

        bool built = true;
        for (int d = 0; d < depth; d++) {
            auto candidates = enumerate_candidates(variant, corpus);
            if (candidates.empty()) {
                built = false;
                last_reject = "no applicable transform sites";
                break;
            }
            const Candidate &c = candidates[rng.below(candidates.size())];
            ChainStep step;
            step.kind = c.kind;
            step.path = c.path;
            step.params = sample_params(variant, c.kind, c.path, corpus, rng);
            std::string err;
            if (!apply_transform(variant, step, corpus, &err))
                return GenError{GenErrorKind::PreservationViolated,
                                "enumerated transform failed to apply: " + err};
            auto typed = ast::typecheck(std::move(variant));
            if (!typed.ok())
                return GenError{GenErrorKind::PreservationViolated,
                                "variant no longer typechecks after " +
                                    std::string(transform_name(c.kind)) + ": " +
                                    typed.error().message};
            variant = typed.take();
            recipe.chain.push_back(step);
            if (c.kind == TransformKind::CodeDonation) {
                const std::string &d_name = step.params.donor;
                bool seen = false;
                for (auto &n : recipe.donor_names)
                    if (n == d_name)
                        seen = true;
                if (!seen)
                    recipe.donor_names.push_back(d_name);
            }
        }
        if (!built)
            continue;

        if (validation) {
            std::string detail;
            Validation v = validate_variant(variant, *validation, &detail);
            if (v == Validation::HardMismatch)
                return GenError{GenErrorKind::PreservationViolated, detail};
            if (v == Validation::RejectBudget) {
                last_reject = detail.empty() ? "step budget exceeded" : detail;
                continue;
            }
        }

        VariantShader out;
        out.ast = std::move(variant);
        out.recipe = std::move(recipe);
        out.reference_name = reference.name;
        return out;
    }
    return GenError{GenErrorKind::GenerationExhausted,
                    "no acceptable variant after " + std::to_string(kMaxGenerationRetries + 1) +
                        " attempts (" + last_reject + ")"};
}

Result<VariantShader, ReplayError> replay_chain(const ast::ShaderAst &reference,
                                                const std::vector<ast::ShaderAst> &corpus,
                                                const VariantRecipe &base,
                                                const std::vector<ChainStep> &chain) {
    ast::ShaderAst variant = ast::clone(reference);
    for (auto &step : chain) {
        std::string err;
        if (!apply_transform(variant, step, corpus, &err))
            return ReplayError{false, err};
        auto typed = ast::typecheck(std::move(variant));
        if (!typed.ok())
            return ReplayError{false, "replayed variant does not typecheck: " +
                                          typed.error().message};
        variant = typed.take();
    }
    VariantShader out;
    out.ast = std::move(variant);
    out.recipe = base;
    out.recipe.chain = chain;
    out.reference_name = reference.name;
    return out;
}

Result<VariantShader, ReplayError> replay_recipe(const ast::ShaderAst &reference,
                                                 const std::vector<ast::ShaderAst> &corpus,
                                                 const VariantRecipe &recipe) {
    if (recipe.reference_hash != content_hash(reference))
        return ReplayError{true, "reference content hash does not match the recipe"};
    if (recipe.corpus_hash != corpus_content_hash(corpus))
        return ReplayError{true, "corpus content hash does not match the recipe"};
    return replay_chain(reference, corpus, recipe, recipe.chain);
}

} // namespace mshade::meta
