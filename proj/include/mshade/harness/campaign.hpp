#pragma once

#include "mshade/exec/exec.hpp"
#include "mshade/ir/ddg.hpp"
#include "mshade/metamorph/generate.hpp"
#include "mshade/opt/passes.hpp"
#include "mshade/shader/front.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mshade::harness {

struct CampaignConfig {
    int variants_per_reference = 200;
    int depth_min = 1;
    int depth_max = 8;
    uint64_t seed = 1;
    opt::PipelineConfig pipeline = opt::PipelineConfig::default_config();
    std::string adapter_command; // empty: in-repo pipeline
    double adapter_timeout_s = 10.0;
    int parallelism = 1;
    uint64_t step_budget = 1000000;
    bool minimize_reports = true;
    bool localize_reports = true;
};

enum class AnomalyKind : uint8_t { Crash, Stall, SemanticDivergence };

const char *anomaly_kind_name(AnomalyKind k);

struct Localization {
    std::optional<std::string> faulting_pass;
    std::optional<ir::DivergenceSummary> ddg_summary;
    bool unavailable = false; // adapter runs carry no pass trace
};

struct AnomalyReport {
    AnomalyKind kind;
    std::string reference_name;
    uint64_t variant_seed = 0;
    meta::VariantRecipe recipe;
    std::optional<meta::VariantRecipe> minimized_recipe;
    Localization localization;
    std::optional<uint64_t> hash_reference;
    std::optional<uint64_t> hash_variant;
    std::vector<std::string> injection_set;
    std::string detail;

    std::string to_json_line() const;
};

struct CampaignStats {
    uint64_t references = 0;
    uint64_t variants = 0;
    uint64_t shaders_processed = 0; // reference + variant compilations
    uint64_t generation_rejections = 0;
    uint64_t corpus_errors = 0;
    uint64_t adapter_protocol_errors = 0;
    uint64_t crashes = 0;
    uint64_t stalls = 0;
    uint64_t divergences = 0;
    double wall_seconds = 0;
    double throughput = 0; // shaders per second

    std::string to_json() const;
};

struct CampaignResult {
    std::vector<AnomalyReport> reports; // ordered by (reference, variant seed)
    CampaignStats stats;
};

struct CampaignError {
    std::string message;
};

Result<CampaignResult, CampaignError> run_campaign(const CampaignConfig &cfg,
                                                   const std::vector<ast::ShaderAst> &corpus);

// Decision table (docs/classification.md): compiler fault -> Crash, budget
// or timeout -> Stall, any observable execution difference -> divergence.
struct VariantCompile {
    enum Kind { Ok, Crash, Stall } kind = Ok;
    std::string detail;
    std::string faulting_pass;
};

std::optional<AnomalyKind> classify_result(const exec::ExecResult &ref_exec,
                                           const VariantCompile &compile,
                                           const exec::ExecResult *var_exec,
                                           uint64_t ref_hash, uint64_t var_hash);

struct MinimizeError {
    bool non_reproducible = false;
    std::string message;
};

// Greedy chain reduction to a fixpoint; the result is a subsequence of the
// input chain and still reproduces `kind`.
Result<meta::VariantRecipe, MinimizeError>
minimize(const ast::ShaderAst &reference, const std::vector<ast::ShaderAst> &corpus,
         const meta::VariantRecipe &recipe, AnomalyKind kind, const CampaignConfig &cfg);

} // namespace mshade::harness
