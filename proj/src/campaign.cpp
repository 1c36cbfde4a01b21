#include "mshade/harness/campaign.hpp"
#include "mshade/harness/adapter.hpp"
#include "mshade/ir/lower.hpp"
#include "mshade/ir/text.hpp"
#include "mshade/support/fnv.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

namespace mshade::harness {

using nlohmann::json;

const char *anomaly_kind_name(AnomalyKind k) {
    switch (k) {
    case AnomalyKind::Crash:
        return "crash";
    case AnomalyKind::Stall:
        return "stall";
    case AnomalyKind::SemanticDivergence:
        return "semantic_divergence";
    }
    return "?";
}

namespace {

json summary_to_json(const ir::DivergenceSummary &s) {
    json j;
    j["slot"] = s.slot;
    j["matched"] = s.matched;
    json v = json::array(), r = json::array(), p = json::array(), u = json::array();
    for (auto &[id, op] : s.only_in_variant)
        v.push_back({{"id", id}, {"op", op}});
    for (auto &[id, op] : s.only_in_reference)
        r.push_back({{"id", id}, {"op", op}});
    for (auto &[a, b] : s.opcode_pairs)
        p.push_back({{"reference", a}, {"variant", b}});
    for (auto id : s.undef_sites)
        u.push_back(id);
    j["only_in_variant"] = v;
    j["only_in_reference"] = r;
    j["opcode_pairs"] = p;
    j["undef_sites"] = u;
    return j;
}

char hexdigit(unsigned v) { return v < 10 ? char('0' + v) : char('a' + v - 10); }

std::string hash_hex(uint64_t h) {
    std::string s(16, '0');
    for (int i = 15; i >= 0; i--) {
        s[i] = hexdigit(h & 0xF);
        h >>= 4;
    }
    return s;
}

} // namespace

std::string AnomalyReport::to_json_line() const {
    json j;
    j["kind"] = anomaly_kind_name(kind);
    j["reference_name"] = reference_name;
    j["variant_seed"] = variant_seed;
    j["recipe"] = json::parse(recipe.to_json());
    if (minimized_recipe)
        j["minimized_recipe"] = json::parse(minimized_recipe->to_json());
    json loc;
    if (localization.unavailable) {
        loc["unavailable"] = true;
    } else {
        if (localization.faulting_pass)
            loc["faulting_pass"] = *localization.faulting_pass;
        if (localization.ddg_summary)
            loc["ddg_summary"] = summary_to_json(*localization.ddg_summary);
    }
    j["localization"] = loc;
    json hashes;
    if (hash_reference)
        hashes["reference"] = hash_hex(*hash_reference);
    if (hash_variant)
        hashes["variant"] = hash_hex(*hash_variant);
    j["hashes"] = hashes;
    j["injection_set"] = injection_set;
    if (!detail.empty())
        j["detail"] = detail;
    return j.dump();
}

std::string CampaignStats::to_json() const {
    json j;
    j["references"] = references;
    j["variants"] = variants;
    j["shaders_processed"] = shaders_processed;
    j["generation_rejections"] = generation_rejections;
    j["corpus_errors"] = corpus_errors;
    j["adapter_protocol_errors"] = adapter_protocol_errors;
    j["anomalies"] = {{"crash", crashes}, {"stall", stalls}, {"semantic_divergence", divergences}};
    j["wall_seconds"] = wall_seconds;
    j["throughput_shaders_per_second"] = throughput;
    return j.dump();
}

std::optional<AnomalyKind> classify_result(const exec::ExecResult &ref_exec,
                                           const VariantCompile &compile,
                                           const exec::ExecResult *var_exec,
                                           uint64_t ref_hash, uint64_t var_hash) {
    (void)ref_exec; // precondition: the reference compiled and executed Ok
    if (compile.kind == VariantCompile::Crash)
        return AnomalyKind::Crash;
    if (compile.kind == VariantCompile::Stall)
        return AnomalyKind::Stall;
    if (!var_exec)
        return std::nullopt;
    if (var_exec->status != exec::ExecStatus::Ok)
        return AnomalyKind::SemanticDivergence; // observable behavior differs
    if (var_hash != ref_hash)
        return AnomalyKind::SemanticDivergence;
    return std::nullopt;
}

namespace {

struct Compiled {
    VariantCompile status;
    ir::Module module; // valid when status.kind == Ok (already half-promoted)
    bool protocol_error = false;
    std::string protocol_detail;
};

Compiled compile_shader(const CampaignConfig &cfg, const ast::ShaderAst &shader) {
    Compiled out;
    if (!cfg.adapter_command.empty()) {
        AdapterResult r = adapter_compile(cfg.adapter_command, ast::pretty_print(shader),
                                          cfg.adapter_timeout_s);
        switch (r.kind) {
        case AdapterResult::Stall:
            out.status.kind = VariantCompile::Stall;
            out.status.detail = r.detail;
            return out;
        case AdapterResult::Crash:
            out.status.kind = VariantCompile::Crash;
            out.status.detail = r.detail;
            return out;
        case AdapterResult::SpawnError:
            out.protocol_error = true;
            out.protocol_detail = "adapter spawn failed: " + r.detail;
            return out;
        case AdapterResult::Ok:
            break;
        }
        auto parsed = ir::parse_module(r.output);
        if (!parsed.ok()) {
            out.protocol_error = true;
            out.protocol_detail =
                "adapter output unparseable at line " + std::to_string(parsed.error().line) +
                ": " + parsed.error().message;
            return out;
        }
        ir::Module m = parsed.take();
        if (auto err = ir::verify(m)) {
            out.protocol_error = true;
            out.protocol_detail = "adapter output fails verification: " + err->invariant +
                                  ": " + err->message;
            return out;
        }
        out.module = opt::half_promote(m).first;
        out.status.kind = VariantCompile::Ok;
        return out;
    }

    ir::Module lowered = ir::lower(shader);
    opt::PipelineConfig pc = cfg.pipeline;
    pc.trace = false;
    opt::PipelineResult pr = opt::run_pipeline(lowered, pc);
    switch (pr.status) {
    case opt::PipelineStatusKind::InternalFault:
        out.status.kind = VariantCompile::Crash;
        out.status.faulting_pass = pr.fault_pass;
        out.status.detail = pr.fault_detail;
        return out;
    case opt::PipelineStatusKind::StallBudgetExceeded: {
        out.status.kind = VariantCompile::Stall;
        out.status.detail =
            "fixpoint budget of " + std::to_string(pc.fixpoint_budget) + " iterations exceeded";
        if (!pr.still_changing.empty())
            out.status.faulting_pass = pr.still_changing.back();
        return out;
    }
    case opt::PipelineStatusKind::Completed:
        out.module = opt::half_promote(pr.module).first; // identity unless promoting was absent
        out.status.kind = VariantCompile::Ok;
        return out;
    }
    return out;
}

struct RefContext {
    const ast::ShaderAst *ref = nullptr;
    exec::ExecEnv env;
    exec::ExecResult ref_exec;
    uint64_t ref_hash = 0;
    std::vector<std::string> out_slots;
    ir::Module compiled; // for ddg comparison
    bool ok = false;
    std::string error;
};

RefContext prepare_reference(const CampaignConfig &cfg, const ast::ShaderAst &ref) {
    RefContext ctx;
    ctx.ref = &ref;
    ctx.env.input_seed = derive64(cfg.seed, fnv1a64(ref.name), 0x494E505554ull);
    ctx.env.sampler_seed = derive64(cfg.seed, fnv1a64(ref.name), 0x53414D50ull);
    ctx.env.step_budget = cfg.step_budget;

    Compiled c = compile_shader(cfg, ref);
    if (c.protocol_error) {
        ctx.error = c.protocol_detail;
        return ctx;
    }
    if (c.status.kind != VariantCompile::Ok) {
        ctx.error = "reference failed to compile: " + c.status.detail;
        return ctx;
    }
    ctx.env.uniform_values = exec::derive_uniforms(c.module, ctx.env.input_seed);
    ctx.ref_exec = exec::execute(c.module, ctx.env);
    if (ctx.ref_exec.status != exec::ExecStatus::Ok) {
        ctx.error = "reference failed to execute cleanly";
        return ctx;
    }
    for (auto &g : c.module.globals)
        if (g.role == ir::Role::Output)
            ctx.out_slots.push_back(g.name);
    std::sort(ctx.out_slots.begin(), ctx.out_slots.end());
    ctx.ref_hash = exec::canonical_hash_restricted(ctx.ref_exec.outputs, ctx.out_slots);
    ctx.compiled = std::move(c.module);
    ctx.ok = true;
    return ctx;
}

struct ClassifiedRun {
    std::optional<AnomalyKind> kind;
    VariantCompile compile;
    std::optional<uint64_t> var_hash;
    bool protocol_error = false;
    std::string protocol_detail;
    ir::Module compiled_module; // when compile Ok
};

ClassifiedRun classify_variant(const CampaignConfig &cfg, const RefContext &ctx,
                               const ast::ShaderAst &variant_ast) {
    ClassifiedRun out;
    Compiled c = compile_shader(cfg, variant_ast);
    if (c.protocol_error) {
        out.protocol_error = true;
        out.protocol_detail = c.protocol_detail;
        return out;
    }
    out.compile = c.status;
    if (c.status.kind != VariantCompile::Ok) {
        out.kind = classify_result(ctx.ref_exec, c.status, nullptr, ctx.ref_hash, 0);
        return out;
    }
    exec::ExecResult ve = exec::execute(c.module, ctx.env);
    uint64_t vh = ve.status == exec::ExecStatus::Ok
                      ? exec::canonical_hash_restricted(ve.outputs, ctx.out_slots)
                      : 0;
    if (ve.status == exec::ExecStatus::Ok)
        out.var_hash = vh;
    else
        out.compile.detail = std::string("variant execution: ") +
                             (ve.status == exec::ExecStatus::Trap
                                  ? exec::trap_reason_text(ve.trap)
                                  : "step budget exceeded");
    out.kind = classify_result(ctx.ref_exec, c.status, &ve, ctx.ref_hash, vh);
    out.compiled_module = std::move(c.module);
    return out;
}

Localization localize_run(const CampaignConfig &cfg, const RefContext &ctx,
                          const ast::ShaderAst &variant_ast, AnomalyKind kind,
                          const VariantCompile &compile) {
    Localization loc;
    if (!cfg.adapter_command.empty()) {
        loc.unavailable = true; // no pass trace across the subprocess boundary
        return loc;
    }
    if (kind == AnomalyKind::Crash || kind == AnomalyKind::Stall) {
        if (!compile.faulting_pass.empty())
            loc.faulting_pass = compile.faulting_pass;
        return loc;
    }
    // semantic divergence: replay compilation with tracing, execute each
    // snapshot, then compare final data-dependency slices
    ir::Module lowered = ir::lower(variant_ast);
    opt::PipelineConfig pc = cfg.pipeline;
    pc.trace = true;
    opt::PipelineResult pr = opt::run_pipeline(lowered, pc);
    auto fd = opt::first_divergent_snapshot(pr.trace, ctx.env);
    if (fd.ok() && fd.value())
        loc.faulting_pass = *fd.value();

    if (pr.status == opt::PipelineStatusKind::Completed) {
        ir::Module vfinal = opt::half_promote(pr.module).first;
        ir::Ddg vd = ir::build_ddg(vfinal);
        ir::Ddg rd = ir::build_ddg(ctx.compiled);
        ir::OutputSlices vs = ir::slice_outputs(vfinal, vd);
        ir::OutputSlices rs = ir::slice_outputs(ctx.compiled, rd);
        for (auto &slot : ctx.out_slots) {
            auto vi = vs.find(slot);
            auto ri = rs.find(slot);
            if (vi == vs.end() || ri == rs.end())
                continue;
            ir::DivergenceSummary sum =
                ir::ddg_diff(vfinal, vi->second, ctx.compiled, ri->second, slot);
            if (!sum.empty()) {
                loc.ddg_summary = std::move(sum);
                break;
            }
        }
    }
    return loc;
}

} // namespace

Result<meta::VariantRecipe, MinimizeError>
minimize(const ast::ShaderAst &reference, const std::vector<ast::ShaderAst> &corpus,
         const meta::VariantRecipe &recipe, AnomalyKind kind, const CampaignConfig &cfg) {
    RefContext ctx = prepare_reference(cfg, reference);
    if (!ctx.ok)
        return MinimizeError{false, "reference does not prepare: " + ctx.error};

    auto reproduces = [&](const std::vector<meta::ChainStep> &chain) {
        auto rp = meta::replay_chain(reference, corpus, recipe, chain);
        if (!rp.ok())
            return false;
        ClassifiedRun run = classify_variant(cfg, ctx, rp.value().ast);
        return run.kind && *run.kind == kind;
    };

    if (!reproduces(recipe.chain))
        return MinimizeError{true, "recipe does not reproduce the reported anomaly"};

    std::vector<meta::ChainStep> current = recipe.chain;
    bool shrunk = true;
    while (shrunk && current.size() > 1) {
        shrunk = false;
        for (size_t i = 0; i < current.size(); i++) {
            std::vector<meta::ChainStep> cand;
            cand.reserve(current.size() - 1);
            for (size_t j = 0; j < current.size(); j++)
                if (j != i)
                    cand.push_back(current[j]);
            if (reproduces(cand)) {
                current = std::move(cand);
                shrunk = true;
                break; // restart the sweep on the shorter chain
            }
        }
    }
    meta::VariantRecipe out = recipe;
    out.chain = std::move(current);
    // donors actually used by the surviving chain
    out.donor_names.clear();
    for (auto &s : out.chain)
        if (s.kind == meta::TransformKind::CodeDonation) {
            bool seen = false;
            for (auto &n : out.donor_names)
                if (n == s.params.donor)
                    seen = true;
            if (!seen)
                out.donor_names.push_back(s.params.donor);
        }
    return out;
}

Result<CampaignResult, CampaignError> run_campaign(const CampaignConfig &cfg,
                                                   const std::vector<ast::ShaderAst> &corpus) {
    if (cfg.variants_per_reference < 1)
        return CampaignError{"variants_per_reference must be >= 1"};
    if (cfg.adapter_timeout_s <= 0)
        return CampaignError{"adapter timeout must be positive"};
    if (cfg.depth_min < 1 || cfg.depth_max > 32 || cfg.depth_min > cfg.depth_max)
        return CampaignError{"depth range must satisfy 1 <= min <= max <= 32"};
    if (!cfg.pipeline.valid())
        return CampaignError{"pipeline configuration is invalid"};
    for (auto &s : corpus)
        if (!s.typechecked)
            return CampaignError{"corpus shader '" + s.name + "' is not typechecked"};

    auto t0 = std::chrono::steady_clock::now();
    CampaignResult result;
    result.stats.references = corpus.size();

    // references first; failures are corpus errors, never findings
    std::vector<RefContext> refs(corpus.size());
    for (size_t i = 0; i < corpus.size(); i++) {
        refs[i] = prepare_reference(cfg, corpus[i]);
        if (!refs[i].ok)
            result.stats.corpus_errors++;
        result.stats.shaders_processed++;
    }

    struct Unit {
        size_t ref_index;
        int k;
    };
    std::vector<Unit> units;
    for (size_t i = 0; i < corpus.size(); i++) {
        if (!refs[i].ok)
            continue;
        for (int k = 0; k < cfg.variants_per_reference; k++)
            units.push_back({i, k});
    }

    struct UnitOutcome {
        bool generation_rejected = false;
        bool protocol_error = false;
        std::optional<AnomalyReport> report;
        bool processed = false;
    };
    std::vector<UnitOutcome> outcomes(units.size());

    std::vector<std::string> injection_names;
    for (auto b : cfg.pipeline.injected_bugs)
        injection_names.push_back(opt::bug_name(b));
    std::sort(injection_names.begin(), injection_names.end());

    std::atomic<size_t> next_unit{0};
    auto worker = [&]() {
        for (;;) {
            size_t u = next_unit.fetch_add(1);
            if (u >= units.size())
                return;
            const Unit &unit = units[u];
            const RefContext &ctx = refs[unit.ref_index];
            const ast::ShaderAst &ref = corpus[unit.ref_index];
            UnitOutcome &out = outcomes[u];
            out.processed = true;

            uint64_t vseed = derive64(cfg.seed, fnv1a64(ref.name),
                                      0x1000ull + static_cast<uint64_t>(unit.k));
            int span = cfg.depth_max - cfg.depth_min + 1;
            int depth = cfg.depth_min +
                        static_cast<int>(derive64(vseed, 0xD, 0xD) % static_cast<uint64_t>(span));

            meta::GenValidation val{ctx.env, ctx.ref_hash, ctx.out_slots};
            auto gen = meta::generate_variant(ref, corpus, vseed, depth, &val);
            if (!gen.ok()) {
                out.generation_rejected = true;
                continue;
            }
            const meta::VariantShader &variant = gen.value();

            ClassifiedRun run = classify_variant(cfg, ctx, variant.ast);
            if (run.protocol_error) {
                out.protocol_error = true;
                continue;
            }
            if (!run.kind)
                continue;

            AnomalyReport rep;
            rep.kind = *run.kind;
            rep.reference_name = ref.name;
            rep.variant_seed = vseed;
            rep.recipe = variant.recipe;
            rep.injection_set = injection_names;
            rep.detail = run.compile.detail;
            rep.hash_reference = ctx.ref_hash;
            if (rep.kind == AnomalyKind::SemanticDivergence) {
                rep.hash_reference = ctx.ref_hash;
                if (run.var_hash)
                    rep.hash_variant = run.var_hash;
                else
                    rep.hash_variant = 0; // variant trapped; hash of no outputs
            }
            if (cfg.localize_reports)
                rep.localization = localize_run(cfg, ctx, variant.ast, rep.kind, run.compile);
            if (cfg.minimize_reports) {
                auto mini = minimize(ref, corpus, variant.recipe, rep.kind, cfg);
                if (mini.ok())
                    rep.minimized_recipe = mini.take();
            }
            out.report = std::move(rep);
        }
    };

    int threads = std::max(1, cfg.parallelism);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; t++)
            pool.emplace_back(worker);
        for (auto &th : pool)
            th.join();
    }

    for (auto &o : outcomes) {
        result.stats.variants++;
        result.stats.shaders_processed++;
        if (o.generation_rejected)
            result.stats.generation_rejections++;
        if (o.protocol_error)
            result.stats.adapter_protocol_errors++;
        if (o.report) {
            switch (o.report->kind) {
            case AnomalyKind::Crash:
                result.stats.crashes++;
                break;
            case AnomalyKind::Stall:
                result.stats.stalls++;
                break;
            case AnomalyKind::SemanticDivergence:
                result.stats.divergences++;
                break;
            }
            result.reports.push_back(std::move(*o.report));
        }
    }
    std::sort(result.reports.begin(), result.reports.end(),
              [](const AnomalyReport &a, const AnomalyReport &b) {
                  if (a.reference_name != b.reference_name)
                      return a.reference_name < b.reference_name;
                  return a.variant_seed < b.variant_seed;
              });

    auto t1 = std::chrono::steady_clock::now();
    result.stats.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    result.stats.throughput = result.stats.wall_seconds > 0
                                  ? static_cast<double>(result.stats.shaders_processed) /
                                        result.stats.wall_seconds
                                  : 0;
    return result;
}

} // namespace mshade::harness
