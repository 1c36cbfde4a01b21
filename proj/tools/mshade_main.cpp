#include "mshade/exec/exec.hpp"
#include "mshade/forensics/forensics.hpp"
#include "mshade/harness/campaign.hpp"
#include "mshade/ir/lower.hpp"
#include "mshade/ir/text.hpp"
#include "mshade/metamorph/generate.hpp"
#include "mshade/opt/passes.hpp"
#include "mshade/shader/front.hpp"
#include "mshade/support/fnv.hpp"
#include "mshade/support/fp.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

using namespace mshade;
using nlohmann::json;

namespace {

constexpr int kExitClean = 0;
constexpr int kExitOperational = 1;
constexpr int kExitAnomalies = 2;
constexpr int kExitUsage = 64;

std::string hash_hex(uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::optional<std::string> read_file(const std::string &path, std::string *err) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        *err = "cannot open " + path;
        return std::nullopt;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::optional<ast::ShaderAst> load_shader(const std::string &path, std::string *err) {
    std::string text_err;
    auto text = read_file(path, &text_err);
    if (!text) {
        *err = text_err;
        return std::nullopt;
    }
    ast::SourceShader src;
    src.text = *text;
    src.name = path.substr(path.find_last_of('/') + 1);
    src.stage = path.size() > 5 && path.substr(path.size() - 5) == ".vert"
                    ? ast::Stage::Vertex
                    : ast::Stage::Fragment;
    auto parsed = ast::parse(src);
    if (!parsed.ok()) {
        *err = path + ":" + std::to_string(parsed.error().pos.line) + ":" +
               std::to_string(parsed.error().pos.col) + ": " + parsed.error().message;
        return std::nullopt;
    }
    auto typed = ast::typecheck(parsed.take());
    if (!typed.ok()) {
        *err = path + ":" + std::to_string(typed.error().pos.line) + ":" +
               std::to_string(typed.error().pos.col) + ": " +
               std::string(ast::type_error_kind_name(typed.error().kind)) + ": " +
               typed.error().message;
        return std::nullopt;
    }
    return typed.take();
}

struct FuzzOptions {
    std::string corpus;
    std::string out = "report.jsonl";
    harness::CampaignConfig cfg;
    std::vector<std::string> injections;
    int fixpoint_budget = 64;
};

int cmd_fuzz(const FuzzOptions &opt) {
    harness::CampaignConfig cfg = opt.cfg;
    cfg.pipeline = opt::PipelineConfig::default_config();
    cfg.pipeline.fixpoint_budget = opt.fixpoint_budget;
    for (auto &name : opt.injections) {
        auto bug = opt::bug_from_name(name);
        if (!bug) {
            std::cerr << "unknown injection '" << name << "'\n";
            return kExitUsage;
        }
        cfg.pipeline.injected_bugs.insert(*bug);
    }

    auto corpus = ast::load_corpus(opt.corpus);
    if (!corpus.ok()) {
        std::cerr << corpus.error().message << "\n";
        return kExitOperational;
    }
    auto res = harness::run_campaign(cfg, corpus.value());
    if (!res.ok()) {
        std::cerr << res.error().message << "\n";
        return kExitOperational;
    }
    std::ofstream out(opt.out);
    if (!out) {
        std::cerr << "cannot write " << opt.out << "\n";
        return kExitOperational;
    }
    for (auto &rep : res.value().reports)
        out << rep.to_json_line() << "\n";
    std::cout << res.value().stats.to_json() << "\n";
    return res.value().reports.empty() ? kExitClean : kExitAnomalies;
}

struct TransformOptions {
    std::string input;
    std::string corpus; // optional donor corpus
    std::string out_dir = ".";
    uint64_t seed = 1;
    int depth = 4;
    bool verify = false;
};

int cmd_transform(const TransformOptions &opt) {
    std::string err;
    auto ref = load_shader(opt.input, &err);
    if (!ref) {
        std::cerr << err << "\n";
        return kExitOperational;
    }
    std::vector<ast::ShaderAst> corpus;
    if (!opt.corpus.empty()) {
        auto c = ast::load_corpus(opt.corpus);
        if (!c.ok()) {
            std::cerr << c.error().message << "\n";
            return kExitOperational;
        }
        corpus = c.take();
    } else {
        corpus.push_back(ast::clone(*ref));
    }

    // the oracle environment mirrors the campaign derivation for this name
    exec::ExecEnv env;
    env.input_seed = derive64(opt.seed, fnv1a64(ref->name), 0x494E505554ull);
    env.sampler_seed = derive64(opt.seed, fnv1a64(ref->name), 0x53414D50ull);
    ir::Module rm = opt::half_promote(ir::lower(*ref)).first;
    env.uniform_values = exec::derive_uniforms(rm, env.input_seed);
    auto rr = exec::execute(rm, env);
    if (rr.status != exec::ExecStatus::Ok) {
        std::cerr << "reference does not execute cleanly\n";
        return kExitOperational;
    }
    std::vector<std::string> outs;
    for (auto &g : rm.globals)
        if (g.role == ir::Role::Output)
            outs.push_back(g.name);
    meta::GenValidation val{env, exec::canonical_hash_restricted(rr.outputs, outs), outs};

    auto gen = meta::generate_variant(*ref, corpus, opt.seed, opt.depth, &val);
    if (!gen.ok()) {
        std::cerr << gen.error().message << "\n";
        return kExitOperational;
    }
    const meta::VariantShader &v = gen.value();
    std::string base = opt.out_dir + "/variant";
    std::ofstream src(base + (ref->stage == ast::Stage::Vertex ? ".vert" : ".frag"));
    src << ast::pretty_print(v.ast);
    std::ofstream rec(base + ".recipe.json");
    rec << v.recipe.to_json() << "\n";

    if (opt.verify) {
        ir::Module vm = opt::half_promote(ir::lower(v.ast)).first;
        auto vr = exec::execute(vm, env);
        uint64_t vh = vr.status == exec::ExecStatus::Ok
                          ? exec::canonical_hash_restricted(vr.outputs, outs)
                          : 0;
        if (vr.status != exec::ExecStatus::Ok || vh != val.reference_hash) {
            std::cerr << "verification failed: variant diverges from reference\n";
            return kExitOperational;
        }
        std::cerr << "verified: variant hash " << hash_hex(vh) << " matches reference\n";
    }
    json j;
    j["variant"] = base + (ref->stage == ast::Stage::Vertex ? ".vert" : ".frag");
    j["recipe"] = base + ".recipe.json";
    j["chain_length"] = v.recipe.chain.size();
    std::cout << j.dump() << "\n";
    return kExitClean;
}

struct RunOptions {
    std::string input;
    uint64_t seed = 42;
    uint64_t sampler_seed = 7;
    uint64_t step_budget = 1000000;
    bool dump_outputs = false;
    bool optimize = false;
};

int cmd_run(const RunOptions &opt) {
    ir::Module m;
    bool is_ir = opt.input.size() > 3 && opt.input.substr(opt.input.size() - 3) == ".ir";
    if (is_ir) {
        std::string err;
        auto text = read_file(opt.input, &err);
        if (!text) {
            std::cerr << err << "\n";
            return kExitOperational;
        }
        auto parsed = ir::parse_module(*text);
        if (!parsed.ok()) {
            std::cerr << opt.input << ":" << parsed.error().line << ": "
                      << parsed.error().message << "\n";
            return kExitOperational;
        }
        m = parsed.take();
        if (auto verr = ir::verify(m)) {
            std::cerr << opt.input << ": " << verr->invariant << ": " << verr->message << "\n";
            return kExitOperational;
        }
    } else {
        std::string err;
        auto sh = load_shader(opt.input, &err);
        if (!sh) {
            std::cerr << err << "\n";
            return kExitOperational;
        }
        m = ir::lower(*sh);
    }
    if (opt.optimize) {
        auto pr = opt::run_pipeline(m, opt::PipelineConfig::default_config());
        if (pr.status != opt::PipelineStatusKind::Completed) {
            std::cerr << "optimization did not complete\n";
            return kExitOperational;
        }
        m = pr.module;
    }
    m = opt::half_promote(m).first;

    exec::ExecEnv env;
    env.input_seed = opt.seed;
    env.sampler_seed = opt.sampler_seed;
    env.step_budget = opt.step_budget;
    env.uniform_values = exec::derive_uniforms(m, env.input_seed);
    exec::ExecResult r = exec::execute(m, env);

    json j;
    j["status"] = r.status == exec::ExecStatus::Ok      ? "ok"
                  : r.status == exec::ExecStatus::Trap ? "trap"
                                                        : "step_budget_exceeded";
    if (r.status == exec::ExecStatus::Trap)
        j["trap"] = exec::trap_reason_text(r.trap);
    if (r.status == exec::ExecStatus::Ok)
        j["hash"] = hash_hex(r.output_hash);
    j["steps"] = r.steps;
    if (opt.dump_outputs && r.status == exec::ExecStatus::Ok) {
        json outs;
        for (auto &s : r.outputs) {
            json lanes = json::array();
            for (auto bits : s.lanes) {
                if (s.type.is_float())
                    lanes.push_back(f32_to_text(bits));
                else
                    lanes.push_back(static_cast<int32_t>(bits));
            }
            outs[s.name] = lanes;
        }
        j["outputs"] = outs;
    }
    if (!r.diagnostics.empty())
        j["diagnostics"] = r.diagnostics;
    std::cout << j.dump() << "\n";
    return kExitClean;
}

struct ReduceOptions {
    std::string input;
    std::string corpus;
    std::string recipe_path;
    std::string kind = "semantic_divergence";
    std::vector<std::string> injections;
};

int cmd_reduce(const ReduceOptions &opt) {
    std::string err;
    auto ref = load_shader(opt.input, &err);
    if (!ref) {
        std::cerr << err << "\n";
        return kExitOperational;
    }
    auto corpus = ast::load_corpus(opt.corpus);
    if (!corpus.ok()) {
        std::cerr << corpus.error().message << "\n";
        return kExitOperational;
    }
    auto rtext = read_file(opt.recipe_path, &err);
    if (!rtext) {
        std::cerr << err << "\n";
        return kExitOperational;
    }
    auto recipe = meta::VariantRecipe::from_json(*rtext);
    if (!recipe.ok()) {
        std::cerr << recipe.error() << "\n";
        return kExitOperational;
    }
    harness::AnomalyKind kind;
    if (opt.kind == "crash")
        kind = harness::AnomalyKind::Crash;
    else if (opt.kind == "stall")
        kind = harness::AnomalyKind::Stall;
    else if (opt.kind == "semantic_divergence")
        kind = harness::AnomalyKind::SemanticDivergence;
    else {
        std::cerr << "unknown anomaly kind '" << opt.kind << "'\n";
        return kExitUsage;
    }
    harness::CampaignConfig cfg;
    for (auto &name : opt.injections) {
        auto bug = opt::bug_from_name(name);
        if (!bug) {
            std::cerr << "unknown injection '" << name << "'\n";
            return kExitUsage;
        }
        cfg.pipeline.injected_bugs.insert(*bug);
    }
    auto mini = harness::minimize(*ref, corpus.value(), recipe.value(), kind, cfg);
    if (!mini.ok()) {
        std::cerr << mini.error().message << "\n";
        return kExitOperational;
    }
    std::cout << mini.value().to_json() << "\n";
    return kExitClean;
}

struct InspectOptions {
    std::string elf;
    std::string fingerprints;
    double threshold = 0.3;
};

int cmd_inspect_blob(const InspectOptions &opt) {
    std::string err;
    auto text = read_file(opt.elf, &err);
    if (!text) {
        std::cerr << err << "\n";
        return kExitOperational;
    }
    std::vector<uint8_t> bytes(text->begin(), text->end());
    json j;
    auto id = forensics::extract_build_id(bytes);
    if (!id.ok()) {
        if (id.error().malformed) {
            std::cerr << "malformed ELF: " << id.error().message << "\n";
            return kExitOperational;
        }
        j["build_id"] = nullptr;
    } else {
        j["build_id"] = id.value().hex;
    }
    auto strings = forensics::extract_strings(bytes);
    if (!strings.ok()) {
        std::cerr << "malformed ELF: " << strings.error().message << "\n";
        return kExitOperational;
    }
    j["string_count"] = strings.value().size();
    auto ver = forensics::parse_version(strings.value());
    if (ver)
        j["version"] = ver->to_string();
    else
        j["version"] = nullptr;
    if (!opt.fingerprints.empty()) {
        auto db = forensics::FingerprintDb::load(opt.fingerprints);
        if (!db.ok()) {
            std::cerr << db.error() << "\n";
            return kExitOperational;
        }
        auto fp = forensics::fingerprint_match(strings.value(), db.value(), opt.threshold);
        if (fp) {
            json f;
            f["label"] = fp->label;
            f["score"] = fp->score;
            f["tie"] = fp->tie;
            j["fingerprint"] = f;
        } else {
            j["fingerprint"] = nullptr;
        }
    }
    std::cout << j.dump() << "\n";
    return kExitClean;
}

struct DelayOptions {
    std::string catalog;
    bool per_record = false;
};

int cmd_delay_report(const DelayOptions &opt) {
    auto catalog = forensics::load_catalog(opt.catalog);
    if (!catalog.ok()) {
        std::cerr << catalog.error() << "\n";
        return kExitOperational;
    }
    forensics::DelayAggregates agg = forensics::aggregate_delays(catalog.value());
    json j;
    j["records"] = agg.records;
    j["computable"] = agg.computable;
    j["skipped_insufficient"] = agg.skipped_insufficient;
    j["fraction_outdated"] = agg.fraction_outdated;
    if (agg.median_delay_days)
        j["median_delay_days"] = *agg.median_delay_days;
    else
        j["median_delay_days"] = nullptr;
    j["max_delay_days"] = agg.max_delay_days;
    json vendors;
    for (auto &[vendor, va] : agg.by_vendor) {
        json v;
        v["computable"] = va.computable;
        v["outdated"] = va.outdated;
        v["fraction_outdated"] = va.fraction_outdated;
        if (va.median_delay_days)
            v["median_delay_days"] = *va.median_delay_days;
        else
            v["median_delay_days"] = nullptr;
        v["max_delay_days"] = va.max_delay_days;
        vendors[vendor] = v;
    }
    j["by_vendor"] = vendors;
    if (opt.per_record) {
        json records = json::array();
        for (auto &rec : catalog.value()) {
            json r;
            r["vendor"] = rec.vendor;
            r["device"] = rec.device;
            r["gpu_model"] = rec.gpu_model;
            r["release_date"] = rec.release_date.to_string();
            r["blob_version"] = rec.blob_version.to_string();
            auto rep = forensics::estimate_delay(catalog.value(), rec);
            if (rep.ok()) {
                r["delay_days"] = rep.value().delay_days;
                r["outdated"] = rep.value().outdated;
                r["first_seen"] = rep.value().r_o.to_string();
                r["latest_version"] = rep.value().v_l.to_string();
                r["latest_first_seen"] = rep.value().r_l.to_string();
            } else {
                r["insufficient_data"] = rep.error().reason;
            }
            records.push_back(r);
        }
        j["per_record"] = records;
    }
    std::cout << j.dump() << "\n";
    return kExitClean;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"metamorphic shader-compiler differential tester and blob forensics"};
    app.require_subcommand(1);

    FuzzOptions fuzz;
    auto *cf = app.add_subcommand("fuzz", "run a differential-testing campaign");
    cf->add_option("--corpus", fuzz.corpus, "corpus manifest path")
        ->required()
        ->envname("MSHADE_CORPUS");
    cf->add_option("--variants", fuzz.cfg.variants_per_reference,
                   "variants per reference shader")
        ->check(CLI::Range(1, 1000000))
        ->envname("MSHADE_VARIANTS");
    cf->add_option("--depth-min", fuzz.cfg.depth_min, "minimum transform chain length")
        ->check(CLI::Range(1, 32));
    cf->add_option("--depth-max", fuzz.cfg.depth_max, "maximum transform chain length")
        ->check(CLI::Range(1, 32));
    cf->add_option("--seed", fuzz.cfg.seed, "campaign seed")->envname("MSHADE_SEED");
    cf->add_option("--threads", fuzz.cfg.parallelism, "campaign parallelism")
        ->check(CLI::Range(1, 256))
        ->envname("MSHADE_THREADS");
    cf->add_option("--out", fuzz.out, "report file (one JSON object per line)");
    cf->add_option("--inject", fuzz.injections,
                   "enable a pipeline bug injection (repeatable)");
    cf->add_option("--adapter", fuzz.cfg.adapter_command,
                   "external compiler command (shader on stdin, IR on stdout)");
    cf->add_option("--timeout", fuzz.cfg.adapter_timeout_s, "adapter timeout in seconds")
        ->check(CLI::PositiveNumber);
    cf->add_option("--budget", fuzz.fixpoint_budget, "pass-manager fixpoint budget")
        ->check(CLI::Range(1, 100000));
    cf->add_option("--step-budget", fuzz.cfg.step_budget, "execution step budget");
    cf->add_flag("--no-minimize", [&fuzz](int64_t) { fuzz.cfg.minimize_reports = false; },
                 "skip recipe minimization");
    cf->add_flag("--no-localize", [&fuzz](int64_t) { fuzz.cfg.localize_reports = false; },
                 "skip fault localization");

    TransformOptions tr;
    auto *ct = app.add_subcommand("transform", "generate one semantics-preserving variant");
    ct->add_option("--input", tr.input, "reference shader file")->required();
    ct->add_option("--corpus", tr.corpus, "donor corpus manifest");
    ct->add_option("--out-dir", tr.out_dir, "output directory");
    ct->add_option("--seed", tr.seed, "generation seed")->envname("MSHADE_SEED");
    ct->add_option("--depth", tr.depth, "transform chain length")->check(CLI::Range(1, 32));
    ct->add_flag("--verify", tr.verify, "check the variant against the interpreter oracle");

    RunOptions rn;
    auto *cr = app.add_subcommand("run", "execute a shader or textual IR deterministically");
    cr->add_option("--input", rn.input, "shader (.frag/.vert) or IR (.ir) file")->required();
    cr->add_option("--seed", rn.seed, "input seed")->envname("MSHADE_SEED");
    cr->add_option("--sampler-seed", rn.sampler_seed, "sampler seed");
    cr->add_option("--step-budget", rn.step_budget, "execution step budget");
    cr->add_flag("--dump-outputs", rn.dump_outputs, "emit per-slot lane values");
    cr->add_flag("--optimize", rn.optimize, "run the clean pipeline before executing");

    ReduceOptions rd;
    auto *cd = app.add_subcommand("reduce", "minimize a recipe that reproduces an anomaly");
    cd->add_option("--input", rd.input, "reference shader file")->required();
    cd->add_option("--corpus", rd.corpus, "corpus manifest")->required();
    cd->add_option("--recipe", rd.recipe_path, "recipe JSON file")->required();
    cd->add_option("--kind", rd.kind, "anomaly kind: crash, stall, semantic_divergence");
    cd->add_option("--inject", rd.injections, "pipeline bug injections active for replay");

    InspectOptions ib;
    auto *ci = app.add_subcommand("inspect-blob", "identify a binary blob's version");
    ci->add_option("--elf", ib.elf, "ELF file")->required();
    ci->add_option("--fingerprints", ib.fingerprints, "fingerprint database (JSON)");
    ci->add_option("--threshold", ib.threshold, "fingerprint score threshold")
        ->check(CLI::Range(0.0, 1.0));

    DelayOptions dl;
    auto *cdl = app.add_subcommand("delay-report", "firmware update-delay analytics");
    cdl->add_option("--catalog", dl.catalog, "firmware catalog CSV")->required();
    cdl->add_flag("--per-record", dl.per_record, "include per-record delay results");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        std::cout << app.help();
        return kExitClean;
    } catch (const CLI::ParseError &e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }

    if (cf->parsed())
        return cmd_fuzz(fuzz);
    if (ct->parsed())
        return cmd_transform(tr);
    if (cr->parsed())
        return cmd_run(rn);
    if (cd->parsed())
        return cmd_reduce(rd);
    if (ci->parsed())
        return cmd_inspect_blob(ib);
    if (cdl->parsed())
        return cmd_delay_report(dl);
    return kExitUsage;
}
