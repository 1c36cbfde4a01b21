#pragma once

#include "mshade/exec/exec.hpp"
#include "mshade/ir/ir.hpp"
#include "mshade/support/result.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mshade::opt {

enum class PassId : uint8_t {
    ConstFold,
    Dce,
    InstCombine,
    Peephole,
    CfgSimplify,
    LoopUnroll,
    LoopSplit,
    HalfPromote,
};

const char *pass_name(PassId p);
std::optional<PassId> pass_from_name(const std::string &n);

// Controllable faults for harness self-testing; the clean pipeline is
// semantics-preserving with this set empty.
enum class BugId : uint8_t {
    DceDropsLiveStore,        // miscompile: live value dropped, uses become undef
    InstCombineWrongIdentity, // miscompile: x*1.0 -> 0.0 when feeding an fadd
    PeepholeNullDeref,        // crash analog: internal fault on fmul-by-0 -> fadd pair
    UnrollNonterminating,     // stall: reports "changed" forever on trip-1 loops
};

const char *bug_name(BugId b);
std::optional<BugId> bug_from_name(const std::string &n);

struct PipelineConfig {
    std::vector<PassId> passes;
    int fixpoint_budget = 64;
    bool trace = false;
    std::set<BugId> injected_bugs;

    static PipelineConfig default_config();
    // fixpoint_budget >= 1 and HalfPromote (when present) precedes the
    // arithmetic passes.
    bool valid() const;
};

struct Snapshot {
    std::string pass;  // "input" for snapshot 0
    int iteration = 0;
    std::string ir_text;
};

struct PassTrace {
    std::vector<Snapshot> snapshots;
};

enum class PipelineStatusKind : uint8_t { Completed, StallBudgetExceeded, InternalFault };

struct PipelineResult {
    ir::Module module;
    PipelineStatusKind status = PipelineStatusKind::Completed;
    std::string fault_pass;   // InternalFault
    std::string fault_detail; // InternalFault
    int iterations = 0;
    std::vector<std::string> still_changing; // passes reporting change at budget exhaustion
    PassTrace trace;          // populated when cfg.trace
};

PipelineResult run_pipeline(const ir::Module &m, const PipelineConfig &cfg);

// Clean single-pass entry points.
std::pair<ir::Module, bool> const_fold(const ir::Module &m);
std::pair<ir::Module, bool> dce(const ir::Module &m);
std::pair<ir::Module, bool> inst_combine(const ir::Module &m);
std::pair<ir::Module, bool> peephole(const ir::Module &m);
std::pair<ir::Module, bool> cfg_simplify(const ir::Module &m);
std::pair<ir::Module, bool> loop_unroll(const ir::Module &m);
std::pair<ir::Module, bool> loop_split(const ir::Module &m);
std::pair<ir::Module, bool> half_promote(const ir::Module &m);

struct SnapshotError {
    int index = 0;
    std::string message;
};

// Executes each snapshot and returns the pass name of the first whose
// observable signature (status, output hash) differs from the baseline.
// The baseline is the first snapshot free of f16 (snapshot 0 unless the
// module needed half promotion, which is semantics-defining for mediump).
Result<std::optional<std::string>, SnapshotError>
first_divergent_snapshot(const PassTrace &trace, const exec::ExecEnv &env);

// Writes one `{index:04}_{pass}.ir` file per snapshot into dir.
bool dump_trace(const PassTrace &trace, const std::string &dir, std::string *error);

} // namespace mshade::opt
