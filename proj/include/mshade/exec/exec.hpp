#pragma once

#include "mshade/ir/ir.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mshade::exec {

// Deterministic CPU execution of IR modules. Inputs come from seeded
// splitmix64 derivations, the sampler is a seeded hash, outputs are hashed
// canonically (NaN and -0.0 collapse). Derivation formulas: docs/ir.md.

struct ExecEnv {
    uint64_t input_seed = 0;
    uint64_t sampler_seed = 0;
    std::map<std::string, std::vector<uint32_t>> uniform_values; // slot name -> lane bits
    uint64_t step_budget = 1000000;
};

enum class ExecStatus : uint8_t { Ok, Trap, StepBudgetExceeded };

enum class TrapReason : uint8_t { IntDivByZero, UndefBranch, F16Unsupported };

const char *trap_reason_text(TrapReason r);

struct SlotValues {
    std::string name;
    ir::Type type;
    std::vector<uint32_t> lanes;
};

struct ExecResult {
    ExecStatus status = ExecStatus::Ok;
    TrapReason trap = TrapReason::IntDivByZero;
    uint64_t output_hash = 0; // valid only when status == Ok
    uint64_t steps = 0;
    std::vector<SlotValues> outputs;     // sorted by slot name
    std::vector<std::string> diagnostics; // e.g. defaulted output lanes
};

// Fills every Input slot lane: ordinal = rank of the slot name among Input
// slots sorted by name; f32 lanes in [0,1), i32 lanes in [0,256).
std::vector<SlotValues> seed_inputs(const ir::Module &m, const ExecEnv &env);

// Sampler-as-hash: coords scale by 256, floor, wrap mod 256 (repeat); lanes
// in [0,1] derived from (sampler_seed, unit, texel); lod is ignored.
void sample(uint64_t sampler_seed, int unit, float cx, float cy, float out[4]);

// FNV-1a-64 over canonicalized lane bytes in slot-name order.
uint64_t canonical_hash(const std::vector<SlotValues> &outputs);

// Hash restricted to the given slot names (the reference interface), used
// when comparing a variant against its reference.
uint64_t canonical_hash_restricted(const std::vector<SlotValues> &outputs,
                                   const std::vector<std::string> &slot_names);

ExecResult execute(const ir::Module &m, const ExecEnv &env);

// Uniform lane derivation shared by the campaign driver and the CLI:
// non-sampler uniform lanes mirror input seeding in a disjoint key space;
// sampler uniforms bind to their texture unit ordinal.
std::map<std::string, std::vector<uint32_t>> derive_uniforms(const ir::Module &m,
                                                             uint64_t input_seed);

} // namespace mshade::exec
