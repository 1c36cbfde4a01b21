#pragma once

#include "mshade/ir/ir.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mshade::ir {

// Data dependency graph: one node per instruction (terminators included),
// one edge per non-constant operand reference (def -> use).
struct Ddg {
    std::vector<uint32_t> nodes;
    std::vector<std::pair<uint32_t, uint32_t>> edges; // (def, use)
};

Ddg build_ddg(const Module &m);

// Backward slice per output slot: every instruction reachable backwards from
// the slot's fset/store sites, ending at fgets, loads, and constants.
using OutputSlices = std::map<std::string, std::set<uint32_t>>;

OutputSlices slice_outputs(const Module &m, const Ddg &d);

// Greedy opcode/arity/constant matching between two slices of the same output.
struct DivergenceSummary {
    std::string slot;
    size_t matched = 0;
    std::vector<std::pair<uint32_t, std::string>> only_in_variant;   // (id, opcode)
    std::vector<std::pair<uint32_t, std::string>> only_in_reference; // (id, opcode)
    std::vector<std::pair<std::string, std::string>> opcode_pairs;   // leftover shape mismatch
    std::vector<uint32_t> undef_sites; // variant instructions with undef operands

    bool empty() const {
        return only_in_variant.empty() && only_in_reference.empty() && undef_sites.empty();
    }
};

DivergenceSummary ddg_diff(const Module &variant, const std::set<uint32_t> &variant_slice,
                           const Module &reference, const std::set<uint32_t> &reference_slice,
                           const std::string &slot);

} // namespace mshade::ir
