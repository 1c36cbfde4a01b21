#pragma once

#include "mshade/support/result.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mshade::ir {

// SSA intermediate representation. Textual form: docs/ir.md.

enum class Scalar : uint8_t { I1, I32, F16, F32 };

struct Type {
    Scalar scalar = Scalar::F32;
    uint8_t lanes = 1;

    bool operator==(const Type &) const = default;
    bool is_float() const { return scalar == Scalar::F16 || scalar == Scalar::F32; }
    bool is_f16() const { return scalar == Scalar::F16; }
};

inline Type f32(uint8_t lanes = 1) { return {Scalar::F32, lanes}; }
inline Type f16(uint8_t lanes = 1) { return {Scalar::F16, lanes}; }
inline Type i32(uint8_t lanes = 1) { return {Scalar::I32, lanes}; }
inline Type i1(uint8_t lanes = 1) { return {Scalar::I1, lanes}; }

std::string type_text(const Type &t);

enum class Role : uint8_t { Input, Output, Uniform };

struct GlobalSlot {
    std::string name;
    Type type;
    Role role;
    bool is_sampler = false; // Uniform slots bound to a texture unit
};

enum class Op : uint8_t {
    // scalar/vector arithmetic
    Add,
    Sub,
    Mul,
    Div,
    FAdd,
    FSub,
    FMul,
    FDiv,
    ICmp,
    FCmp,
    Select,
    Phi,
    Load,  // uniform slot read: load <type> @slot, lane
    Store, // output slot write: store @slot, lane, value
    Call,  // intrinsic call
    FpExt,
    FpTrunc,
    Bitcast,
    IToF,
    FToI,
    Extract, // extractelement (vec, lane const)
    Insert,  // insertelement (vec, scalar, lane const)
    // terminators
    Br,
    CondBr,
    Switch,
    Ret,
};

const char *op_text(Op op);
bool is_terminator(Op op);

enum class Cmp : uint8_t { Eq, Ne, Slt, Sle, Sgt, Sge, Oeq, Une, Olt, Ole, Ogt, Oge };
const char *cmp_text(Cmp c);

enum class Intrinsic : uint8_t { FGet, FSet, Rsq, Sampler, Min, Max, Abs, Sin, Cos, Floor, Sqrt };
const char *intrinsic_text(Intrinsic i);

struct Constant {
    Type type;
    std::array<uint32_t, 4> bits{}; // per-lane payload (f16 in low 16 bits)
    bool undef = false;

    bool operator==(const Constant &o) const {
        if (!(type == o.type) || undef != o.undef)
            return false;
        if (undef)
            return true;
        for (int i = 0; i < type.lanes; i++)
            if (bits[i] != o.bits[i])
                return false;
        return true;
    }
};

Constant const_f32(float v);
Constant const_i32(int32_t v);
Constant const_bool(bool v);
Constant undef_of(Type t);

struct Operand {
    bool is_const = false;
    uint32_t id = 0; // value reference when !is_const
    Constant c;

    static Operand value(uint32_t id) {
        Operand o;
        o.id = id;
        return o;
    }
    static Operand constant(Constant c) {
        Operand o;
        o.is_const = true;
        o.c = c;
        return o;
    }
};

struct Inst {
    uint32_t id = 0; // value id; also assigned to void instructions and terminators
    Op op = Op::Ret;
    Type type;            // result type (meaningless for void ops)
    Cmp cmp = Cmp::Eq;    // ICmp/FCmp predicate
    Intrinsic intr = Intrinsic::FGet; // Call target
    uint32_t slot = 0;    // global index for Load/Store/FGet/FSet
    uint32_t lane = 0;    // lane offset for Load/Store/FGet/FSet
    std::vector<Operand> args;
    std::vector<uint32_t> phi_blocks; // Phi: incoming block ids, parallel to args

    // terminator payload
    uint32_t t_true = 0;
    uint32_t t_false = 0;
    std::vector<std::pair<int32_t, uint32_t>> sw_cases;

    bool has_result() const;
};

struct Block {
    uint32_t id = 0;
    std::vector<Inst> insts;
    Inst term;
};

struct Function {
    std::string name;
    std::vector<Block> blocks; // blocks[0] is the entry

    Block *find_block(uint32_t id) {
        for (auto &b : blocks)
            if (b.id == id)
                return &b;
        return nullptr;
    }
    const Block *find_block(uint32_t id) const {
        for (auto &b : blocks)
            if (b.id == id)
                return &b;
        return nullptr;
    }
};

struct Module {
    std::vector<GlobalSlot> globals;
    std::vector<Function> functions;
    uint32_t next_value_id = 0;
    uint32_t next_block_id = 0;

    Function *main() {
        for (auto &f : functions)
            if (f.name == "main")
                return &f;
        return nullptr;
    }
    const Function *main() const {
        for (auto &f : functions)
            if (f.name == "main")
                return &f;
        return nullptr;
    }
    int global_index(const std::string &name) const {
        for (size_t i = 0; i < globals.size(); i++)
            if (globals[i].name == name)
                return static_cast<int>(i);
        return -1;
    }
    uint32_t fresh_value() { return next_value_id++; }
    uint32_t fresh_block() { return next_block_id++; }
};

struct VerifyError {
    std::string invariant; // e.g. "SsaViolation", "MissingTerminator"
    uint32_t inst_id = 0;
    std::string message;
};

// Checks SSA single-definition, terminator presence, operand resolution and
// in-block ordering, phi/predecessor agreement, opcode typing, slot bounds.
std::optional<VerifyError> verify(const Module &m);

// Renumbers blocks and values densely in layout order; the canonical form the
// printer emits. Returns a fully remapped copy.
Module canonicalize(const Module &m);

} // namespace mshade::ir
