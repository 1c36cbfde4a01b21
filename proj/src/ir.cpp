#include "mshade/ir/ir.hpp"
#include "mshade/support/fp.hpp"

#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace mshade::ir {

std::string type_text(const Type &t) {
    const char *s = t.scalar == Scalar::I1    ? "i1"
                    : t.scalar == Scalar::I32 ? "i32"
                    : t.scalar == Scalar::F16 ? "f16"
                                              : "f32";
    if (t.lanes == 1)
        return s;
    return "<" + std::to_string(t.lanes) + " x " + s + ">";
}

const char *op_text(Op op) {
    switch (op) {
    case Op::Add:
        return "add";
    case Op::Sub:
        return "sub";
    case Op::Mul:
        return "mul";
    case Op::Div:
        return "div";
    case Op::FAdd:
        return "fadd";
    case Op::FSub:
        return "fsub";
    case Op::FMul:
        return "fmul";
    case Op::FDiv:
        return "fdiv";
    case Op::ICmp:
        return "icmp";
    case Op::FCmp:
        return "fcmp";
    case Op::Select:
        return "select";
    case Op::Phi:
        return "phi";
    case Op::Load:
        return "load";
    case Op::Store:
        return "store";
    case Op::Call:
        return "call";
    case Op::FpExt:
        return "fpext";
    case Op::FpTrunc:
        return "fptrunc";
    case Op::Bitcast:
        return "bitcast";
    case Op::IToF:
        return "itof";
    case Op::FToI:
        return "ftoi";
    case Op::Extract:
        return "extract";
    case Op::Insert:
        return "insert";
    case Op::Br:
        return "br";
    case Op::CondBr:
        return "condbr";
    case Op::Switch:
        return "switch";
    case Op::Ret:
        return "ret";
    }
    return "?";
}

bool is_terminator(Op op) {
    return op == Op::Br || op == Op::CondBr || op == Op::Switch || op == Op::Ret;
}

const char *cmp_text(Cmp c) {
    switch (c) {
    case Cmp::Eq:
        return "eq";
    case Cmp::Ne:
        return "ne";
    case Cmp::Slt:
        return "slt";
    case Cmp::Sle:
        return "sle";
    case Cmp::Sgt:
        return "sgt";
    case Cmp::Sge:
        return "sge";
    case Cmp::Oeq:
        return "oeq";
    case Cmp::Une:
        return "une";
    case Cmp::Olt:
        return "olt";
    case Cmp::Ole:
        return "ole";
    case Cmp::Ogt:
        return "ogt";
    case Cmp::Oge:
        return "oge";
    }
    return "?";
}

const char *intrinsic_text(Intrinsic i) {
    switch (i) {
    case Intrinsic::FGet:
        return "fget";
    case Intrinsic::FSet:
        return "fset";
    case Intrinsic::Rsq:
        return "rsq";
    case Intrinsic::Sampler:
        return "sampler";
    case Intrinsic::Min:
        return "min";
    case Intrinsic::Max:
        return "max";
    case Intrinsic::Abs:
        return "abs";
    case Intrinsic::Sin:
        return "sin";
    case Intrinsic::Cos:
        return "cos";
    case Intrinsic::Floor:
        return "floor";
    case Intrinsic::Sqrt:
        return "sqrt";
    }
    return "?";
}

Constant const_f32(float v) {
    Constant c;
    c.type = f32();
    c.bits[0] = f32_bits(v);
    return c;
}

Constant const_i32(int32_t v) {
    Constant c;
    c.type = i32();
    c.bits[0] = static_cast<uint32_t>(v);
    return c;
}

Constant const_bool(bool v) {
    Constant c;
    c.type = i1();
    c.bits[0] = v ? 1 : 0;
    return c;
}

Constant undef_of(Type t) {
    Constant c;
    c.type = t;
    c.undef = true;
    return c;
}

bool Inst::has_result() const {
    switch (op) {
    case Op::Store:
        return false;
    case Op::Call:
        return intr != Intrinsic::FSet;
    case Op::Br:
    case Op::CondBr:
    case Op::Switch:
    case Op::Ret:
        return false;
    default:
        return true;
    }
}

// ---------------------------------------------------------------------------
// Verifier

namespace {

struct Verifier {
    const Module &m;
    std::optional<VerifyError> err;

    bool fail(const std::string &inv, uint32_t id, const std::string &msg) {
        if (!err)
            err = VerifyError{inv, id, msg};
        return false;
    }

    bool operand_type_is(const Inst &in, const Operand &o, Type want,
                         const std::unordered_map<uint32_t, Type> &types) {
        Type got;
        if (o.is_const) {
            got = o.c.type;
        } else {
            auto it = types.find(o.id);
            if (it == types.end())
                return fail("BadOperand", in.id,
                            "operand %" + std::to_string(o.id) + " is not defined");
            got = it->second;
        }
        if (!(got == want))
            return fail("TypeError", in.id,
                        std::string(op_text(in.op)) + " expects " + type_text(want) +
                            ", got " + type_text(got));
        return true;
    }

    bool check_function(const Function &fn) {
        if (fn.blocks.empty())
            return fail("BadBlock", 0, "function '" + fn.name + "' has no blocks");

        std::unordered_map<uint32_t, Type> types; // result types by value id
        std::unordered_set<uint32_t> block_ids;
        std::unordered_set<uint32_t> defined;

        for (auto &b : fn.blocks) {
            if (!block_ids.insert(b.id).second)
                return fail("BadBlock", 0, "duplicate block id " + std::to_string(b.id));
            if (!is_terminator(b.term.op))
                return fail("MissingTerminator", b.term.id,
                            "block %b" + std::to_string(b.id) + " lacks a terminator");
            for (auto &in : b.insts) {
                if (is_terminator(in.op))
                    return fail("BadBlock", in.id, "terminator in instruction list");
                if (!defined.insert(in.id).second)
                    return fail("SsaViolation", in.id,
                                "value %" + std::to_string(in.id) + " defined twice");
                if (in.has_result())
                    types[in.id] = in.type;
            }
            if (!defined.insert(b.term.id).second)
                return fail("SsaViolation", b.term.id, "terminator id reused");
        }

        // Predecessor map for phi checking.
        std::map<uint32_t, std::vector<uint32_t>> preds;
        for (auto &b : fn.blocks) {
            auto edge = [&](uint32_t to) { preds[to].push_back(b.id); };
            const Inst &t = b.term;
            if (t.op == Op::Br)
                edge(t.t_true);
            else if (t.op == Op::CondBr) {
                edge(t.t_true);
                edge(t.t_false);
            } else if (t.op == Op::Switch) {
                edge(t.t_false); // default
                for (auto &[v, tgt] : t.sw_cases)
                    edge(tgt);
            }
        }
        for (auto &[to, ps] : preds)
            for (uint32_t p : ps)
                if (!block_ids.count(to) || !block_ids.count(p))
                    return fail("BadBlock", 0, "branch to unknown block");

        for (auto &b : fn.blocks) {
            std::unordered_set<uint32_t> seen_here; // defs earlier in this block
            bool in_phi_prefix = true;
            for (auto &in : b.insts) {
                if (in.op == Op::Phi) {
                    if (!in_phi_prefix)
                        return fail("BadPhi", in.id, "phi after non-phi instruction");
                } else {
                    in_phi_prefix = false;
                }
                if (!check_inst(b, in, types, seen_here, preds))
                    return false;
                seen_here.insert(in.id);
            }
            if (!check_inst(b, b.term, types, seen_here, preds))
                return false;
        }
        return true;
    }

    bool check_inst(const Block &b, const Inst &in,
                    const std::unordered_map<uint32_t, Type> &types,
                    const std::unordered_set<uint32_t> &seen_here,
                    const std::map<uint32_t, std::vector<uint32_t>> &preds) {
        auto otype = [&](const Operand &o) -> std::optional<Type> {
            if (o.is_const)
                return o.c.type;
            auto it = types.find(o.id);
            if (it == types.end())
                return std::nullopt;
            return it->second;
        };
        auto require_args = [&](size_t n) {
            if (in.args.size() != n)
                return fail("BadOperand", in.id,
                            std::string(op_text(in.op)) + " expects " + std::to_string(n) +
                                " operands");
            return true;
        };
        auto defined_in_block = [&](uint32_t id) {
            for (auto &i2 : b.insts)
                if (i2.id == id)
                    return true;
            return false;
        };

        // Operand resolution + in-block ordering (phis exempt).
        for (auto &o : in.args) {
            if (o.is_const)
                continue;
            if (!types.count(o.id))
                return fail("BadOperand", in.id,
                            "operand %" + std::to_string(o.id) + " is not defined");
            if (in.op != Op::Phi && defined_in_block(o.id) && !seen_here.count(o.id))
                return fail("BadOperand", in.id,
                            "use of %" + std::to_string(o.id) + " before its definition");
        }

        switch (in.op) {
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            if (!require_args(2))
                return false;
            if (in.type.is_float())
                return fail("TypeError", in.id, "integer opcode with float type");
            for (auto &o : in.args)
                if (!operand_type_is(in, o, in.type, types))
                    return false;
            return true;
        }
        case Op::FAdd:
        case Op::FSub:
        case Op::FMul:
        case Op::FDiv: {
            if (!require_args(2))
                return false;
            if (!in.type.is_float())
                return fail("TypeError", in.id, "float opcode with integer type");
            for (auto &o : in.args)
                if (!operand_type_is(in, o, in.type, types))
                    return false;
            return true;
        }
        case Op::ICmp:
        case Op::FCmp: {
            if (!require_args(2))
                return false;
            if (!(in.type == i1()))
                return fail("TypeError", in.id, "compare result must be i1");
            auto t0 = otype(in.args[0]);
            if (!t0)
                return fail("BadOperand", in.id, "unresolved compare operand");
            if (in.op == Op::ICmp && t0->is_float())
                return fail("TypeError", in.id, "icmp on float operands");
            if (in.op == Op::FCmp && !t0->is_float())
                return fail("TypeError", in.id, "fcmp on integer operands");
            return operand_type_is(in, in.args[1], *t0, types);
        }
        case Op::Select: {
            if (!require_args(3))
                return false;
            if (!operand_type_is(in, in.args[0], i1(), types))
                return false;
            return operand_type_is(in, in.args[1], in.type, types) &&
                   operand_type_is(in, in.args[2], in.type, types);
        }
        case Op::Phi: {
            if (in.args.empty() || in.args.size() != in.phi_blocks.size())
                return fail("BadPhi", in.id, "phi operand/block count mismatch");
            auto pit = preds.find(b.id);
            std::set<uint32_t> want(pit == preds.end() ? std::set<uint32_t>{}
                                                       : std::set<uint32_t>(pit->second.begin(),
                                                                            pit->second.end()));
            std::set<uint32_t> got(in.phi_blocks.begin(), in.phi_blocks.end());
            if (got.size() != in.phi_blocks.size())
                return fail("BadPhi", in.id, "duplicate phi incoming block");
            if (want != got)
                return fail("BadPhi", in.id, "phi incoming blocks do not match predecessors");
            for (auto &o : in.args)
                if (!operand_type_is(in, o, in.type, types))
                    return false;
            return true;
        }
        case Op::Load: {
            if (!require_args(0))
                return false;
            if (in.slot >= m.globals.size())
                return fail("BadSlot", in.id, "load from unknown slot");
            const GlobalSlot &g = m.globals[in.slot];
            if (g.role != Role::Uniform)
                return fail("BadSlot", in.id, "load requires a uniform slot");
            if (in.lane >= g.type.lanes)
                return fail("BadSlot", in.id, "load lane out of range");
            if (!(in.type == Type{g.type.scalar, 1}))
                return fail("TypeError", in.id, "load type must match slot scalar type");
            return true;
        }
        case Op::Store: {
            if (!require_args(1))
                return false;
            if (in.slot >= m.globals.size())
                return fail("BadSlot", in.id, "store to unknown slot");
            const GlobalSlot &g = m.globals[in.slot];
            if (g.role != Role::Output)
                return fail("BadSlot", in.id, "store requires an output slot");
            if (in.lane >= g.type.lanes)
                return fail("BadSlot", in.id, "store lane out of range");
            return operand_type_is(in, in.args[0], Type{g.type.scalar, 1}, types);
        }
        case Op::Call:
            return check_call(in, types);
        case Op::FpExt: {
            if (!require_args(1))
                return false;
            if (!(in.type.scalar == Scalar::F32))
                return fail("TypeError", in.id, "fpext result must be f32-based");
            return operand_type_is(in, in.args[0], Type{Scalar::F16, in.type.lanes}, types);
        }
        case Op::FpTrunc: {
            if (!require_args(1))
                return false;
            if (!(in.type.scalar == Scalar::F16))
                return fail("TypeError", in.id, "fptrunc result must be f16-based");
            return operand_type_is(in, in.args[0], Type{Scalar::F32, in.type.lanes}, types);
        }
        case Op::Bitcast: {
            if (!require_args(1))
                return false;
            auto t0 = otype(in.args[0]);
            if (!t0)
                return fail("BadOperand", in.id, "unresolved bitcast operand");
            if (t0->lanes != in.type.lanes || (t0->scalar == Scalar::F16) != in.type.is_f16())
                return fail("TypeError", in.id, "bitcast must preserve bit width");
            return true;
        }
        case Op::IToF: {
            if (!require_args(1))
                return false;
            if (!(in.type == f32(in.type.lanes)) || in.type.lanes != 1)
                return fail("TypeError", in.id, "itof is scalar i32 -> f32");
            return operand_type_is(in, in.args[0], i32(), types);
        }
        case Op::FToI: {
            if (!require_args(1))
                return false;
            if (!(in.type == i32()))
                return fail("TypeError", in.id, "ftoi is scalar f32 -> i32");
            return operand_type_is(in, in.args[0], f32(), types);
        }
        case Op::Extract: {
            if (!require_args(2))
                return false;
            auto t0 = otype(in.args[0]);
            if (!t0 || t0->lanes < 2)
                return fail("TypeError", in.id, "extract needs a vector operand");
            if (!in.args[1].is_const || !(in.args[1].c.type == i32()))
                return fail("BadOperand", in.id, "extract lane must be a constant i32");
            uint32_t lane = in.args[1].c.bits[0];
            if (lane >= t0->lanes)
                return fail("BadOperand", in.id, "extract lane out of range");
            if (!(in.type == Type{t0->scalar, 1}))
                return fail("TypeError", in.id, "extract result type mismatch");
            return true;
        }
        case Op::Insert: {
            if (!require_args(3))
                return false;
            if (in.type.lanes < 2)
                return fail("TypeError", in.id, "insert result must be a vector");
            if (!operand_type_is(in, in.args[0], in.type, types))
                return false;
            if (!operand_type_is(in, in.args[1], Type{in.type.scalar, 1}, types))
                return false;
            if (!in.args[2].is_const || !(in.args[2].c.type == i32()))
                return fail("BadOperand", in.id, "insert lane must be a constant i32");
            if (in.args[2].c.bits[0] >= in.type.lanes)
                return fail("BadOperand", in.id, "insert lane out of range");
            return true;
        }
        case Op::Br:
            return true;
        case Op::CondBr: {
            if (!require_args(1))
                return false;
            return operand_type_is(in, in.args[0], i1(), types);
        }
        case Op::Switch: {
            if (!require_args(1))
                return false;
            if (!operand_type_is(in, in.args[0], i32(), types))
                return false;
            std::set<int32_t> vals;
            for (auto &[v, tgt] : in.sw_cases) {
                (void)tgt;
                if (!vals.insert(v).second)
                    return fail("BadOperand", in.id, "duplicate switch case value");
            }
            return true;
        }
        case Op::Ret:
            return require_args(0);
        }
        return fail("BadOperand", in.id, "unknown opcode");
    }

    bool check_call(const Inst &in, const std::unordered_map<uint32_t, Type> &types) {
        auto scalar_f32 = [&](const Operand &o) { return operand_type_is(in, o, f32(), types); };
        switch (in.intr) {
        case Intrinsic::FGet: {
            if (!in.args.empty())
                return fail("BadOperand", in.id, "fget takes slot/lane only");
            if (in.slot >= m.globals.size() || m.globals[in.slot].role != Role::Input)
                return fail("BadSlot", in.id, "fget requires an input slot");
            const GlobalSlot &g = m.globals[in.slot];
            if (in.lane >= g.type.lanes)
                return fail("BadSlot", in.id, "fget lane out of range");
            if (!(in.type == Type{g.type.scalar, 1}))
                return fail("TypeError", in.id, "fget type must match slot scalar type");
            return true;
        }
        case Intrinsic::FSet: {
            if (in.args.size() != 1)
                return fail("BadOperand", in.id, "fset takes one value");
            if (in.slot >= m.globals.size() || m.globals[in.slot].role != Role::Output)
                return fail("BadSlot", in.id, "fset requires an output slot");
            const GlobalSlot &g = m.globals[in.slot];
            if (in.lane >= g.type.lanes)
                return fail("BadSlot", in.id, "fset lane out of range");
            return operand_type_is(in, in.args[0], Type{g.type.scalar, 1}, types);
        }
        case Intrinsic::Sampler: {
            if (in.args.size() != 4)
                return fail("BadOperand", in.id, "sampler takes (unit, cx, cy, lod)");
            if (!in.args[0].is_const || !(in.args[0].c.type == i32()))
                return fail("BadOperand", in.id, "sampler unit must be a constant i32");
            if (!scalar_f32(in.args[1]) || !scalar_f32(in.args[2]) || !scalar_f32(in.args[3]))
                return false;
            if (!(in.type == f32(4)))
                return fail("TypeError", in.id, "sampler returns <4 x f32>");
            return true;
        }
        case Intrinsic::Min:
        case Intrinsic::Max: {
            if (in.args.size() != 2)
                return fail("BadOperand", in.id, "min/max take two operands");
            if (!scalar_f32(in.args[0]) || !scalar_f32(in.args[1]))
                return false;
            if (!(in.type == f32()))
                return fail("TypeError", in.id, "min/max return f32");
            return true;
        }
        default: { // Rsq, Abs, Sin, Cos, Floor, Sqrt
            if (in.args.size() != 1)
                return fail("BadOperand", in.id, "unary intrinsic takes one operand");
            if (!scalar_f32(in.args[0]))
                return false;
            if (!(in.type == f32()))
                return fail("TypeError", in.id, "unary intrinsic returns f32");
            return true;
        }
        }
    }
};

} // namespace

std::optional<VerifyError> verify(const Module &m) {
    Verifier v{m, std::nullopt};
    std::set<std::string> names;
    for (auto &g : m.globals) {
        if (!names.insert(g.name).second) {
            v.fail("BadSlot", 0, "duplicate global '" + g.name + "'");
            return v.err;
        }
        if (g.type.lanes < 1 || g.type.lanes > 4) {
            v.fail("BadSlot", 0, "global lane count out of range");
            return v.err;
        }
    }
    if (!m.main()) {
        v.fail("BadBlock", 0, "module has no main function");
        return v.err;
    }
    for (auto &fn : m.functions)
        if (!v.check_function(fn))
            return v.err;
    return v.err;
}

Module canonicalize(const Module &m) {
    Module out = m;
    std::unordered_map<uint32_t, uint32_t> vmap, bmap;
    uint32_t nv = 0, nb = 0;
    for (auto &fn : out.functions) {
        for (auto &b : fn.blocks) {
            bmap[b.id] = nb++;
            for (auto &in : b.insts)
                vmap[in.id] = nv++;
            vmap[b.term.id] = nv++;
        }
    }
    auto remap_inst = [&](Inst &in) {
        in.id = vmap[in.id];
        for (auto &o : in.args)
            if (!o.is_const)
                o.id = vmap[o.id];
        for (auto &pb : in.phi_blocks)
            pb = bmap[pb];
        if (in.op == Op::Br || in.op == Op::CondBr || in.op == Op::Switch) {
            in.t_true = bmap[in.t_true];
            in.t_false = bmap[in.t_false];
            for (auto &[v, tgt] : in.sw_cases)
                tgt = bmap[tgt];
        }
    };
    for (auto &fn : out.functions) {
        for (auto &b : fn.blocks) {
            b.id = bmap[b.id];
            for (auto &in : b.insts)
                remap_inst(in);
            remap_inst(b.term);
        }
    }
    out.next_value_id = nv;
    out.next_block_id = nb;
    return out;
}

} // namespace mshade::ir
