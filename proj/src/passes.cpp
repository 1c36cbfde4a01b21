#include "mshade/opt/passes.hpp"
#include "mshade/ir/text.hpp"
#include "mshade/support/fp.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace mshade::opt {

using namespace mshade::ir;

const char *pass_name(PassId p) {
    switch (p) {
    case PassId::ConstFold:
        return "ConstFold";
    case PassId::Dce:
        return "Dce";
    case PassId::InstCombine:
        return "InstCombine";
    case PassId::Peephole:
        return "Peephole";
    case PassId::CfgSimplify:
        return "CfgSimplify";
    case PassId::LoopUnroll:
        return "LoopUnroll";
    case PassId::LoopSplit:
        return "LoopSplit";
    case PassId::HalfPromote:
        return "HalfPromote";
    }
    return "?";
}

std::optional<PassId> pass_from_name(const std::string &n) {
    for (int i = 0; i <= static_cast<int>(PassId::HalfPromote); i++)
        if (n == pass_name(static_cast<PassId>(i)))
            return static_cast<PassId>(i);
    return std::nullopt;
}

const char *bug_name(BugId b) {
    switch (b) {
    case BugId::DceDropsLiveStore:
        return "dce_drops_live_store";
    case BugId::InstCombineWrongIdentity:
        return "instcombine_wrong_identity";
    case BugId::PeepholeNullDeref:
        return "peephole_null_deref";
    case BugId::UnrollNonterminating:
        return "unroll_nonterminating";
    }
    return "?";
}

std::optional<BugId> bug_from_name(const std::string &n) {
    for (int i = 0; i <= static_cast<int>(BugId::UnrollNonterminating); i++)
        if (n == bug_name(static_cast<BugId>(i)))
            return static_cast<BugId>(i);
    return std::nullopt;
}

PipelineConfig PipelineConfig::default_config() {
    PipelineConfig cfg;
    cfg.passes = {PassId::HalfPromote, PassId::ConstFold,  PassId::InstCombine,
                  PassId::Peephole,    PassId::CfgSimplify, PassId::LoopUnroll,
                  PassId::LoopSplit,   PassId::Dce};
    return cfg;
}

bool PipelineConfig::valid() const {
    if (fixpoint_budget < 1 || passes.empty())
        return false;
    int hp = -1, first_arith = -1;
    for (size_t i = 0; i < passes.size(); i++) {
        if (passes[i] == PassId::HalfPromote && hp < 0)
            hp = static_cast<int>(i);
        if ((passes[i] == PassId::ConstFold || passes[i] == PassId::InstCombine ||
             passes[i] == PassId::Peephole) &&
            first_arith < 0)
            first_arith = static_cast<int>(i);
    }
    if (hp >= 0 && first_arith >= 0 && hp > first_arith)
        return false;
    return true;
}

// ---------------------------------------------------------------------------
// Shared pass machinery

namespace {

struct PassCtx {
    bool dce_drop = false;
    bool ic_wrong = false;
    bool peephole_fault = false;
    bool unroll_nonterm = false;
};

struct PassOut {
    Module m;
    bool changed = false;
    std::optional<std::string> fault;
};

std::unordered_map<uint32_t, int> use_counts(const Function &fn) {
    std::unordered_map<uint32_t, int> uses;
    auto scan = [&](const Inst &in) {
        for (auto &o : in.args)
            if (!o.is_const)
                uses[o.id]++;
    };
    for (auto &b : fn.blocks) {
        for (auto &in : b.insts)
            scan(in);
        scan(b.term);
    }
    return uses;
}

// Replaces value references through the map (chases chains).
void apply_rauw(Function &fn, const std::unordered_map<uint32_t, Operand> &map) {
    if (map.empty())
        return;
    auto resolve = [&](Operand o) {
        int guard = 0;
        while (!o.is_const && guard++ < 64) {
            auto it = map.find(o.id);
            if (it == map.end())
                break;
            o = it->second;
        }
        return o;
    };
    for (auto &b : fn.blocks) {
        for (auto &in : b.insts)
            for (auto &o : in.args)
                o = resolve(o);
        for (auto &o : b.term.args)
            o = resolve(o);
    }
}

void erase_insts(Function &fn, const std::unordered_set<uint32_t> &dead) {
    if (dead.empty())
        return;
    for (auto &b : fn.blocks) {
        std::vector<Inst> kept;
        kept.reserve(b.insts.size());
        for (auto &in : b.insts)
            if (!dead.count(in.id))
                kept.push_back(std::move(in));
        b.insts = std::move(kept);
    }
}

bool is_const_zero_f(const Operand &o) {
    if (!o.is_const || o.c.undef || !o.c.type.is_float())
        return false;
    for (int i = 0; i < o.c.type.lanes; i++)
        if (o.c.bits[i] != 0)
            return false;
    return true;
}

bool is_const_one_f(const Operand &o) {
    if (!o.is_const || o.c.undef || !o.c.type.is_float())
        return false;
    uint32_t one = o.c.type.is_f16() ? 0x3C00u : f32_bits(1.0f);
    for (int i = 0; i < o.c.type.lanes; i++)
        if (o.c.bits[i] != one)
            return false;
    return true;
}

bool is_const_int(const Operand &o, int32_t v) {
    if (!o.is_const || o.c.undef || o.c.type.is_float() || o.c.type.scalar == Scalar::I1)
        return false;
    for (int i = 0; i < o.c.type.lanes; i++)
        if (o.c.bits[i] != static_cast<uint32_t>(v))
            return false;
    return true;
}

// ---------------------------------------------------------------------------
// Constant folding

float f16_as_f32(uint32_t bits) { return bits_f32(f16_to_f32(static_cast<uint16_t>(bits))); }

uint32_t f32_as_lane(Scalar sc, float v) {
    return sc == Scalar::F16 ? f32_to_f16(f32_bits(v)) : f32_bits(v);
}

std::optional<Constant> fold_inst(const Inst &in) {
    for (auto &o : in.args)
        if (!o.is_const || o.c.undef)
            return std::nullopt;
    auto fval = [&](const Operand &o, int lane) {
        return o.c.type.is_f16() ? f16_as_f32(o.c.bits[lane]) : bits_f32(o.c.bits[lane]);
    };
    Constant r;
    r.type = in.type;
    switch (in.op) {
    case Op::FAdd:
    case Op::FSub:
    case Op::FMul:
    case Op::FDiv: {
        for (int i = 0; i < in.type.lanes; i++) {
            float a = fval(in.args[0], i), b = fval(in.args[1], i);
            float v = in.op == Op::FAdd   ? a + b
                      : in.op == Op::FSub ? a - b
                      : in.op == Op::FMul ? a * b
                                          : a / b;
            r.bits[i] = f32_as_lane(in.type.scalar, v);
        }
        return r;
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul: {
        for (int i = 0; i < in.type.lanes; i++) {
            uint32_t a = in.args[0].c.bits[i], b = in.args[1].c.bits[i];
            r.bits[i] = in.op == Op::Add ? a + b : in.op == Op::Sub ? a - b : a * b;
        }
        return r;
    }
    case Op::Div: {
        for (int i = 0; i < in.type.lanes; i++) {
            int32_t a = static_cast<int32_t>(in.args[0].c.bits[i]);
            int32_t b = static_cast<int32_t>(in.args[1].c.bits[i]);
            if (b == 0)
                return std::nullopt; // folding would erase the runtime trap
            r.bits[i] = (a == INT32_MIN && b == -1)
                            ? static_cast<uint32_t>(INT32_MIN)
                            : static_cast<uint32_t>(a / b);
        }
        return r;
    }
    case Op::ICmp: {
        int32_t a = static_cast<int32_t>(in.args[0].c.bits[0]);
        int32_t b = static_cast<int32_t>(in.args[1].c.bits[0]);
        bool v = false;
        switch (in.cmp) {
        case Cmp::Eq:
            v = a == b;
            break;
        case Cmp::Ne:
            v = a != b;
            break;
        case Cmp::Slt:
            v = a < b;
            break;
        case Cmp::Sle:
            v = a <= b;
            break;
        case Cmp::Sgt:
            v = a > b;
            break;
        default:
            v = a >= b;
            break;
        }
        r.bits[0] = v ? 1 : 0;
        return r;
    }
    case Op::FCmp: {
        float a = fval(in.args[0], 0), b = fval(in.args[1], 0);
        bool v = false;
        switch (in.cmp) {
        case Cmp::Oeq:
            v = a == b;
            break;
        case Cmp::Une:
            v = a != b;
            break;
        case Cmp::Olt:
            v = a < b;
            break;
        case Cmp::Ole:
            v = a <= b;
            break;
        case Cmp::Ogt:
            v = a > b;
            break;
        default:
            v = a >= b;
            break;
        }
        r.bits[0] = v ? 1 : 0;
        return r;
    }
    case Op::Select:
        return (in.args[0].c.bits[0] & 1) ? in.args[1].c : in.args[2].c;
    case Op::Extract:
        r.type = Type{in.args[0].c.type.scalar, 1};
        r.bits[0] = in.args[0].c.bits[in.args[1].c.bits[0]];
        return r;
    case Op::Insert:
        r = in.args[0].c;
        r.bits[in.args[2].c.bits[0]] = in.args[1].c.bits[0];
        return r;
    case Op::IToF:
        r.bits[0] = f32_bits(static_cast<float>(static_cast<int32_t>(in.args[0].c.bits[0])));
        return r;
    case Op::FToI:
        r.bits[0] = static_cast<uint32_t>(f32_to_i32(bits_f32(in.args[0].c.bits[0])));
        return r;
    case Op::FpExt:
        for (int i = 0; i < in.type.lanes; i++)
            r.bits[i] = f16_to_f32(static_cast<uint16_t>(in.args[0].c.bits[i]));
        return r;
    case Op::FpTrunc:
        for (int i = 0; i < in.type.lanes; i++)
            r.bits[i] = f32_to_f16(in.args[0].c.bits[i]);
        return r;
    case Op::Bitcast:
        r = in.args[0].c;
        r.type = in.type;
        return r;
    case Op::Call: {
        float v;
        switch (in.intr) {
        case Intrinsic::Rsq:
            v = rtmath::rsq(fval(in.args[0], 0));
            break;
        case Intrinsic::Min:
            v = rtmath::fmin_(fval(in.args[0], 0), fval(in.args[1], 0));
            break;
        case Intrinsic::Max:
            v = rtmath::fmax_(fval(in.args[0], 0), fval(in.args[1], 0));
            break;
        case Intrinsic::Abs:
            v = rtmath::abs_(fval(in.args[0], 0));
            break;
        case Intrinsic::Sin:
            v = rtmath::sin_(fval(in.args[0], 0));
            break;
        case Intrinsic::Cos:
            v = rtmath::cos_(fval(in.args[0], 0));
            break;
        case Intrinsic::Floor:
            v = rtmath::floor_(fval(in.args[0], 0));
            break;
        case Intrinsic::Sqrt:
            v = rtmath::sqrt_(fval(in.args[0], 0));
            break;
        default:
            return std::nullopt; // fget/fset/load/sampler depend on the env
        }
        r.bits[0] = f32_bits(v);
        return r;
    }
    default:
        return std::nullopt;
    }
}

PassOut pass_const_fold(const Module &m_in, const PassCtx &) {
    PassOut out{m_in, false, std::nullopt};
    for (auto &fn : out.m.functions) {
        std::unordered_map<uint32_t, Operand> repl;
        std::unordered_set<uint32_t> dead;
        for (auto &b : fn.blocks) {
            for (auto &in : b.insts) {
                if (!in.has_result() || in.op == Op::Phi)
                    continue;
                // fold through operands already replaced this round
                Inst probe = in;
                for (auto &o : probe.args)
                    if (!o.is_const) {
                        auto it = repl.find(o.id);
                        if (it != repl.end())
                            o = it->second;
                    }
                if (auto c = fold_inst(probe)) {
                    repl[in.id] = Operand::constant(*c);
                    dead.insert(in.id);
                    out.changed = true;
                }
            }
        }
        apply_rauw(fn, repl);
        erase_insts(fn, dead);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dead code elimination

bool has_side_effects(const Inst &in) {
    if (in.op == Op::Store)
        return true;
    if (in.op == Op::Call && in.intr == Intrinsic::FSet)
        return true;
    return false;
}

PassOut pass_dce(const Module &m_in, const PassCtx &ctx) {
    PassOut out{m_in, false, std::nullopt};
    for (auto &fn : out.m.functions) {
        if (ctx.dce_drop) {
            // Injected fault: an fadd fed by a multiply-by-zero is "dead";
            // its uses collapse to undef (the over-aggressive DCE class).
            std::unordered_map<uint32_t, Operand> repl;
            std::unordered_set<uint32_t> dead;
            std::unordered_map<uint32_t, const Inst *> defs;
            for (auto &b : fn.blocks)
                for (auto &in : b.insts)
                    defs[in.id] = &in;
            for (auto &b : fn.blocks) {
                for (auto &in : b.insts) {
                    if (in.op != Op::FAdd)
                        continue;
                    bool trigger = false;
                    for (auto &o : in.args) {
                        if (o.is_const)
                            continue;
                        auto it = defs.find(o.id);
                        if (it == defs.end() || it->second->op != Op::FMul)
                            continue;
                        for (auto &mo : it->second->args)
                            if (is_const_zero_f(mo))
                                trigger = true;
                    }
                    if (trigger) {
                        repl[in.id] = Operand::constant(undef_of(in.type));
                        dead.insert(in.id);
                        out.changed = true;
                    }
                }
            }
            apply_rauw(fn, repl);
            erase_insts(fn, dead);
        }

        for (;;) {
            auto uses = use_counts(fn);
            std::unordered_set<uint32_t> dead;
            for (auto &b : fn.blocks)
                for (auto &in : b.insts)
                    if (!has_side_effects(in) && uses[in.id] == 0)
                        dead.insert(in.id);
            if (dead.empty())
                break;
            erase_insts(fn, dead);
            out.changed = true;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Instruction combining (exact rewrites only)

PassOut pass_inst_combine(const Module &m_in, const PassCtx &ctx) {
    PassOut out{m_in, false, std::nullopt};
    for (auto &fn : out.m.functions) {
        std::unordered_map<uint32_t, const Inst *> defs;
        std::unordered_map<uint32_t, int> fadd_users; // value -> #fadd uses
        for (auto &b : fn.blocks)
            for (auto &in : b.insts) {
                defs[in.id] = &in;
                if (in.op == Op::FAdd)
                    for (auto &o : in.args)
                        if (!o.is_const)
                            fadd_users[o.id]++;
            }

        std::unordered_map<uint32_t, Operand> repl;
        std::unordered_set<uint32_t> dead;
        auto rewrite = [&](const Inst &in, Operand to) {
            repl[in.id] = to;
            dead.insert(in.id);
            out.changed = true;
        };

        for (auto &b : fn.blocks) {
            for (auto &in : b.insts) {
                if (dead.count(in.id))
                    continue;
                switch (in.op) {
                case Op::FMul: {
                    int one = is_const_one_f(in.args[0]) ? 0 : is_const_one_f(in.args[1]) ? 1 : -1;
                    if (one >= 0) {
                        Operand other = in.args[1 - one];
                        if (ctx.ic_wrong && !other.is_const && fadd_users.count(in.id)) {
                            // Injected fault: x*1.0 "simplifies" to 0.0 when the
                            // product feeds an addition.
                            Constant z;
                            z.type = in.type;
                            for (int i = 0; i < in.type.lanes; i++)
                                z.bits[i] = 0;
                            rewrite(in, Operand::constant(z));
                        } else {
                            rewrite(in, other);
                        }
                    }
                    break;
                }
                case Op::FDiv:
                    if (is_const_one_f(in.args[1]))
                        rewrite(in, in.args[0]);
                    break;
                case Op::FSub:
                    if (is_const_zero_f(in.args[1]))
                        rewrite(in, in.args[0]);
                    break;
                case Op::Add:
                    if (is_const_int(in.args[0], 0))
                        rewrite(in, in.args[1]);
                    else if (is_const_int(in.args[1], 0))
                        rewrite(in, in.args[0]);
                    break;
                case Op::Sub:
                    if (is_const_int(in.args[1], 0))
                        rewrite(in, in.args[0]);
                    break;
                case Op::Mul: {
                    if (is_const_int(in.args[0], 1))
                        rewrite(in, in.args[1]);
                    else if (is_const_int(in.args[1], 1))
                        rewrite(in, in.args[0]);
                    else if (is_const_int(in.args[0], 0) || is_const_int(in.args[1], 0)) {
                        Constant z;
                        z.type = in.type;
                        for (int i = 0; i < in.type.lanes; i++)
                            z.bits[i] = 0;
                        rewrite(in, Operand::constant(z));
                    }
                    break;
                }
                case Op::Div:
                    if (is_const_int(in.args[1], 1))
                        rewrite(in, in.args[0]);
                    break;
                case Op::Select: {
                    if (in.args[0].is_const && !in.args[0].c.undef) {
                        rewrite(in, (in.args[0].c.bits[0] & 1) ? in.args[1] : in.args[2]);
                        break;
                    }
                    const Operand &a = in.args[1], &bo = in.args[2];
                    if (!a.is_const && !bo.is_const && a.id == bo.id)
                        rewrite(in, a);
                    else if (a.is_const && bo.is_const && !a.c.undef && a.c == bo.c)
                        rewrite(in, a);
                    break;
                }
                case Op::Bitcast: {
                    // same-type bitcast is an identity move
                    if (!in.args[0].is_const) {
                        auto it = defs.find(in.args[0].id);
                        if (it != defs.end() && it->second->type == in.type)
                            rewrite(in, in.args[0]);
                    }
                    break;
                }
                case Op::Extract: {
                    if (in.args[0].is_const)
                        break;
                    auto it = defs.find(in.args[0].id);
                    if (it == defs.end() || it->second->op != Op::Insert)
                        break;
                    const Inst &ins = *it->second;
                    uint32_t want = in.args[1].c.bits[0];
                    uint32_t got = ins.args[2].c.bits[0];
                    if (want == got)
                        rewrite(in, ins.args[1]);
                    break;
                }
                default:
                    break;
                }
            }
        }
        apply_rauw(fn, repl);
        erase_insts(fn, dead);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Peephole: in-block load/fget reuse and dead output-store elimination

PassOut pass_peephole(const Module &m_in, const PassCtx &ctx) {
    PassOut out{m_in, false, std::nullopt};
    if (ctx.peephole_fault) {
        // Injected fault: the fmul-by-zero -> fadd pair dereferences a null
        // pattern-table entry.
        for (auto &fn : out.m.functions) {
            std::unordered_map<uint32_t, const Inst *> defs;
            for (auto &b : fn.blocks)
                for (auto &in : b.insts)
                    defs[in.id] = &in;
            for (auto &b : fn.blocks)
                for (auto &in : b.insts) {
                    if (in.op != Op::FAdd)
                        continue;
                    for (auto &o : in.args) {
                        if (o.is_const)
                            continue;
                        auto it = defs.find(o.id);
                        if (it == defs.end() || it->second->op != Op::FMul)
                            continue;
                        for (auto &mo : it->second->args)
                            if (is_const_zero_f(mo)) {
                                out.fault = "null pattern-table entry for fmul/fadd pair";
                                return out;
                            }
                    }
                }
        }
    }
    for (auto &fn : out.m.functions) {
        std::unordered_map<uint32_t, Operand> repl;
        std::unordered_set<uint32_t> dead;
        for (auto &b : fn.blocks) {
            // reuse identical fget/load results within a block
            std::map<std::tuple<int, uint32_t, uint32_t>, uint32_t> seen; // (kind, slot, lane)
            for (auto &in : b.insts) {
                bool is_fget = in.op == Op::Call && in.intr == Intrinsic::FGet;
                bool is_load = in.op == Op::Load;
                if (!is_fget && !is_load)
                    continue;
                auto key = std::make_tuple(is_fget ? 0 : 1, in.slot, in.lane);
                auto it = seen.find(key);
                if (it == seen.end()) {
                    seen[key] = in.id;
                } else {
                    repl[in.id] = Operand::value(it->second);
                    dead.insert(in.id);
                    out.changed = true;
                }
            }
            // a store overwritten later in the same block is dead
            std::map<std::pair<uint32_t, uint32_t>, uint32_t> last_write; // (slot,lane) -> id
            for (auto &in : b.insts) {
                bool is_write = in.op == Op::Store ||
                                (in.op == Op::Call && in.intr == Intrinsic::FSet);
                if (!is_write)
                    continue;
                auto key = std::make_pair(in.slot, in.lane);
                auto it = last_write.find(key);
                if (it != last_write.end()) {
                    dead.insert(it->second);
                    out.changed = true;
                }
                last_write[key] = in.id;
            }
        }
        apply_rauw(fn, repl);
        erase_insts(fn, dead);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CFG simplification

PassOut pass_cfg_simplify(const Module &m_in, const PassCtx &) {
    PassOut out{m_in, false, std::nullopt};
    for (auto &fn : out.m.functions) {
        // 1. constant branches become unconditional
        for (auto &b : fn.blocks) {
            Inst &t = b.term;
            if (t.op == Op::CondBr && t.args[0].is_const && !t.args[0].c.undef) {
                uint32_t target = (t.args[0].c.bits[0] & 1) ? t.t_true : t.t_false;
                Inst nt;
                nt.op = Op::Br;
                nt.id = t.id;
                nt.t_true = target;
                b.term = std::move(nt);
                out.changed = true;
            } else if (t.op == Op::Switch && t.args[0].is_const && !t.args[0].c.undef) {
                int32_t v = static_cast<int32_t>(t.args[0].c.bits[0]);
                uint32_t target = t.t_false;
                for (auto &[cv, tgt] : t.sw_cases)
                    if (cv == v) {
                        target = tgt;
                        break;
                    }
                Inst nt;
                nt.op = Op::Br;
                nt.id = t.id;
                nt.t_true = target;
                b.term = std::move(nt);
                out.changed = true;
            }
        }

        // 2. drop unreachable blocks
        std::set<uint32_t> reach;
        std::vector<uint32_t> work{fn.blocks.empty() ? 0 : fn.blocks[0].id};
        while (!work.empty()) {
            uint32_t id = work.back();
            work.pop_back();
            if (!reach.insert(id).second)
                continue;
            const Block *b = fn.find_block(id);
            if (!b)
                continue;
            const Inst &t = b->term;
            if (t.op == Op::Br)
                work.push_back(t.t_true);
            else if (t.op == Op::CondBr) {
                work.push_back(t.t_true);
                work.push_back(t.t_false);
            } else if (t.op == Op::Switch) {
                work.push_back(t.t_false);
                for (auto &[v, tgt] : t.sw_cases)
                    work.push_back(tgt);
            }
        }
        if (reach.size() != fn.blocks.size()) {
            std::vector<Block> kept;
            for (auto &b : fn.blocks)
                if (reach.count(b.id))
                    kept.push_back(std::move(b));
                else
                    out.changed = true;
            fn.blocks = std::move(kept);
        }

        // 3. phi incomings must match the actual predecessor sets
        std::map<uint32_t, std::set<uint32_t>> preds;
        for (auto &b : fn.blocks) {
            const Inst &t = b.term;
            if (t.op == Op::Br)
                preds[t.t_true].insert(b.id);
            else if (t.op == Op::CondBr) {
                preds[t.t_true].insert(b.id);
                preds[t.t_false].insert(b.id);
            } else if (t.op == Op::Switch) {
                preds[t.t_false].insert(b.id);
                for (auto &[v, tgt] : t.sw_cases)
                    preds[tgt].insert(b.id);
            }
        }
        std::unordered_map<uint32_t, Operand> repl;
        std::unordered_set<uint32_t> dead;
        for (auto &b : fn.blocks) {
            for (auto &in : b.insts) {
                if (in.op != Op::Phi)
                    continue;
                std::vector<Operand> args;
                std::vector<uint32_t> blocks;
                for (size_t i = 0; i < in.phi_blocks.size(); i++) {
                    if (preds[b.id].count(in.phi_blocks[i])) {
                        args.push_back(in.args[i]);
                        blocks.push_back(in.phi_blocks[i]);
                    } else {
                        out.changed = true;
                    }
                }
                in.args = std::move(args);
                in.phi_blocks = std::move(blocks);
                if (in.phi_blocks.size() == 1) {
                    // single-predecessor phi is a copy
                    repl[in.id] = in.args[0];
                    dead.insert(in.id);
                    out.changed = true;
                }
            }
        }
        apply_rauw(fn, repl);
        erase_insts(fn, dead);

        // 4. merge straight-line pairs: A ends `br B`, B has A as only pred
        bool merged = true;
        while (merged) {
            merged = false;
            for (auto &a : fn.blocks) {
                if (a.term.op != Op::Br)
                    continue;
                uint32_t bid = a.term.t_true;
                if (bid == a.id || bid == fn.blocks[0].id) // keep the entry block
                    continue;
                Block *bptr = fn.find_block(bid);
                if (!bptr)
                    continue;
                int pred_count = 0;
                for (auto &p : fn.blocks) {
                    const Inst &t = p.term;
                    auto counts = [&](uint32_t tgt) { return tgt == bid; };
                    if (t.op == Op::Br)
                        pred_count += counts(t.t_true);
                    else if (t.op == Op::CondBr)
                        pred_count += counts(t.t_true) + counts(t.t_false);
                    else if (t.op == Op::Switch) {
                        pred_count += counts(t.t_false);
                        for (auto &[v, tgt] : t.sw_cases)
                            pred_count += counts(tgt);
                    }
                }
                if (pred_count != 1)
                    continue;
                // B's phis were rewritten above (single pred); none remain
                bool has_phi = false;
                for (auto &in : bptr->insts)
                    if (in.op == Op::Phi)
                        has_phi = true;
                if (has_phi)
                    continue;
                for (auto &in : bptr->insts)
                    a.insts.push_back(std::move(in));
                a.term = bptr->term;
                // successors' phis that listed B now come from A
                for (auto &succ : fn.blocks)
                    for (auto &in : succ.insts)
                        if (in.op == Op::Phi)
                            for (auto &pb : in.phi_blocks)
                                if (pb == bid)
                                    pb = a.id;
                fn.blocks.erase(fn.blocks.begin() + (fn.find_block(bid) - &fn.blocks[0]));
                out.changed = true;
                merged = true;
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Counted-loop detection shared by unroll/split

struct CountedLoop {
    uint32_t header = 0;
    uint32_t body = 0;
    uint32_t preheader = 0;
    uint32_t exit = 0;
    uint32_t ind_phi = 0;
    uint32_t icmp_id = 0;
    int64_t init = 0, bound = 0, step = 0;
    bool inclusive = false;
    int64_t trips = 0;
};

std::vector<CountedLoop> find_counted_loops(Function &fn) {
    std::vector<CountedLoop> loops;
    std::map<uint32_t, std::vector<uint32_t>> preds;
    for (auto &b : fn.blocks) {
        const Inst &t = b.term;
        if (t.op == Op::Br)
            preds[t.t_true].push_back(b.id);
        else if (t.op == Op::CondBr) {
            preds[t.t_true].push_back(b.id);
            preds[t.t_false].push_back(b.id);
        } else if (t.op == Op::Switch) {
            preds[t.t_false].push_back(b.id);
            for (auto &[v, tgt] : t.sw_cases)
                preds[tgt].push_back(b.id);
        }
    }
    auto uses = use_counts(fn);

    for (auto &h : fn.blocks) {
        if (h.term.op != Op::CondBr || h.term.args[0].is_const)
            continue;
        // header layout: phis only, then a single icmp consumed by the branch
        size_t nphi = 0;
        while (nphi < h.insts.size() && h.insts[nphi].op == Op::Phi)
            nphi++;
        if (h.insts.size() != nphi + 1)
            continue;
        const Inst &cmp = h.insts[nphi];
        if (cmp.op != Op::ICmp || (cmp.cmp != Cmp::Slt && cmp.cmp != Cmp::Sle))
            continue;
        if (h.term.args[0].is_const || h.term.args[0].id != cmp.id || uses[cmp.id] != 1)
            continue;
        if (cmp.args[0].is_const || !cmp.args[1].is_const || cmp.args[1].c.undef)
            continue;
        uint32_t body_id = h.term.t_true;
        uint32_t exit_id = h.term.t_false;
        if (body_id == h.id || exit_id == h.id || body_id == exit_id)
            continue;
        Block *body = fn.find_block(body_id);
        if (!body || body->term.op != Op::Br || body->term.t_true != h.id)
            continue;
        if (preds[body_id].size() != 1 || preds[h.id].size() != 2)
            continue;
        uint32_t pre = preds[h.id][0] == body_id ? preds[h.id][1] : preds[h.id][0];
        if (pre == body_id)
            continue;
        // body must contain no phis
        bool body_phi = false;
        for (auto &in : body->insts)
            if (in.op == Op::Phi)
                body_phi = true;
        if (body_phi)
            continue;
        // the compared value is an induction phi: [pre -> const, body -> add(phi, +const)]
        const Inst *ind = nullptr;
        for (size_t i = 0; i < nphi; i++)
            if (h.insts[i].id == cmp.args[0].id)
                ind = &h.insts[i];
        if (!ind || ind->phi_blocks.size() != 2 || !(ind->type == i32()))
            continue;
        Operand init_op, latch_op;
        for (size_t i = 0; i < 2; i++) {
            if (ind->phi_blocks[i] == pre)
                init_op = ind->args[i];
            else if (ind->phi_blocks[i] == body_id)
                latch_op = ind->args[i];
        }
        if (!init_op.is_const || init_op.c.undef || latch_op.is_const)
            continue;
        const Inst *inc = nullptr;
        for (auto &in : body->insts)
            if (in.id == latch_op.id)
                inc = &in;
        if (!inc || inc->op != Op::Add)
            continue;
        int64_t step = 0;
        bool inc_ok = false;
        if (!inc->args[0].is_const && inc->args[0].id == ind->id && inc->args[1].is_const &&
            !inc->args[1].c.undef) {
            step = static_cast<int32_t>(inc->args[1].c.bits[0]);
            inc_ok = true;
        } else if (!inc->args[1].is_const && inc->args[1].id == ind->id &&
                   inc->args[0].is_const && !inc->args[0].c.undef) {
            step = static_cast<int32_t>(inc->args[0].c.bits[0]);
            inc_ok = true;
        }
        if (!inc_ok || step <= 0)
            continue;
        // all header phis must have exactly the two expected incomings
        bool phis_ok = true;
        for (size_t i = 0; i < nphi; i++)
            if (h.insts[i].phi_blocks.size() != 2)
                phis_ok = false;
        if (!phis_ok)
            continue;

        CountedLoop L;
        L.header = h.id;
        L.body = body_id;
        L.preheader = pre;
        L.exit = exit_id;
        L.ind_phi = ind->id;
        L.icmp_id = cmp.id;
        L.init = static_cast<int32_t>(init_op.c.bits[0]);
        L.bound = static_cast<int32_t>(cmp.args[1].c.bits[0]);
        L.step = step;
        L.inclusive = cmp.cmp == Cmp::Sle;
        int64_t limit = L.inclusive ? L.bound + 1 : L.bound;
        L.trips = L.init >= limit ? 0 : (limit - L.init + step - 1) / step;
        loops.push_back(L);
    }
    return loops;
}

Operand resolve_map(const std::unordered_map<uint32_t, Operand> &map, Operand o) {
    int guard = 0;
    while (!o.is_const && guard++ < 1024) {
        auto it = map.find(o.id);
        if (it == map.end())
            break;
        o = it->second;
    }
    return o;
}

PassOut pass_loop_unroll(const Module &m_in, const PassCtx &ctx) {
    PassOut out{m_in, false, std::nullopt};
    Function *fn = out.m.main();
    if (!fn)
        return out;
    auto loops = find_counted_loops(*fn);
    for (auto &L : loops) {
        if (ctx.unroll_nonterm && L.trips == 1) {
            // Injected fault: the trip-1 special case claims progress forever.
            out.changed = true;
            return out;
        }
        if (L.trips > 8)
            continue;

        Block *h = fn->find_block(L.header);
        Block *body = fn->find_block(L.body);

        struct PhiInfo {
            uint32_t id;
            Operand init, latch;
        };
        std::vector<PhiInfo> phis;
        for (auto &in : h->insts) {
            if (in.op != Op::Phi)
                break;
            PhiInfo pi;
            pi.id = in.id;
            for (size_t i = 0; i < in.phi_blocks.size(); i++) {
                if (in.phi_blocks[i] == L.preheader)
                    pi.init = in.args[i];
                else
                    pi.latch = in.args[i];
            }
            phis.push_back(pi);
        }

        std::unordered_map<uint32_t, Operand> cur; // phi id -> value this iteration
        for (auto &pi : phis)
            cur[pi.id] = pi.init;

        std::vector<Inst> unrolled;
        for (int64_t k = 0; k < L.trips; k++) {
            std::unordered_map<uint32_t, Operand> iter_map = cur;
            for (auto &in : body->insts) {
                Inst c = in;
                c.id = out.m.fresh_value();
                for (auto &o : c.args)
                    o = resolve_map(iter_map, o);
                iter_map[in.id] = Operand::value(c.id);
                unrolled.push_back(std::move(c));
            }
            std::unordered_map<uint32_t, Operand> next;
            for (auto &pi : phis)
                next[pi.id] = resolve_map(iter_map, pi.latch);
            cur = std::move(next);
        }

        // header becomes the straight-line unrolled chain ending at the exit
        h->insts = std::move(unrolled);
        Inst t;
        t.op = Op::Br;
        t.id = h->term.id;
        t.t_true = L.exit;
        h->term = std::move(t);

        // loop-exit uses of the phis see the final iteration's values
        std::unordered_map<uint32_t, Operand> repl;
        for (auto &pi : phis)
            repl[pi.id] = cur[pi.id];
        for (auto &b : fn->blocks) {
            if (b.id == L.body)
                continue;
            for (auto &in : b.insts)
                for (auto &o : in.args)
                    o = resolve_map(repl, o);
            for (auto &o : b.term.args)
                o = resolve_map(repl, o);
        }

        // drop the body block
        for (size_t i = 0; i < fn->blocks.size(); i++)
            if (fn->blocks[i].id == L.body) {
                fn->blocks.erase(fn->blocks.begin() + i);
                break;
            }
        out.changed = true;
        break; // one loop per invocation; the manager iterates
    }
    return out;
}

PassOut pass_loop_split(const Module &m_in, const PassCtx &) {
    PassOut out{m_in, false, std::nullopt};
    Function *fn = out.m.main();
    if (!fn)
        return out;
    auto loops = find_counted_loops(*fn);
    for (auto &L : loops) {
        if (L.trips < 9)
            continue;
        int64_t mid = L.trips / 2;
        int64_t mid_bound = L.init + mid * L.step;

        Block *h = fn->find_block(L.header);
        Block *body = fn->find_block(L.body);

        struct PhiInfo {
            uint32_t id;
            Operand init, latch;
        };
        std::vector<PhiInfo> phis;
        for (auto &in : h->insts) {
            if (in.op != Op::Phi)
                break;
            PhiInfo pi;
            pi.id = in.id;
            for (size_t i = 0; i < in.phi_blocks.size(); i++) {
                if (in.phi_blocks[i] == L.preheader)
                    pi.init = in.args[i];
                else
                    pi.latch = in.args[i];
            }
            phis.push_back(pi);
        }

        uint32_t h2_id = out.m.fresh_block();
        uint32_t b2_id = out.m.fresh_block();

        // second-loop headers: phi over [first-loop phi (from H), cloned latch (from B2)]
        std::unordered_map<uint32_t, Operand> phi2; // old phi id -> new phi value
        Block h2;
        h2.id = h2_id;
        std::unordered_map<uint32_t, Operand> clone_map; // old ids -> cloned operands
        for (auto &pi : phis) {
            Inst p;
            p.op = Op::Phi;
            p.id = out.m.fresh_value();
            phi2[pi.id] = Operand::value(p.id);
            h2.insts.push_back(std::move(p)); // type and incomings filled below
        }

        Block b2;
        b2.id = b2_id;
        for (auto &pi : phis)
            clone_map[pi.id] = phi2[pi.id];
        for (auto &in : body->insts) {
            Inst c = in;
            c.id = out.m.fresh_value();
            for (auto &o : c.args)
                o = resolve_map(clone_map, o);
            clone_map[in.id] = Operand::value(c.id);
            b2.insts.push_back(std::move(c));
        }
        Inst b2t;
        b2t.op = Op::Br;
        b2t.id = out.m.fresh_value();
        b2t.t_true = h2_id;
        b2.term = std::move(b2t);

        // now fix up the H2 phis
        for (size_t i = 0; i < phis.size(); i++) {
            Inst &p = h2.insts[i];
            const Inst *orig = nullptr;
            for (auto &in : h->insts)
                if (in.id == phis[i].id)
                    orig = &in;
            p.type = orig->type;
            p.args = {Operand::value(phis[i].id), resolve_map(clone_map, phis[i].latch)};
            p.phi_blocks = {L.header, b2_id};
        }
        // H2 compare + branch
        Inst cmp2;
        cmp2.op = Op::ICmp;
        cmp2.cmp = L.inclusive ? Cmp::Sle : Cmp::Slt;
        cmp2.type = i1();
        cmp2.id = out.m.fresh_value();
        cmp2.args = {phi2[L.ind_phi], Operand::constant(const_i32(static_cast<int32_t>(L.bound)))};
        uint32_t cmp2_id = cmp2.id;
        h2.insts.push_back(std::move(cmp2));
        Inst h2t;
        h2t.op = Op::CondBr;
        h2t.id = out.m.fresh_value();
        h2t.args = {Operand::value(cmp2_id)};
        h2t.t_true = b2_id;
        h2t.t_false = L.exit;
        h2.term = std::move(h2t);

        // first loop now stops at the midpoint and falls into the second loop
        for (auto &in : h->insts)
            if (in.id == L.icmp_id) {
                in.cmp = Cmp::Slt;
                in.args[1] = Operand::constant(const_i32(static_cast<int32_t>(mid_bound)));
            }
        h->term.t_false = h2_id;

        // post-loop uses switch to the second loop's phis
        for (auto &b : fn->blocks) {
            if (b.id == L.header || b.id == L.body)
                continue;
            for (auto &in : b.insts) {
                for (auto &o : in.args)
                    o = resolve_map(phi2, o);
                if (in.op == Op::Phi)
                    for (auto &pb : in.phi_blocks)
                        if (pb == L.header)
                            pb = h2_id;
            }
            for (auto &o : b.term.args)
                o = resolve_map(phi2, o);
        }

        // place the new blocks after the original body
        size_t at = 0;
        for (size_t i = 0; i < fn->blocks.size(); i++)
            if (fn->blocks[i].id == L.body)
                at = i + 1;
        fn->blocks.insert(fn->blocks.begin() + at, std::move(h2));
        fn->blocks.insert(fn->blocks.begin() + at + 1, std::move(b2));

        out.changed = true;
        break; // one split per invocation
    }
    return out;
}

// ---------------------------------------------------------------------------
// Half-precision promotion

PassOut pass_half_promote(const Module &m_in, const PassCtx &) {
    PassOut out{m_in, false, std::nullopt};
    for (auto &fn : out.m.functions) {
        std::unordered_map<uint32_t, Operand> repl;
        std::unordered_set<uint32_t> dead;
        auto widen_const = [&](Constant &c) {
            if (!c.type.is_f16())
                return;
            Type to{Scalar::F32, c.type.lanes};
            if (!c.undef)
                for (int i = 0; i < c.type.lanes; i++)
                    c.bits[i] = f16_to_f32(static_cast<uint16_t>(c.bits[i]));
            c.type = to;
        };
        for (auto &b : fn.blocks) {
            for (auto &in : b.insts) {
                if (in.op == Op::FpTrunc) {
                    // remove; consumers read the full-precision value
                    repl[in.id] = in.args[0];
                    dead.insert(in.id);
                    out.changed = true;
                    continue;
                }
                if (in.op == Op::FpExt) {
                    if (in.args[0].is_const) {
                        Constant c = in.args[0].c;
                        widen_const(c);
                        repl[in.id] = Operand::constant(c);
                        dead.insert(in.id);
                    } else {
                        // operand is promoted to f32; the extension is an identity move
                        in.op = Op::Bitcast;
                    }
                    out.changed = true;
                    continue;
                }
                if (in.type.is_f16()) {
                    in.type.scalar = Scalar::F32;
                    out.changed = true;
                }
                for (auto &o : in.args)
                    if (o.is_const && o.c.type.is_f16()) {
                        widen_const(o.c);
                        out.changed = true;
                    }
            }
        }
        apply_rauw(fn, repl);
        erase_insts(fn, dead);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline driver

PassOut apply_pass(PassId p, const Module &m, const PassCtx &ctx) {
    switch (p) {
    case PassId::ConstFold:
        return pass_const_fold(m, ctx);
    case PassId::Dce:
        return pass_dce(m, ctx);
    case PassId::InstCombine:
        return pass_inst_combine(m, ctx);
    case PassId::Peephole:
        return pass_peephole(m, ctx);
    case PassId::CfgSimplify:
        return pass_cfg_simplify(m, ctx);
    case PassId::LoopUnroll:
        return pass_loop_unroll(m, ctx);
    case PassId::LoopSplit:
        return pass_loop_split(m, ctx);
    case PassId::HalfPromote:
        return pass_half_promote(m, ctx);
    }
    return PassOut{m, false, std::nullopt};
}

} // namespace

PipelineResult run_pipeline(const Module &m, const PipelineConfig &cfg) {
    assert(cfg.valid());
    PassCtx ctx;
    ctx.dce_drop = cfg.injected_bugs.count(BugId::DceDropsLiveStore) > 0;
    ctx.ic_wrong = cfg.injected_bugs.count(BugId::InstCombineWrongIdentity) > 0;
    ctx.peephole_fault = cfg.injected_bugs.count(BugId::PeepholeNullDeref) > 0;
    ctx.unroll_nonterm = cfg.injected_bugs.count(BugId::UnrollNonterminating) > 0;

    PipelineResult res;
    res.module = m;
    if (cfg.trace)
        res.trace.snapshots.push_back({"input", 0, print_module(res.module)});

    for (int iter = 0; iter < cfg.fixpoint_budget; iter++) {
        bool any = false;
        std::vector<std::string> changing;
        for (PassId p : cfg.passes) {
            PassOut po = apply_pass(p, res.module, ctx);
            if (po.fault) {
                res.status = PipelineStatusKind::InternalFault;
                res.fault_pass = pass_name(p);
                res.fault_detail = *po.fault;
                res.iterations = iter + 1;
                return res;
            }
            res.module = std::move(po.m);
            if (cfg.trace)
                res.trace.snapshots.push_back({pass_name(p), iter, print_module(res.module)});
            if (po.changed) {
                any = true;
                changing.push_back(pass_name(p));
            }
        }
        if (!any) {
            res.status = PipelineStatusKind::Completed;
            res.iterations = iter + 1;
            return res;
        }
        res.still_changing = std::move(changing);
    }
    res.status = PipelineStatusKind::StallBudgetExceeded;
    res.iterations = cfg.fixpoint_budget;
    return res;
}

#define CLEAN_PASS(name, id)                                                                  \
    std::pair<Module, bool> name(const Module &m) {                                          \
        PassOut po = apply_pass(PassId::id, m, PassCtx{});                                   \
        return {std::move(po.m), po.changed};                                                \
    }

CLEAN_PASS(const_fold, ConstFold)
CLEAN_PASS(dce, Dce)
CLEAN_PASS(inst_combine, InstCombine)
CLEAN_PASS(peephole, Peephole)
CLEAN_PASS(cfg_simplify, CfgSimplify)
CLEAN_PASS(loop_unroll, LoopUnroll)
CLEAN_PASS(loop_split, LoopSplit)
CLEAN_PASS(half_promote, HalfPromote)

#undef CLEAN_PASS

namespace {

bool module_has_f16(const Module &m) {
    for (auto &f : m.functions)
        for (auto &b : f.blocks)
            for (auto &in : b.insts) {
                if (in.type.is_f16() || in.op == Op::FpExt || in.op == Op::FpTrunc)
                    return true;
                for (auto &o : in.args)
                    if (o.is_const && o.c.type.is_f16())
                        return true;
            }
    return false;
}

} // namespace

Result<std::optional<std::string>, SnapshotError>
first_divergent_snapshot(const PassTrace &trace, const exec::ExecEnv &env) {
    if (trace.snapshots.empty())
        return SnapshotError{0, "empty trace"};

    bool have_baseline = false;
    exec::ExecStatus base_status{};
    uint64_t base_hash = 0;
    for (size_t i = 0; i < trace.snapshots.size(); i++) {
        auto parsed = parse_module(trace.snapshots[i].ir_text);
        if (!parsed.ok())
            return SnapshotError{static_cast<int>(i),
                                 "snapshot unparseable: " + parsed.error().message};
        Module snap = parsed.take();
        if (module_has_f16(snap))
            continue; // not executable until promotion has run
        exec::ExecResult r = exec::execute(snap, env);
        uint64_t h = r.status == exec::ExecStatus::Ok ? r.output_hash : 0;
        if (!have_baseline) {
            have_baseline = true;
            base_status = r.status;
            base_hash = h;
            continue;
        }
        if (r.status != base_status || h != base_hash)
            return std::optional<std::string>(trace.snapshots[i].pass);
    }
    return std::optional<std::string>(std::nullopt);
}

bool dump_trace(const PassTrace &trace, const std::string &dir, std::string *error) {
    for (size_t i = 0; i < trace.snapshots.size(); i++) {
        char name[512];
        std::snprintf(name, sizeof name, "%s/%04zu_%s.ir", dir.c_str(), i,
                      trace.snapshots[i].pass.c_str());
        std::ofstream f(name);
        if (!f) {
            if (error)
                *error = std::string("cannot write ") + name;
            return false;
        }
        f << trace.snapshots[i].ir_text;
    }
    return true;
}

} // namespace mshade::opt
