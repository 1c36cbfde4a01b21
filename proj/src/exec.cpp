#include "mshade/exec/exec.hpp"
#include "mshade/support/fnv.hpp"
#include "mshade/support/fp.hpp"
#include "mshade/support/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace mshade::exec {

using namespace mshade::ir;

const char *trap_reason_text(TrapReason r) {
    switch (r) {
    case TrapReason::IntDivByZero:
        return "IntDivByZero";
    case TrapReason::UndefBranch:
        return "UndefBranch";
    case TrapReason::F16Unsupported:
        return "F16Unsupported";
    }
    return "?";
}

namespace {

// Sorted-name ordinals make seeding a function of the interface, not of
// declaration layout.
std::vector<int> role_ordinals(const Module &m, Role role) {
    std::vector<int> idx;
    for (size_t i = 0; i < m.globals.size(); i++)
        if (m.globals[i].role == role && !m.globals[i].is_sampler)
            idx.push_back(static_cast<int>(i));
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return m.globals[a].name < m.globals[b].name; });
    return idx;
}

uint32_t seeded_lane(uint64_t seed, uint64_t ordinal, uint64_t lane, Scalar scalar) {
    uint64_t r = derive64(seed, ordinal, lane);
    switch (scalar) {
    case Scalar::F32:
        return f32_bits(unit_f32(r));
    case Scalar::I32:
        return static_cast<uint32_t>(r >> 56); // [0, 256)
    default:
        return static_cast<uint32_t>(r & 1);
    }
}

} // namespace

std::vector<SlotValues> seed_inputs(const Module &m, const ExecEnv &env) {
    std::vector<SlotValues> out;
    std::vector<int> inputs = role_ordinals(m, Role::Input);
    for (size_t k = 0; k < inputs.size(); k++) {
        const GlobalSlot &g = m.globals[inputs[k]];
        SlotValues sv;
        sv.name = g.name;
        sv.type = g.type;
        for (int lane = 0; lane < g.type.lanes; lane++)
            sv.lanes.push_back(seeded_lane(env.input_seed, k, lane, g.type.scalar));
        out.push_back(std::move(sv));
    }
    return out;
}

std::map<std::string, std::vector<uint32_t>> derive_uniforms(const Module &m,
                                                             uint64_t input_seed) {
    std::map<std::string, std::vector<uint32_t>> out;
    std::vector<int> uniforms = role_ordinals(m, Role::Uniform);
    for (size_t k = 0; k < uniforms.size(); k++) {
        const GlobalSlot &g = m.globals[uniforms[k]];
        std::vector<uint32_t> lanes;
        for (int lane = 0; lane < g.type.lanes; lane++)
            lanes.push_back(seeded_lane(input_seed, 0x10000u + k, lane, g.type.scalar));
        out[g.name] = std::move(lanes);
    }
    return out;
}

void sample(uint64_t sampler_seed, int unit, float cx, float cy, float out[4]) {
    auto quantize = [](float c) -> int64_t {
        if (!std::isfinite(c))
            return 0;
        double scaled = std::floor(static_cast<double>(c) * 256.0);
        if (scaled >= 9.0e18 || scaled <= -9.0e18)
            return 0;
        int64_t t = static_cast<int64_t>(scaled);
        return ((t % 256) + 256) % 256;
    };
    int64_t tx = quantize(cx);
    int64_t ty = quantize(cy);
    uint64_t key = static_cast<uint64_t>(unit) * 65536u + static_cast<uint64_t>(ty) * 256u +
                   static_cast<uint64_t>(tx);
    for (int lane = 0; lane < 4; lane++)
        out[lane] = closed_unit_f32(derive64(sampler_seed, key, static_cast<uint64_t>(lane)));
}

uint64_t canonical_hash(const std::vector<SlotValues> &outputs) {
    std::vector<const SlotValues *> sorted;
    for (auto &s : outputs)
        sorted.push_back(&s);
    std::sort(sorted.begin(), sorted.end(),
              [](const SlotValues *a, const SlotValues *b) { return a->name < b->name; });
    uint64_t h = kFnvOffset;
    for (auto *s : sorted) {
        for (uint32_t bits : s->lanes) {
            uint32_t canon = s->type.is_float() ? canonical_f32_bits(bits) : bits;
            h = fnv1a64_u32(canon, h);
        }
    }
    return h;
}

uint64_t canonical_hash_restricted(const std::vector<SlotValues> &outputs,
                                   const std::vector<std::string> &slot_names) {
    std::vector<SlotValues> filtered;
    for (auto &s : outputs)
        if (std::find(slot_names.begin(), slot_names.end(), s.name) != slot_names.end())
            filtered.push_back(s);
    return canonical_hash(filtered);
}

namespace {

struct Lanes {
    std::array<uint32_t, 4> v{};
};

struct Machine {
    const Module &m;
    const ExecEnv &env;
    const Function &fn;

    std::vector<Lanes> values;
    std::vector<SlotValues> inputs;
    std::vector<SlotValues> outputs;          // one per Output slot, module order
    std::vector<std::array<bool, 4>> written; // parallel to outputs
    std::vector<int> out_index;               // global index -> outputs index (-1 otherwise)
    ExecResult res;

    Machine(const Module &mod, const ExecEnv &e) : m(mod), env(e), fn(*mod.main()) {
        values.resize(mod.next_value_id);
        inputs = seed_inputs(mod, e);
        out_index.assign(m.globals.size(), -1);
        for (size_t i = 0; i < m.globals.size(); i++) {
            if (m.globals[i].role == Role::Output) {
                SlotValues sv;
                sv.name = m.globals[i].name;
                sv.type = m.globals[i].type;
                sv.lanes.assign(m.globals[i].type.lanes, 0);
                out_index[i] = static_cast<int>(outputs.size());
                outputs.push_back(std::move(sv));
                written.push_back({});
            }
        }
    }

    const std::vector<uint32_t> *input_lanes(const std::string &name) const {
        for (auto &s : inputs)
            if (s.name == name)
                return &s.lanes;
        return nullptr;
    }

    Lanes operand(const Operand &o) {
        if (!o.is_const)
            return values[o.id];
        Lanes l;
        if (o.c.undef) {
            for (int i = 0; i < 4; i++)
                l.v[i] = kUndefSentinel;
            return l;
        }
        for (int i = 0; i < o.c.type.lanes; i++)
            l.v[i] = o.c.bits[i];
        return l;
    }

    bool is_undef_scalar(const Operand &o) const { return o.is_const && o.c.undef; }

    bool has_f16(const Module &mod) const {
        for (auto &f : mod.functions)
            for (auto &b : f.blocks) {
                for (auto &in : b.insts) {
                    if (in.type.is_f16() || in.op == Op::FpExt || in.op == Op::FpTrunc)
                        return true;
                    for (auto &o : in.args)
                        if (o.is_const && o.c.type.is_f16())
                            return true;
                }
            }
        return false;
    }

    bool trap(TrapReason r) {
        res.status = ExecStatus::Trap;
        res.trap = r;
        return false;
    }

    bool step() {
        if (res.steps >= env.step_budget) {
            res.status = ExecStatus::StepBudgetExceeded;
            return false;
        }
        res.steps++;
        return true;
    }

    static float fbits(uint32_t b) { return bits_f32(b); }
    static uint32_t bitsf(float f) { return f32_bits(f); }

    bool exec_inst(const Inst &in) {
        if (!step())
            return false;
        Lanes out;
        switch (in.op) {
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            Lanes a = operand(in.args[0]), b = operand(in.args[1]);
            for (int i = 0; i < in.type.lanes; i++) {
                uint32_t x = a.v[i], y = b.v[i];
                switch (in.op) {
                case Op::Add:
                    out.v[i] = x + y;
                    break;
                case Op::Sub:
                    out.v[i] = x - y;
                    break;
                case Op::Mul:
                    out.v[i] = x * y;
                    break;
                default: {
                    if (y == 0)
                        return trap(TrapReason::IntDivByZero);
                    int32_t sx = static_cast<int32_t>(x), sy = static_cast<int32_t>(y);
                    if (sx == INT32_MIN && sy == -1)
                        out.v[i] = static_cast<uint32_t>(INT32_MIN);
                    else
                        out.v[i] = static_cast<uint32_t>(sx / sy);
                    break;
                }
                }
            }
            break;
        }
        case Op::FAdd:
        case Op::FSub:
        case Op::FMul:
        case Op::FDiv: {
            Lanes a = operand(in.args[0]), b = operand(in.args[1]);
            for (int i = 0; i < in.type.lanes; i++) {
                float x = fbits(a.v[i]), y = fbits(b.v[i]);
                float r = in.op == Op::FAdd   ? x + y
                          : in.op == Op::FSub ? x - y
                          : in.op == Op::FMul ? x * y
                                              : x / y;
                out.v[i] = bitsf(r);
            }
            break;
        }
        case Op::ICmp: {
            Lanes a = operand(in.args[0]), b = operand(in.args[1]);
            int32_t x = static_cast<int32_t>(a.v[0]), y = static_cast<int32_t>(b.v[0]);
            bool r;
            switch (in.cmp) {
            case Cmp::Eq:
                r = a.v[0] == b.v[0];
                break;
            case Cmp::Ne:
                r = a.v[0] != b.v[0];
                break;
            case Cmp::Slt:
                r = x < y;
                break;
            case Cmp::Sle:
                r = x <= y;
                break;
            case Cmp::Sgt:
                r = x > y;
                break;
            default:
                r = x >= y;
                break;
            }
            out.v[0] = r ? 1 : 0;
            break;
        }
        case Op::FCmp: {
            Lanes a = operand(in.args[0]), b = operand(in.args[1]);
            float x = fbits(a.v[0]), y = fbits(b.v[0]);
            bool r;
            switch (in.cmp) {
            case Cmp::Oeq:
                r = x == y;
                break;
            case Cmp::Une:
                r = x != y;
                break;
            case Cmp::Olt:
                r = x < y;
                break;
            case Cmp::Ole:
                r = x <= y;
                break;
            case Cmp::Ogt:
                r = x > y;
                break;
            default:
                r = x >= y;
                break;
            }
            out.v[0] = r ? 1 : 0;
            break;
        }
        case Op::Select: {
            Lanes c = operand(in.args[0]);
            out = (c.v[0] & 1) ? operand(in.args[1]) : operand(in.args[2]);
            break;
        }
        case Op::Load: {
            const GlobalSlot &g = m.globals[in.slot];
            auto it = env.uniform_values.find(g.name);
            out.v[0] = (it != env.uniform_values.end() && in.lane < it->second.size())
                           ? it->second[in.lane]
                           : 0;
            break;
        }
        case Op::Store: {
            Lanes v = operand(in.args[0]);
            int oi = out_index[in.slot];
            outputs[oi].lanes[in.lane] = v.v[0];
            written[oi][in.lane] = true;
            return true;
        }
        case Op::Call:
            return exec_call(in);
        case Op::FpExt:
        case Op::FpTrunc:
            return trap(TrapReason::F16Unsupported); // unreachable after prescan
        case Op::Bitcast:
            out = operand(in.args[0]);
            break;
        case Op::IToF:
            out.v[0] = bitsf(static_cast<float>(static_cast<int32_t>(operand(in.args[0]).v[0])));
            break;
        case Op::FToI:
            out.v[0] = static_cast<uint32_t>(f32_to_i32(fbits(operand(in.args[0]).v[0])));
            break;
        case Op::Extract: {
            Lanes v = operand(in.args[0]);
            out.v[0] = v.v[in.args[1].c.bits[0]];
            break;
        }
        case Op::Insert: {
            out = operand(in.args[0]);
            out.v[in.args[2].c.bits[0]] = operand(in.args[1]).v[0];
            break;
        }
        default:
            return true;
        }
        values[in.id] = out;
        return true;
    }

    bool exec_call(const Inst &in) {
        Lanes out;
        switch (in.intr) {
        case Intrinsic::FGet: {
            const std::vector<uint32_t> *lanes = input_lanes(m.globals[in.slot].name);
            out.v[0] = lanes && in.lane < lanes->size() ? (*lanes)[in.lane] : 0;
            break;
        }
        case Intrinsic::FSet: {
            Lanes v = operand(in.args[0]);
            int oi = out_index[in.slot];
            outputs[oi].lanes[in.lane] = v.v[0];
            written[oi][in.lane] = true;
            return true;
        }
        case Intrinsic::Sampler: {
            int unit = static_cast<int32_t>(in.args[0].c.bits[0]);
            float cx = fbits(operand(in.args[1]).v[0]);
            float cy = fbits(operand(in.args[2]).v[0]);
            float texel[4];
            sample(env.sampler_seed, unit, cx, cy, texel);
            for (int i = 0; i < 4; i++)
                out.v[i] = bitsf(texel[i]);
            break;
        }
        case Intrinsic::Rsq:
            out.v[0] = bitsf(rtmath::rsq(fbits(operand(in.args[0]).v[0])));
            break;
        case Intrinsic::Min:
            out.v[0] = bitsf(
                rtmath::fmin_(fbits(operand(in.args[0]).v[0]), fbits(operand(in.args[1]).v[0])));
            break;
        case Intrinsic::Max:
            out.v[0] = bitsf(
                rtmath::fmax_(fbits(operand(in.args[0]).v[0]), fbits(operand(in.args[1]).v[0])));
            break;
        case Intrinsic::Abs:
            out.v[0] = bitsf(rtmath::abs_(fbits(operand(in.args[0]).v[0])));
            break;
        case Intrinsic::Sin:
            out.v[0] = bitsf(rtmath::sin_(fbits(operand(in.args[0]).v[0])));
            break;
        case Intrinsic::Cos:
            out.v[0] = bitsf(rtmath::cos_(fbits(operand(in.args[0]).v[0])));
            break;
        case Intrinsic::Floor:
            out.v[0] = bitsf(rtmath::floor_(fbits(operand(in.args[0]).v[0])));
            break;
        case Intrinsic::Sqrt:
            out.v[0] = bitsf(rtmath::sqrt_(fbits(operand(in.args[0]).v[0])));
            break;
        }
        values[in.id] = out;
        return true;
    }

    ExecResult run() {
        if (has_f16(m)) {
            res.status = ExecStatus::Trap;
            res.trap = TrapReason::F16Unsupported;
            return res;
        }
        const Block *cur = &fn.blocks[0];
        uint32_t prev = UINT32_MAX;
        for (;;) {
            // Phis evaluate simultaneously against the edge just taken.
            size_t nphi = 0;
            while (nphi < cur->insts.size() && cur->insts[nphi].op == Op::Phi)
                nphi++;
            if (nphi) {
                std::vector<Lanes> tmp(nphi);
                for (size_t i = 0; i < nphi; i++) {
                    const Inst &phi = cur->insts[i];
                    if (!step())
                        return res;
                    bool found = false;
                    for (size_t k = 0; k < phi.phi_blocks.size(); k++) {
                        if (phi.phi_blocks[k] == prev) {
                            tmp[i] = operand(phi.args[k]);
                            found = true;
                            break;
                        }
                    }
                    if (!found)
                        tmp[i] = Lanes{}; // entry block phi: cannot happen
                }
                for (size_t i = 0; i < nphi; i++)
                    values[cur->insts[i].id] = tmp[i];
            }
            for (size_t i = nphi; i < cur->insts.size(); i++)
                if (!exec_inst(cur->insts[i]))
                    return res;

            const Inst &t = cur->term;
            if (!step())
                return res;
            uint32_t next;
            switch (t.op) {
            case Op::Ret: {
                for (size_t oi = 0; oi < outputs.size(); oi++)
                    for (size_t lane = 0; lane < outputs[oi].lanes.size(); lane++)
                        if (!written[oi][lane]) {
                            outputs[oi].lanes[lane] = 0;
                            res.diagnostics.push_back("output " + outputs[oi].name + "." +
                                                      std::to_string(lane) +
                                                      " defaulted to 0");
                        }
                res.status = ExecStatus::Ok;
                std::sort(outputs.begin(), outputs.end(),
                          [](const SlotValues &a, const SlotValues &b) {
                              return a.name < b.name;
                          });
                res.outputs = outputs;
                res.output_hash = canonical_hash(res.outputs);
                return res;
            }
            case Op::Br:
                next = t.t_true;
                break;
            case Op::CondBr: {
                Lanes c = operand(t.args[0]);
                if (c.v[0] == kUndefSentinel || is_undef_scalar(t.args[0])) {
                    trap(TrapReason::UndefBranch);
                    return res;
                }
                next = (c.v[0] & 1) ? t.t_true : t.t_false;
                break;
            }
            case Op::Switch: {
                Lanes s = operand(t.args[0]);
                if (s.v[0] == kUndefSentinel || is_undef_scalar(t.args[0])) {
                    trap(TrapReason::UndefBranch);
                    return res;
                }
                int32_t v = static_cast<int32_t>(s.v[0]);
                next = t.t_false;
                for (auto &[cv, tgt] : t.sw_cases)
                    if (cv == v) {
                        next = tgt;
                        break;
                    }
                break;
            }
            default:
                next = t.t_true;
                break;
            }
            prev = cur->id;
            cur = fn.find_block(next);
        }
    }
};

} // namespace

ExecResult execute(const Module &m, const ExecEnv &env) {
    Machine mach(m, env);
    return mach.run();
}

} // namespace mshade::exec
