#include "mshade/ir/lower.hpp"
#include "mshade/support/fp.hpp"

#include <cassert>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace mshade::ir {

namespace {

namespace A = mshade::ast;

struct Val {
    Operand op;
    Type type;
};

// SSA variable identity: declaration node plus inline-expansion instance.
using VarKey = std::pair<const void *, uint32_t>;

struct LoopCtx {
    uint32_t continue_target;
    uint32_t break_target;
};

struct InlineFrame {
    uint32_t instance = 0;
    const A::FunctionDecl *fn = nullptr;
    VarKey result_var{nullptr, 0};
    uint32_t continuation = 0;
    bool is_main = true;
    std::vector<std::unordered_map<std::string, VarKey>> scopes;
    std::unordered_map<std::string, uint32_t> sampler_bindings; // param name -> slot
};

struct Lowerer {
    const A::ShaderAst &src;
    bool ignore_prec;

    Module m;
    Function fn;
    uint32_t cur = 0;
    bool terminated = false;

    std::map<std::pair<uint32_t, VarKey>, Val> current_def;
    std::set<uint32_t> sealed;
    std::map<uint32_t, std::vector<std::pair<VarKey, uint32_t>>> incomplete; // block -> (var, phi id)
    std::map<uint32_t, std::vector<uint32_t>> preds;
    std::map<VarKey, Type> var_types;

    std::vector<LoopCtx> loops;
    std::vector<InlineFrame> frames;
    uint32_t next_instance = 1;

    Lowerer(const A::ShaderAst &s, bool ip) : src(s), ignore_prec(ip) {}

    // -- block plumbing ------------------------------------------------------

    uint32_t new_block() {
        Block b;
        b.id = m.fresh_block();
        b.term.op = Op::Add; // placeholder until terminated
        b.term.id = 0;
        fn.blocks.push_back(std::move(b));
        return fn.blocks.back().id;
    }

    Block &block(uint32_t id) {
        Block *b = fn.find_block(id);
        assert(b);
        return *b;
    }

    uint32_t emit(Inst in) {
        assert(!terminated);
        in.id = m.fresh_value();
        uint32_t id = in.id;
        block(cur).insts.push_back(std::move(in));
        return id;
    }

    void add_edge(uint32_t from, uint32_t to) { preds[to].push_back(from); }

    void set_term(Inst t) {
        assert(!terminated);
        t.id = m.fresh_value();
        Block &b = block(cur);
        b.term = std::move(t);
        if (b.term.op == Op::Br) {
            add_edge(cur, b.term.t_true);
        } else if (b.term.op == Op::CondBr) {
            add_edge(cur, b.term.t_true);
            add_edge(cur, b.term.t_false);
        } else if (b.term.op == Op::Switch) {
            add_edge(cur, b.term.t_false);
            for (auto &[v, tgt] : b.term.sw_cases)
                add_edge(cur, tgt);
        }
        terminated = true;
    }

    void switch_to(uint32_t b) {
        cur = b;
        terminated = false;
    }

    void br_to(uint32_t target) {
        Inst t;
        t.op = Op::Br;
        t.t_true = target;
        set_term(std::move(t));
    }

    // -- SSA construction (sealed-block algorithm, no trivial-phi pruning) ---

    void write_var(VarKey var, uint32_t blk, Val v) { current_def[{blk, var}] = v; }

    Val read_var(VarKey var, uint32_t blk) {
        auto it = current_def.find({blk, var});
        if (it != current_def.end())
            return it->second;
        return read_var_recursive(var, blk);
    }

    uint32_t new_phi(uint32_t blk, Type t) {
        Inst p;
        p.op = Op::Phi;
        p.type = t;
        p.id = m.fresh_value();
        uint32_t id = p.id;
        Block &b = block(blk);
        // phis sit at the head of the instruction list
        size_t at = 0;
        while (at < b.insts.size() && b.insts[at].op == Op::Phi)
            at++;
        b.insts.insert(b.insts.begin() + at, std::move(p));
        return id;
    }

    Inst *find_inst(uint32_t blk, uint32_t id) {
        for (auto &in : block(blk).insts)
            if (in.id == id)
                return &in;
        return nullptr;
    }

    Val read_var_recursive(VarKey var, uint32_t blk) {
        Type t = var_types.at(var);
        Val v;
        if (!sealed.count(blk)) {
            uint32_t phi = new_phi(blk, t);
            incomplete[blk].push_back({var, phi});
            v = Val{Operand::value(phi), t};
        } else if (preds[blk].size() == 1) {
            v = read_var(var, preds[blk][0]);
        } else if (preds[blk].empty()) {
            // unreachable block: any value works
            v = Val{Operand::constant(undef_of(t)), t};
        } else {
            uint32_t phi = new_phi(blk, t);
            write_var(var, blk, Val{Operand::value(phi), t});
            add_phi_operands(var, phi, blk);
            v = Val{Operand::value(phi), t};
        }
        write_var(var, blk, v);
        return v;
    }

    void add_phi_operands(VarKey var, uint32_t phi, uint32_t blk) {
        // Deduplicate predecessor list (a switch may branch to one target on
        // several case values); phi carries one incoming per unique pred.
        std::vector<uint32_t> ps = preds[blk];
        std::set<uint32_t> seen;
        Inst *p = find_inst(blk, phi);
        assert(p);
        for (uint32_t pred : ps) {
            if (!seen.insert(pred).second)
                continue;
            Val v = read_var(var, pred);
            // re-find: reading may have inserted phis and reallocated vectors
            p = find_inst(blk, phi);
            p->args.push_back(v.op);
            p->phi_blocks.push_back(pred);
        }
    }

    void seal_block(uint32_t blk) {
        auto it = incomplete.find(blk);
        if (it != incomplete.end()) {
            for (auto &[var, phi] : it->second)
                add_phi_operands(var, phi, blk);
            incomplete.erase(it);
        }
        sealed.insert(blk);
    }

    // -- type helpers --------------------------------------------------------

    // IR value type for an AST expression type.
    Type ir_type(const A::Type &t) const {
        switch (t.scalar) {
        case A::Scalar::Bool:
            return Type{Scalar::I1, t.lanes};
        case A::Scalar::Int:
            return Type{Scalar::I32, t.lanes};
        case A::Scalar::Float: {
            bool half = !ignore_prec && t.prec == A::Precision::Medium;
            return Type{half ? Scalar::F16 : Scalar::F32, t.lanes};
        }
        case A::Scalar::Sampler2D:
            return i32();
        }
        return f32();
    }

    // Slot storage type is always full precision.
    static Type slot_type(const A::Type &t) {
        switch (t.scalar) {
        case A::Scalar::Bool:
            return Type{Scalar::I1, t.lanes};
        case A::Scalar::Int:
            return Type{Scalar::I32, t.lanes};
        default:
            return Type{Scalar::F32, t.lanes};
        }
    }

    Constant scalar_zero(Scalar s) {
        Constant c;
        c.type = Type{s, 1};
        c.bits[0] = 0;
        return c;
    }

    Constant vector_zero(Type t) {
        Constant c;
        c.type = t;
        for (int i = 0; i < t.lanes; i++)
            c.bits[i] = 0;
        return c;
    }

    Constant f_const(Type t, float v) {
        Constant c;
        c.type = Type{t.scalar, 1};
        c.bits[0] = t.scalar == Scalar::F16 ? f32_to_f16(f32_bits(v)) : f32_bits(v);
        return c;
    }

    // Converts a float-based value between f16 and f32 shapes.
    Val convert_float(Val v, Scalar want) {
        if (v.type.scalar == want)
            return v;
        Type to{want, v.type.lanes};
        if (v.op.is_const && !v.op.c.undef) {
            Constant c;
            c.type = to;
            for (int i = 0; i < v.type.lanes; i++)
                c.bits[i] = want == Scalar::F16 ? 0 : f16_to_f32(static_cast<uint16_t>(v.op.c.bits[i]));
            if (want == Scalar::F32)
                return Val{Operand::constant(c), to}; // widening is exact
            // narrowing a constant folds only when the round-trip is exact
            bool exact = true;
            for (int i = 0; i < v.type.lanes; i++) {
                uint16_t h = f32_to_f16(v.op.c.bits[i]);
                if (f16_to_f32(h) != v.op.c.bits[i]) {
                    exact = false;
                    break;
                }
                c.bits[i] = h;
            }
            if (exact)
                return Val{Operand::constant(c), to};
        }
        Inst in;
        in.op = want == Scalar::F32 ? Op::FpExt : Op::FpTrunc;
        in.type = to;
        in.args = {v.op};
        uint32_t id = emit(std::move(in));
        return Val{Operand::value(id), to};
    }

    Val to_f32(Val v) {
        if (v.type.is_float() && v.type.is_f16())
            return convert_float(v, Scalar::F32);
        return v;
    }

    // -- globals -------------------------------------------------------------

    void build_globals() {
        for (auto &g : src.globals) {
            GlobalSlot slot;
            slot.name = g.name;
            if (g.type.is_sampler()) {
                slot.is_sampler = true;
                slot.type = i32();
                slot.role = Role::Uniform;
            } else {
                slot.type = slot_type(g.type);
                slot.role = g.qualifier == A::Qualifier::In    ? Role::Input
                            : g.qualifier == A::Qualifier::Out ? Role::Output
                                                                : Role::Uniform;
            }
            m.globals.push_back(slot);
        }
    }

    int sampler_unit(uint32_t slot_index) const {
        // Texture unit = ordinal among sampler slots in declaration order.
        int unit = 0;
        for (uint32_t i = 0; i < slot_index; i++)
            if (m.globals[i].is_sampler)
                unit++;
        return unit;
    }

    // -- name resolution ------------------------------------------------------

    struct Resolved {
        enum K { Local, Global, SamplerSlot } k;
        VarKey var{nullptr, 0};
        int global = -1;
        uint32_t sampler_slot = 0;
    };

    InlineFrame &frame() { return frames.back(); }

    Resolved resolve_name(const std::string &n) {
        auto &scopes = frame().scopes;
        for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
            auto f = it->find(n);
            if (f != it->end())
                return Resolved{Resolved::Local, f->second, -1, 0};
        }
        auto sb = frame().sampler_bindings.find(n);
        if (sb != frame().sampler_bindings.end())
            return Resolved{Resolved::SamplerSlot, {nullptr, 0}, -1, sb->second};
        int gi = m.global_index(n);
        if (gi >= 0) {
            if (m.globals[gi].is_sampler)
                return Resolved{Resolved::SamplerSlot, {nullptr, 0}, -1,
                                static_cast<uint32_t>(gi)};
            return Resolved{Resolved::Global, {nullptr, 0}, gi, 0};
        }
        throw std::logic_error("lower: unresolved identifier '" + n + "'");
    }

    // -- expression lowering ---------------------------------------------------

    Val lower_expr(const A::Expr &e) {
        switch (e.kind) {
        case A::ExprKind::FloatLit: {
            Constant c;
            c.type = f32();
            c.bits[0] = e.float_bits;
            return Val{Operand::constant(c), f32()};
        }
        case A::ExprKind::IntLit:
            return Val{Operand::constant(const_i32(e.int_value)), i32()};
        case A::ExprKind::BoolLit:
            return Val{Operand::constant(const_bool(e.bool_value)), i1()};
        case A::ExprKind::Ident:
            return lower_ident(e);
        case A::ExprKind::Unary:
            return lower_unary(e);
        case A::ExprKind::Binary:
            return lower_binary(e);
        case A::ExprKind::Swizzle:
            return lower_swizzle(e);
        case A::ExprKind::Construct:
            return lower_construct(e);
        case A::ExprKind::Call:
            return lower_call(e);
        }
        throw std::logic_error("lower: unhandled expression kind");
    }

    Val lower_ident(const A::Expr &e) {
        Resolved r = resolve_name(e.name);
        if (r.k == Resolved::Local)
            return read_var(r.var, cur);
        if (r.k == Resolved::SamplerSlot)
            throw std::logic_error("lower: sampler used as a value");
        const GlobalSlot &g = m.globals[r.global];
        // Input reads use fget, uniform reads use load; both are per lane.
        Val full;
        if (g.type.lanes == 1) {
            Inst in;
            if (g.role == Role::Input) {
                in.op = Op::Call;
                in.intr = Intrinsic::FGet;
            } else {
                in.op = Op::Load;
            }
            in.type = Type{g.type.scalar, 1};
            in.slot = static_cast<uint32_t>(r.global);
            in.lane = 0;
            uint32_t id = emit(std::move(in));
            full = Val{Operand::value(id), Type{g.type.scalar, 1}};
        } else {
            Val acc{Operand::constant(vector_zero(g.type)), g.type};
            for (int lane = 0; lane < g.type.lanes; lane++) {
                Inst in;
                if (g.role == Role::Input) {
                    in.op = Op::Call;
                    in.intr = Intrinsic::FGet;
                } else {
                    in.op = Op::Load;
                }
                in.type = Type{g.type.scalar, 1};
                in.slot = static_cast<uint32_t>(r.global);
                in.lane = static_cast<uint32_t>(lane);
                uint32_t sid = emit(std::move(in));
                Inst ins;
                ins.op = Op::Insert;
                ins.type = g.type;
                ins.args = {acc.op, Operand::value(sid),
                            Operand::constant(const_i32(lane))};
                uint32_t vid = emit(std::move(ins));
                acc = Val{Operand::value(vid), g.type};
            }
            full = acc;
        }
        // A mediump-qualified global reads at full precision then narrows.
        Type want = ir_type(e.type);
        if (want.is_f16())
            return convert_float(full, Scalar::F16);
        return full;
    }

    Val lower_unary(const A::Expr &e) {
        Val x = lower_expr(*e.args[0]);
        if (e.un_op == A::UnOp::Not) {
            Inst in;
            in.op = Op::Select;
            in.type = i1();
            in.args = {x.op, Operand::constant(const_bool(false)),
                       Operand::constant(const_bool(true))};
            uint32_t id = emit(std::move(in));
            return Val{Operand::value(id), i1()};
        }
        // negation: 0 - x for ints, (-0.0) - x for floats (exact)
        Inst in;
        in.type = x.type;
        if (x.type.is_float()) {
            in.op = Op::FSub;
            Constant neg0;
            neg0.type = x.type;
            for (int i = 0; i < x.type.lanes; i++)
                neg0.bits[i] = x.type.is_f16() ? 0x8000u : 0x80000000u;
            in.args = {Operand::constant(neg0), x.op};
        } else {
            in.op = Op::Sub;
            in.args = {Operand::constant(vector_zero(x.type)), x.op};
        }
        uint32_t id = emit(std::move(in));
        return Val{Operand::value(id), x.type};
    }

    // Broadcasts a scalar to a vector via an insert chain.
    Val broadcast(Val s, uint8_t lanes) {
        if (lanes == 1)
            return s;
        Type vt{s.type.scalar, lanes};
        if (s.op.is_const && !s.op.c.undef) {
            Constant c;
            c.type = vt;
            for (int i = 0; i < lanes; i++)
                c.bits[i] = s.op.c.bits[0];
            return Val{Operand::constant(c), vt};
        }
        Val acc{Operand::constant(vector_zero(vt)), vt};
        for (int i = 0; i < lanes; i++) {
            Inst in;
            in.op = Op::Insert;
            in.type = vt;
            in.args = {acc.op, s.op, Operand::constant(const_i32(i))};
            uint32_t id = emit(std::move(in));
            acc = Val{Operand::value(id), vt};
        }
        return acc;
    }

    Val extract_lane(Val v, int lane) {
        if (v.type.lanes == 1)
            return v;
        Inst in;
        in.op = Op::Extract;
        in.type = Type{v.type.scalar, 1};
        in.args = {v.op, Operand::constant(const_i32(lane))};
        uint32_t id = emit(std::move(in));
        return Val{Operand::value(id), in.type};
    }

    Val emit_bin(Op op, Val a, Val b) {
        assert(a.type == b.type);
        Inst in;
        in.op = op;
        in.type = a.type;
        in.args = {a.op, b.op};
        uint32_t id = emit(std::move(in));
        return Val{Operand::value(id), a.type};
    }

    Val emit_cmp(bool is_float, Cmp pred, Val a, Val b) {
        Inst in;
        in.op = is_float ? Op::FCmp : Op::ICmp;
        in.cmp = pred;
        in.type = i1();
        in.args = {a.op, b.op};
        uint32_t id = emit(std::move(in));
        return Val{Operand::value(id), i1()};
    }

    Val emit_select(Val c, Val a, Val b) {
        Inst in;
        in.op = Op::Select;
        in.type = a.type;
        in.args = {c.op, a.op, b.op};
        uint32_t id = emit(std::move(in));
        return Val{Operand::value(id), a.type};
    }

    // Aligns operand precision for a float operation computed at `prec`.
    Val at_prec(Val v, A::Precision prec) {
        if (!v.type.is_float())
            return v;
        bool half = !ignore_prec && prec == A::Precision::Medium;
        return convert_float(v, half ? Scalar::F16 : Scalar::F32);
    }

    Val lower_binary(const A::Expr &e) {
        const A::Expr &le = *e.args[0];
        const A::Expr &re = *e.args[1];
        switch (e.bin_op) {
        case A::BinOp::And: {
            Val a = lower_expr(le);
            Val b = lower_expr(re);
            return emit_select(a, b, Val{Operand::constant(const_bool(false)), i1()});
        }
        case A::BinOp::Or: {
            Val a = lower_expr(le);
            Val b = lower_expr(re);
            return emit_select(a, Val{Operand::constant(const_bool(true)), i1()}, b);
        }
        default:
            break;
        }

        Val a = lower_expr(le);
        Val b = lower_expr(re);

        switch (e.bin_op) {
        case A::BinOp::Add:
        case A::BinOp::Sub:
        case A::BinOp::Mul:
        case A::BinOp::Div: {
            bool isf = e.type.scalar == A::Scalar::Float;
            if (isf) {
                a = at_prec(a, e.type.prec);
                b = at_prec(b, e.type.prec);
            }
            if (a.type.lanes != e.type.lanes)
                a = broadcast(a, e.type.lanes);
            if (b.type.lanes != e.type.lanes)
                b = broadcast(b, e.type.lanes);
            Op op = isf ? (e.bin_op == A::BinOp::Add   ? Op::FAdd
                           : e.bin_op == A::BinOp::Sub ? Op::FSub
                           : e.bin_op == A::BinOp::Mul ? Op::FMul
                                                       : Op::FDiv)
                        : (e.bin_op == A::BinOp::Add   ? Op::Add
                           : e.bin_op == A::BinOp::Sub ? Op::Sub
                           : e.bin_op == A::BinOp::Mul ? Op::Mul
                                                       : Op::Div);
            return emit_bin(op, a, b);
        }
        case A::BinOp::Lt:
        case A::BinOp::Le:
        case A::BinOp::Gt:
        case A::BinOp::Ge: {
            bool isf = a.type.is_float();
            if (isf) {
                // compare at the joint precision of the operands
                A::Precision p = (le.type.prec == A::Precision::Medium &&
                                  re.type.prec == A::Precision::Medium)
                                     ? A::Precision::Medium
                                     : A::Precision::High;
                a = at_prec(a, p);
                b = at_prec(b, p);
            }
            Cmp pred;
            switch (e.bin_op) {
            case A::BinOp::Lt:
                pred = isf ? Cmp::Olt : Cmp::Slt;
                break;
            case A::BinOp::Le:
                pred = isf ? Cmp::Ole : Cmp::Sle;
                break;
            case A::BinOp::Gt:
                pred = isf ? Cmp::Ogt : Cmp::Sgt;
                break;
            default:
                pred = isf ? Cmp::Oge : Cmp::Sge;
                break;
            }
            return emit_cmp(isf, pred, a, b);
        }
        case A::BinOp::Eq:
        case A::BinOp::Ne: {
            bool isf = a.type.is_float();
            if (isf) {
                A::Precision p = (le.type.prec == A::Precision::Medium &&
                                  re.type.prec == A::Precision::Medium)
                                     ? A::Precision::Medium
                                     : A::Precision::High;
                a = at_prec(a, p);
                b = at_prec(b, p);
            }
            Cmp pred = e.bin_op == A::BinOp::Eq ? (isf ? Cmp::Oeq : Cmp::Eq)
                                                : (isf ? Cmp::Une : Cmp::Ne);
            if (a.type.lanes == 1)
                return emit_cmp(isf, pred, a, b);
            // vector ==: lane-wise compare folded with select-chains
            Val acc{Operand::constant(const_bool(e.bin_op == A::BinOp::Eq)), i1()};
            for (int lane = 0; lane < a.type.lanes; lane++) {
                Val la = extract_lane(a, lane);
                Val lb = extract_lane(b, lane);
                Val c = emit_cmp(isf, pred, la, lb);
                if (e.bin_op == A::BinOp::Eq)
                    acc = emit_select(acc, c, Val{Operand::constant(const_bool(false)), i1()});
                else
                    acc = emit_select(acc, Val{Operand::constant(const_bool(true)), i1()}, c);
            }
            return acc;
        }
        default:
            throw std::logic_error("lower: unhandled binary op");
        }
    }

    Val lower_swizzle(const A::Expr &e) {
        Val base = lower_expr(*e.args[0]);
        auto lane_of = [](char c) { return c == 'x' ? 0 : c == 'y' ? 1 : c == 'z' ? 2 : 3; };
        if (e.swizzle.size() == 1)
            return extract_lane(base, lane_of(e.swizzle[0]));
        Type vt{base.type.scalar, static_cast<uint8_t>(e.swizzle.size())};
        Val acc{Operand::constant(vector_zero(vt)), vt};
        for (size_t i = 0; i < e.swizzle.size(); i++) {
            Val s = extract_lane(base, lane_of(e.swizzle[i]));
            Inst in;
            in.op = Op::Insert;
            in.type = vt;
            in.args = {acc.op, s.op, Operand::constant(const_i32(static_cast<int>(i)))};
            uint32_t id = emit(std::move(in));
            acc = Val{Operand::value(id), vt};
        }
        return acc;
    }

    Val lower_construct(const A::Expr &e) {
        Type target = ir_type(e.type); // constructors produce highp
        if (target.lanes == 1) {
            // scalar conversion
            Val x = lower_expr(*e.args[0]);
            return convert_scalar(x, target);
        }
        std::vector<Val> parts;
        for (auto &a : e.args)
            parts.push_back(lower_expr(*a));
        if (parts.size() == 1 && parts[0].type.lanes == 1) {
            Val s = parts[0];
            if (s.type.is_float())
                s = to_f32(s);
            return broadcast(s, target.lanes);
        }
        Val acc{Operand::constant(vector_zero(target)), target};
        int lane = 0;
        for (auto &p : parts) {
            Val v = p;
            if (v.type.is_float())
                v = to_f32(v);
            for (int i = 0; i < v.type.lanes; i++) {
                Val s = extract_lane(v, i);
                Inst in;
                in.op = Op::Insert;
                in.type = target;
                in.args = {acc.op, s.op, Operand::constant(const_i32(lane++))};
                uint32_t id = emit(std::move(in));
                acc = Val{Operand::value(id), target};
            }
        }
        return acc;
    }

    Val convert_scalar(Val x, Type target) {
        if (x.type.is_float())
            x = to_f32(x);
        if (x.type == target)
            return x;
        if (target.scalar == Scalar::F32) {
            if (x.type.scalar == Scalar::I32) {
                Inst in;
                in.op = Op::IToF;
                in.type = f32();
                in.args = {x.op};
                uint32_t id = emit(std::move(in));
                return Val{Operand::value(id), f32()};
            }
            // bool -> float
            return emit_select(x, Val{Operand::constant(const_f32(1.0f)), f32()},
                               Val{Operand::constant(const_f32(0.0f)), f32()});
        }
        if (target.scalar == Scalar::I32) {
            if (x.type.scalar == Scalar::F32) {
                Inst in;
                in.op = Op::FToI;
                in.type = i32();
                in.args = {x.op};
                uint32_t id = emit(std::move(in));
                return Val{Operand::value(id), i32()};
            }
            return emit_select(x, Val{Operand::constant(const_i32(1)), i32()},
                               Val{Operand::constant(const_i32(0)), i32()});
        }
        // bool(x)
        if (x.type.scalar == Scalar::F32)
            return emit_cmp(true, Cmp::Une, x, Val{Operand::constant(const_f32(0.0f)), f32()});
        return emit_cmp(false, Cmp::Ne, x, Val{Operand::constant(const_i32(0)), i32()});
    }

    Val emit_intrinsic(Intrinsic intr, Type ret, std::vector<Operand> args) {
        Inst in;
        in.op = Op::Call;
        in.intr = intr;
        in.type = ret;
        in.args = std::move(args);
        uint32_t id = emit(std::move(in));
        return Val{Operand::value(id), ret};
    }

    // Lane-wise f32 intrinsic application over float or vec operands.
    Val lanewise_intrinsic(Intrinsic intr, std::vector<Val> args, uint8_t lanes) {
        if (lanes == 1) {
            std::vector<Operand> ops;
            for (auto &a : args)
                ops.push_back(a.op);
            return emit_intrinsic(intr, f32(), std::move(ops));
        }
        Type vt = f32(lanes);
        Val acc{Operand::constant(vector_zero(vt)), vt};
        for (int lane = 0; lane < lanes; lane++) {
            std::vector<Operand> ops;
            for (auto &a : args)
                ops.push_back(extract_lane(a, lane).op);
            Val s = emit_intrinsic(intr, f32(), std::move(ops));
            Inst in;
            in.op = Op::Insert;
            in.type = vt;
            in.args = {acc.op, s.op, Operand::constant(const_i32(lane))};
            uint32_t id = emit(std::move(in));
            acc = Val{Operand::value(id), vt};
        }
        return acc;
    }

    // mix(origin, unused, c) = origin*c + unused*(1-c), computed at the
    // joint precision: t1 = o*c; t2 = 1-c; t3 = u*t2; t1+t3.
    Val lower_mix(const A::Expr &e) {
        Val o = lower_expr(*e.args[0]);
        Val u = lower_expr(*e.args[1]);
        Val c = lower_expr(*e.args[2]);
        A::Precision p = e.type.prec;
        o = at_prec(o, p);
        u = at_prec(u, p);
        c = at_prec(c, p);
        uint8_t lanes = o.type.lanes;
        Val cv = broadcast(c, lanes);
        Val t1 = emit_bin(Op::FMul, o, cv);
        Constant one;
        one.type = o.type;
        for (int i = 0; i < lanes; i++)
            one.bits[i] = o.type.is_f16() ? 0x3C00u : f32_bits(1.0f);
        Val t2 = emit_bin(Op::FSub, Val{Operand::constant(one), o.type}, cv);
        Val t3 = emit_bin(Op::FMul, u, t2);
        return emit_bin(Op::FAdd, t1, t3);
    }

    Val lower_call(const A::Expr &e) {
        const std::string &n = e.name;
        if (n == "mix")
            return lower_mix(e);
        if (n == "dot") {
            Val a = lower_expr(*e.args[0]);
            Val b = lower_expr(*e.args[1]);
            A::Precision p = e.type.prec;
            a = at_prec(a, p);
            b = at_prec(b, p);
            Val acc;
            for (int lane = 0; lane < a.type.lanes; lane++) {
                Val mul = emit_bin(Op::FMul, extract_lane(a, lane), extract_lane(b, lane));
                acc = lane == 0 ? mul : emit_bin(Op::FAdd, acc, mul);
            }
            return acc;
        }
        if (n == "clamp") {
            Val x = to_f32(lower_expr(*e.args[0]));
            Val lo = to_f32(lower_expr(*e.args[1]));
            Val hi = to_f32(lower_expr(*e.args[2]));
            uint8_t lanes = x.type.lanes;
            if (lanes == 1) {
                Val mx = emit_intrinsic(Intrinsic::Max, f32(), {x.op, lo.op});
                return emit_intrinsic(Intrinsic::Min, f32(), {mx.op, hi.op});
            }
            Type vt = f32(lanes);
            Val acc{Operand::constant(vector_zero(vt)), vt};
            for (int lane = 0; lane < lanes; lane++) {
                Val s = extract_lane(x, lane);
                Val mx = emit_intrinsic(Intrinsic::Max, f32(), {s.op, lo.op});
                Val mn = emit_intrinsic(Intrinsic::Min, f32(), {mx.op, hi.op});
                Inst in;
                in.op = Op::Insert;
                in.type = vt;
                in.args = {acc.op, mn.op, Operand::constant(const_i32(lane))};
                uint32_t id = emit(std::move(in));
                acc = Val{Operand::value(id), vt};
            }
            return acc;
        }
        if (n == "min" || n == "max") {
            Val a = to_f32(lower_expr(*e.args[0]));
            Val b = to_f32(lower_expr(*e.args[1]));
            return lanewise_intrinsic(n == "min" ? Intrinsic::Min : Intrinsic::Max, {a, b},
                                      a.type.lanes);
        }
        if (n == "abs" || n == "sqrt" || n == "sin" || n == "cos" || n == "floor" ||
            n == "inversesqrt") {
            Val x = to_f32(lower_expr(*e.args[0]));
            Intrinsic i = n == "abs"    ? Intrinsic::Abs
                          : n == "sqrt" ? Intrinsic::Sqrt
                          : n == "sin"  ? Intrinsic::Sin
                          : n == "cos"  ? Intrinsic::Cos
                          : n == "floor" ? Intrinsic::Floor
                                         : Intrinsic::Rsq;
            return lanewise_intrinsic(i, {x}, x.type.lanes);
        }
        if (n == "normalize") {
            // v * rsq(dot(v, v))
            Val v = to_f32(lower_expr(*e.args[0]));
            Val acc;
            for (int lane = 0; lane < v.type.lanes; lane++) {
                Val s = extract_lane(v, lane);
                Val mul = emit_bin(Op::FMul, s, s);
                acc = lane == 0 ? mul : emit_bin(Op::FAdd, acc, mul);
            }
            Val r = emit_intrinsic(Intrinsic::Rsq, f32(), {acc.op});
            Val rv = broadcast(r, v.type.lanes);
            return emit_bin(Op::FMul, v, rv);
        }
        if (n == "texture2D") {
            const A::Expr &sarg = *e.args[0];
            Resolved r = resolve_name(sarg.name);
            assert(r.k == Resolved::SamplerSlot);
            Val uv = to_f32(lower_expr(*e.args[1]));
            Val cx = extract_lane(uv, 0);
            Val cy = extract_lane(uv, 1);
            return emit_intrinsic(Intrinsic::Sampler, f32(4),
                                  {Operand::constant(const_i32(sampler_unit(r.sampler_slot))),
                                   cx.op, cy.op, Operand::constant(const_f32(0.0f))});
        }
        return lower_user_call(e);
    }

    const A::FunctionDecl *find_function(const std::string &n) {
        for (auto &f : src.functions)
            if (f.name == n)
                return &f;
        return nullptr;
    }

    Val lower_user_call(const A::Expr &e) {
        const A::FunctionDecl *callee = find_function(e.name);
        assert(callee);
        uint32_t instance = next_instance++;

        InlineFrame fr;
        fr.instance = instance;
        fr.fn = callee;
        fr.is_main = false;
        fr.scopes.emplace_back();

        // Bind arguments to parameter variables (or sampler slots).
        for (size_t i = 0; i < callee->params.size(); i++) {
            const A::Param &p = callee->params[i];
            if (p.type.is_sampler()) {
                Resolved r = resolve_name(e.args[i]->name);
                assert(r.k == Resolved::SamplerSlot);
                fr.sampler_bindings[p.name] = r.sampler_slot;
                continue;
            }
            Val v = lower_expr(*e.args[i]);
            Type pt = ir_type(p.type);
            if (pt.is_float() && v.type.scalar != pt.scalar)
                v = convert_float(v, pt.scalar);
            VarKey key{&p, instance};
            var_types[key] = pt;
            write_var(key, cur, v);
            fr.scopes.back()[p.name] = key;
        }

        uint32_t continuation = new_block();
        fr.continuation = continuation;
        VarKey result_key{callee, instance};
        if (!callee->ret.is_void) {
            var_types[result_key] = ir_type(callee->ret);
            fr.result_var = result_key;
        }

        frames.push_back(std::move(fr));
        lower_block_stmts(*callee->body);
        if (!terminated)
            br_to(continuation);
        frames.pop_back();

        seal_block(continuation);
        switch_to(continuation);
        if (callee->ret.is_void)
            return Val{Operand::constant(const_i32(0)), i32()}; // unused
        return read_var(result_key, cur);
    }

    // -- statement lowering ----------------------------------------------------

    void declare_local(const A::Stmt &s, Val init) {
        VarKey key{&s, frame().instance};
        Type t = ir_type(A::Type(s.decl_type.scalar, s.decl_type.lanes, s.decl_type.prec));
        var_types[key] = t;
        if (t.is_float() && init.type.scalar != t.scalar)
            init = convert_float(init, t.scalar);
        write_var(key, cur, init);
        frame().scopes.back()[s.name] = key;
    }

    void store_global(int gi, Val v) {
        const GlobalSlot &g = m.globals[gi];
        if (v.type.is_float())
            v = to_f32(v);
        for (int lane = 0; lane < g.type.lanes; lane++) {
            Val s = extract_lane(v, lane);
            Inst in;
            in.op = Op::Call;
            in.intr = Intrinsic::FSet;
            in.type = f32(); // unused
            in.slot = static_cast<uint32_t>(gi);
            in.lane = static_cast<uint32_t>(lane);
            in.args = {s.op};
            emit(std::move(in));
        }
    }

    void lower_assign(const A::Stmt &s) {
        Val value = lower_expr(*s.expr);
        Resolved r = resolve_name(s.name);
        Type target_t = r.k == Resolved::Local ? var_types.at(r.var)
                                               : m.globals[r.global].type;

        if (s.assign_op != A::AssignOp::Set) {
            Val old = r.k == Resolved::Local
                          ? read_var(r.var, cur)
                          : Val{}; // outs are write-only; checked by typecheck
            assert(r.k == Resolved::Local);
            bool isf = old.type.is_float();
            // compute at the joint precision of target and value
            if (isf) {
                bool half = old.type.is_f16() && value.type.is_float() &&
                            value.type.is_f16();
                Scalar sc = half ? Scalar::F16 : Scalar::F32;
                old = convert_float(old, sc);
                value = convert_float(value, sc);
            }
            if (value.type.lanes != old.type.lanes)
                value = broadcast(value, old.type.lanes);
            Op op;
            switch (s.assign_op) {
            case A::AssignOp::AddSet:
                op = isf ? Op::FAdd : Op::Add;
                break;
            case A::AssignOp::SubSet:
                op = isf ? Op::FSub : Op::Sub;
                break;
            case A::AssignOp::MulSet:
                op = isf ? Op::FMul : Op::Mul;
                break;
            default:
                op = isf ? Op::FDiv : Op::Div;
                break;
            }
            value = emit_bin(op, old, value);
        }

        if (r.k == Resolved::Local) {
            if (target_t.is_float() && value.type.scalar != target_t.scalar)
                value = convert_float(value, target_t.scalar);
            write_var(r.var, cur, value);
        } else {
            store_global(r.global, value);
        }
    }

    void lower_incdec(const A::Stmt &s) {
        Resolved r = resolve_name(s.name);
        assert(r.k == Resolved::Local);
        Val old = read_var(r.var, cur);
        Val one{Operand::constant(const_i32(1)), i32()};
        Val nv = emit_bin(s.inc ? Op::Add : Op::Sub, old, one);
        write_var(r.var, cur, nv);
    }

    void lower_block_stmts(const A::Stmt &b) {
        frame().scopes.emplace_back();
        for (auto &st : b.stmts) {
            if (terminated) {
                // unreachable code still lowers, into a fresh orphan block
                uint32_t orphan = new_block();
                seal_block(orphan);
                switch_to(orphan);
            }
            lower_stmt(*st);
        }
        frame().scopes.pop_back();
    }

    void lower_stmt(const A::Stmt &s) {
        switch (s.kind) {
        case A::StmtKind::Block:
            lower_block_stmts(s);
            return;
        case A::StmtKind::Decl: {
            Val init = lower_expr(*s.expr);
            if (init.type.lanes != s.decl_type.lanes)
                init = broadcast(init, s.decl_type.lanes);
            declare_local(s, init);
            return;
        }
        case A::StmtKind::Assign:
            lower_assign(s);
            return;
        case A::StmtKind::IncDec:
            lower_incdec(s);
            return;
        case A::StmtKind::ExprStmt:
            lower_expr(*s.expr);
            return;
        case A::StmtKind::If:
            lower_if(s);
            return;
        case A::StmtKind::Switch:
            lower_switch(s);
            return;
        case A::StmtKind::For:
            lower_for(s);
            return;
        case A::StmtKind::While:
            lower_while(s);
            return;
        case A::StmtKind::DoWhile:
            lower_do_while(s);
            return;
        case A::StmtKind::Break: {
            assert(!loops.empty());
            br_to(loops.back().break_target);
            return;
        }
        case A::StmtKind::Continue: {
            assert(!loops.empty());
            br_to(loops.back().continue_target);
            return;
        }
        case A::StmtKind::Return: {
            if (frame().is_main) {
                Inst t;
                t.op = Op::Ret;
                set_term(std::move(t));
                return;
            }
            if (s.expr) {
                Val v = lower_expr(*s.expr);
                Type rt = var_types.at(frame().result_var);
                if (rt.is_float() && v.type.scalar != rt.scalar)
                    v = convert_float(v, rt.scalar);
                if (v.type.lanes != rt.lanes)
                    v = broadcast(v, rt.lanes);
                write_var(frame().result_var, cur, v);
            }
            br_to(frame().continuation);
            return;
        }
        }
    }

    void lower_if(const A::Stmt &s) {
        Val c = lower_expr(*s.expr);
        uint32_t then_b = new_block();
        uint32_t merge = new_block();
        uint32_t else_b = s.else_body ? new_block() : merge;

        Inst t;
        t.op = Op::CondBr;
        t.args = {c.op};
        t.t_true = then_b;
        t.t_false = else_b;
        set_term(std::move(t));

        seal_block(then_b);
        switch_to(then_b);
        lower_block_stmts(*s.body);
        if (!terminated)
            br_to(merge);

        if (s.else_body) {
            seal_block(else_b);
            switch_to(else_b);
            lower_block_stmts(*s.else_body);
            if (!terminated)
                br_to(merge);
        }

        seal_block(merge);
        switch_to(merge);
    }

    void lower_switch(const A::Stmt &s) {
        Val sel = lower_expr(*s.expr);
        uint32_t exit = new_block();

        std::vector<uint32_t> case_blocks;
        for (size_t i = 0; i < s.cases.size(); i++)
            case_blocks.push_back(new_block());

        Inst t;
        t.op = Op::Switch;
        t.args = {sel.op};
        t.t_false = exit; // default target, possibly overridden below
        for (size_t i = 0; i < s.cases.size(); i++) {
            if (s.cases[i].is_default)
                t.t_false = case_blocks[i];
            else
                t.sw_cases.emplace_back(s.cases[i].value, case_blocks[i]);
        }
        set_term(std::move(t));

        loops.push_back({0, exit}); // break exits the switch; continue is loop-bound
        LoopCtx *enclosing = loops.size() >= 2 ? &loops[loops.size() - 2] : nullptr;
        loops.back().continue_target = enclosing ? enclosing->continue_target : 0;

        for (size_t i = 0; i < s.cases.size(); i++) {
            seal_block(case_blocks[i]);
            switch_to(case_blocks[i]);
            frame().scopes.emplace_back();
            for (auto &st : s.cases[i].body) {
                if (terminated) {
                    uint32_t orphan = new_block();
                    seal_block(orphan);
                    switch_to(orphan);
                }
                lower_stmt(*st);
            }
            frame().scopes.pop_back();
            if (!terminated)
                br_to(i + 1 < case_blocks.size() ? case_blocks[i + 1] : exit); // fallthrough
        }
        loops.pop_back();

        seal_block(exit);
        switch_to(exit);
    }

    void lower_while(const A::Stmt &s) {
        uint32_t header = new_block();
        br_to(header);
        switch_to(header);
        Val c = lower_expr(*s.cond);
        uint32_t body = new_block();
        uint32_t exit = new_block();
        Inst t;
        t.op = Op::CondBr;
        t.args = {c.op};
        t.t_true = body;
        t.t_false = exit;
        set_term(std::move(t));

        seal_block(body);
        switch_to(body);
        loops.push_back({header, exit});
        lower_block_stmts(*s.body);
        loops.pop_back();
        if (!terminated)
            br_to(header);

        seal_block(header);
        seal_block(exit);
        switch_to(exit);
    }

    void lower_do_while(const A::Stmt &s) {
        uint32_t body = new_block();
        uint32_t cond_b = new_block();
        uint32_t exit = new_block();
        br_to(body);

        switch_to(body);
        loops.push_back({cond_b, exit});
        lower_block_stmts(*s.body);
        loops.pop_back();
        if (!terminated)
            br_to(cond_b);

        seal_block(cond_b);
        switch_to(cond_b);
        Val c = lower_expr(*s.cond);
        Inst t;
        t.op = Op::CondBr;
        t.args = {c.op};
        t.t_true = body;
        t.t_false = exit;
        set_term(std::move(t));

        seal_block(body);
        seal_block(exit);
        switch_to(exit);
    }

    void lower_for(const A::Stmt &s) {
        frame().scopes.emplace_back(); // scope for the loop-local induction
        if (s.init)
            lower_stmt(*s.init);

        uint32_t header = new_block();
        uint32_t body = new_block();
        uint32_t step_b = new_block();
        uint32_t exit = new_block();
        br_to(header);

        switch_to(header);
        if (s.cond) {
            Val c = lower_expr(*s.cond);
            Inst t;
            t.op = Op::CondBr;
            t.args = {c.op};
            t.t_true = body;
            t.t_false = exit;
            set_term(std::move(t));
        } else {
            br_to(body);
        }

        seal_block(body);
        switch_to(body);
        loops.push_back({step_b, exit});
        lower_block_stmts(*s.body);
        loops.pop_back();
        if (!terminated)
            br_to(step_b);

        seal_block(step_b);
        switch_to(step_b);
        if (s.step)
            lower_stmt(*s.step);
        if (!terminated)
            br_to(header);

        seal_block(header);
        seal_block(exit);
        switch_to(exit);
        frame().scopes.pop_back();
    }

    Module run() {
        build_globals();
        fn.name = "main";
        uint32_t entry = new_block();
        seal_block(entry);
        switch_to(entry);

        InlineFrame fr;
        fr.instance = 0;
        fr.is_main = true;
        fr.fn = src.entry();
        fr.scopes.emplace_back();
        frames.push_back(std::move(fr));

        lower_block_stmts(*src.entry()->body);
        if (!terminated) {
            Inst t;
            t.op = Op::Ret;
            set_term(std::move(t));
        }
        frames.pop_back();

        m.functions.push_back(std::move(fn));
        return canonicalize(m);
    }
};

} // namespace

Module lower(const ast::ShaderAst &shader, bool ignore_precision) {
    assert(shader.typechecked);
    Lowerer l(shader, ignore_precision);
    return l.run();
}

} // namespace mshade::ir
