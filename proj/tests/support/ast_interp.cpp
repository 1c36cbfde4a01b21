#include "support/ast_interp.hpp"

#include "mshade/support/fp.hpp"
#include "mshade/support/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <stdexcept>

namespace mshade::testsupport {

using namespace mshade::ast;

namespace {

struct Value {
    Scalar scalar = Scalar::Float;
    int lanes = 1;
    std::array<uint32_t, 4> bits{};

    float f(int i = 0) const { return bits_f32(bits[i]); }
    int32_t i(int k = 0) const { return static_cast<int32_t>(bits[k]); }
    bool b(int k = 0) const { return bits[k] != 0; }
};

Value fval(float x) {
    Value v;
    v.bits[0] = f32_bits(x);
    return v;
}

Value ival(int32_t x) {
    Value v;
    v.scalar = Scalar::Int;
    v.bits[0] = static_cast<uint32_t>(x);
    return v;
}

Value bval(bool x) {
    Value v;
    v.scalar = Scalar::Bool;
    v.bits[0] = x ? 1 : 0;
    return v;
}

struct Trap {
    std::string reason;
};

struct BreakSignal {};
struct ContinueSignal {};
struct ReturnSignal {
    bool has_value = false;
    Value value;
};

// documented input derivation: lane = derive64(seed, slot-ordinal, lane-ordinal)
uint32_t seeded_input_lane(uint64_t seed, uint64_t ordinal, uint64_t lane, Scalar scalar) {
    uint64_t r = derive64(seed, ordinal, lane);
    if (scalar == Scalar::Float)
        return f32_bits(unit_f32(r));
    if (scalar == Scalar::Int)
        return static_cast<uint32_t>(r >> 56);
    return static_cast<uint32_t>(r & 1);
}

struct Interp {
    const ShaderAst &shader;
    const exec::ExecEnv &env;

    std::vector<std::map<std::string, Value>> scopes;
    std::map<std::string, Value> inputs;                 // name -> value
    std::map<std::string, std::vector<uint32_t>> outs;   // name -> lane bits
    std::map<std::string, int> sampler_units;

    Interp(const ShaderAst &s, const exec::ExecEnv &e) : shader(s), env(e) {
        // input seeding: ordinal by sorted name among `in` globals
        std::vector<const GlobalDecl *> ins;
        for (auto &g : shader.globals)
            if (g.qualifier == Qualifier::In)
                ins.push_back(&g);
        std::sort(ins.begin(), ins.end(),
                  [](const GlobalDecl *a, const GlobalDecl *b) { return a->name < b->name; });
        for (size_t k = 0; k < ins.size(); k++) {
            Value v;
            v.scalar = ins[k]->type.scalar;
            v.lanes = ins[k]->type.lanes;
            for (int lane = 0; lane < v.lanes; lane++)
                v.bits[lane] = seeded_input_lane(env.input_seed, k, lane, v.scalar);
            inputs[ins[k]->name] = v;
        }
        int unit = 0;
        for (auto &g : shader.globals) {
            if (g.qualifier == Qualifier::Uniform && g.type.is_sampler())
                sampler_units[g.name] = unit++;
            if (g.qualifier == Qualifier::Out)
                outs[g.name] = std::vector<uint32_t>(g.type.lanes, 0x80000000u | 0x7F000000u);
        }
        // track written lanes separately
        for (auto &g : shader.globals)
            if (g.qualifier == Qualifier::Out)
                written[g.name] = std::vector<bool>(g.type.lanes, false);
    }

    std::map<std::string, std::vector<bool>> written;

    const FunctionDecl *find_fn(const std::string &n) const {
        for (auto &f : shader.functions)
            if (f.name == n)
                return &f;
        return nullptr;
    }

    const GlobalDecl *find_global(const std::string &n) const {
        for (auto &g : shader.globals)
            if (g.name == n)
                return &g;
        return nullptr;
    }

    Value *lookup(const std::string &n) {
        for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
            auto f = it->find(n);
            if (f != it->end())
                return &f->second;
        }
        return nullptr;
    }

    Value read_global(const GlobalDecl &g) {
        if (g.qualifier == Qualifier::In)
            return inputs.at(g.name);
        // uniform
        Value v;
        v.scalar = g.type.scalar;
        v.lanes = g.type.lanes;
        auto it = env.uniform_values.find(g.name);
        for (int lane = 0; lane < v.lanes; lane++)
            v.bits[lane] = it != env.uniform_values.end() &&
                                   lane < static_cast<int>(it->second.size())
                               ? it->second[lane]
                               : 0;
        return v;
    }

    // documented sampler hash: quantize by 256 with repeat wrap; closed unit lanes
    Value sample_texture(int unit, float cx, float cy) {
        auto quantize = [](float c) -> int64_t {
            if (!std::isfinite(c))
                return 0;
            double scaled = std::floor(static_cast<double>(c) * 256.0);
            if (scaled >= 9.0e18 || scaled <= -9.0e18)
                return 0;
            int64_t t = static_cast<int64_t>(scaled);
            return ((t % 256) + 256) % 256;
        };
        uint64_t key = static_cast<uint64_t>(unit) * 65536u +
                       static_cast<uint64_t>(quantize(cy)) * 256u +
                       static_cast<uint64_t>(quantize(cx));
        Value v;
        v.lanes = 4;
        for (int lane = 0; lane < 4; lane++)
            v.bits[lane] = f32_bits(closed_unit_f32(derive64(env.sampler_seed, key, lane)));
        return v;
    }

    Value broadcast(Value s, int lanes) {
        Value v = s;
        v.lanes = lanes;
        for (int i = 1; i < lanes; i++)
            v.bits[i] = s.bits[0];
        return v;
    }

    Value arith(BinOp op, Value a, Value b) {
        int lanes = std::max(a.lanes, b.lanes);
        if (a.lanes != lanes)
            a = broadcast(a, lanes);
        if (b.lanes != lanes)
            b = broadcast(b, lanes);
        Value r;
        r.scalar = a.scalar;
        r.lanes = lanes;
        for (int i = 0; i < lanes; i++) {
            if (a.scalar == Scalar::Float) {
                float x = a.f(i), y = b.f(i);
                float v = op == BinOp::Add   ? x + y
                          : op == BinOp::Sub ? x - y
                          : op == BinOp::Mul ? x * y
                                             : x / y;
                r.bits[i] = f32_bits(v);
            } else {
                uint32_t x = a.bits[i], y = b.bits[i];
                if (op == BinOp::Div) {
                    if (y == 0)
                        throw Trap{"IntDivByZero"};
                    int32_t sx = static_cast<int32_t>(x), sy = static_cast<int32_t>(y);
                    r.bits[i] = (sx == INT32_MIN && sy == -1)
                                    ? static_cast<uint32_t>(INT32_MIN)
                                    : static_cast<uint32_t>(sx / sy);
                } else {
                    r.bits[i] = op == BinOp::Add ? x + y : op == BinOp::Sub ? x - y : x * y;
                }
            }
        }
        return r;
    }

    Value eval(const Expr &e) {
        switch (e.kind) {
        case ExprKind::FloatLit: {
            Value v;
            v.bits[0] = e.float_bits;
            return v;
        }
        case ExprKind::IntLit:
            return ival(e.int_value);
        case ExprKind::BoolLit:
            return bval(e.bool_value);
        case ExprKind::Ident: {
            if (Value *v = lookup(e.name))
                return *v;
            const GlobalDecl *g = find_global(e.name);
            if (!g)
                throw std::logic_error("oracle: unresolved identifier " + e.name);
            return read_global(*g);
        }
        case ExprKind::Unary: {
            Value x = eval(*e.args[0]);
            if (e.un_op == UnOp::Not)
                return bval(!x.b());
            Value r = x;
            for (int i = 0; i < x.lanes; i++) {
                if (x.scalar == Scalar::Float)
                    r.bits[i] = f32_bits(-0.0f - x.f(i));
                else
                    r.bits[i] = 0u - x.bits[i];
            }
            return r;
        }
        case ExprKind::Binary:
            return eval_binary(e);
        case ExprKind::Swizzle: {
            Value base = eval(*e.args[0]);
            Value r;
            r.scalar = base.scalar;
            r.lanes = static_cast<int>(e.swizzle.size());
            for (size_t i = 0; i < e.swizzle.size(); i++) {
                char c = e.swizzle[i];
                int lane = c == 'x' ? 0 : c == 'y' ? 1 : c == 'z' ? 2 : 3;
                r.bits[i] = base.bits[lane];
            }
            return r;
        }
        case ExprKind::Construct:
            return eval_construct(e);
        case ExprKind::Call:
            return eval_call(e);
        }
        throw std::logic_error("oracle: unhandled expression");
    }

    Value eval_binary(const Expr &e) {
        // logical operators evaluate both sides (documented: no short circuit)
        switch (e.bin_op) {
        case BinOp::And: {
            Value a = eval(*e.args[0]);
            Value b = eval(*e.args[1]);
            return bval(a.b() && b.b());
        }
        case BinOp::Or: {
            Value a = eval(*e.args[0]);
            Value b = eval(*e.args[1]);
            return bval(a.b() || b.b());
        }
        default:
            break;
        }
        Value a = eval(*e.args[0]);
        Value b = eval(*e.args[1]);
        switch (e.bin_op) {
        case BinOp::Add:
        case BinOp::Sub:
        case BinOp::Mul:
        case BinOp::Div:
            return arith(e.bin_op, a, b);
        case BinOp::Lt:
            return a.scalar == Scalar::Float ? bval(a.f() < b.f()) : bval(a.i() < b.i());
        case BinOp::Le:
            return a.scalar == Scalar::Float ? bval(a.f() <= b.f()) : bval(a.i() <= b.i());
        case BinOp::Gt:
            return a.scalar == Scalar::Float ? bval(a.f() > b.f()) : bval(a.i() > b.i());
        case BinOp::Ge:
            return a.scalar == Scalar::Float ? bval(a.f() >= b.f()) : bval(a.i() >= b.i());
        case BinOp::Eq:
        case BinOp::Ne: {
            bool all_eq = true;
            for (int i = 0; i < a.lanes; i++) {
                bool eq = a.scalar == Scalar::Float ? (a.f(i) == b.f(i))
                                                    : (a.bits[i] == b.bits[i]);
                all_eq = all_eq && eq;
            }
            return bval(e.bin_op == BinOp::Eq ? all_eq : !all_eq);
        }
        default:
            throw std::logic_error("oracle: unhandled binary operator");
        }
    }

    Value eval_construct(const Expr &e) {
        Type t = e.ctor_type;
        if (t.lanes == 1) {
            Value x = eval(*e.args[0]);
            if (t.scalar == Scalar::Float) {
                if (x.scalar == Scalar::Float)
                    return fval(x.f());
                if (x.scalar == Scalar::Int)
                    return fval(static_cast<float>(x.i()));
                return fval(x.b() ? 1.0f : 0.0f);
            }
            if (t.scalar == Scalar::Int) {
                if (x.scalar == Scalar::Float)
                    return ival(f32_to_i32(x.f()));
                if (x.scalar == Scalar::Int)
                    return x;
                return ival(x.b() ? 1 : 0);
            }
            if (x.scalar == Scalar::Float)
                return bval(x.f() != 0.0f);
            return bval(x.bits[0] != 0);
        }
        Value r;
        r.scalar = t.scalar;
        r.lanes = t.lanes;
        if (e.args.size() == 1 && e.args[0]->type.lanes == 1) {
            Value s = eval(*e.args[0]);
            for (int i = 0; i < t.lanes; i++)
                r.bits[i] = s.bits[0];
            return r;
        }
        int lane = 0;
        for (auto &a : e.args) {
            Value v = eval(*a);
            for (int i = 0; i < v.lanes; i++)
                r.bits[lane++] = v.bits[i];
        }
        return r;
    }

    Value eval_call(const Expr &e) {
        const std::string &n = e.name;
        if (n == "mix") {
            Value o = eval(*e.args[0]);
            Value u = eval(*e.args[1]);
            Value c = eval(*e.args[2]);
            Value r = o;
            float cf = c.f();
            for (int i = 0; i < o.lanes; i++) {
                // documented sequence: o*c, 1-c, u*(1-c), sum
                float t1 = o.f(i) * cf;
                float t2 = 1.0f - cf;
                float t3 = u.f(i) * t2;
                r.bits[i] = f32_bits(t1 + t3);
            }
            return r;
        }
        if (n == "clamp") {
            Value x = eval(*e.args[0]);
            Value lo = eval(*e.args[1]);
            Value hi = eval(*e.args[2]);
            Value r = x;
            for (int i = 0; i < x.lanes; i++)
                r.bits[i] = f32_bits(std::fmin(std::fmax(x.f(i), lo.f()), hi.f()));
            return r;
        }
        if (n == "min" || n == "max") {
            Value a = eval(*e.args[0]);
            Value b = eval(*e.args[1]);
            Value r = a;
            for (int i = 0; i < a.lanes; i++)
                r.bits[i] = f32_bits(n == "min" ? std::fmin(a.f(i), b.f(i))
                                                : std::fmax(a.f(i), b.f(i)));
            return r;
        }
        if (n == "abs" || n == "sqrt" || n == "sin" || n == "cos" || n == "floor" ||
            n == "inversesqrt") {
            Value x = eval(*e.args[0]);
            Value r = x;
            for (int i = 0; i < x.lanes; i++) {
                float v = x.f(i);
                float y = n == "abs"    ? std::fabs(v)
                          : n == "sqrt" ? std::sqrt(v)
                          : n == "sin"  ? std::sin(v)
                          : n == "cos"  ? std::cos(v)
                          : n == "floor" ? std::floor(v)
                                         : 1.0f / std::sqrt(v);
                r.bits[i] = f32_bits(y);
            }
            return r;
        }
        if (n == "dot") {
            Value a = eval(*e.args[0]);
            Value b = eval(*e.args[1]);
            float acc = 0;
            for (int i = 0; i < a.lanes; i++) {
                float p = a.f(i) * b.f(i);
                acc = i == 0 ? p : acc + p;
            }
            return fval(acc);
        }
        if (n == "normalize") {
            Value v = eval(*e.args[0]);
            float acc = 0;
            for (int i = 0; i < v.lanes; i++) {
                float p = v.f(i) * v.f(i);
                acc = i == 0 ? p : acc + p;
            }
            float r = 1.0f / std::sqrt(acc);
            Value out = v;
            for (int i = 0; i < v.lanes; i++)
                out.bits[i] = f32_bits(v.f(i) * r);
            return out;
        }
        if (n == "texture2D") {
            const std::string &sname = e.args[0]->name;
            int unit = sampler_units.at(sname);
            Value uv = eval(*e.args[1]);
            return sample_texture(unit, uv.f(0), uv.f(1));
        }
        // user function: evaluate arguments left to right, bind, run the body
        const FunctionDecl *f = find_fn(n);
        if (!f)
            throw std::logic_error("oracle: call to unknown function " + n);
        std::map<std::string, Value> frame;
        std::map<std::string, int> frame_samplers;
        for (size_t i = 0; i < f->params.size(); i++) {
            if (f->params[i].type.is_sampler()) {
                frame_samplers[f->params[i].name] = sampler_units.at(e.args[i]->name);
                continue;
            }
            frame[f->params[i].name] = eval(*e.args[i]);
        }
        // sampler params alias units for nested texture2D calls
        std::vector<std::map<std::string, Value>> saved_scopes;
        saved_scopes.swap(scopes);
        std::map<std::string, int> saved_samplers;
        for (auto &[pn, unit] : frame_samplers) {
            auto it = sampler_units.find(pn);
            if (it != sampler_units.end())
                saved_samplers[pn] = it->second;
            sampler_units[pn] = unit;
        }
        scopes.push_back(std::move(frame));
        Value result;
        try {
            exec_block(*f->body, false);
        } catch (ReturnSignal &r) {
            if (r.has_value)
                result = r.value;
        }
        scopes.clear();
        scopes.swap(saved_scopes);
        for (auto &[pn, unit] : frame_samplers) {
            if (saved_samplers.count(pn))
                sampler_units[pn] = saved_samplers[pn];
            else
                sampler_units.erase(pn);
        }
        return result;
    }

    void assign(const Stmt &s) {
        Value v = eval(*s.expr);
        if (Value *slot = lookup(s.name)) {
            if (s.assign_op != AssignOp::Set) {
                BinOp op = s.assign_op == AssignOp::AddSet   ? BinOp::Add
                           : s.assign_op == AssignOp::SubSet ? BinOp::Sub
                           : s.assign_op == AssignOp::MulSet ? BinOp::Mul
                                                             : BinOp::Div;
                v = arith(op, *slot, v);
            }
            *slot = v;
            return;
        }
        // out global: per-lane store, write-only
        auto &lanes = outs.at(s.name);
        auto &wr = written.at(s.name);
        for (size_t i = 0; i < lanes.size(); i++) {
            lanes[i] = v.bits[i];
            wr[i] = true;
        }
    }

    void exec_stmt(const Stmt &s) {
        switch (s.kind) {
        case StmtKind::Block:
            exec_block(s, true);
            return;
        case StmtKind::Decl: {
            Value v = eval(*s.expr);
            scopes.back()[s.name] = v;
            return;
        }
        case StmtKind::Assign:
            assign(s);
            return;
        case StmtKind::IncDec: {
            Value *slot = lookup(s.name);
            slot->bits[0] = static_cast<uint32_t>(slot->i() + (s.inc ? 1 : -1));
            return;
        }
        case StmtKind::ExprStmt:
            eval(*s.expr);
            return;
        case StmtKind::If: {
            if (eval(*s.expr).b())
                exec_block(*s.body, true);
            else if (s.else_body)
                exec_block(*s.else_body, true);
            return;
        }
        case StmtKind::Switch: {
            int32_t sel = eval(*s.expr).i();
            int start = -1;
            int default_at = -1;
            for (size_t i = 0; i < s.cases.size(); i++) {
                if (s.cases[i].is_default)
                    default_at = static_cast<int>(i);
                else if (s.cases[i].value == sel && start < 0)
                    start = static_cast<int>(i);
            }
            if (start < 0)
                start = default_at;
            if (start < 0)
                return;
            try {
                for (size_t i = static_cast<size_t>(start); i < s.cases.size(); i++) {
                    scopes.emplace_back();
                    for (auto &st : s.cases[i].body)
                        exec_stmt(*st);
                    scopes.pop_back();
                }
            } catch (BreakSignal &) {
                scopes.pop_back();
            }
            return;
        }
        case StmtKind::For: {
            scopes.emplace_back();
            if (s.init)
                exec_stmt(*s.init);
            for (;;) {
                if (s.cond && !eval(*s.cond).b())
                    break;
                try {
                    exec_block(*s.body, true);
                } catch (BreakSignal &) {
                    break;
                } catch (ContinueSignal &) {
                }
                if (s.step)
                    exec_stmt(*s.step);
            }
            scopes.pop_back();
            return;
        }
        case StmtKind::While: {
            while (eval(*s.cond).b()) {
                try {
                    exec_block(*s.body, true);
                } catch (BreakSignal &) {
                    break;
                } catch (ContinueSignal &) {
                }
            }
            return;
        }
        case StmtKind::DoWhile: {
            do {
                try {
                    exec_block(*s.body, true);
                } catch (BreakSignal &) {
                    break;
                } catch (ContinueSignal &) {
                }
            } while (eval(*s.cond).b());
            return;
        }
        case StmtKind::Break:
            throw BreakSignal{};
        case StmtKind::Continue:
            throw ContinueSignal{};
        case StmtKind::Return: {
            ReturnSignal r;
            if (s.expr) {
                r.has_value = true;
                r.value = eval(*s.expr);
            }
            throw r;
        }
        }
    }

    void exec_block(const Stmt &b, bool fresh_scope) {
        if (fresh_scope)
            scopes.emplace_back();
        try {
            for (auto &st : b.stmts)
                exec_stmt(*st);
        } catch (...) {
            if (fresh_scope)
                scopes.pop_back();
            throw;
        }
        if (fresh_scope)
            scopes.pop_back();
    }

    InterpResult run() {
        InterpResult res;
        const FunctionDecl *main_fn = shader.entry();
        scopes.emplace_back();
        try {
            exec_block(*main_fn->body, false);
        } catch (ReturnSignal &) {
            // main returned early
        } catch (Trap &t) {
            res.trapped = true;
            res.trap_reason = t.reason;
            return res;
        }
        for (auto &g : shader.globals) {
            if (g.qualifier != Qualifier::Out)
                continue;
            exec::SlotValues sv;
            sv.name = g.name;
            sv.type = ir::Type{ir::Scalar::F32, g.type.lanes};
            auto &lanes = outs.at(g.name);
            auto &wr = written.at(g.name);
            for (size_t i = 0; i < lanes.size(); i++)
                sv.lanes.push_back(wr[i] ? lanes[i] : 0);
            res.outputs.push_back(std::move(sv));
        }
        std::sort(res.outputs.begin(), res.outputs.end(),
                  [](const exec::SlotValues &a, const exec::SlotValues &b) {
                      return a.name < b.name;
                  });
        res.output_hash = exec::canonical_hash(res.outputs);
        res.ok = true;
        return res;
    }
};

} // namespace

InterpResult interpret_shader(const ast::ShaderAst &shader, const exec::ExecEnv &env) {
    Interp in(shader, env);
    return in.run();
}

} // namespace mshade::testsupport
