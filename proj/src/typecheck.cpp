#include "mshade/shader/front.hpp"

#include <functional>
#include <map>
#include <set>
#include <unordered_map>

namespace mshade::ast {

const char *type_error_kind_name(TypeErrorKind k) {
    switch (k) {
    case TypeErrorKind::UndeclaredIdentifier:
        return "UndeclaredIdentifier";
    case TypeErrorKind::TypeMismatch:
        return "TypeMismatch";
    case TypeErrorKind::ArityMismatch:
        return "ArityMismatch";
    case TypeErrorKind::MultipleMain:
        return "MultipleMain";
    case TypeErrorKind::InvalidQualifier:
        return "InvalidQualifier";
    }
    return "?";
}

namespace {

struct VarInfo {
    Type type;
    bool writable = true;
    bool is_global = false;
    Qualifier qualifier = Qualifier::In;
};

struct Checker {
    explicit Checker(ShaderAst &a) : ast(a) {}

    ShaderAst &ast;
    TypeError err{};
    bool failed = false;

    std::vector<std::unordered_map<std::string, VarInfo>> scopes;
    std::unordered_map<std::string, const FunctionDecl *> functions; // defined so far
    std::set<std::string> assigned_outs;
    const FunctionDecl *current_fn = nullptr;
    int loop_depth = 0;
    int breakable_depth = 0; // loops + switches

    bool fail(SourcePos pos, TypeErrorKind k, const std::string &m) {
        if (!failed) {
            err = TypeError{pos, m, k};
            failed = true;
        }
        return false;
    }

    VarInfo *lookup(const std::string &n) {
        for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
            auto f = it->find(n);
            if (f != it->end())
                return &f->second;
        }
        return nullptr;
    }

    bool declare(SourcePos pos, const std::string &n, VarInfo info) {
        if (scopes.back().count(n))
            return fail(pos, TypeErrorKind::TypeMismatch, "redeclaration of '" + n + "'");
        scopes.back()[n] = info;
        return true;
    }

    bool run() {
        scopes.emplace_back();
        std::set<std::string> global_names;
        for (auto &g : ast.globals) {
            if (!global_names.insert(g.name).second)
                return fail(g.pos, TypeErrorKind::TypeMismatch,
                            "duplicate global '" + g.name + "'");
            if (!check_global(g))
                return false;
            VarInfo vi;
            vi.type = g.type;
            vi.is_global = true;
            vi.qualifier = g.qualifier;
            vi.writable = g.qualifier == Qualifier::Out;
            scopes.back()[g.name] = vi;
        }

        const FunctionDecl *main_fn = nullptr;
        for (auto &f : ast.functions) {
            if (functions.count(f.name))
                return fail(f.pos,
                            f.name == "main" ? TypeErrorKind::MultipleMain
                                             : TypeErrorKind::TypeMismatch,
                            "redefinition of function '" + f.name + "'");
            if (lookup(f.name))
                return fail(f.pos, TypeErrorKind::TypeMismatch,
                            "function '" + f.name + "' shadows a global");
            if (f.name == "main") {
                main_fn = &f;
                if (!f.params.empty())
                    return fail(f.pos, TypeErrorKind::ArityMismatch,
                                "main takes no parameters");
                if (!f.ret.is_void)
                    return fail(f.pos, TypeErrorKind::TypeMismatch, "main returns void");
            }
            if (!check_function(f))
                return false;
            functions[f.name] = &f; // visible only after its own body: no recursion
        }
        if (!main_fn)
            return fail({1, 1}, TypeErrorKind::MultipleMain, "no main function defined");

        for (auto &g : ast.globals)
            if (g.qualifier == Qualifier::Out && !assigned_outs.count(g.name))
                ast.warnings.push_back("out '" + g.name + "' is never assigned");
        return true;
    }

    bool check_global(const GlobalDecl &g) {
        if (g.type.is_sampler()) {
            if (g.qualifier != Qualifier::Uniform)
                return fail(g.pos, TypeErrorKind::InvalidQualifier,
                            "sampler2D must be a uniform");
            return true;
        }
        if (g.type.prec == Precision::Medium && !g.type.is_float())
            return fail(g.pos, TypeErrorKind::InvalidQualifier,
                        "mediump applies to float types only");
        if (g.qualifier == Qualifier::Out && !g.type.is_float())
            return fail(g.pos, TypeErrorKind::InvalidQualifier,
                        "out globals must be float or vecN");
        if (g.qualifier == Qualifier::In && g.type.scalar == Scalar::Bool)
            return fail(g.pos, TypeErrorKind::InvalidQualifier,
                        "bool inputs are not supported");
        return true;
    }

    bool check_function(const FunctionDecl &f) {
        current_fn = &f;
        scopes.emplace_back();
        std::set<std::string> pnames;
        for (auto &p : f.params) {
            if (!pnames.insert(p.name).second)
                return fail(f.pos, TypeErrorKind::TypeMismatch,
                            "duplicate parameter '" + p.name + "'");
            if (p.type.prec == Precision::Medium && !p.type.is_float())
                return fail(f.pos, TypeErrorKind::InvalidQualifier,
                            "mediump applies to float types only");
            VarInfo vi;
            vi.type = p.type;
            vi.writable = false; // value parameters are read-only in this subset
            scopes.back()[p.name] = vi;
        }
        if (!check_block(*f.body))
            return false;
        if (!f.ret.is_void) {
            // Deterministic execution needs a guaranteed return value.
            if (f.body->stmts.empty() || f.body->stmts.back()->kind != StmtKind::Return)
                return fail(f.pos, TypeErrorKind::TypeMismatch,
                            "non-void function '" + f.name +
                                "' must end with a return statement");
        }
        scopes.pop_back();
        current_fn = nullptr;
        return true;
    }

    bool check_block(Stmt &b) {
        scopes.emplace_back();
        for (auto &s : b.stmts)
            if (!check_stmt(*s))
                return false;
        scopes.pop_back();
        return true;
    }

    bool check_stmt(Stmt &s) {
        switch (s.kind) {
        case StmtKind::Block:
            return check_block(s);
        case StmtKind::Decl: {
            if (s.decl_type.is_sampler())
                return fail(s.pos, TypeErrorKind::InvalidQualifier,
                            "sampler2D locals are not supported");
            if (s.decl_type.prec == Precision::Medium && !s.decl_type.is_float())
                return fail(s.pos, TypeErrorKind::InvalidQualifier,
                            "mediump applies to float types only");
            if (!check_expr(*s.expr))
                return false;
            if (!s.expr->type.same_shape(s.decl_type))
                return fail(s.pos, TypeErrorKind::TypeMismatch,
                            "cannot initialize " + type_name(s.decl_type) + " '" + s.name +
                                "' from " + type_name(s.expr->type));
            return declare(s.pos, s.name, VarInfo{s.decl_type, true, false, Qualifier::In});
        }
        case StmtKind::Assign: {
            VarInfo *vi = lookup(s.name);
            if (!vi)
                return fail(s.pos, TypeErrorKind::UndeclaredIdentifier,
                            "assignment to undeclared '" + s.name + "'");
            if (!vi->writable)
                return fail(s.pos, TypeErrorKind::InvalidQualifier,
                            "'" + s.name + "' is not assignable");
            if (vi->type.is_sampler())
                return fail(s.pos, TypeErrorKind::InvalidQualifier,
                            "cannot assign to a sampler");
            if (!check_expr(*s.expr))
                return false;
            Type vt = s.expr->type;
            if (s.assign_op == AssignOp::Set) {
                if (!vt.same_shape(vi->type))
                    return fail(s.pos, TypeErrorKind::TypeMismatch,
                                "cannot assign " + type_name(vt) + " to " +
                                    type_name(vi->type) + " '" + s.name + "'");
            } else {
                if (vi->is_global && vi->qualifier == Qualifier::Out)
                    return fail(s.pos, TypeErrorKind::InvalidQualifier,
                                "out '" + s.name + "' is write-only; compound assignment reads it");
                if (vi->type.scalar == Scalar::Bool)
                    return fail(s.pos, TypeErrorKind::TypeMismatch,
                                "compound assignment needs a numeric target");
                bool same = vt.same_shape(vi->type);
                bool vec_scalar = vi->type.is_float_vec() && vt.is_float_scalar();
                if (!same && !vec_scalar)
                    return fail(s.pos, TypeErrorKind::TypeMismatch,
                                "compound assignment type mismatch on '" + s.name + "'");
            }
            if (vi->is_global && vi->qualifier == Qualifier::Out)
                assigned_outs.insert(s.name);
            return true;
        }
        case StmtKind::IncDec: {
            VarInfo *vi = lookup(s.name);
            if (!vi)
                return fail(s.pos, TypeErrorKind::UndeclaredIdentifier,
                            "'" + s.name + "' is not declared");
            if (!vi->writable || !vi->type.is_int_scalar())
                return fail(s.pos, TypeErrorKind::TypeMismatch,
                            "++/-- needs a writable int variable");
            return true;
        }
        case StmtKind::ExprStmt: {
            if (!check_expr(*s.expr))
                return false;
            if (!s.expr->type.is_void)
                return fail(s.pos, TypeErrorKind::TypeMismatch,
                            "expression statement must be a void call");
            return true;
        }
        case StmtKind::If: {
            if (!check_expr(*s.expr))
                return false;
            if (!s.expr->type.is_bool_scalar())
                return fail(s.expr->pos, TypeErrorKind::TypeMismatch, "if condition must be bool");
            if (!check_stmt(*s.body))
                return false;
            if (s.else_body && !check_stmt(*s.else_body))
                return false;
            return true;
        }
        case StmtKind::Switch: {
            if (!check_expr(*s.expr))
                return false;
            if (!s.expr->type.is_int_scalar())
                return fail(s.expr->pos, TypeErrorKind::TypeMismatch,
                            "switch selector must be int");
            std::set<int32_t> seen;
            bool saw_default = false;
            for (auto &c : s.cases) {
                if (c.is_default) {
                    if (saw_default)
                        return fail(s.pos, TypeErrorKind::TypeMismatch,
                                    "multiple default labels");
                    saw_default = true;
                } else if (!seen.insert(c.value).second) {
                    return fail(s.pos, TypeErrorKind::TypeMismatch,
                                "duplicate case label " + std::to_string(c.value));
                }
                scopes.emplace_back();
                breakable_depth++;
                for (auto &st : c.body)
                    if (!check_stmt(*st))
                        return false;
                breakable_depth--;
                scopes.pop_back();
            }
            return true;
        }
        case StmtKind::For: {
            scopes.emplace_back(); // for-init scope
            if (s.init && !check_stmt(*s.init))
                return false;
            if (s.cond) {
                if (!check_expr(*s.cond))
                    return false;
                if (!s.cond->type.is_bool_scalar())
                    return fail(s.cond->pos, TypeErrorKind::TypeMismatch,
                                "loop condition must be bool");
            }
            if (s.step && !check_stmt(*s.step))
                return false;
            loop_depth++;
            breakable_depth++;
            bool ok = check_stmt(*s.body);
            loop_depth--;
            breakable_depth--;
            if (!ok)
                return false;
            scopes.pop_back();
            return true;
        }
        case StmtKind::While:
        case StmtKind::DoWhile: {
            if (!check_expr(*s.cond))
                return false;
            if (!s.cond->type.is_bool_scalar())
                return fail(s.cond->pos, TypeErrorKind::TypeMismatch,
                            "loop condition must be bool");
            loop_depth++;
            breakable_depth++;
            bool ok = check_stmt(*s.body);
            loop_depth--;
            breakable_depth--;
            return ok;
        }
        case StmtKind::Break:
            if (breakable_depth == 0)
                return fail(s.pos, TypeErrorKind::TypeMismatch, "break outside loop or switch");
            return true;
        case StmtKind::Continue:
            if (loop_depth == 0)
                return fail(s.pos, TypeErrorKind::TypeMismatch, "continue outside loop");
            return true;
        case StmtKind::Return: {
            if (!current_fn)
                return fail(s.pos, TypeErrorKind::TypeMismatch, "return outside function");
            if (current_fn->ret.is_void) {
                if (s.expr)
                    return fail(s.pos, TypeErrorKind::TypeMismatch,
                                "void function cannot return a value");
                return true;
            }
            if (!s.expr)
                return fail(s.pos, TypeErrorKind::TypeMismatch,
                            "non-void function must return a value");
            if (!check_expr(*s.expr))
                return false;
            if (!s.expr->type.same_shape(current_fn->ret))
                return fail(s.pos, TypeErrorKind::TypeMismatch,
                            "return type mismatch in '" + current_fn->name + "'");
            return true;
        }
        }
        return fail(s.pos, TypeErrorKind::TypeMismatch, "unhandled statement");
    }

    static Precision join_prec(std::initializer_list<Precision> ps) {
        for (Precision p : ps)
            if (p == Precision::High)
                return Precision::High;
        return Precision::Medium;
    }

    bool check_expr(Expr &e) {
        switch (e.kind) {
        case ExprKind::FloatLit:
            e.type = float_type();
            return true;
        case ExprKind::IntLit:
            e.type = int_type();
            return true;
        case ExprKind::BoolLit:
            e.type = bool_type();
            return true;
        case ExprKind::Ident: {
            VarInfo *vi = lookup(e.name);
            if (!vi)
                return fail(e.pos, TypeErrorKind::UndeclaredIdentifier,
                            "'" + e.name + "' is not declared");
            if (vi->is_global && vi->qualifier == Qualifier::Out)
                return fail(e.pos, TypeErrorKind::InvalidQualifier,
                            "out global '" + e.name + "' is write-only");
            e.type = vi->type;
            return true;
        }
        case ExprKind::Unary: {
            if (!check_expr(*e.args[0]))
                return false;
            Type t = e.args[0]->type;
            if (t.is_sampler())
                return fail(e.pos, TypeErrorKind::InvalidQualifier,
                            "samplers only appear as texture2D arguments");
            if (e.un_op == UnOp::Neg) {
                if (t.scalar == Scalar::Bool)
                    return fail(e.pos, TypeErrorKind::TypeMismatch, "cannot negate bool");
                e.type = t;
            } else {
                if (!t.is_bool_scalar())
                    return fail(e.pos, TypeErrorKind::TypeMismatch, "'!' needs bool");
                e.type = t;
            }
            return true;
        }
        case ExprKind::Binary:
            return check_binary(e);
        case ExprKind::Swizzle: {
            if (!check_expr(*e.args[0]))
                return false;
            Type base = e.args[0]->type;
            if (base.is_void || base.is_sampler() || base.lanes < 2)
                return fail(e.pos, TypeErrorKind::TypeMismatch, "swizzle needs a vector");
            for (char c : e.swizzle) {
                int lane = c == 'x' ? 0 : c == 'y' ? 1 : c == 'z' ? 2 : 3;
                if (lane >= base.lanes)
                    return fail(e.pos, TypeErrorKind::TypeMismatch,
                                std::string("component '") + c + "' out of range");
            }
            e.type = Type(base.scalar, static_cast<uint8_t>(e.swizzle.size()), base.prec);
            return true;
        }
        case ExprKind::Construct:
            return check_construct(e);
        case ExprKind::Call:
            return check_call(e);
        }
        return fail(e.pos, TypeErrorKind::TypeMismatch, "unhandled expression");
    }

    bool check_binary(Expr &e) {
        if (!check_expr(*e.args[0]) || !check_expr(*e.args[1]))
            return false;
        Type l = e.args[0]->type, r = e.args[1]->type;
        if (l.is_sampler() || r.is_sampler())
            return fail(e.pos, TypeErrorKind::InvalidQualifier,
                        "samplers only appear as texture2D arguments");
        switch (e.bin_op) {
        case BinOp::Add:
        case BinOp::Sub:
        case BinOp::Mul:
        case BinOp::Div: {
            if (l.scalar == Scalar::Bool || r.scalar == Scalar::Bool)
                return fail(e.pos, TypeErrorKind::TypeMismatch, "arithmetic on bool");
            if (l.scalar != r.scalar)
                return fail(e.pos, TypeErrorKind::TypeMismatch,
                            "mixed int/float arithmetic requires explicit conversion");
            Precision p = l.scalar == Scalar::Float ? join_prec({l.prec, r.prec})
                                                    : Precision::High;
            if (l.lanes == r.lanes) {
                e.type = Type(l.scalar, l.lanes, p);
                return true;
            }
            if (l.lanes == 1 || r.lanes == 1) { // scalar broadcast
                e.type = Type(l.scalar, std::max(l.lanes, r.lanes), p);
                return true;
            }
            return fail(e.pos, TypeErrorKind::TypeMismatch, "vector size mismatch");
        }
        case BinOp::Lt:
        case BinOp::Le:
        case BinOp::Gt:
        case BinOp::Ge: {
            bool ok = (l.is_float_scalar() && r.is_float_scalar()) ||
                      (l.is_int_scalar() && r.is_int_scalar());
            if (!ok)
                return fail(e.pos, TypeErrorKind::TypeMismatch,
                            "relational operators need matching scalar operands");
            e.type = bool_type();
            return true;
        }
        case BinOp::Eq:
        case BinOp::Ne: {
            if (!l.same_shape(r))
                return fail(e.pos, TypeErrorKind::TypeMismatch, "==/!= on different types");
            e.type = bool_type();
            return true;
        }
        case BinOp::And:
        case BinOp::Or: {
            if (!l.is_bool_scalar() || !r.is_bool_scalar())
                return fail(e.pos, TypeErrorKind::TypeMismatch, "logical operators need bool");
            e.type = bool_type();
            return true;
        }
        }
        return false;
    }

    bool check_construct(Expr &e) {
        Type target = e.ctor_type;
        for (auto &a : e.args)
            if (!check_expr(*a))
                return false;
        if (target.lanes == 1 && !target.is_sampler()) {
            // scalar conversion constructor: float(x) / int(x) / bool(x)
            if (e.args.size() != 1)
                return fail(e.pos, TypeErrorKind::ArityMismatch,
                            type_name(target) + "() takes one argument");
            Type a = e.args[0]->type;
            if (a.is_void || a.is_sampler() || a.lanes != 1)
                return fail(e.pos, TypeErrorKind::TypeMismatch,
                            "scalar constructor needs a scalar argument");
            e.type = target;
            return true;
        }
        if (target.is_sampler())
            return fail(e.pos, TypeErrorKind::InvalidQualifier, "cannot construct a sampler");
        // vector constructor: single scalar broadcast, or components totalling N
        if (e.args.empty())
            return fail(e.pos, TypeErrorKind::ArityMismatch,
                        type_name(target) + "() needs arguments");
        if (e.args.size() == 1 && e.args[0]->type.lanes == 1) {
            if (e.args[0]->type.scalar != target.scalar)
                return fail(e.pos, TypeErrorKind::TypeMismatch,
                            "constructor argument base type mismatch");
            e.type = target;
            return true;
        }
        int total = 0;
        for (auto &a : e.args) {
            Type at = a->type;
            if (at.is_void || at.is_sampler() || at.scalar != target.scalar)
                return fail(e.pos, TypeErrorKind::TypeMismatch,
                            "constructor argument base type mismatch");
            total += at.lanes;
        }
        if (total != target.lanes)
            return fail(e.pos, TypeErrorKind::ArityMismatch,
                        type_name(target) + "() needs " + std::to_string(target.lanes) +
                            " components, got " + std::to_string(total));
        e.type = target;
        return true;
    }

    bool builtin_gen_type(Expr &e, int arity, bool result_high) {
        if (static_cast<int>(e.args.size()) != arity)
            return fail(e.pos, TypeErrorKind::ArityMismatch,
                        e.name + "() takes " + std::to_string(arity) + " arguments");
        Type t = e.args[0]->type;
        if (!t.is_float())
            return fail(e.pos, TypeErrorKind::TypeMismatch, e.name + "() needs float or vecN");
        for (auto &a : e.args)
            if (!a->type.same_shape(t))
                return fail(e.pos, TypeErrorKind::TypeMismatch,
                            e.name + "() arguments must share one type");
        Precision p = Precision::High;
        if (!result_high) {
            p = Precision::Medium;
            for (auto &a : e.args)
                if (a->type.prec == Precision::High)
                    p = Precision::High;
        }
        e.type = Type(Scalar::Float, t.lanes, p);
        return true;
    }

    bool check_call(Expr &e) {
        for (auto &a : e.args)
            if (!check_expr(*a))
                return false;

        const std::string &n = e.name;
        // mix(origin, unused, c) = origin*c + unused*(1-c); c = 1.0 yields origin.
        if (n == "mix") {
            if (e.args.size() != 3)
                return fail(e.pos, TypeErrorKind::ArityMismatch, "mix() takes 3 arguments");
            Type t = e.args[0]->type;
            if (!t.is_float() || !e.args[1]->type.same_shape(t))
                return fail(e.pos, TypeErrorKind::TypeMismatch,
                            "mix() needs two matching float operands");
            if (!e.args[2]->type.is_float_scalar())
                return fail(e.pos, TypeErrorKind::TypeMismatch, "mix() weight must be float");
            Precision p = join_prec(
                {e.args[0]->type.prec, e.args[1]->type.prec, e.args[2]->type.prec});
            e.type = Type(Scalar::Float, t.lanes, p);
            return true;
        }
        if (n == "clamp") {
            if (e.args.size() != 3)
                return fail(e.pos, TypeErrorKind::ArityMismatch, "clamp() takes 3 arguments");
            Type t = e.args[0]->type;
            if (!t.is_float() || !e.args[1]->type.is_float_scalar() ||
                !e.args[2]->type.is_float_scalar())
                return fail(e.pos, TypeErrorKind::TypeMismatch,
                            "clamp(x, lo, hi) needs float bounds");
            e.type = Type(Scalar::Float, t.lanes, Precision::High);
            return true;
        }
        if (n == "min" || n == "max")
            return builtin_gen_type(e, 2, true);
        if (n == "abs" || n == "sqrt" || n == "inversesqrt" || n == "sin" || n == "cos" ||
            n == "floor")
            return builtin_gen_type(e, 1, true);
        if (n == "normalize") {
            if (!builtin_gen_type(e, 1, true))
                return false;
            if (e.type.lanes < 2)
                return fail(e.pos, TypeErrorKind::TypeMismatch, "normalize() needs a vector");
            return true;
        }
        if (n == "dot") {
            if (e.args.size() != 2)
                return fail(e.pos, TypeErrorKind::ArityMismatch, "dot() takes 2 arguments");
            Type t = e.args[0]->type;
            if (!t.is_float_vec() || !e.args[1]->type.same_shape(t))
                return fail(e.pos, TypeErrorKind::TypeMismatch,
                            "dot() needs two matching vectors");
            e.type = Type(Scalar::Float, 1, join_prec({t.prec, e.args[1]->type.prec}));
            return true;
        }
        if (n == "texture2D") {
            if (e.args.size() != 2)
                return fail(e.pos, TypeErrorKind::ArityMismatch, "texture2D() takes 2 arguments");
            if (!e.args[0]->type.is_sampler() || e.args[0]->kind != ExprKind::Ident)
                return fail(e.pos, TypeErrorKind::TypeMismatch,
                            "texture2D() needs a sampler uniform");
            if (!(e.args[1]->type.is_float() && e.args[1]->type.lanes == 2))
                return fail(e.pos, TypeErrorKind::TypeMismatch,
                            "texture2D() coordinates must be vec2");
            e.type = vec_type(4);
            return true;
        }

        if (n == "main")
            return fail(e.pos, TypeErrorKind::TypeMismatch, "main cannot be called");
        auto it = functions.find(n);
        if (it == functions.end())
            return fail(e.pos, TypeErrorKind::UndeclaredIdentifier,
                        "call to undefined function '" + n + "'");
        const FunctionDecl *f = it->second;
        if (e.args.size() != f->params.size())
            return fail(e.pos, TypeErrorKind::ArityMismatch,
                        "'" + n + "' takes " + std::to_string(f->params.size()) +
                            " arguments, got " + std::to_string(e.args.size()));
        for (size_t i = 0; i < e.args.size(); i++) {
            if (f->params[i].type.is_sampler()) {
                if (!e.args[i]->type.is_sampler() || e.args[i]->kind != ExprKind::Ident)
                    return fail(e.args[i]->pos, TypeErrorKind::TypeMismatch,
                                "sampler argument must be a sampler uniform");
            } else if (!e.args[i]->type.same_shape(f->params[i].type)) {
                return fail(e.args[i]->pos, TypeErrorKind::TypeMismatch,
                            "argument " + std::to_string(i + 1) + " of '" + n +
                                "' expects " + type_name(f->params[i].type));
            }
        }
        e.type = f->ret;
        return true;
    }
};

} // namespace

Result<ShaderAst, TypeError> typecheck(ShaderAst ast) {
    ast.warnings.clear();
    Checker c(ast);
    if (!c.run())
        return c.err;
    ast.typechecked = true;
    return ast;
}

} // namespace mshade::ast
