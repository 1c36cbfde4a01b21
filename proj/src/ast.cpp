#include "mshade/shader/ast.hpp"

#include <algorithm>
#include <unordered_set>

namespace mshade::ast {

std::string type_name(const Type &t) {
    if (t.is_void)
        return "void";
    switch (t.scalar) {
    case Scalar::Sampler2D:
        return "sampler2D";
    case Scalar::Float:
        if (t.lanes == 1)
            return "float";
        return "vec" + std::to_string(t.lanes);
    case Scalar::Int:
        if (t.lanes == 1)
            return "int";
        return "ivec" + std::to_string(t.lanes);
    case Scalar::Bool:
        if (t.lanes == 1)
            return "bool";
        return "bvec" + std::to_string(t.lanes);
    }
    return "void";
}

std::optional<Type> type_from_name(const std::string &n) {
    if (n == "float")
        return float_type();
    if (n == "int")
        return int_type();
    if (n == "bool")
        return bool_type();
    if (n == "sampler2D")
        return Type(Scalar::Sampler2D, 1);
    auto vec_of = [&](const char *prefix, Scalar s) -> std::optional<Type> {
        std::string p(prefix);
        if (n.size() == p.size() + 1 && n.compare(0, p.size(), p) == 0) {
            char c = n.back();
            if (c >= '2' && c <= '4')
                return Type(s, static_cast<uint8_t>(c - '0'));
        }
        return std::nullopt;
    };
    if (auto t = vec_of("vec", Scalar::Float))
        return t;
    if (auto t = vec_of("ivec", Scalar::Int))
        return t;
    if (auto t = vec_of("bvec", Scalar::Bool))
        return t;
    return std::nullopt;
}

ExprPtr clone(const Expr &e) {
    auto c = std::make_unique<Expr>();
    c->kind = e.kind;
    c->pos = e.pos;
    c->type = e.type;
    c->float_bits = e.float_bits;
    c->int_value = e.int_value;
    c->bool_value = e.bool_value;
    c->name = e.name;
    c->bin_op = e.bin_op;
    c->un_op = e.un_op;
    c->ctor_type = e.ctor_type;
    c->swizzle = e.swizzle;
    c->args.reserve(e.args.size());
    for (auto &a : e.args)
        c->args.push_back(clone(*a));
    return c;
}

StmtPtr clone(const Stmt &s) {
    auto c = std::make_unique<Stmt>();
    c->kind = s.kind;
    c->pos = s.pos;
    c->decl_type = s.decl_type;
    c->name = s.name;
    c->assign_op = s.assign_op;
    c->inc = s.inc;
    if (s.expr)
        c->expr = clone(*s.expr);
    if (s.init)
        c->init = clone(*s.init);
    if (s.cond)
        c->cond = clone(*s.cond);
    if (s.step)
        c->step = clone(*s.step);
    if (s.body)
        c->body = clone(*s.body);
    if (s.else_body)
        c->else_body = clone(*s.else_body);
    for (auto &cs : s.cases) {
        SwitchCase nc;
        nc.is_default = cs.is_default;
        nc.value = cs.value;
        for (auto &st : cs.body)
            nc.body.push_back(clone(*st));
        c->cases.push_back(std::move(nc));
    }
    for (auto &st : s.stmts)
        c->stmts.push_back(clone(*st));
    return c;
}

ShaderAst clone(const ShaderAst &a) {
    ShaderAst c;
    c.name = a.name;
    c.stage = a.stage;
    c.globals = a.globals;
    c.typechecked = a.typechecked;
    c.warnings = a.warnings;
    for (auto &f : a.functions) {
        FunctionDecl fc;
        fc.ret = f.ret;
        fc.name = f.name;
        fc.params = f.params;
        fc.pos = f.pos;
        if (f.body)
            fc.body = clone(*f.body);
        c.functions.push_back(std::move(fc));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Path navigation

namespace {

NodeRef expr_ref(Expr *e) {
    NodeRef r;
    r.k = NodeRef::E;
    r.expr = e;
    return r;
}

NodeRef stmt_ref(Stmt *s) {
    NodeRef r;
    r.k = NodeRef::S;
    r.stmt = s;
    return r;
}

NodeRef child_of_expr(Expr *e, uint32_t i) {
    if (i < e->args.size())
        return expr_ref(e->args[i].get());
    return {};
}

NodeRef child_of_stmt(Stmt *s, uint32_t i) {
    switch (s->kind) {
    case StmtKind::Block:
        if (i < s->stmts.size())
            return stmt_ref(s->stmts[i].get());
        return {};
    case StmtKind::Decl:
    case StmtKind::Assign:
    case StmtKind::ExprStmt:
    case StmtKind::Return:
        if (i == 0 && s->expr)
            return expr_ref(s->expr.get());
        return {};
    case StmtKind::If:
        if (i == 0 && s->expr)
            return expr_ref(s->expr.get());
        if (i == 1 && s->body)
            return stmt_ref(s->body.get());
        if (i == 2 && s->else_body)
            return stmt_ref(s->else_body.get());
        return {};
    case StmtKind::While:
        if (i == 0 && s->cond)
            return expr_ref(s->cond.get());
        if (i == 1 && s->body)
            return stmt_ref(s->body.get());
        return {};
    case StmtKind::DoWhile:
        if (i == 0 && s->body)
            return stmt_ref(s->body.get());
        if (i == 1 && s->cond)
            return expr_ref(s->cond.get());
        return {};
    case StmtKind::For:
        if (i == 0 && s->init)
            return stmt_ref(s->init.get());
        if (i == 1 && s->cond)
            return expr_ref(s->cond.get());
        if (i == 2 && s->step)
            return stmt_ref(s->step.get());
        if (i == 3 && s->body)
            return stmt_ref(s->body.get());
        return {};
    case StmtKind::Switch:
        if (i == 0 && s->expr)
            return expr_ref(s->expr.get());
        if (i >= 1 && i - 1 < s->cases.size()) {
            NodeRef r;
            r.k = NodeRef::Case;
            r.scase = &s->cases[i - 1];
            r.case_owner = s;
            return r;
        }
        return {};
    default:
        return {};
    }
}

NodeRef child_of(const NodeRef &n, uint32_t i) {
    switch (n.k) {
    case NodeRef::E:
        return child_of_expr(n.expr, i);
    case NodeRef::S:
        return child_of_stmt(n.stmt, i);
    case NodeRef::Case:
        if (i < n.scase->body.size())
            return stmt_ref(n.scase->body[i].get());
        return {};
    default:
        return {};
    }
}

} // namespace

NodeRef resolve(ShaderAst &a, const NodePath &path) {
    if (path.empty() || path[0] >= a.functions.size())
        return {};
    NodeRef cur = stmt_ref(a.functions[path[0]].body.get());
    for (size_t i = 1; i < path.size(); i++) {
        cur = child_of(cur, path[i]);
        if (cur.k == NodeRef::None)
            return {};
    }
    return cur;
}

StmtSlot stmt_slot(ShaderAst &a, const NodePath &path) {
    if (path.size() < 2)
        return {};
    NodePath parent(path.begin(), path.end() - 1);
    NodeRef p = resolve(a, parent);
    uint32_t idx = path.back();
    StmtSlot slot;
    if (p.k == NodeRef::S && p.stmt->kind == StmtKind::Block) {
        if (idx < p.stmt->stmts.size()) {
            slot.list = &p.stmt->stmts;
            slot.index = idx;
        }
    } else if (p.k == NodeRef::Case) {
        if (idx < p.scase->body.size()) {
            slot.list = &p.scase->body;
            slot.index = idx;
        }
    }
    return slot;
}

ExprPtr swap_expr(ShaderAst &a, const NodePath &path, ExprPtr e) {
    if (path.size() < 2)
        return nullptr;
    NodePath parent(path.begin(), path.end() - 1);
    NodeRef p = resolve(a, parent);
    uint32_t idx = path.back();
    ExprPtr *slot = nullptr;
    if (p.k == NodeRef::E) {
        if (idx < p.expr->args.size())
            slot = &p.expr->args[idx];
    } else if (p.k == NodeRef::S) {
        Stmt *s = p.stmt;
        switch (s->kind) {
        case StmtKind::Decl:
        case StmtKind::Assign:
        case StmtKind::ExprStmt:
        case StmtKind::Return:
        case StmtKind::Switch:
            if (idx == 0)
                slot = &s->expr;
            break;
        case StmtKind::If:
            if (idx == 0)
                slot = &s->expr;
            break;
        case StmtKind::While:
            if (idx == 0)
                slot = &s->cond;
            break;
        case StmtKind::DoWhile:
            if (idx == 1)
                slot = &s->cond;
            break;
        case StmtKind::For:
            if (idx == 1)
                slot = &s->cond;
            break;
        default:
            break;
        }
    }
    if (!slot || !*slot)
        return nullptr;
    ExprPtr old = std::move(*slot);
    *slot = std::move(e);
    return old;
}

namespace {

void collect_expr(const Expr &e, std::vector<std::string> &out) {
    if (e.kind == ExprKind::Ident || e.kind == ExprKind::Call)
        out.push_back(e.name);
    for (auto &a : e.args)
        collect_expr(*a, out);
}

void collect_stmt(const Stmt &s, std::vector<std::string> &out) {
    if (!s.name.empty())
        out.push_back(s.name);
    if (s.expr)
        collect_expr(*s.expr, out);
    if (s.cond)
        collect_expr(*s.cond, out);
    if (s.init)
        collect_stmt(*s.init, out);
    if (s.step)
        collect_stmt(*s.step, out);
    if (s.body)
        collect_stmt(*s.body, out);
    if (s.else_body)
        collect_stmt(*s.else_body, out);
    for (auto &c : s.cases)
        for (auto &st : c.body)
            collect_stmt(*st, out);
    for (auto &st : s.stmts)
        collect_stmt(*st, out);
}

} // namespace

void collect_identifiers(const ShaderAst &a, std::vector<std::string> &out) {
    for (auto &g : a.globals)
        out.push_back(g.name);
    for (auto &f : a.functions) {
        out.push_back(f.name);
        for (auto &p : f.params)
            out.push_back(p.name);
        if (f.body)
            collect_stmt(*f.body, out);
    }
}

std::string fresh_name(const ShaderAst &a, const std::string &prefix) {
    std::vector<std::string> ids;
    collect_identifiers(a, ids);
    std::unordered_set<std::string> used(ids.begin(), ids.end());
    for (uint32_t k = 0;; k++) {
        std::string cand = prefix + std::to_string(k);
        if (!used.count(cand))
            return cand;
    }
}

} // namespace mshade::ast
