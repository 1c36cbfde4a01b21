#include "mshade/metamorph/transforms.hpp"
#include "mshade/support/fp.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <map>
#include <set>
#include <unordered_set>

namespace mshade::meta {

using namespace mshade::ast;

const char *transform_name(TransformKind k) {
    switch (k) {
    case TransformKind::MixWrap:
        return "MixWrap";
    case TransformKind::IfToSwitch:
        return "IfToSwitch";
    case TransformKind::ForToWhile:
        return "ForToWhile";
    case TransformKind::WhileToFor:
        return "WhileToFor";
    case TransformKind::SingleIterationLoopWrap:
        return "SingleIterationLoopWrap";
    case TransformKind::LoopUnroll:
        return "LoopUnroll";
    case TransformKind::LoopSplit:
        return "LoopSplit";
    case TransformKind::CodeDonation:
        return "CodeDonation";
    }
    return "?";
}

std::optional<TransformKind> transform_from_name(const std::string &n) {
    for (int i = 0; i <= static_cast<int>(TransformKind::CodeDonation); i++)
        if (n == transform_name(static_cast<TransformKind>(i)))
            return static_cast<TransformKind>(i);
    return std::nullopt;
}

namespace {

const std::set<std::string> kBuiltins = {
    "mix",  "clamp", "min",    "max",  "abs",       "sqrt",
    "inversesqrt", "sin", "cos", "floor", "dot", "normalize", "texture2D",
};

// ---------------------------------------------------------------------------
// Small AST analyses

// break/continue that would bind outside the statement (relative nesting).
void scan_unbound(const Stmt &s, int loop_depth, int breakable_depth, bool &brk, bool &cont) {
    switch (s.kind) {
    case StmtKind::Break:
        if (breakable_depth == 0)
            brk = true;
        return;
    case StmtKind::Continue:
        if (loop_depth == 0)
            cont = true;
        return;
    case StmtKind::For:
    case StmtKind::While:
    case StmtKind::DoWhile:
        if (s.body)
            scan_unbound(*s.body, loop_depth + 1, breakable_depth + 1, brk, cont);
        return;
    case StmtKind::Switch:
        for (auto &c : s.cases)
            for (auto &st : c.body)
                scan_unbound(*st, loop_depth, breakable_depth + 1, brk, cont);
        return;
    case StmtKind::If:
        if (s.body)
            scan_unbound(*s.body, loop_depth, breakable_depth, brk, cont);
        if (s.else_body)
            scan_unbound(*s.else_body, loop_depth, breakable_depth, brk, cont);
        return;
    case StmtKind::Block:
        for (auto &st : s.stmts)
            scan_unbound(*st, loop_depth, breakable_depth, brk, cont);
        return;
    default:
        return;
    }
}

bool has_unbound_continue(const Stmt &s) {
    bool brk = false, cont = false;
    // loop constructs inside count as binding scopes; the statement itself is
    // examined relative to depth 0
    scan_unbound(s, 0, 0, brk, cont);
    return cont;
}

bool has_unbound_break_or_continue(const Stmt &s) {
    bool brk = false, cont = false;
    scan_unbound(s, 0, 0, brk, cont);
    return brk || cont;
}

bool contains_return(const Stmt &s) {
    if (s.kind == StmtKind::Return)
        return true;
    if (s.init && contains_return(*s.init))
        return true;
    if (s.step && contains_return(*s.step))
        return true;
    if (s.body && contains_return(*s.body))
        return true;
    if (s.else_body && contains_return(*s.else_body))
        return true;
    for (auto &c : s.cases)
        for (auto &st : c.body)
            if (contains_return(*st))
                return true;
    for (auto &st : s.stmts)
        if (contains_return(*st))
            return true;
    return false;
}

void walk_exprs(const Stmt &s, const std::function<void(const Expr &)> &f);

void walk_exprs(const Expr &e, const std::function<void(const Expr &)> &f) {
    f(e);
    for (auto &a : e.args)
        walk_exprs(*a, f);
}

void walk_exprs(const Stmt &s, const std::function<void(const Expr &)> &f) {
    if (s.expr)
        walk_exprs(*s.expr, f);
    if (s.cond)
        walk_exprs(*s.cond, f);
    if (s.init)
        walk_exprs(*s.init, f);
    if (s.step)
        walk_exprs(*s.step, f);
    if (s.body)
        walk_exprs(*s.body, f);
    if (s.else_body)
        walk_exprs(*s.else_body, f);
    for (auto &c : s.cases)
        for (auto &st : c.body)
            walk_exprs(*st, f);
    for (auto &st : s.stmts)
        walk_exprs(*st, f);
}

void walk_stmts(const Stmt &s, const std::function<void(const Stmt &)> &f) {
    f(s);
    if (s.init)
        walk_stmts(*s.init, f);
    if (s.step)
        walk_stmts(*s.step, f);
    if (s.body)
        walk_stmts(*s.body, f);
    if (s.else_body)
        walk_stmts(*s.else_body, f);
    for (auto &c : s.cases)
        for (auto &st : c.body)
            walk_stmts(*st, f);
    for (auto &st : s.stmts)
        walk_stmts(*st, f);
}

bool assigns_name(const Stmt &root, const std::string &name) {
    bool found = false;
    walk_stmts(root, [&](const Stmt &s) {
        if ((s.kind == StmtKind::Assign || s.kind == StmtKind::IncDec) && s.name == name)
            found = true;
    });
    return found;
}

bool declares_name(const Stmt &root, const std::string &name) {
    bool found = false;
    walk_stmts(root, [&](const Stmt &s) {
        if (s.kind == StmtKind::Decl && s.name == name)
            found = true;
    });
    return found;
}

bool references_name(const Stmt &root, const std::string &name) {
    bool found = false;
    walk_stmts(root, [&](const Stmt &s) {
        if ((s.kind == StmtKind::Assign || s.kind == StmtKind::IncDec) && s.name == name)
            found = true;
    });
    walk_exprs(root, [&](const Expr &e) {
        if (e.kind == ExprKind::Ident && e.name == name)
            found = true;
    });
    return found;
}

// Canonical counted for-loop shape: for (int i = C0; i < N; i++/i += k).
struct ForPattern {
    std::string var;
    int64_t init = 0;
    int64_t bound = 0;
    int64_t step = 1;
    bool inclusive = false;
    int64_t trips = 0;
};

std::optional<ForPattern> match_counted_for(const Stmt &s) {
    if (s.kind != StmtKind::For || !s.init || !s.cond || !s.step)
        return std::nullopt;
    const Stmt &init = *s.init;
    if (init.kind != StmtKind::Decl || !init.decl_type.is_int_scalar() ||
        init.expr->kind != ExprKind::IntLit)
        return std::nullopt;
    ForPattern p;
    p.var = init.name;
    p.init = init.expr->int_value;
    const Expr &c = *s.cond;
    if (c.kind != ExprKind::Binary || (c.bin_op != BinOp::Lt && c.bin_op != BinOp::Le))
        return std::nullopt;
    if (c.args[0]->kind != ExprKind::Ident || c.args[0]->name != p.var ||
        c.args[1]->kind != ExprKind::IntLit)
        return std::nullopt;
    p.bound = c.args[1]->int_value;
    p.inclusive = c.bin_op == BinOp::Le;
    const Stmt &st = *s.step;
    if (st.kind == StmtKind::IncDec) {
        if (st.name != p.var || !st.inc)
            return std::nullopt;
        p.step = 1;
    } else if (st.kind == StmtKind::Assign && st.assign_op == AssignOp::AddSet &&
               st.name == p.var && st.expr->kind == ExprKind::IntLit &&
               st.expr->int_value > 0) {
        p.step = st.expr->int_value;
    } else {
        return std::nullopt;
    }
    // the body must not retarget or shadow the induction variable
    if (assigns_name(*s.body, p.var) || declares_name(*s.body, p.var))
        return std::nullopt;
    if (has_unbound_break_or_continue(*s.body))
        return std::nullopt;
    int64_t limit = p.inclusive ? p.bound + 1 : p.bound;
    p.trips = p.init >= limit ? 0 : (limit - p.init + p.step - 1) / p.step;
    return p;
}

// ---------------------------------------------------------------------------
// Scope queries

struct ScopeVar {
    std::string name;
    Type type;
};

// Visible, readable variables at a node path: locals declared on the way plus
// in/uniform globals. Walks the statement structure along `path`.
std::vector<ScopeVar> scope_at(ShaderAst &a, const NodePath &path) {
    std::vector<ScopeVar> vars;
    for (auto &g : a.globals)
        if (g.qualifier != Qualifier::Out && !g.type.is_sampler())
            vars.push_back({g.name, g.type});
    if (path.empty() || path[0] >= a.functions.size())
        return vars;
    FunctionDecl &fn = a.functions[path[0]];
    for (auto &p : fn.params)
        if (!p.type.is_sampler())
            vars.push_back({p.name, p.type});

    NodeRef cur;
    cur.k = NodeRef::S;
    cur.stmt = fn.body.get();
    for (size_t i = 1; i < path.size(); i++) {
        uint32_t idx = path[i];
        if (cur.k == NodeRef::S) {
            Stmt *s = cur.stmt;
            if (s->kind == StmtKind::Block) {
                for (uint32_t j = 0; j < idx && j < s->stmts.size(); j++)
                    if (s->stmts[j]->kind == StmtKind::Decl)
                        vars.push_back({s->stmts[j]->name, s->stmts[j]->decl_type});
            } else if (s->kind == StmtKind::For) {
                // descending past the init makes the induction variable visible
                if (idx >= 1 && s->init && s->init->kind == StmtKind::Decl)
                    vars.push_back({s->init->name, s->init->decl_type});
            }
        } else if (cur.k == NodeRef::Case) {
            for (uint32_t j = 0; j < idx && j < cur.scase->body.size(); j++)
                if (cur.scase->body[j]->kind == StmtKind::Decl)
                    vars.push_back({cur.scase->body[j]->name, cur.scase->body[j]->decl_type});
        }
        // step into the child
        NodePath sub(path.begin(), path.begin() + i + 1);
        cur = resolve(a, sub);
        if (cur.k == NodeRef::None)
            break;
    }
    return vars;
}

// ---------------------------------------------------------------------------
// Expression builders

ExprPtr mk_float(float v) {
    auto e = std::make_unique<Expr>();
    e->kind = ExprKind::FloatLit;
    e->float_bits = f32_bits(v);
    return e;
}

ExprPtr mk_int(int32_t v) {
    auto e = std::make_unique<Expr>();
    e->kind = ExprKind::IntLit;
    e->int_value = v;
    return e;
}

ExprPtr mk_bool(bool v) {
    auto e = std::make_unique<Expr>();
    e->kind = ExprKind::BoolLit;
    e->bool_value = v;
    return e;
}

ExprPtr mk_ident(const std::string &n) {
    auto e = std::make_unique<Expr>();
    e->kind = ExprKind::Ident;
    e->name = n;
    return e;
}

ExprPtr mk_call(const std::string &n, std::vector<ExprPtr> args) {
    auto e = std::make_unique<Expr>();
    e->kind = ExprKind::Call;
    e->name = n;
    e->args = std::move(args);
    return e;
}

ExprPtr mk_construct(Type t, std::vector<ExprPtr> args) {
    auto e = std::make_unique<Expr>();
    e->kind = ExprKind::Construct;
    e->ctor_type = Type(t.scalar, t.lanes);
    e->args = std::move(args);
    return e;
}

// Literal in [0,1] quantized to 1/256 steps (exactly representable in f16,
// so mediump round-trips cannot perturb it).
float quantized_unit(Rng &rng) { return static_cast<float>(rng.below(257)) / 256.0f; }

ExprPtr literal_of_type(const Type &t, Rng &rng) {
    if (t.scalar == Scalar::Float) {
        if (t.lanes == 1)
            return mk_float(quantized_unit(rng));
        std::vector<ExprPtr> ls;
        for (int i = 0; i < t.lanes; i++)
            ls.push_back(mk_float(quantized_unit(rng)));
        return mk_construct(t, std::move(ls));
    }
    if (t.scalar == Scalar::Int) {
        if (t.lanes == 1)
            return mk_int(static_cast<int32_t>(rng.below(7)) + 1);
        std::vector<ExprPtr> ls;
        for (int i = 0; i < t.lanes; i++)
            ls.push_back(mk_int(static_cast<int32_t>(rng.below(7)) + 1));
        return mk_construct(t, std::move(ls));
    }
    if (t.lanes == 1)
        return mk_bool(rng.below(2) == 1);
    std::vector<ExprPtr> ls;
    for (int i = 0; i < t.lanes; i++)
        ls.push_back(mk_bool(rng.below(2) == 1));
    return mk_construct(t, std::move(ls));
}

StmtPtr mk_block(std::vector<StmtPtr> stmts) {
    auto b = std::make_unique<Stmt>();
    b->kind = StmtKind::Block;
    b->stmts = std::move(stmts);
    return b;
}

// for (int <name> = 0; <name> < 1; <name>++) { body... }
StmtPtr mk_once_loop(const std::string &name, std::vector<StmtPtr> body) {
    auto f = std::make_unique<Stmt>();
    f->kind = StmtKind::For;
    auto init = std::make_unique<Stmt>();
    init->kind = StmtKind::Decl;
    init->decl_type = int_type();
    init->name = name;
    init->expr = mk_int(0);
    f->init = std::move(init);
    auto cond = std::make_unique<Expr>();
    cond->kind = ExprKind::Binary;
    cond->bin_op = BinOp::Lt;
    cond->args.push_back(mk_ident(name));
    cond->args.push_back(mk_int(1));
    f->cond = std::move(cond);
    auto step = std::make_unique<Stmt>();
    step->kind = StmtKind::IncDec;
    step->name = name;
    step->inc = true;
    f->step = std::move(step);
    f->body = mk_block(std::move(body));
    return f;
}

void substitute_ident(Stmt &root, const std::string &name, int32_t value);

void substitute_ident(Expr &e, const std::string &name, int32_t value) {
    for (auto &a : e.args)
        substitute_ident(*a, name, value);
    if (e.kind == ExprKind::Ident && e.name == name) {
        e.kind = ExprKind::IntLit;
        e.int_value = value;
        e.name.clear();
    }
}

void substitute_ident(Stmt &root, const std::string &name, int32_t value) {
    if (root.expr)
        substitute_ident(*root.expr, name, value);
    if (root.cond)
        substitute_ident(*root.cond, name, value);
    if (root.init)
        substitute_ident(*root.init, name, value);
    if (root.step)
        substitute_ident(*root.step, name, value);
    if (root.body)
        substitute_ident(*root.body, name, value);
    if (root.else_body)
        substitute_ident(*root.else_body, name, value);
    for (auto &c : root.cases)
        for (auto &st : c.body)
            substitute_ident(*st, name, value);
    for (auto &st : root.stmts)
        substitute_ident(*st, name, value);
}

void rename_idents(Stmt &root, const std::map<std::string, std::string> &ren);

void rename_idents(Expr &e, const std::map<std::string, std::string> &ren) {
    if (e.kind == ExprKind::Ident) {
        auto it = ren.find(e.name);
        if (it != ren.end())
            e.name = it->second;
    }
    for (auto &a : e.args)
        rename_idents(*a, ren);
}

void rename_idents(Stmt &root, const std::map<std::string, std::string> &ren) {
    if ((root.kind == StmtKind::Decl || root.kind == StmtKind::Assign ||
         root.kind == StmtKind::IncDec) &&
        ren.count(root.name))
        root.name = ren.at(root.name);
    if (root.expr)
        rename_idents(*root.expr, ren);
    if (root.cond)
        rename_idents(*root.cond, ren);
    if (root.init)
        rename_idents(*root.init, ren);
    if (root.step)
        rename_idents(*root.step, ren);
    if (root.body)
        rename_idents(*root.body, ren);
    if (root.else_body)
        rename_idents(*root.else_body, ren);
    for (auto &c : root.cases)
        for (auto &st : c.body)
            rename_idents(*st, ren);
    for (auto &st : root.stmts)
        rename_idents(*st, ren);
}

// ---------------------------------------------------------------------------
// Candidate enumeration

int main_index(const ShaderAst &a) {
    for (size_t i = 0; i < a.functions.size(); i++)
        if (a.functions[i].name == "main")
            return static_cast<int>(i);
    return -1;
}

std::vector<uint32_t> valid_wrap_lens(const std::vector<StmtPtr> &list, size_t index);

struct Enumerator {
    ShaderAst &a;
    bool corpus_has_donor;
    std::vector<Candidate> out;

    void expr(Expr &e, NodePath &path) {
        if (e.type.is_float())
            out.push_back({TransformKind::MixWrap, path});
        for (size_t i = 0; i < e.args.size(); i++) {
            path.push_back(static_cast<uint32_t>(i));
            expr(*e.args[i], path);
            path.pop_back();
        }
    }

    void child_expr(ExprPtr &e, NodePath &path, uint32_t idx) {
        if (!e)
            return;
        path.push_back(idx);
        expr(*e, path);
        path.pop_back();
    }

    void stmt_list(std::vector<StmtPtr> &stmts, NodePath &path, bool in_main) {
        for (size_t i = 0; i < stmts.size(); i++) {
            path.push_back(static_cast<uint32_t>(i));
            if (!valid_wrap_lens(stmts, i).empty())
                out.push_back({TransformKind::SingleIterationLoopWrap, path});
            stmt(*stmts[i], path, in_main);
            path.pop_back();
        }
        if (in_main && corpus_has_donor) {
            for (size_t i = 0; i <= stmts.size(); i++) {
                path.push_back(static_cast<uint32_t>(i));
                out.push_back({TransformKind::CodeDonation, path});
                path.pop_back();
            }
        }
    }

    void stmt(Stmt &s, NodePath &path, bool in_main) {
        switch (s.kind) {
        case StmtKind::Block:
            stmt_list(s.stmts, path, in_main);
            return;
        case StmtKind::Decl:
        case StmtKind::Assign:
        case StmtKind::ExprStmt:
        case StmtKind::Return:
            child_expr(s.expr, path, 0);
            return;
        case StmtKind::IncDec:
        case StmtKind::Break:
        case StmtKind::Continue:
            return;
        case StmtKind::If: {
            out.push_back({TransformKind::IfToSwitch, path});
            child_expr(s.expr, path, 0);
            path.push_back(1);
            stmt(*s.body, path, in_main);
            path.pop_back();
            if (s.else_body) {
                path.push_back(2);
                stmt(*s.else_body, path, in_main);
                path.pop_back();
            }
            return;
        }
        case StmtKind::Switch: {
            child_expr(s.expr, path, 0);
            for (size_t c = 0; c < s.cases.size(); c++) {
                path.push_back(static_cast<uint32_t>(1 + c));
                stmt_list(s.cases[c].body, path, in_main);
                path.pop_back();
            }
            return;
        }
        case StmtKind::For: {
            if (!has_unbound_continue(*s.body))
                out.push_back({TransformKind::ForToWhile, path});
            if (auto p = match_counted_for(s)) {
                if (p->trips <= 8)
                    out.push_back({TransformKind::LoopUnroll, path});
                if (p->trips >= 2)
                    out.push_back({TransformKind::LoopSplit, path});
            }
            if (s.init) {
                path.push_back(0);
                stmt(*s.init, path, in_main);
                path.pop_back();
            }
            child_expr(s.cond, path, 1);
            if (s.step) {
                path.push_back(2);
                stmt(*s.step, path, in_main);
                path.pop_back();
            }
            path.push_back(3);
            stmt(*s.body, path, in_main);
            path.pop_back();
            return;
        }
        case StmtKind::While: {
            out.push_back({TransformKind::WhileToFor, path});
            child_expr(s.cond, path, 0);
            path.push_back(1);
            stmt(*s.body, path, in_main);
            path.pop_back();
            return;
        }
        case StmtKind::DoWhile: {
            path.push_back(0);
            stmt(*s.body, path, in_main);
            path.pop_back();
            child_expr(s.cond, path, 1);
            return;
        }
        }
    }
};

// ---------------------------------------------------------------------------
// Donor region machinery

struct DonorRegion {
    NodePath block; // path of the Block statement or Case owning the list
    uint32_t start = 0;
    uint32_t len = 1;
};

bool region_ok(const std::vector<StmtPtr> &list, uint32_t start, uint32_t len) {
    if (start + len > list.size() || len == 0)
        return false;
    std::set<std::string> declared;
    bool ok = true;
    for (uint32_t i = start; i < start + len; i++) {
        const Stmt &s = *list[i];
        if (contains_return(s) || has_unbound_break_or_continue(s))
            return false;
        walk_exprs(s, [&](const Expr &e) {
            if (e.kind == ExprKind::Call && !kBuiltins.count(e.name))
                ok = false; // user-function call; not liftable
            if (e.name == "texture2D" || e.type.is_sampler())
                ok = false;
        });
        walk_stmts(s, [&](const Stmt &st) {
            if (st.kind == StmtKind::Decl) {
                if (!declared.insert(st.name).second)
                    ok = false; // shadowing inside the region
                if (st.decl_type.is_sampler())
                    ok = false;
            }
        });
    }
    return ok;
}

// Wrap-run lengths at list[index] that neither capture a break/continue nor
// hide a declaration something later still reads.
std::vector<uint32_t> valid_wrap_lens(const std::vector<StmtPtr> &list, size_t index) {
    std::vector<uint32_t> valid;
    uint32_t max_len = static_cast<uint32_t>(std::min<size_t>(3, list.size() - index));
    for (uint32_t len = 1; len <= max_len; len++) {
        bool ok = true;
        // a run ending in `return` would leave a non-void function without
        // its syntactically-required trailing return once wrapped
        if (list[index + len - 1]->kind == StmtKind::Return)
            ok = false;
        std::vector<std::string> decls;
        for (uint32_t i = 0; i < len && ok; i++) {
            const Stmt &s = *list[index + i];
            if (has_unbound_break_or_continue(s))
                ok = false;
            if (s.kind == StmtKind::Decl)
                decls.push_back(s.name);
        }
        for (auto &n : decls)
            for (size_t j = index + len; j < list.size() && ok; j++)
                if (references_name(*list[j], n))
                    ok = false;
        if (ok)
            valid.push_back(len);
    }
    return valid;
}

// Enumerates candidate statement lists of a shader's main, in path order.
void donor_lists(ShaderAst &donor,
                 std::vector<std::pair<NodePath, std::vector<StmtPtr> *>> &out) {
    int mi = main_index(donor);
    if (mi < 0)
        return;
    struct Rec {
        std::vector<std::pair<NodePath, std::vector<StmtPtr> *>> &out;
        void visit(Stmt &s, NodePath &path) {
            if (s.kind == StmtKind::Block) {
                out.push_back({path, &s.stmts});
                for (size_t i = 0; i < s.stmts.size(); i++) {
                    path.push_back(static_cast<uint32_t>(i));
                    visit(*s.stmts[i], path);
                    path.pop_back();
                }
                return;
            }
            auto child = [&](StmtPtr &c, uint32_t idx) {
                if (!c)
                    return;
                path.push_back(idx);
                visit(*c, path);
                path.pop_back();
            };
            switch (s.kind) {
            case StmtKind::If:
                child(s.body, 1);
                child(s.else_body, 2);
                return;
            case StmtKind::For:
                child(s.body, 3);
                return;
            case StmtKind::While:
                child(s.body, 1);
                return;
            case StmtKind::DoWhile:
                child(s.body, 0);
                return;
            case StmtKind::Switch:
                // case bodies are statement lists but not Block nodes; regions
                // are drawn from blocks only (cases host breaks)
                return;
            default:
                return;
            }
        }
    } rec{out};
    NodePath path{static_cast<uint32_t>(mi)};
    rec.visit(*donor.functions[mi].body, path);
}

std::vector<DonorRegion> enumerate_regions(ShaderAst &donor) {
    std::vector<DonorRegion> regions;
    std::vector<std::pair<NodePath, std::vector<StmtPtr> *>> lists;
    donor_lists(donor, lists);
    for (auto &[path, list] : lists) {
        for (uint32_t start = 0; start < list->size(); start++) {
            for (uint32_t len = 1; len <= 4 && start + len <= list->size(); len++) {
                if (region_ok(*list, start, len))
                    regions.push_back({path, start, len});
            }
        }
    }
    return regions;
}

// name -> type of everything visible at (and before) position `start` of the
// list addressed by block_path in donor's main.
std::map<std::string, Type> donor_scope(ShaderAst &donor, const NodePath &block_path,
                                        uint32_t start) {
    std::map<std::string, Type> scope;
    for (auto &g : donor.globals)
        scope[g.name] = g.type;
    NodePath pos = block_path;
    pos.push_back(start); // statement-position path
    for (auto &v : scope_at(donor, pos))
        scope[v.name] = v.type;
    return scope;
}

} // namespace

// ---------------------------------------------------------------------------
// Public entry points

std::vector<Candidate> enumerate_candidates(ShaderAst &a,
                                            const std::vector<ShaderAst> &corpus) {
    bool donor_available = false;
    for (auto &d : corpus) {
        ShaderAst &dm = const_cast<ShaderAst &>(d);
        if (!enumerate_regions(dm).empty()) {
            donor_available = true;
            break;
        }
    }
    Enumerator en{a, donor_available, {}};
    int mi = main_index(a);
    for (size_t f = 0; f < a.functions.size(); f++) {
        NodePath path{static_cast<uint32_t>(f)};
        en.stmt(*a.functions[f].body, path, static_cast<int>(f) == mi);
    }
    return std::move(en.out);
}

TransformParams sample_params(ShaderAst &a, TransformKind kind, const NodePath &path,
                              const std::vector<ShaderAst> &corpus, Rng &rng) {
    TransformParams p;
    p.salt = rng.next();
    switch (kind) {
    case TransformKind::MixWrap: {
        NodeRef site = resolve(a, path);
        if (site.k != NodeRef::E)
            return p;
        Type t = site.expr->type;
        std::vector<std::string> same_type;
        for (auto &v : scope_at(a, path))
            if (v.type.same_shape(t))
                same_type.push_back(v.name);
        if (!same_type.empty() && rng.below(2) == 1) {
            p.mix_mode = 1;
            p.mix_var = same_type[rng.below(same_type.size())];
        }
        return p;
    }
    case TransformKind::SingleIterationLoopWrap: {
        StmtSlot slot = stmt_slot(a, path);
        if (!slot.valid())
            return p;
        std::vector<uint32_t> valid = valid_wrap_lens(*slot.list, slot.index);
        p.wrap_len = valid.empty() ? 1 : valid[rng.below(valid.size())];
        return p;
    }
    case TransformKind::LoopUnroll: {
        NodeRef site = resolve(a, path);
        if (site.k == NodeRef::S) {
            auto fp = match_counted_for(*site.stmt);
            if (fp && fp->trips >= 3)
                p.unroll_partial = rng.below(2) == 1;
        }
        return p;
    }
    case TransformKind::LoopSplit: {
        NodeRef site = resolve(a, path);
        if (site.k == NodeRef::S) {
            auto fp = match_counted_for(*site.stmt);
            if (fp && fp->trips >= 2)
                p.split_index = 1 + static_cast<int32_t>(rng.below(fp->trips - 1));
        }
        return p;
    }
    case TransformKind::CodeDonation: {
        std::vector<std::pair<const ShaderAst *, DonorRegion>> all;
        for (auto &d : corpus) {
            ShaderAst &dm = const_cast<ShaderAst &>(d);
            for (auto &r : enumerate_regions(dm))
                all.push_back({&d, r});
        }
        if (all.empty())
            return p;
        auto &[donor, region] = all[rng.below(all.size())];
        p.donor = donor->name;
        p.donor_block = region.block;
        p.start = region.start;
        p.len = region.len;
        return p;
    }
    default:
        return p;
    }
}

namespace {

bool fail(std::string *err, const std::string &msg) {
    if (err)
        *err = msg;
    return false;
}

bool apply_mix_wrap(ShaderAst &a, const ChainStep &step, std::string *err) {
    NodeRef site = resolve(a, step.path);
    if (site.k != NodeRef::E)
        return fail(err, "MixWrap: path does not address an expression");
    Type t = site.expr->type;
    if (!t.is_float())
        return fail(err, "MixWrap: site type is not float-based");

    Rng rng(step.params.salt);
    ExprPtr unused;
    if (step.params.mix_mode == 1) {
        bool visible = false;
        for (auto &v : scope_at(a, step.path))
            if (v.name == step.params.mix_var && v.type.same_shape(t))
                visible = true;
        if (!visible)
            return fail(err, "MixWrap: unused-operand variable not in scope");
        // clamp keeps the unused operand finite whatever the variable holds
        unused = mk_call("clamp", {});
        unused->args.push_back(mk_ident(step.params.mix_var));
        unused->args.push_back(mk_float(0.0f));
        unused->args.push_back(mk_float(1.0f));
    } else {
        unused = literal_of_type(Type(Scalar::Float, t.lanes), rng);
    }

    auto wrapped = std::make_unique<Expr>();
    wrapped->kind = ExprKind::Call;
    wrapped->name = "mix";
    wrapped->args.push_back(nullptr); // placeholder, filled from the old expr
    wrapped->args.push_back(std::move(unused));
    wrapped->args.push_back(mk_float(1.0f));

    ExprPtr old = swap_expr(a, step.path, std::move(wrapped));
    if (!old)
        return fail(err, "MixWrap: expression slot not replaceable");
    NodeRef placed = resolve(a, step.path);
    placed.expr->args[0] = std::move(old);
    return true;
}

bool apply_if_to_switch(ShaderAst &a, const ChainStep &step, std::string *err) {
    StmtSlot slot = stmt_slot(a, step.path);
    if (!slot.valid())
        return fail(err, "IfToSwitch: path does not address a replaceable statement");
    Stmt &s = *(*slot.list)[slot.index];
    if (s.kind != StmtKind::If)
        return fail(err, "IfToSwitch: site is not an if");

    auto sw = std::make_unique<Stmt>();
    sw->kind = StmtKind::Switch;
    std::vector<ExprPtr> conv_args;
    conv_args.push_back(clone(*s.expr));
    sw->expr = mk_construct(int_type(), std::move(conv_args));

    SwitchCase then_case;
    then_case.value = 1;
    then_case.body.push_back(clone(*s.body));
    auto brk = std::make_unique<Stmt>();
    brk->kind = StmtKind::Break;
    then_case.body.push_back(std::move(brk));
    sw->cases.push_back(std::move(then_case));

    SwitchCase else_case;
    else_case.is_default = true;
    if (s.else_body)
        else_case.body.push_back(clone(*s.else_body));
    auto brk2 = std::make_unique<Stmt>();
    brk2->kind = StmtKind::Break;
    else_case.body.push_back(std::move(brk2));
    sw->cases.push_back(std::move(else_case));

    (*slot.list)[slot.index] = std::move(sw);
    return true;
}

bool apply_for_to_while(ShaderAst &a, const ChainStep &step, std::string *err) {
    StmtSlot slot = stmt_slot(a, step.path);
    if (!slot.valid())
        return fail(err, "ForToWhile: path does not address a replaceable statement");
    Stmt &s = *(*slot.list)[slot.index];
    if (s.kind != StmtKind::For)
        return fail(err, "ForToWhile: site is not a for");
    if (has_unbound_continue(*s.body))
        return fail(err, "ForToWhile: loop contains continue");

    auto wl = std::make_unique<Stmt>();
    wl->kind = StmtKind::While;
    wl->cond = s.cond ? clone(*s.cond) : mk_bool(true);
    std::vector<StmtPtr> wbody;
    wbody.push_back(clone(*s.body));
    if (s.step)
        wbody.push_back(clone(*s.step));
    wl->body = mk_block(std::move(wbody));

    std::vector<StmtPtr> outer;
    if (s.init)
        outer.push_back(clone(*s.init));
    outer.push_back(std::move(wl));
    (*slot.list)[slot.index] = mk_block(std::move(outer));
    return true;
}

bool apply_while_to_for(ShaderAst &a, const ChainStep &step, std::string *err) {
    StmtSlot slot = stmt_slot(a, step.path);
    if (!slot.valid())
        return fail(err, "WhileToFor: path does not address a replaceable statement");
    Stmt &s = *(*slot.list)[slot.index];
    if (s.kind != StmtKind::While)
        return fail(err, "WhileToFor: site is not a while");

    auto f = std::make_unique<Stmt>();
    f->kind = StmtKind::For;
    f->cond = clone(*s.cond);
    f->body = clone(*s.body);
    (*slot.list)[slot.index] = std::move(f);
    return true;
}

bool apply_once_wrap(ShaderAst &a, const ChainStep &step, std::string *err) {
    StmtSlot slot = stmt_slot(a, step.path);
    if (!slot.valid())
        return fail(err, "SingleIterationLoopWrap: bad site");
    uint32_t len = std::max<uint32_t>(1, step.params.wrap_len);
    if (slot.index + len > slot.list->size())
        return fail(err, "SingleIterationLoopWrap: run exceeds the block");
    if ((*slot.list)[slot.index + len - 1]->kind == StmtKind::Return)
        return fail(err, "SingleIterationLoopWrap: run ends in a return");
    std::vector<std::string> decls;
    for (uint32_t i = 0; i < len; i++) {
        const Stmt &s = *(*slot.list)[slot.index + i];
        if (has_unbound_break_or_continue(s))
            return fail(err, "SingleIterationLoopWrap: run captures break/continue");
        if (s.kind == StmtKind::Decl)
            decls.push_back(s.name);
    }
    for (auto &n : decls)
        for (size_t j = slot.index + len; j < slot.list->size(); j++)
            if (references_name(*(*slot.list)[j], n))
                return fail(err, "SingleIterationLoopWrap: declaration escapes the run");

    std::string ind = fresh_name(a, "w");
    std::vector<StmtPtr> body;
    for (uint32_t i = 0; i < len; i++)
        body.push_back(std::move((*slot.list)[slot.index + i]));
    StmtPtr loop = mk_once_loop(ind, std::move(body));
    slot.list->erase(slot.list->begin() + slot.index, slot.list->begin() + slot.index + len);
    slot.list->insert(slot.list->begin() + slot.index, std::move(loop));
    return true;
}

StmtPtr counted_for(const std::string &var, int64_t from, bool inclusive, int64_t bound,
                    int64_t stepv, StmtPtr body) {
    auto f = std::make_unique<Stmt>();
    f->kind = StmtKind::For;
    auto init = std::make_unique<Stmt>();
    init->kind = StmtKind::Decl;
    init->decl_type = int_type();
    init->name = var;
    init->expr = mk_int(static_cast<int32_t>(from));
    f->init = std::move(init);
    auto cond = std::make_unique<Expr>();
    cond->kind = ExprKind::Binary;
    cond->bin_op = inclusive ? BinOp::Le : BinOp::Lt;
    cond->args.push_back(mk_ident(var));
    cond->args.push_back(mk_int(static_cast<int32_t>(bound)));
    f->cond = std::move(cond);
    if (stepv == 1) {
        auto st = std::make_unique<Stmt>();
        st->kind = StmtKind::IncDec;
        st->name = var;
        st->inc = true;
        f->step = std::move(st);
    } else {
        auto st = std::make_unique<Stmt>();
        st->kind = StmtKind::Assign;
        st->name = var;
        st->assign_op = AssignOp::AddSet;
        st->expr = mk_int(static_cast<int32_t>(stepv));
        f->step = std::move(st);
    }
    f->body = std::move(body);
    return f;
}

bool apply_loop_unroll(ShaderAst &a, const ChainStep &step, std::string *err) {
    StmtSlot slot = stmt_slot(a, step.path);
    if (!slot.valid())
        return fail(err, "LoopUnroll: bad site");
    Stmt &s = *(*slot.list)[slot.index];
    auto fp = match_counted_for(s);
    if (!fp || fp->trips > 8)
        return fail(err, "LoopUnroll: loop is not a counted loop with trips <= 8");

    std::vector<StmtPtr> pieces;
    bool partial = step.params.unroll_partial && fp->trips >= 3;
    int64_t full_copies = partial ? (fp->trips / 2) * 2 : fp->trips;
    for (int64_t k = 0; k < full_copies; k++) {
        StmtPtr copy = clone(*s.body);
        substitute_ident(*copy, fp->var, static_cast<int32_t>(fp->init + k * fp->step));
        pieces.push_back(std::move(copy));
    }
    if (partial && full_copies < fp->trips) {
        // remainder loop picks up the leftover iterations
        pieces.push_back(counted_for(fp->var, fp->init + full_copies * fp->step, fp->inclusive,
                                     fp->bound, fp->step, clone(*s.body)));
    }
    (*slot.list)[slot.index] = mk_block(std::move(pieces));
    return true;
}

bool apply_loop_split(ShaderAst &a, const ChainStep &step, std::string *err) {
    StmtSlot slot = stmt_slot(a, step.path);
    if (!slot.valid())
        return fail(err, "LoopSplit: bad site");
    Stmt &s = *(*slot.list)[slot.index];
    auto fp = match_counted_for(s);
    if (!fp || fp->trips < 2)
        return fail(err, "LoopSplit: loop is not a splittable counted loop");
    int64_t t = step.params.split_index;
    if (t < 1 || t >= fp->trips)
        return fail(err, "LoopSplit: split point out of range");
    int64_t mid = fp->init + t * fp->step;

    std::vector<StmtPtr> two;
    two.push_back(counted_for(fp->var, fp->init, false, mid, fp->step, clone(*s.body)));
    two.push_back(counted_for(fp->var, mid, fp->inclusive, fp->bound, fp->step, clone(*s.body)));
    (*slot.list)[slot.index] = mk_block(std::move(two));
    return true;
}

bool apply_donation(ShaderAst &a, const ChainStep &step,
                    const std::vector<ShaderAst> &corpus, std::string *err) {
    // resolve the insertion point: parent list + position (end allowed)
    if (step.path.size() < 2)
        return fail(err, "CodeDonation: bad insertion path");
    NodePath parent(step.path.begin(), step.path.end() - 1);
    uint32_t pos = step.path.back();
    NodeRef pref = resolve(a, parent);
    std::vector<StmtPtr> *list = nullptr;
    if (pref.k == NodeRef::S && pref.stmt->kind == StmtKind::Block)
        list = &pref.stmt->stmts;
    else if (pref.k == NodeRef::Case)
        list = &pref.scase->body;
    if (!list || pos > list->size())
        return fail(err, "CodeDonation: insertion point is not a block position");
    if (step.path[0] != static_cast<uint32_t>(main_index(a)))
        return fail(err, "CodeDonation: insertion must target main");

    const ShaderAst *donor = nullptr;
    for (auto &d : corpus)
        if (d.name == step.params.donor)
            donor = &d;
    if (!donor)
        return fail(err, "CodeDonation: donor '" + step.params.donor + "' not in corpus");
    ShaderAst &dm = const_cast<ShaderAst &>(*donor);

    NodeRef blk = resolve(dm, step.params.donor_block);
    std::vector<StmtPtr> *dlist = nullptr;
    if (blk.k == NodeRef::S && blk.stmt->kind == StmtKind::Block)
        dlist = &blk.stmt->stmts;
    else if (blk.k == NodeRef::Case)
        dlist = &blk.scase->body;
    if (!dlist)
        return fail(err, "CodeDonation: donor block path invalid");
    if (!region_ok(*dlist, step.params.start, step.params.len))
        return fail(err, "CodeDonation: donor region not liftable");

    // clone the region
    std::vector<StmtPtr> region;
    for (uint32_t i = 0; i < step.params.len; i++)
        region.push_back(clone(*(*dlist)[step.params.start + i]));

    // names declared inside vs referenced freely
    std::set<std::string> declared;
    for (auto &st : region)
        walk_stmts(*st, [&](const Stmt &x) {
            if (x.kind == StmtKind::Decl)
                declared.insert(x.name);
        });
    std::set<std::string> referenced;
    for (auto &st : region) {
        walk_exprs(*st, [&](const Expr &e) {
            if (e.kind == ExprKind::Ident)
                referenced.insert(e.name);
        });
        walk_stmts(*st, [&](const Stmt &x) {
            if (x.kind == StmtKind::Assign || x.kind == StmtKind::IncDec)
                referenced.insert(x.name);
        });
    }
    std::vector<std::string> free_names;
    for (auto &n : referenced)
        if (!declared.count(n))
            free_names.push_back(n);

    std::map<std::string, Type> dscope = donor_scope(dm, step.params.donor_block,
                                                     step.params.start);
    for (auto &n : free_names) {
        auto it = dscope.find(n);
        if (it == dscope.end())
            return fail(err, "CodeDonation: cannot type free variable '" + n + "'");
        if (it->second.is_sampler())
            return fail(err, "CodeDonation: region reads a sampler");
    }

    // fresh names for every region identifier, collision-checked against the
    // target's current identifier set
    std::vector<std::string> used_v;
    collect_identifiers(a, used_v);
    std::unordered_set<std::string> used(used_v.begin(), used_v.end());
    uint32_t counter = 0;
    auto next_fresh = [&](const char *prefix) {
        for (;;) {
            std::string cand = prefix + std::to_string(counter++);
            if (!used.count(cand)) {
                used.insert(cand);
                return cand;
            }
        }
    };
    std::map<std::string, std::string> ren;
    for (auto &n : free_names)
        ren[n] = next_fresh("d");
    for (auto &n : declared)
        ren[n] = next_fresh("d");
    for (auto &st : region)
        rename_idents(*st, ren);

    // bind free inputs to literal-initialized locals
    Rng rng(step.params.salt);
    std::vector<StmtPtr> donation;
    for (auto &n : free_names) {
        Type t = dscope.at(n);
        auto d = std::make_unique<Stmt>();
        d->kind = StmtKind::Decl;
        d->decl_type = t;
        d->name = ren.at(n);
        d->expr = literal_of_type(Type(t.scalar, t.lanes), rng);
        donation.push_back(std::move(d));
    }
    for (auto &st : region)
        donation.push_back(std::move(st));

    // route results into a fresh out global the original code never reads;
    // channels come from names still in scope at the end of the donation block
    struct Channel {
        std::string name;
        Type type;
    };
    std::map<std::string, Type> sink_visible; // top-level declarations only
    for (auto &st : donation)
        if (st->kind == StmtKind::Decl)
            sink_visible[st->name] = st->decl_type;
    std::set<std::string> assigned_names;
    for (auto &st : donation)
        walk_stmts(*st, [&](const Stmt &x) {
            if (x.kind == StmtKind::Decl || x.kind == StmtKind::Assign ||
                x.kind == StmtKind::IncDec)
                assigned_names.insert(x.name);
        });
    std::vector<Channel> written;
    for (auto &st : donation)
        if (st->kind == StmtKind::Decl && assigned_names.count(st->name) &&
            !st->decl_type.is_sampler())
            written.push_back({st->name, st->decl_type});

    std::vector<ExprPtr> channels;
    std::set<std::string> channel_used;
    for (auto &w : written) {
        if (channels.size() == 4)
            break;
        if (!channel_used.insert(w.name).second)
            continue;
        if (w.type.scalar == Scalar::Float && w.type.lanes == 1) {
            channels.push_back(mk_ident(w.name));
        } else if (w.type.scalar == Scalar::Float) {
            auto sw = std::make_unique<Expr>();
            sw->kind = ExprKind::Swizzle;
            sw->swizzle = "x";
            sw->args.push_back(mk_ident(w.name));
            channels.push_back(std::move(sw));
        } else if (w.type.scalar == Scalar::Int && w.type.lanes == 1) {
            std::vector<ExprPtr> cargs;
            cargs.push_back(mk_ident(w.name));
            channels.push_back(mk_construct(float_type(), std::move(cargs)));
        } else if (w.type.scalar == Scalar::Bool && w.type.lanes == 1) {
            std::vector<ExprPtr> cargs;
            cargs.push_back(mk_ident(w.name));
            channels.push_back(mk_construct(float_type(), std::move(cargs)));
        }
    }
    while (channels.size() < 4)
        channels.push_back(mk_float(0.5f));

    std::string sink_name = next_fresh("d_out");
    GlobalDecl sink;
    sink.qualifier = Qualifier::Out;
    sink.type = vec_type(4);
    sink.name = sink_name;
    a.globals.push_back(sink);

    auto sink_write = std::make_unique<Stmt>();
    sink_write->kind = StmtKind::Assign;
    sink_write->assign_op = AssignOp::Set;
    sink_write->name = sink_name;
    sink_write->expr = mk_construct(vec_type(4), std::move(channels));
    donation.push_back(std::move(sink_write));

    list->insert(list->begin() + pos, mk_block(std::move(donation)));
    return true;
}

} // namespace

bool apply_transform(ShaderAst &a, const ChainStep &step,
                     const std::vector<ShaderAst> &corpus, std::string *err) {
    switch (step.kind) {
    case TransformKind::MixWrap:
        return apply_mix_wrap(a, step, err);
    case TransformKind::IfToSwitch:
        return apply_if_to_switch(a, step, err);
    case TransformKind::ForToWhile:
        return apply_for_to_while(a, step, err);
    case TransformKind::WhileToFor:
        return apply_while_to_for(a, step, err);
    case TransformKind::SingleIterationLoopWrap:
        return apply_once_wrap(a, step, err);
    case TransformKind::LoopUnroll:
        return apply_loop_unroll(a, step, err);
    case TransformKind::LoopSplit:
        return apply_loop_split(a, step, err);
    case TransformKind::CodeDonation:
        return apply_donation(a, step, corpus, err);
    }
    return fail(err, "unknown transform kind");
}

} // namespace mshade::meta
