#include "mshade/shader/front.hpp"
#include "mshade/support/fp.hpp"

#include <sstream>

namespace mshade::ast {

namespace {

// Operator precedence, matching the parser (higher binds tighter).
int prec_of(BinOp op) {
    switch (op) {
    case BinOp::Or:
        return 1;
    case BinOp::And:
        return 2;
    case BinOp::Eq:
    case BinOp::Ne:
        return 3;
    case BinOp::Lt:
    case BinOp::Le:
    case BinOp::Gt:
    case BinOp::Ge:
        return 4;
    case BinOp::Add:
    case BinOp::Sub:
        return 5;
    case BinOp::Mul:
    case BinOp::Div:
        return 6;
    }
    return 0;
}

const char *op_text(BinOp op) {
    switch (op) {
    case BinOp::Add:
        return "+";
    case BinOp::Sub:
        return "-";
    case BinOp::Mul:
        return "*";
    case BinOp::Div:
        return "/";
    case BinOp::Lt:
        return "<";
    case BinOp::Le:
        return "<=";
    case BinOp::Gt:
        return ">";
    case BinOp::Ge:
        return ">=";
    case BinOp::Eq:
        return "==";
    case BinOp::Ne:
        return "!=";
    case BinOp::And:
        return "&&";
    case BinOp::Or:
        return "||";
    }
    return "?";
}

struct Printer {
    std::ostringstream out;
    int indent = 0;

    void pad() {
        for (int i = 0; i < indent; i++)
            out << "    ";
    }

    std::string decl_type_text(const Type &t) {
        std::string s;
        if (t.prec == Precision::Medium)
            s += "mediump ";
        s += type_name(t);
        return s;
    }

    void expr(const Expr &e, int parent_prec = 0) {
        switch (e.kind) {
        case ExprKind::FloatLit:
            out << f32_to_text(e.float_bits);
            return;
        case ExprKind::IntLit:
            out << e.int_value;
            return;
        case ExprKind::BoolLit:
            out << (e.bool_value ? "true" : "false");
            return;
        case ExprKind::Ident:
            out << e.name;
            return;
        case ExprKind::Unary:
            out << (e.un_op == UnOp::Neg ? "-" : "!");
            // Parenthesize any non-primary operand to keep -x*y unambiguous.
            if (e.args[0]->kind == ExprKind::Binary || e.args[0]->kind == ExprKind::Unary) {
                out << "(";
                expr(*e.args[0]);
                out << ")";
            } else {
                expr(*e.args[0]);
            }
            return;
        case ExprKind::Binary: {
            int p = prec_of(e.bin_op);
            bool need = p < parent_prec;
            if (need)
                out << "(";
            expr(*e.args[0], p);
            out << " " << op_text(e.bin_op) << " ";
            expr(*e.args[1], p + 1); // left-associative: parenthesize equal-prec rhs
            if (need)
                out << ")";
            return;
        }
        case ExprKind::Call:
        case ExprKind::Construct: {
            out << (e.kind == ExprKind::Call ? e.name : type_name(e.ctor_type)) << "(";
            for (size_t i = 0; i < e.args.size(); i++) {
                if (i)
                    out << ", ";
                expr(*e.args[i]);
            }
            out << ")";
            return;
        }
        case ExprKind::Swizzle: {
            const Expr &base = *e.args[0];
            if (base.kind == ExprKind::Binary || base.kind == ExprKind::Unary) {
                out << "(";
                expr(base);
                out << ")";
            } else {
                expr(base);
            }
            out << "." << e.swizzle;
            return;
        }
        }
    }

    // Prints a simple statement (no trailing ';'): Decl / Assign / IncDec / ExprStmt.
    void simple(const Stmt &s) {
        switch (s.kind) {
        case StmtKind::Decl:
            out << decl_type_text(s.decl_type) << " " << s.name << " = ";
            expr(*s.expr);
            return;
        case StmtKind::Assign: {
            const char *op = s.assign_op == AssignOp::Set      ? " = "
                             : s.assign_op == AssignOp::AddSet ? " += "
                             : s.assign_op == AssignOp::SubSet ? " -= "
                             : s.assign_op == AssignOp::MulSet ? " *= "
                                                               : " /= ";
            out << s.name << op;
            expr(*s.expr);
            return;
        }
        case StmtKind::IncDec:
            out << s.name << (s.inc ? "++" : "--");
            return;
        case StmtKind::ExprStmt:
            expr(*s.expr);
            return;
        default:
            out << "/*?*/";
            return;
        }
    }

    void block_body(const Stmt &b) {
        out << "{\n";
        indent++;
        for (auto &st : b.stmts)
            stmt(*st);
        indent--;
        pad();
        out << "}";
    }

    void stmt(const Stmt &s) {
        switch (s.kind) {
        case StmtKind::Block:
            pad();
            block_body(s);
            out << "\n";
            return;
        case StmtKind::Decl:
        case StmtKind::Assign:
        case StmtKind::IncDec:
        case StmtKind::ExprStmt:
            pad();
            simple(s);
            out << ";\n";
            return;
        case StmtKind::If: {
            pad();
            out << "if (";
            expr(*s.expr);
            out << ") ";
            block_body(*s.body);
            const Stmt *e = s.else_body.get();
            while (e) {
                // An else-block holding a single if prints as "else if".
                if (e->stmts.size() == 1 && e->stmts[0]->kind == StmtKind::If) {
                    const Stmt &nested = *e->stmts[0];
                    out << " else if (";
                    expr(*nested.expr);
                    out << ") ";
                    block_body(*nested.body);
                    e = nested.else_body.get();
                    continue;
                }
                out << " else ";
                block_body(*e);
                e = nullptr;
            }
            out << "\n";
            return;
        }
        case StmtKind::Switch: {
            pad();
            out << "switch (";
            expr(*s.expr);
            out << ") {\n";
            indent++;
            for (auto &c : s.cases) {
                pad();
                if (c.is_default)
                    out << "default:\n";
                else
                    out << "case " << c.value << ":\n";
                indent++;
                for (auto &st : c.body)
                    stmt(*st);
                indent--;
            }
            indent--;
            pad();
            out << "}\n";
            return;
        }
        case StmtKind::For: {
            pad();
            out << "for (";
            if (s.init)
                simple(*s.init);
            out << "; ";
            if (s.cond)
                expr(*s.cond);
            out << "; ";
            if (s.step)
                simple(*s.step);
            out << ") ";
            block_body(*s.body);
            out << "\n";
            return;
        }
        case StmtKind::While: {
            pad();
            out << "while (";
            expr(*s.cond);
            out << ") ";
            block_body(*s.body);
            out << "\n";
            return;
        }
        case StmtKind::DoWhile: {
            pad();
            out << "do ";
            block_body(*s.body);
            out << " while (";
            expr(*s.cond);
            out << ");\n";
            return;
        }
        case StmtKind::Break:
            pad();
            out << "break;\n";
            return;
        case StmtKind::Continue:
            pad();
            out << "continue;\n";
            return;
        case StmtKind::Return:
            pad();
            out << "return";
            if (s.expr) {
                out << " ";
                expr(*s.expr);
            }
            out << ";\n";
            return;
        }
    }

    void run(const ShaderAst &a) {
        for (auto &g : a.globals) {
            const char *q = g.qualifier == Qualifier::In      ? "in"
                            : g.qualifier == Qualifier::Out   ? "out"
                                                              : "uniform";
            out << q << " " << decl_type_text(g.type) << " " << g.name << ";\n";
        }
        if (!a.globals.empty())
            out << "\n";
        for (size_t i = 0; i < a.functions.size(); i++) {
            const FunctionDecl &f = a.functions[i];
            out << (f.ret.is_void ? "void" : type_name(f.ret)) << " " << f.name << "(";
            for (size_t p = 0; p < f.params.size(); p++) {
                if (p)
                    out << ", ";
                out << decl_type_text(f.params[p].type) << " " << f.params[p].name;
            }
            out << ") ";
            block_body(*f.body);
            out << "\n";
            if (i + 1 < a.functions.size())
                out << "\n";
        }
    }
};

} // namespace

std::string pretty_print(const ShaderAst &ast) {
    Printer p;
    p.run(ast);
    return p.out.str();
}

} // namespace mshade::ast
