#include "mshade/shader/front.hpp"
#include "mshade/support/fp.hpp"

#include <cstdlib>
#include <unordered_set>

namespace mshade::ast {

namespace {

enum class Tok : uint8_t {
    End,
    Ident,
    FloatLit,
    IntLit,
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Colon,
    Dot,
    // operators
    Plus,
    Minus,
    Star,
    Slash,
    Assign,
    PlusAssign,
    MinusAssign,
    StarAssign,
    SlashAssign,
    PlusPlus,
    MinusMinus,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    NotEq,
    AndAnd,
    OrOr,
    Bang,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    uint32_t float_bits = 0;
    int32_t int_value = 0;
    SourcePos pos;
};

class Lexer {
public:
    Lexer(const std::string &src) : src_(src) {}

    Result<std::vector<Token>, ParseError> run() {
        std::vector<Token> out;
        for (;;) {
            skip_ws();
            if (at_end()) {
                out.push_back(make(Tok::End));
                return out;
            }
            SourcePos pos{line_, col_};
            char c = peek();
            if (isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::string id;
                while (!at_end() && (isalnum(static_cast<unsigned char>(peek())) || peek() == '_'))
                    id += advance();
                Token t;
                t.kind = Tok::Ident;
                t.text = id;
                t.pos = pos;
                out.push_back(t);
                continue;
            }
            if (isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && isdigit(static_cast<unsigned char>(peek(1))))) {
                auto r = number(pos);
                if (!r.ok())
                    return r.error();
                out.push_back(r.value());
                continue;
            }
            auto r = punct(pos);
            if (!r.ok())
                return r.error();
            out.push_back(r.value());
        }
    }

private:
    const std::string &src_;
    size_t i_ = 0;
    int line_ = 1;
    int col_ = 1;

    bool at_end() const { return i_ >= src_.size(); }
    char peek(size_t off = 0) const { return i_ + off < src_.size() ? src_[i_ + off] : '\0'; }
    char advance() {
        char c = src_[i_++];
        if (c == '\n') {
            line_++;
            col_ = 1;
        } else {
            col_++;
        }
        return c;
    }

    void skip_ws() {
        for (;;) {
            while (!at_end() && isspace(static_cast<unsigned char>(peek())))
                advance();
            if (peek() == '/' && peek(1) == '/') {
                while (!at_end() && peek() != '\n')
                    advance();
                continue;
            }
            if (peek() == '/' && peek(1) == '*') {
                advance();
                advance();
                while (!at_end() && !(peek() == '*' && peek(1) == '/'))
                    advance();
                if (!at_end()) {
                    advance();
                    advance();
                }
                continue;
            }
            break;
        }
    }

    Token make(Tok k) {
        Token t;
        t.kind = k;
        t.pos = {line_, col_};
        return t;
    }

    Result<Token, ParseError> number(SourcePos pos) {
        std::string num;
        bool is_float = false;
        while (!at_end() && isdigit(static_cast<unsigned char>(peek())))
            num += advance();
        if (peek() == '.') {
            is_float = true;
            num += advance();
            while (!at_end() && isdigit(static_cast<unsigned char>(peek())))
                num += advance();
        }
        if (peek() == 'e' || peek() == 'E') {
            is_float = true;
            num += advance();
            if (peek() == '+' || peek() == '-')
                num += advance();
            if (!isdigit(static_cast<unsigned char>(peek())))
                return ParseError{pos, "malformed exponent in numeric literal"};
            while (!at_end() && isdigit(static_cast<unsigned char>(peek())))
                num += advance();
        }
        Token t;
        t.pos = pos;
        if (is_float) {
            t.kind = Tok::FloatLit;
            t.float_bits = f32_bits(strtof(num.c_str(), nullptr));
        } else {
            t.kind = Tok::IntLit;
            long v = strtol(num.c_str(), nullptr, 10);
            t.int_value = static_cast<int32_t>(v);
        }
        return t;
    }

    Result<Token, ParseError> punct(SourcePos pos) {
        char c = advance();
        Token t;
        t.pos = pos;
        auto two = [&](char second, Tok with, Tok without) {
            if (peek() == second) {
                advance();
                t.kind = with;
            } else {
                t.kind = without;
            }
            return t;
        };
        switch (c) {
        case '(':
            t.kind = Tok::LParen;
            return t;
        case ')':
            t.kind = Tok::RParen;
            return t;
        case '{':
            t.kind = Tok::LBrace;
            return t;
        case '}':
            t.kind = Tok::RBrace;
            return t;
        case ';':
            t.kind = Tok::Semi;
            return t;
        case ',':
            t.kind = Tok::Comma;
            return t;
        case ':':
            t.kind = Tok::Colon;
            return t;
        case '.':
            t.kind = Tok::Dot;
            return t;
        case '+':
            if (peek() == '+') {
                advance();
                t.kind = Tok::PlusPlus;
                return t;
            }
            return two('=', Tok::PlusAssign, Tok::Plus);
        case '-':
            if (peek() == '-') {
                advance();
                t.kind = Tok::MinusMinus;
                return t;
            }
            return two('=', Tok::MinusAssign, Tok::Minus);
        case '*':
            return two('=', Tok::StarAssign, Tok::Star);
        case '/':
            return two('=', Tok::SlashAssign, Tok::Slash);
        case '<':
            return two('=', Tok::Le, Tok::Lt);
        case '>':
            return two('=', Tok::Ge, Tok::Gt);
        case '=':
            return two('=', Tok::EqEq, Tok::Assign);
        case '!':
            return two('=', Tok::NotEq, Tok::Bang);
        case '&':
            if (peek() == '&') {
                advance();
                t.kind = Tok::AndAnd;
                return t;
            }
            return ParseError{pos, "unexpected character '&'"};
        case '|':
            if (peek() == '|') {
                advance();
                t.kind = Tok::OrOr;
                return t;
            }
            return ParseError{pos, "unexpected character '|'"};
        default:
            return ParseError{pos, std::string("unexpected character '") + c + "'"};
        }
    }
};

const std::unordered_set<std::string> kKeywords = {
    "void", "float", "int",      "bool",    "vec2",  "vec3",   "vec4",     "ivec2",
    "ivec3", "ivec4", "bvec2",   "bvec3",   "bvec4", "sampler2D", "in",    "out",
    "uniform", "highp", "mediump", "if",    "else",  "switch", "case",     "default",
    "for",   "while", "do",      "break",   "continue", "return", "true",  "false",
};

class Parser {
public:
    Parser(std::vector<Token> toks, const SourceShader &src)
        : toks_(std::move(toks)), src_(src) {}

    Result<ShaderAst, ParseError> run() {
        ShaderAst ast;
        ast.name = src_.name;
        ast.stage = src_.stage;
        while (!is(Tok::End)) {
            if (is_kw("in") || is_kw("out") || is_kw("uniform")) {
                auto g = global_decl();
                if (!g.ok())
                    return g.error();
                ast.globals.push_back(g.take());
            } else {
                auto f = function_decl();
                if (!f.ok())
                    return f.error();
                ast.functions.push_back(f.take());
            }
        }
        return ast;
    }

private:
    std::vector<Token> toks_;
    const SourceShader &src_;
    size_t pos_ = 0;

    const Token &cur() const { return toks_[pos_]; }
    const Token &ahead(size_t n = 1) const {
        return toks_[std::min(pos_ + n, toks_.size() - 1)];
    }
    bool is(Tok k) const { return cur().kind == k; }
    bool is_kw(const char *kw) const { return cur().kind == Tok::Ident && cur().text == kw; }
    Token take() { return toks_[pos_++]; }

    ParseError err(const std::string &m) const { return ParseError{cur().pos, m}; }

    Result<Token, ParseError> expect(Tok k, const char *what) {
        if (!is(k))
            return err(std::string("expected ") + what);
        return take();
    }

    bool is_type_name() const {
        return cur().kind == Tok::Ident &&
               (type_from_name(cur().text).has_value() || cur().text == "void");
    }
    bool is_precision() const { return is_kw("highp") || is_kw("mediump"); }

    Result<Type, ParseError> parse_type(bool allow_void) {
        Precision prec = Precision::High;
        if (is_precision()) {
            prec = cur().text == "mediump" ? Precision::Medium : Precision::High;
            take();
        }
        if (!is(Tok::Ident))
            return err("expected type name");
        std::string n = take().text;
        if (n == "void") {
            if (!allow_void)
                return ParseError{toks_[pos_ - 1].pos, "void not allowed here"};
            return void_type();
        }
        auto t = type_from_name(n);
        if (!t)
            return ParseError{toks_[pos_ - 1].pos, "unknown type '" + n + "'"};
        Type ty = *t;
        ty.prec = prec;
        return ty;
    }

    Result<GlobalDecl, ParseError> global_decl() {
        GlobalDecl g;
        g.pos = cur().pos;
        std::string q = take().text;
        g.qualifier = q == "in" ? Qualifier::In : q == "out" ? Qualifier::Out : Qualifier::Uniform;
        auto t = parse_type(false);
        if (!t.ok())
            return t.error();
        g.type = t.value();
        auto name = expect(Tok::Ident, "global name");
        if (!name.ok())
            return name.error();
        if (kKeywords.count(name.value().text))
            return ParseError{name.value().pos, "keyword used as identifier"};
        g.name = name.value().text;
        auto semi = expect(Tok::Semi, "';' after global declaration");
        if (!semi.ok())
            return semi.error();
        return g;
    }

    Result<FunctionDecl, ParseError> function_decl() {
        FunctionDecl f;
        f.pos = cur().pos;
        auto ret = parse_type(true);
        if (!ret.ok())
            return ret.error();
        f.ret = ret.value();
        auto name = expect(Tok::Ident, "function name");
        if (!name.ok())
            return name.error();
        if (kKeywords.count(name.value().text))
            return ParseError{name.value().pos, "keyword used as identifier"};
        f.name = name.value().text;
        auto lp = expect(Tok::LParen, "'('");
        if (!lp.ok())
            return lp.error();
        if (!is(Tok::RParen)) {
            for (;;) {
                auto pt = parse_type(false);
                if (!pt.ok())
                    return pt.error();
                auto pn = expect(Tok::Ident, "parameter name");
                if (!pn.ok())
                    return pn.error();
                f.params.push_back({pt.value(), pn.value().text});
                if (is(Tok::Comma)) {
                    take();
                    continue;
                }
                break;
            }
        }
        auto rp = expect(Tok::RParen, "')'");
        if (!rp.ok())
            return rp.error();
        auto body = block();
        if (!body.ok())
            return body.error();
        f.body = body.take();
        return f;
    }

    Result<StmtPtr, ParseError> block() {
        auto lb = expect(Tok::LBrace, "'{'");
        if (!lb.ok())
            return lb.error();
        auto b = std::make_unique<Stmt>();
        b->kind = StmtKind::Block;
        b->pos = lb.value().pos;
        while (!is(Tok::RBrace)) {
            if (is(Tok::End))
                return err("unterminated block");
            auto s = statement();
            if (!s.ok())
                return s.error();
            b->stmts.push_back(s.take());
        }
        take(); // }
        return b;
    }

    // Wraps a non-block statement into a single-statement block (canonical
    // structure for if/loop bodies).
    Result<StmtPtr, ParseError> block_or_stmt() {
        if (is(Tok::LBrace))
            return block();
        auto s = statement();
        if (!s.ok())
            return s.error();
        auto b = std::make_unique<Stmt>();
        b->kind = StmtKind::Block;
        b->pos = s.value()->pos;
        b->stmts.push_back(s.take());
        return b;
    }

    Result<StmtPtr, ParseError> statement() {
        SourcePos pos = cur().pos;
        if (is(Tok::LBrace))
            return block();
        if (is_kw("if"))
            return if_stmt();
        if (is_kw("switch"))
            return switch_stmt();
        if (is_kw("for"))
            return for_stmt();
        if (is_kw("while"))
            return while_stmt();
        if (is_kw("do"))
            return do_while_stmt();
        if (is_kw("break") || is_kw("continue")) {
            bool brk = cur().text == "break";
            take();
            auto semi = expect(Tok::Semi, "';'");
            if (!semi.ok())
                return semi.error();
            auto s = std::make_unique<Stmt>();
            s->kind = brk ? StmtKind::Break : StmtKind::Continue;
            s->pos = pos;
            return s;
        }
        if (is_kw("return")) {
            take();
            auto s = std::make_unique<Stmt>();
            s->kind = StmtKind::Return;
            s->pos = pos;
            if (!is(Tok::Semi)) {
                auto e = expression();
                if (!e.ok())
                    return e.error();
                s->expr = e.take();
            }
            auto semi = expect(Tok::Semi, "';'");
            if (!semi.ok())
                return semi.error();
            return s;
        }
        auto s = simple_statement();
        if (!s.ok())
            return s.error();
        auto semi = expect(Tok::Semi, "';'");
        if (!semi.ok())
            return semi.error();
        return s;
    }

    // Declaration, assignment, increment, or call; no trailing ';'.
    Result<StmtPtr, ParseError> simple_statement() {
        SourcePos pos = cur().pos;
        if (is_precision() || (is_type_name() && !is_kw("void"))) {
            auto t = parse_type(false);
            if (!t.ok())
                return t.error();
            auto name = expect(Tok::Ident, "variable name");
            if (!name.ok())
                return name.error();
            if (kKeywords.count(name.value().text))
                return ParseError{name.value().pos, "keyword used as identifier"};
            auto eq = expect(Tok::Assign, "'=' (declarations require an initializer)");
            if (!eq.ok())
                return eq.error();
            auto e = expression();
            if (!e.ok())
                return e.error();
            auto s = std::make_unique<Stmt>();
            s->kind = StmtKind::Decl;
            s->pos = pos;
            s->decl_type = t.value();
            s->name = name.value().text;
            s->expr = e.take();
            return s;
        }
        if (is(Tok::Ident) && !kKeywords.count(cur().text)) {
            Tok next = ahead().kind;
            if (next == Tok::PlusPlus || next == Tok::MinusMinus) {
                auto s = std::make_unique<Stmt>();
                s->kind = StmtKind::IncDec;
                s->pos = pos;
                s->name = take().text;
                s->inc = take().kind == Tok::PlusPlus;
                return s;
            }
            if (next == Tok::Assign || next == Tok::PlusAssign || next == Tok::MinusAssign ||
                next == Tok::StarAssign || next == Tok::SlashAssign) {
                auto s = std::make_unique<Stmt>();
                s->kind = StmtKind::Assign;
                s->pos = pos;
                s->name = take().text;
                Tok op = take().kind;
                s->assign_op = op == Tok::Assign       ? AssignOp::Set
                               : op == Tok::PlusAssign ? AssignOp::AddSet
                               : op == Tok::MinusAssign ? AssignOp::SubSet
                               : op == Tok::StarAssign ? AssignOp::MulSet
                                                        : AssignOp::DivSet;
                auto e = expression();
                if (!e.ok())
                    return e.error();
                s->expr = e.take();
                return s;
            }
        }
        // Fall back to an expression statement (void call).
        auto e = expression();
        if (!e.ok())
            return e.error();
        if (e.value()->kind != ExprKind::Call)
            return ParseError{pos, "expression statement must be a call"};
        auto s = std::make_unique<Stmt>();
        s->kind = StmtKind::ExprStmt;
        s->pos = pos;
        s->expr = e.take();
        return s;
    }

    Result<StmtPtr, ParseError> if_stmt() {
        SourcePos pos = take().pos; // if
        auto lp = expect(Tok::LParen, "'('");
        if (!lp.ok())
            return lp.error();
        auto c = expression();
        if (!c.ok())
            return c.error();
        auto rp = expect(Tok::RParen, "')'");
        if (!rp.ok())
            return rp.error();
        auto then = block_or_stmt();
        if (!then.ok())
            return then.error();
        auto s = std::make_unique<Stmt>();
        s->kind = StmtKind::If;
        s->pos = pos;
        s->expr = c.take();
        s->body = then.take();
        if (is_kw("else")) {
            take();
            auto e = block_or_stmt();
            if (!e.ok())
                return e.error();
            s->else_body = e.take();
        }
        return s;
    }

    Result<StmtPtr, ParseError> switch_stmt() {
        SourcePos pos = take().pos; // switch
        auto lp = expect(Tok::LParen, "'('");
        if (!lp.ok())
            return lp.error();
        auto sel = expression();
        if (!sel.ok())
            return sel.error();
        auto rp = expect(Tok::RParen, "')'");
        if (!rp.ok())
            return rp.error();
        auto lb = expect(Tok::LBrace, "'{'");
        if (!lb.ok())
            return lb.error();
        auto s = std::make_unique<Stmt>();
        s->kind = StmtKind::Switch;
        s->pos = pos;
        s->expr = sel.take();
        while (!is(Tok::RBrace)) {
            SwitchCase sc;
            if (is_kw("case")) {
                take();
                bool neg = false;
                if (is(Tok::Minus)) {
                    neg = true;
                    take();
                }
                if (!is(Tok::IntLit))
                    return err("expected integer case label");
                sc.value = take().int_value;
                if (neg)
                    sc.value = -sc.value;
            } else if (is_kw("default")) {
                take();
                sc.is_default = true;
            } else {
                return err("expected 'case' or 'default'");
            }
            auto colon = expect(Tok::Colon, "':'");
            if (!colon.ok())
                return colon.error();
            while (!is_kw("case") && !is_kw("default") && !is(Tok::RBrace)) {
                if (is(Tok::End))
                    return err("unterminated switch");
                auto st = statement();
                if (!st.ok())
                    return st.error();
                sc.body.push_back(st.take());
            }
            s->cases.push_back(std::move(sc));
        }
        take(); // }
        return s;
    }

    Result<StmtPtr, ParseError> for_stmt() {
        SourcePos pos = take().pos; // for
        auto lp = expect(Tok::LParen, "'('");
        if (!lp.ok())
            return lp.error();
        auto s = std::make_unique<Stmt>();
        s->kind = StmtKind::For;
        s->pos = pos;
        if (!is(Tok::Semi)) {
            auto init = simple_statement();
            if (!init.ok())
                return init.error();
            s->init = init.take();
        }
        auto semi1 = expect(Tok::Semi, "';' in for");
        if (!semi1.ok())
            return semi1.error();
        if (!is(Tok::Semi)) {
            auto c = expression();
            if (!c.ok())
                return c.error();
            s->cond = c.take();
        }
        auto semi2 = expect(Tok::Semi, "';' in for");
        if (!semi2.ok())
            return semi2.error();
        if (!is(Tok::RParen)) {
            auto step = simple_statement();
            if (!step.ok())
                return step.error();
            if (step.value()->kind == StmtKind::Decl)
                return ParseError{pos, "declaration not allowed in for-step"};
            s->step = step.take();
        }
        auto rp = expect(Tok::RParen, "')'");
        if (!rp.ok())
            return rp.error();
        auto body = block_or_stmt();
        if (!body.ok())
            return body.error();
        s->body = body.take();
        return s;
    }

    Result<StmtPtr, ParseError> while_stmt() {
        SourcePos pos = take().pos; // while
        auto lp = expect(Tok::LParen, "'('");
        if (!lp.ok())
            return lp.error();
        auto c = expression();
        if (!c.ok())
            return c.error();
        auto rp = expect(Tok::RParen, "')'");
        if (!rp.ok())
            return rp.error();
        auto body = block_or_stmt();
        if (!body.ok())
            return body.error();
        auto s = std::make_unique<Stmt>();
        s->kind = StmtKind::While;
        s->pos = pos;
        s->cond = c.take();
        s->body = body.take();
        return s;
    }

    Result<StmtPtr, ParseError> do_while_stmt() {
        SourcePos pos = take().pos; // do
        auto body = block_or_stmt();
        if (!body.ok())
            return body.error();
        if (!is_kw("while"))
            return err("expected 'while' after do-body");
        take();
        auto lp = expect(Tok::LParen, "'('");
        if (!lp.ok())
            return lp.error();
        auto c = expression();
        if (!c.ok())
            return c.error();
        auto rp = expect(Tok::RParen, "')'");
        if (!rp.ok())
            return rp.error();
        auto semi = expect(Tok::Semi, "';'");
        if (!semi.ok())
            return semi.error();
        auto s = std::make_unique<Stmt>();
        s->kind = StmtKind::DoWhile;
        s->pos = pos;
        s->body = body.take();
        s->cond = c.take();
        return s;
    }

    // Expression grammar, lowest to highest precedence:
    //   or -> and -> equality -> relational -> additive -> multiplicative
    //   -> unary -> postfix (swizzle) -> primary
    Result<ExprPtr, ParseError> expression() { return or_expr(); }

    ExprPtr mk_bin(BinOp op, ExprPtr l, ExprPtr r, SourcePos pos) {
        auto e = std::make_unique<Expr>();
        e->kind = ExprKind::Binary;
        e->bin_op = op;
        e->pos = pos;
        e->args.push_back(std::move(l));
        e->args.push_back(std::move(r));
        return e;
    }

    Result<ExprPtr, ParseError> or_expr() {
        auto l = and_expr();
        if (!l.ok())
            return l;
        ExprPtr e = l.take();
        while (is(Tok::OrOr)) {
            SourcePos pos = take().pos;
            auto r = and_expr();
            if (!r.ok())
                return r;
            e = mk_bin(BinOp::Or, std::move(e), r.take(), pos);
        }
        return e;
    }

    Result<ExprPtr, ParseError> and_expr() {
        auto l = equality();
        if (!l.ok())
            return l;
        ExprPtr e = l.take();
        while (is(Tok::AndAnd)) {
            SourcePos pos = take().pos;
            auto r = equality();
            if (!r.ok())
                return r;
            e = mk_bin(BinOp::And, std::move(e), r.take(), pos);
        }
        return e;
    }

    Result<ExprPtr, ParseError> equality() {
        auto l = relational();
        if (!l.ok())
            return l;
        ExprPtr e = l.take();
        while (is(Tok::EqEq) || is(Tok::NotEq)) {
            BinOp op = is(Tok::EqEq) ? BinOp::Eq : BinOp::Ne;
            SourcePos pos = take().pos;
            auto r = relational();
            if (!r.ok())
                return r;
            e = mk_bin(op, std::move(e), r.take(), pos);
        }
        return e;
    }

    Result<ExprPtr, ParseError> relational() {
        auto l = additive();
        if (!l.ok())
            return l;
        ExprPtr e = l.take();
        while (is(Tok::Lt) || is(Tok::Le) || is(Tok::Gt) || is(Tok::Ge)) {
            BinOp op = is(Tok::Lt)   ? BinOp::Lt
                       : is(Tok::Le) ? BinOp::Le
                       : is(Tok::Gt) ? BinOp::Gt
                                     : BinOp::Ge;
            SourcePos pos = take().pos;
            auto r = additive();
            if (!r.ok())
                return r;
            e = mk_bin(op, std::move(e), r.take(), pos);
        }
        return e;
    }

    Result<ExprPtr, ParseError> additive() {
        auto l = multiplicative();
        if (!l.ok())
            return l;
        ExprPtr e = l.take();
        while (is(Tok::Plus) || is(Tok::Minus)) {
            BinOp op = is(Tok::Plus) ? BinOp::Add : BinOp::Sub;
            SourcePos pos = take().pos;
            auto r = multiplicative();
            if (!r.ok())
                return r;
            e = mk_bin(op, std::move(e), r.take(), pos);
        }
        return e;
    }

    Result<ExprPtr, ParseError> multiplicative() {
        auto l = unary();
        if (!l.ok())
            return l;
        ExprPtr e = l.take();
        while (is(Tok::Star) || is(Tok::Slash)) {
            BinOp op = is(Tok::Star) ? BinOp::Mul : BinOp::Div;
            SourcePos pos = take().pos;
            auto r = unary();
            if (!r.ok())
                return r;
            e = mk_bin(op, std::move(e), r.take(), pos);
        }
        return e;
    }

    Result<ExprPtr, ParseError> unary() {
        if (is(Tok::Minus) || is(Tok::Bang)) {
            UnOp op = is(Tok::Minus) ? UnOp::Neg : UnOp::Not;
            SourcePos pos = take().pos;
            auto x = unary();
            if (!x.ok())
                return x;
            auto e = std::make_unique<Expr>();
            e->kind = ExprKind::Unary;
            e->un_op = op;
            e->pos = pos;
            e->args.push_back(x.take());
            return Result<ExprPtr, ParseError>(std::move(e));
        }
        return postfix();
    }

    Result<ExprPtr, ParseError> postfix() {
        auto p = primary();
        if (!p.ok())
            return p;
        ExprPtr e = p.take();
        while (is(Tok::Dot)) {
            SourcePos pos = take().pos;
            auto id = expect(Tok::Ident, "swizzle after '.'");
            if (!id.ok())
                return id.error();
            const std::string &sw = id.value().text;
            if (sw.empty() || sw.size() > 4 || sw.find_first_not_of("xyzw") != std::string::npos)
                return ParseError{pos, "invalid swizzle '" + sw + "'"};
            auto s = std::make_unique<Expr>();
            s->kind = ExprKind::Swizzle;
            s->pos = pos;
            s->swizzle = sw;
            s->args.push_back(std::move(e));
            e = std::move(s);
        }
        return e;
    }

    Result<ExprPtr, ParseError> primary() {
        SourcePos pos = cur().pos;
        if (is(Tok::LParen)) {
            take();
            auto e = expression();
            if (!e.ok())
                return e;
            auto rp = expect(Tok::RParen, "')'");
            if (!rp.ok())
                return rp.error();
            return e;
        }
        if (is(Tok::FloatLit)) {
            auto e = std::make_unique<Expr>();
            e->kind = ExprKind::FloatLit;
            e->pos = pos;
            e->float_bits = take().float_bits;
            return Result<ExprPtr, ParseError>(std::move(e));
        }
        if (is(Tok::IntLit)) {
            auto e = std::make_unique<Expr>();
            e->kind = ExprKind::IntLit;
            e->pos = pos;
            e->int_value = take().int_value;
            return Result<ExprPtr, ParseError>(std::move(e));
        }
        if (is_kw("true") || is_kw("false")) {
            auto e = std::make_unique<Expr>();
            e->kind = ExprKind::BoolLit;
            e->pos = pos;
            e->bool_value = take().text == "true";
            return Result<ExprPtr, ParseError>(std::move(e));
        }
        if (is(Tok::Ident)) {
            std::string n = cur().text;
            bool ctor = type_from_name(n).has_value();
            if (ahead().kind == Tok::LParen) {
                take(); // name
                take(); // (
                std::vector<ExprPtr> args;
                if (!is(Tok::RParen)) {
                    for (;;) {
                        auto a = expression();
                        if (!a.ok())
                            return a;
                        args.push_back(a.take());
                        if (is(Tok::Comma)) {
                            take();
                            continue;
                        }
                        break;
                    }
                }
                auto rp = expect(Tok::RParen, "')'");
                if (!rp.ok())
                    return rp.error();
                auto e = std::make_unique<Expr>();
                e->pos = pos;
                e->args = std::move(args);
                if (ctor) {
                    e->kind = ExprKind::Construct;
                    e->ctor_type = *type_from_name(n);
                } else {
                    e->kind = ExprKind::Call;
                    e->name = n;
                }
                return Result<ExprPtr, ParseError>(std::move(e));
            }
            if (kKeywords.count(n))
                return err("unexpected keyword '" + n + "'");
            auto e = std::make_unique<Expr>();
            e->kind = ExprKind::Ident;
            e->pos = pos;
            e->name = take().text;
            return Result<ExprPtr, ParseError>(std::move(e));
        }
        return err("expected expression");
    }
};

} // namespace

Result<ShaderAst, ParseError> parse(const SourceShader &src) {
    if (src.text.empty())
        return ParseError{{1, 1}, "empty shader source"};
    Lexer lex(src.text);
    auto toks = lex.run();
    if (!toks.ok())
        return toks.error();
    Parser p(toks.take(), src);
    return p.run();
}

} // namespace mshade::ast
