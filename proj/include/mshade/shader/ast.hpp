#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mshade::ast {

// ---------------------------------------------------------------------------
// Types

enum class Scalar : uint8_t { Bool, Int, Float, Sampler2D };
enum class Precision : uint8_t { High, Medium };

struct Type {
    Scalar scalar = Scalar::Float;
    uint8_t lanes = 1; // 1 for scalars, 2..4 for vectors
    Precision prec = Precision::High;

    bool is_void = true; // default-constructed type means "unresolved/void"

    Type() = default;
    Type(Scalar s, uint8_t l, Precision p = Precision::High)
        : scalar(s), lanes(l), prec(p), is_void(false) {}

    bool operator==(const Type &o) const {
        if (is_void || o.is_void)
            return is_void == o.is_void;
        return scalar == o.scalar && lanes == o.lanes && prec == o.prec;
    }
    bool same_shape(const Type &o) const {
        return !is_void && !o.is_void && scalar == o.scalar && lanes == o.lanes;
    }
    bool is_float() const { return !is_void && scalar == Scalar::Float; }
    bool is_float_scalar() const { return is_float() && lanes == 1; }
    bool is_float_vec() const { return is_float() && lanes > 1; }
    bool is_int_scalar() const { return !is_void && scalar == Scalar::Int && lanes == 1; }
    bool is_bool_scalar() const { return !is_void && scalar == Scalar::Bool && lanes == 1; }
    bool is_sampler() const { return !is_void && scalar == Scalar::Sampler2D; }
};

inline Type void_type() { return Type(); }
inline Type float_type(Precision p = Precision::High) { return Type(Scalar::Float, 1, p); }
inline Type int_type() { return Type(Scalar::Int, 1); }
inline Type bool_type() { return Type(Scalar::Bool, 1); }
inline Type vec_type(uint8_t lanes, Precision p = Precision::High) {
    return Type(Scalar::Float, lanes, p);
}

std::string type_name(const Type &t);                 // "vec3", "int", ...
std::optional<Type> type_from_name(const std::string &); // inverse, no precision

// ---------------------------------------------------------------------------
// Expressions

struct SourcePos {
    int line = 0;
    int col = 0;
};

enum class ExprKind : uint8_t {
    FloatLit,
    IntLit,
    BoolLit,
    Ident,
    Unary,     // ops: Neg, Not
    Binary,
    Call,      // builtin or user function
    Construct, // vecN(...) / float(...) / int(...) / bool(...)
    Swizzle,   // base.xyz (rvalue only)
};

enum class BinOp : uint8_t { Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class UnOp : uint8_t { Neg, Not };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
    ExprKind kind;
    SourcePos pos;
    Type type; // filled by typecheck

    uint32_t float_bits = 0; // FloatLit payload (f32 bit pattern)
    int32_t int_value = 0;   // IntLit payload
    bool bool_value = false; // BoolLit payload
    std::string name;        // Ident name / Call callee
    BinOp bin_op = BinOp::Add;
    UnOp un_op = UnOp::Neg;
    Type ctor_type;          // Construct target (precision always High here)
    std::string swizzle;     // 1..4 chars from xyzw

    std::vector<ExprPtr> args; // children: Unary/Swizzle [x]; Binary [l,r]; Call/Construct args
};

ExprPtr clone(const Expr &e);

// ---------------------------------------------------------------------------
// Statements

enum class StmtKind : uint8_t {
    Decl,     // type name = init;
    Assign,   // name op= value;   (op: =, +=, -=, *=, /=)
    IncDec,   // name++; / name--;
    ExprStmt, // call();  (void user-function calls)
    If,
    Switch,
    For,
    While,
    DoWhile,
    Break,
    Continue,
    Return,
    Block,
};

enum class AssignOp : uint8_t { Set, AddSet, SubSet, MulSet, DivSet };

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct SwitchCase {
    bool is_default = false;
    int32_t value = 0;
    std::vector<StmtPtr> body; // falls through to the next case unless it breaks
};

struct Stmt {
    StmtKind kind;
    SourcePos pos;

    // Decl
    Type decl_type;
    std::string name; // Decl/Assign/IncDec target
    AssignOp assign_op = AssignOp::Set;
    bool inc = true; // IncDec: true => ++

    ExprPtr expr;  // Decl init / Assign value / ExprStmt expr / Return value /
                   // If-While-DoWhile-Switch condition / selector
    StmtPtr init;  // For init (Decl or Assign), may be null
    ExprPtr cond;  // For condition, may be null
    StmtPtr step;  // For increment (Assign or IncDec), may be null
    StmtPtr body;  // loop/if "then" body (always a Block)
    StmtPtr else_body; // If else (always a Block), may be null
    std::vector<SwitchCase> cases;
    std::vector<StmtPtr> stmts; // Block children
};

StmtPtr clone(const Stmt &s);

// ---------------------------------------------------------------------------
// Declarations and the shader itself

enum class Qualifier : uint8_t { In, Out, Uniform };

struct GlobalDecl {
    Qualifier qualifier;
    Type type;
    std::string name;
    SourcePos pos;
};

struct Param {
    Type type;
    std::string name;
};

struct FunctionDecl {
    Type ret; // void_type() for void
    std::string name;
    std::vector<Param> params;
    StmtPtr body; // Block
    SourcePos pos;
};

enum class Stage : uint8_t { Vertex, Fragment };

struct ShaderAst {
    std::string name;
    Stage stage = Stage::Fragment;
    std::vector<GlobalDecl> globals;
    std::vector<FunctionDecl> functions;
    bool typechecked = false;
    std::vector<std::string> warnings;

    const FunctionDecl *entry() const {
        for (auto &f : functions)
            if (f.name == "main")
                return &f;
        return nullptr;
    }
};

ShaderAst clone(const ShaderAst &a);

// ---------------------------------------------------------------------------
// Node paths: stable child indexing for transform targeting.
//
// path[0] is the function index; subsequent entries index children.
// Child slots per statement kind (fixed arity; absent slots are skipped
// during enumeration but keep their index):
//   Block:    i -> stmts[i]
//   Decl:     0 -> init expr
//   Assign:   0 -> value expr
//   ExprStmt: 0 -> expr
//   Return:   0 -> value expr
//   If:       0 -> cond, 1 -> then block, 2 -> else block
//   While:    0 -> cond, 1 -> body
//   DoWhile:  0 -> body, 1 -> cond
//   For:      0 -> init, 1 -> cond, 2 -> step, 3 -> body
//   Switch:   0 -> selector, 1+i -> case i body (as a pseudo-block)
// Expression children are indexed by operand position (args order).

using NodePath = std::vector<uint32_t>;

struct NodeRef {
    enum K { None, S, E, Case } k = None;
    Stmt *stmt = nullptr;
    Expr *expr = nullptr;
    SwitchCase *scase = nullptr;
    Stmt *case_owner = nullptr; // Switch stmt owning scase
};

// Resolves a path; returns NodeRef{None} when the path does not address a node.
NodeRef resolve(ShaderAst &a, const NodePath &path);

// Container location of a statement: the owning statement list plus index.
struct StmtSlot {
    std::vector<StmtPtr> *list = nullptr;
    size_t index = 0;
    bool valid() const { return list != nullptr; }
};

// For a path addressing a statement inside a Block or SwitchCase list,
// returns the owning list and position. Other statement positions (e.g. a
// For's init slot) yield an invalid slot.
StmtSlot stmt_slot(ShaderAst &a, const NodePath &path);

// Replaces the expression addressed by `path` (must resolve to an Expr),
// returning the old expression. The new expression is moved in.
ExprPtr swap_expr(ShaderAst &a, const NodePath &path, ExprPtr e);

// Collects every identifier appearing anywhere in the shader (declarations
// and uses); used for fresh-name generation.
void collect_identifiers(const ShaderAst &a, std::vector<std::string> &out);

std::string fresh_name(const ShaderAst &a, const std::string &prefix);

} // namespace mshade::ast
