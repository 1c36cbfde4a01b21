#include "mshade/ir/text.hpp"
#include "mshade/support/fp.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <unordered_map>

namespace mshade::ir {

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string const_text(const Constant &c) {
    if (c.undef)
        return "undef";
    auto scalar = [&](uint32_t bits) -> std::string {
        switch (c.type.scalar) {
        case Scalar::F32:
            return f32_to_text(bits);
        case Scalar::F16: {
            char buf[8];
            std::snprintf(buf, sizeof buf, "h%04x", bits & 0xFFFFu);
            return buf;
        }
        case Scalar::I32:
            return std::to_string(static_cast<int32_t>(bits));
        case Scalar::I1:
            return bits ? "true" : "false";
        }
        return "?";
    };
    if (c.type.lanes == 1)
        return scalar(c.bits[0]);
    std::string s = "<";
    for (int i = 0; i < c.type.lanes; i++) {
        if (i)
            s += ", ";
        s += scalar(c.bits[i]);
    }
    return s + ">";
}

std::string operand_text(const Operand &o) {
    if (o.is_const)
        return const_text(o.c);
    return "%" + std::to_string(o.id);
}

void print_inst(std::ostringstream &out, const Module &m,
                const std::unordered_map<uint32_t, Type> &types, const Inst &in) {
    out << "  ";
    switch (in.op) {
    case Op::Br:
        out << "br %b" << in.t_true;
        return;
    case Op::CondBr:
        out << "condbr " << operand_text(in.args[0]) << ", %b" << in.t_true << ", %b"
            << in.t_false;
        return;
    case Op::Switch: {
        out << "switch " << operand_text(in.args[0]) << ", %b" << in.t_false << " [";
        for (size_t i = 0; i < in.sw_cases.size(); i++) {
            if (i)
                out << ", ";
            out << in.sw_cases[i].first << ": %b" << in.sw_cases[i].second;
        }
        out << "]";
        return;
    }
    case Op::Ret:
        out << "ret";
        return;
    case Op::Store:
        out << "store @" << m.globals[in.slot].name << ", " << in.lane << ", "
            << operand_text(in.args[0]);
        return;
    case Op::Call:
        if (in.intr == Intrinsic::FSet) {
            out << "call fset @" << m.globals[in.slot].name << ", " << in.lane << ", "
                << operand_text(in.args[0]);
            return;
        }
        out << "%" << in.id << " = call " << type_text(in.type) << " "
            << intrinsic_text(in.intr);
        if (in.intr == Intrinsic::FGet) {
            out << " @" << m.globals[in.slot].name << ", " << in.lane;
            return;
        }
        out << " ";
        for (size_t i = 0; i < in.args.size(); i++) {
            if (i)
                out << ", ";
            out << operand_text(in.args[i]);
        }
        return;
    case Op::Load:
        out << "%" << in.id << " = load " << type_text(in.type) << " @"
            << m.globals[in.slot].name << ", " << in.lane;
        return;
    case Op::Phi: {
        out << "%" << in.id << " = phi " << type_text(in.type) << " ";
        for (size_t i = 0; i < in.args.size(); i++) {
            if (i)
                out << ", ";
            out << "[" << operand_text(in.args[i]) << ", %b" << in.phi_blocks[i] << "]";
        }
        return;
    }
    case Op::ICmp:
    case Op::FCmp: {
        // The stated type is the *operand* type; the result is always i1.
        Type ot;
        if (in.args[0].is_const)
            ot = in.args[0].c.type;
        else if (auto it = types.find(in.args[0].id); it != types.end())
            ot = it->second;
        out << "%" << in.id << " = " << op_text(in.op) << " " << cmp_text(in.cmp) << " "
            << type_text(ot) << " " << operand_text(in.args[0]) << ", "
            << operand_text(in.args[1]);
        return;
    }
    default: {
        out << "%" << in.id << " = " << op_text(in.op) << " " << type_text(in.type);
        out << " ";
        for (size_t i = 0; i < in.args.size(); i++) {
            if (i)
                out << ", ";
            out << operand_text(in.args[i]);
        }
        return;
    }
    }
}

} // namespace

std::string print_module(const Module &m_in) {
    Module m = canonicalize(m_in);
    std::unordered_map<uint32_t, Type> types;
    for (auto &fn : m.functions)
        for (auto &b : fn.blocks)
            for (auto &in : b.insts)
                if (in.has_result())
                    types[in.id] = in.type;
    std::ostringstream out;
    for (auto &g : m.globals) {
        const char *role = g.role == Role::Input    ? "in"
                           : g.role == Role::Output ? "out"
                                                    : "uniform";
        out << "global @" << g.name << " " << role << " "
            << (g.is_sampler ? "sampler2d" : type_text(g.type)) << "\n";
    }
    for (auto &fn : m.functions) {
        out << "func @" << fn.name << " {\n";
        for (auto &b : fn.blocks) {
            out << "%b" << b.id << ":\n";
            for (auto &in : b.insts) {
                print_inst(out, m, types, in);
                out << "\n";
            }
            print_inst(out, m, types, b.term);
            out << "\n";
        }
        out << "}\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Cursor {
    const std::string &s;
    size_t i = 0;

    void skip_ws() {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
            i++;
    }
    bool eat(char c) {
        skip_ws();
        if (i < s.size() && s[i] == c) {
            i++;
            return true;
        }
        return false;
    }
    bool eat_str(const char *w) {
        skip_ws();
        size_t n = std::strlen(w);
        if (s.compare(i, n, w) == 0) {
            i += n;
            return true;
        }
        return false;
    }
    std::string word() {
        skip_ws();
        size_t start = i;
        while (i < s.size() && (isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_' ||
                                s[i] == '.' || s[i] == '-' || s[i] == '+'))
            i++;
        return s.substr(start, i - start);
    }
    bool done() {
        skip_ws();
        return i >= s.size();
    }
};

struct IrParser {
    Module m;
    IrParseError err;
    bool failed = false;
    int lineno = 0;
    uint32_t max_value = 0;
    uint32_t max_block = 0;

    bool fail(const std::string &msg) {
        if (!failed) {
            err = IrParseError{lineno, msg};
            failed = true;
        }
        return false;
    }

    bool parse_type(Cursor &c, Type &t) {
        c.skip_ws();
        if (c.eat('<')) {
            std::string lanes = c.word();
            if (lanes.size() != 1 || lanes[0] < '2' || lanes[0] > '4')
                return fail("bad vector lane count");
            if (!c.eat_str("x"))
                return fail("expected 'x' in vector type");
            std::string sc = c.word();
            if (!scalar_of(sc, t.scalar))
                return fail("unknown scalar type '" + sc + "'");
            t.lanes = static_cast<uint8_t>(lanes[0] - '0');
            if (!c.eat('>'))
                return fail("expected '>'");
            return true;
        }
        std::string sc = c.word();
        if (!scalar_of(sc, t.scalar))
            return fail("unknown type '" + sc + "'");
        t.lanes = 1;
        return true;
    }

    static bool scalar_of(const std::string &s, Scalar &out) {
        if (s == "f32")
            out = Scalar::F32;
        else if (s == "f16")
            out = Scalar::F16;
        else if (s == "i32")
            out = Scalar::I32;
        else if (s == "i1")
            out = Scalar::I1;
        else
            return false;
        return true;
    }

    bool parse_scalar_const(const std::string &w, Scalar scalar, uint32_t &bits) {
        if (w.empty())
            return fail("expected constant");
        switch (scalar) {
        case Scalar::F32:
            if (w.size() > 2 && w[0] == '0' && w[1] == 'x') {
                bits = static_cast<uint32_t>(strtoul(w.c_str() + 2, nullptr, 16));
                return true;
            }
            bits = f32_bits(strtof(w.c_str(), nullptr));
            return true;
        case Scalar::F16:
            if (w[0] != 'h')
                return fail("f16 constants use hXXXX form");
            bits = static_cast<uint32_t>(strtoul(w.c_str() + 1, nullptr, 16)) & 0xFFFFu;
            return true;
        case Scalar::I32:
            bits = static_cast<uint32_t>(strtol(w.c_str(), nullptr, 10));
            return true;
        case Scalar::I1:
            if (w == "true")
                bits = 1;
            else if (w == "false")
                bits = 0;
            else
                return fail("i1 constants are true/false");
            return true;
        }
        return false;
    }

    // Operand: %id, or a constant of the given type (undef allowed).
    bool parse_operand(Cursor &c, Type t, Operand &o) {
        c.skip_ws();
        if (c.eat('%')) {
            std::string w = c.word();
            if (w.empty() || w[0] == 'b')
                return fail("expected value id");
            o = Operand::value(static_cast<uint32_t>(strtoul(w.c_str(), nullptr, 10)));
            max_value = std::max(max_value, o.id + 1);
            return true;
        }
        Constant k;
        k.type = t;
        if (c.eat_str("undef")) {
            k.undef = true;
            o = Operand::constant(k);
            return true;
        }
        if (t.lanes > 1) {
            if (!c.eat('<'))
                return fail("expected vector constant");
            for (int i = 0; i < t.lanes; i++) {
                if (i && !c.eat(','))
                    return fail("expected ',' in vector constant");
                std::string w = c.word();
                if (!parse_scalar_const(w, t.scalar, k.bits[i]))
                    return false;
            }
            if (!c.eat('>'))
                return fail("expected '>'");
            o = Operand::constant(k);
            return true;
        }
        std::string w = c.word();
        if (!parse_scalar_const(w, t.scalar, k.bits[0]))
            return false;
        o = Operand::constant(k);
        return true;
    }

    bool parse_block_ref(Cursor &c, uint32_t &id) {
        if (!c.eat('%') || !c.eat_str("b"))
            return fail("expected block reference");
        std::string w = c.word();
        id = static_cast<uint32_t>(strtoul(w.c_str(), nullptr, 10));
        max_block = std::max(max_block, id + 1);
        return true;
    }

    bool parse_slot_ref(Cursor &c, uint32_t &slot, uint32_t &lane, bool with_lane = true) {
        if (!c.eat('@'))
            return fail("expected @slot");
        std::string name = c.word();
        int idx = m.global_index(name);
        if (idx < 0)
            return fail("unknown global '" + name + "'");
        slot = static_cast<uint32_t>(idx);
        if (with_lane) {
            if (!c.eat(','))
                return fail("expected ',' after slot");
            std::string w = c.word();
            lane = static_cast<uint32_t>(strtoul(w.c_str(), nullptr, 10));
        }
        return true;
    }

    bool parse_global(Cursor &c) {
        if (!c.eat('@'))
            return fail("expected '@' in global");
        GlobalSlot g;
        g.name = c.word();
        std::string role = c.word();
        if (role == "in")
            g.role = Role::Input;
        else if (role == "out")
            g.role = Role::Output;
        else if (role == "uniform")
            g.role = Role::Uniform;
        else
            return fail("unknown role '" + role + "'");
        c.skip_ws();
        if (c.eat_str("sampler2d")) {
            if (g.role != Role::Uniform)
                return fail("sampler slots must be uniform");
            g.is_sampler = true;
            g.type = i32();
        } else if (!parse_type(c, g.type)) {
            return false;
        }
        m.globals.push_back(g);
        return true;
    }

    bool intrinsic_of(const std::string &s, Intrinsic &out) {
        static const std::pair<const char *, Intrinsic> table[] = {
            {"fget", Intrinsic::FGet},   {"fset", Intrinsic::FSet},
            {"rsq", Intrinsic::Rsq},     {"sampler", Intrinsic::Sampler},
            {"min", Intrinsic::Min},     {"max", Intrinsic::Max},
            {"abs", Intrinsic::Abs},     {"sin", Intrinsic::Sin},
            {"cos", Intrinsic::Cos},     {"floor", Intrinsic::Floor},
            {"sqrt", Intrinsic::Sqrt},
        };
        for (auto &[n, i] : table)
            if (s == n) {
                out = i;
                return true;
            }
        return false;
    }

    bool cmp_of(const std::string &s, Cmp &out) {
        static const std::pair<const char *, Cmp> table[] = {
            {"eq", Cmp::Eq},   {"ne", Cmp::Ne},   {"slt", Cmp::Slt}, {"sle", Cmp::Sle},
            {"sgt", Cmp::Sgt}, {"sge", Cmp::Sge}, {"oeq", Cmp::Oeq}, {"une", Cmp::Une},
            {"olt", Cmp::Olt}, {"ole", Cmp::Ole}, {"ogt", Cmp::Ogt}, {"oge", Cmp::Oge},
        };
        for (auto &[n, c] : table)
            if (s == n) {
                out = c;
                return true;
            }
        return false;
    }

    // Parses one instruction line (terminators included).
    bool parse_inst(Cursor &c, Inst &in, bool &is_term) {
        is_term = false;
        c.skip_ws();
        size_t save = c.i;
        std::string head = c.word();
        c.i = save;
        if (head == "br") {
            c.word();
            in.op = Op::Br;
            is_term = true;
            return parse_block_ref(c, in.t_true);
        }
        if (c.eat_str("condbr")) {
            in.op = Op::CondBr;
            is_term = true;
            Operand o;
            if (!parse_operand(c, i1(), o))
                return false;
            in.args.push_back(o);
            if (!c.eat(','))
                return fail("expected ','");
            if (!parse_block_ref(c, in.t_true))
                return false;
            if (!c.eat(','))
                return fail("expected ','");
            return parse_block_ref(c, in.t_false);
        }
        if (c.eat_str("switch")) {
            in.op = Op::Switch;
            is_term = true;
            Operand o;
            if (!parse_operand(c, i32(), o))
                return false;
            in.args.push_back(o);
            if (!c.eat(','))
                return fail("expected ','");
            if (!parse_block_ref(c, in.t_false))
                return false;
            if (!c.eat('['))
                return fail("expected '['");
            if (!c.eat(']')) {
                for (;;) {
                    std::string v = c.word();
                    int32_t val = static_cast<int32_t>(strtol(v.c_str(), nullptr, 10));
                    if (!c.eat(':'))
                        return fail("expected ':'");
                    uint32_t tgt;
                    if (!parse_block_ref(c, tgt))
                        return false;
                    in.sw_cases.emplace_back(val, tgt);
                    if (c.eat(','))
                        continue;
                    if (c.eat(']'))
                        break;
                    return fail("expected ',' or ']'");
                }
            }
            return true;
        }
        if (c.eat_str("ret")) {
            in.op = Op::Ret;
            is_term = true;
            return true;
        }
        if (c.eat_str("store")) {
            in.op = Op::Store;
            if (!parse_slot_ref(c, in.slot, in.lane))
                return false;
            if (!c.eat(','))
                return fail("expected ','");
            Operand o;
            Type t{m.globals[in.slot].type.scalar, 1};
            if (!parse_operand(c, t, o))
                return false;
            in.args.push_back(o);
            return true;
        }
        if (c.eat_str("call fset")) {
            in.op = Op::Call;
            in.intr = Intrinsic::FSet;
            if (!parse_slot_ref(c, in.slot, in.lane))
                return false;
            if (!c.eat(','))
                return fail("expected ','");
            Operand o;
            Type t{m.globals[in.slot].type.scalar, 1};
            if (!parse_operand(c, t, o))
                return false;
            in.args.push_back(o);
            return true;
        }

        // Valued instruction: %id = opcode ...
        if (!c.eat('%'))
            return fail("expected instruction");
        std::string idw = c.word();
        in.id = static_cast<uint32_t>(strtoul(idw.c_str(), nullptr, 10));
        max_value = std::max(max_value, in.id + 1);
        if (!c.eat('='))
            return fail("expected '='");
        std::string opw = c.word();

        if (opw == "icmp" || opw == "fcmp") {
            in.op = opw == "icmp" ? Op::ICmp : Op::FCmp;
            in.type = i1();
            std::string pw = c.word();
            if (!cmp_of(pw, in.cmp))
                return fail("unknown predicate '" + pw + "'");
            Type ot;
            if (!parse_type(c, ot))
                return false;
            Operand a, b;
            if (!parse_operand(c, ot, a))
                return false;
            if (!c.eat(','))
                return fail("expected ','");
            if (!parse_operand(c, ot, b))
                return false;
            in.args = {a, b};
            return true;
        }
        if (opw == "call") {
            in.op = Op::Call;
            if (!parse_type(c, in.type))
                return false;
            std::string iw = c.word();
            if (!intrinsic_of(iw, in.intr) || in.intr == Intrinsic::FSet)
                return fail("unknown intrinsic '" + iw + "'");
            if (in.intr == Intrinsic::FGet)
                return parse_slot_ref(c, in.slot, in.lane);
            size_t argc = in.intr == Intrinsic::Sampler ? 4
                          : (in.intr == Intrinsic::Min || in.intr == Intrinsic::Max) ? 2
                                                                                     : 1;
            for (size_t i = 0; i < argc; i++) {
                if (i && !c.eat(','))
                    return fail("expected ','");
                Type at = f32();
                if (in.intr == Intrinsic::Sampler && i == 0)
                    at = i32();
                Operand o;
                if (!parse_operand(c, at, o))
                    return false;
                in.args.push_back(o);
            }
            return true;
        }
        if (opw == "load") {
            in.op = Op::Load;
            if (!parse_type(c, in.type))
                return false;
            return parse_slot_ref(c, in.slot, in.lane);
        }
        if (opw == "phi") {
            in.op = Op::Phi;
            if (!parse_type(c, in.type))
                return false;
            for (;;) {
                if (!c.eat('['))
                    return fail("expected '['");
                Operand o;
                if (!parse_operand(c, in.type, o))
                    return false;
                if (!c.eat(','))
                    return fail("expected ','");
                uint32_t bid;
                if (!parse_block_ref(c, bid))
                    return false;
                if (!c.eat(']'))
                    return fail("expected ']'");
                in.args.push_back(o);
                in.phi_blocks.push_back(bid);
                if (c.eat(','))
                    continue;
                break;
            }
            return true;
        }

        static const std::pair<const char *, Op> simple[] = {
            {"add", Op::Add},         {"sub", Op::Sub},     {"mul", Op::Mul},
            {"div", Op::Div},         {"fadd", Op::FAdd},   {"fsub", Op::FSub},
            {"fmul", Op::FMul},       {"fdiv", Op::FDiv},   {"select", Op::Select},
            {"fpext", Op::FpExt},     {"fptrunc", Op::FpTrunc}, {"bitcast", Op::Bitcast},
            {"itof", Op::IToF},       {"ftoi", Op::FToI},   {"extract", Op::Extract},
            {"insert", Op::Insert},
        };
        Op op;
        bool found = false;
        for (auto &[n, o] : simple)
            if (opw == n) {
                op = o;
                found = true;
                break;
            }
        if (!found)
            return fail("unknown opcode '" + opw + "'");
        in.op = op;
        Type stated;
        if (!parse_type(c, stated))
            return false;

        switch (op) {
        case Op::Extract: {
            // stated type is the vector operand type; result is its scalar
            in.type = Type{stated.scalar, 1};
            Operand v, l;
            if (!parse_operand(c, stated, v))
                return false;
            if (!c.eat(','))
                return fail("expected ','");
            if (!parse_operand(c, i32(), l))
                return false;
            in.args = {v, l};
            return true;
        }
        case Op::Insert: {
            in.type = stated;
            Operand v, s, l;
            if (!parse_operand(c, stated, v))
                return false;
            if (!c.eat(','))
                return fail("expected ','");
            if (!parse_operand(c, Type{stated.scalar, 1}, s))
                return false;
            if (!c.eat(','))
                return fail("expected ','");
            if (!parse_operand(c, i32(), l))
                return false;
            in.args = {v, s, l};
            return true;
        }
        case Op::Select: {
            in.type = stated;
            Operand cnd, a, b;
            if (!parse_operand(c, i1(), cnd))
                return false;
            if (!c.eat(','))
                return fail("expected ','");
            if (!parse_operand(c, stated, a))
                return false;
            if (!c.eat(','))
                return fail("expected ','");
            if (!parse_operand(c, stated, b))
                return false;
            in.args = {cnd, a, b};
            return true;
        }
        case Op::FpExt: {
            in.type = stated; // f32-based result
            Operand o;
            if (!parse_operand(c, Type{Scalar::F16, stated.lanes}, o))
                return false;
            in.args = {o};
            return true;
        }
        case Op::FpTrunc: {
            in.type = stated; // f16-based result
            Operand o;
            if (!parse_operand(c, Type{Scalar::F32, stated.lanes}, o))
                return false;
            in.args = {o};
            return true;
        }
        case Op::Bitcast: {
            in.type = stated;
            c.skip_ws();
            if (c.i < c.s.size() && c.s[c.i] != '%')
                return fail("bitcast operands must be values");
            Operand o;
            if (!parse_operand(c, stated, o))
                return false;
            in.args = {o};
            return true;
        }
        case Op::IToF: {
            in.type = stated;
            Operand o;
            if (!parse_operand(c, i32(), o))
                return false;
            in.args = {o};
            return true;
        }
        case Op::FToI: {
            in.type = stated;
            Operand o;
            if (!parse_operand(c, f32(), o))
                return false;
            in.args = {o};
            return true;
        }
        default: { // binary arithmetic
            in.type = stated;
            Operand a, b;
            if (!parse_operand(c, stated, a))
                return false;
            if (!c.eat(','))
                return fail("expected ','");
            if (!parse_operand(c, stated, b))
                return false;
            in.args = {a, b};
            return true;
        }
        }
    }

    bool run(const std::string &text) {
        std::istringstream lines(text);
        std::string line;
        Function *fn = nullptr;
        Block *blk = nullptr;
        uint32_t next_synth_id = 1u << 30; // ids for void instructions
        while (std::getline(lines, line)) {
            lineno++;
            auto sc = line.find(';');
            if (sc != std::string::npos)
                line = line.substr(0, sc);
            Cursor c{line, 0};
            if (c.done())
                continue;
            if (c.eat_str("global")) {
                if (!parse_global(c))
                    return false;
                continue;
            }
            if (c.eat_str("func")) {
                if (!c.eat('@'))
                    return fail("expected '@'");
                Function f;
                f.name = c.word();
                m.functions.push_back(std::move(f));
                fn = &m.functions.back();
                blk = nullptr;
                if (!c.eat('{'))
                    return fail("expected '{'");
                continue;
            }
            if (c.eat('}')) {
                if (!fn)
                    return fail("'}' outside function");
                if (blk && !is_terminator(blk->term.op))
                    return fail("block lacks terminator");
                fn = nullptr;
                blk = nullptr;
                continue;
            }
            c.skip_ws();
            if (c.s.compare(c.i, 2, "%b") == 0 && c.s.find(':', c.i) != std::string::npos) {
                if (!fn)
                    return fail("block outside function");
                c.eat('%');
                c.eat_str("b");
                std::string w = c.word();
                if (!c.eat(':'))
                    return fail("expected ':'");
                Block b;
                b.id = static_cast<uint32_t>(strtoul(w.c_str(), nullptr, 10));
                max_block = std::max(max_block, b.id + 1);
                b.term.op = Op::Add; // placeholder; must be overwritten
                fn->blocks.push_back(std::move(b));
                blk = &fn->blocks.back();
                continue;
            }
            if (!fn || !blk)
                return fail("instruction outside block");
            Inst in;
            bool is_term = false;
            if (!parse_inst(c, in, is_term))
                return false;
            if (!c.done())
                return fail("trailing characters");
            if (is_term) {
                if (is_terminator(blk->term.op))
                    return fail("multiple terminators in block");
                in.id = next_synth_id++;
                blk->term = std::move(in);
            } else {
                if (is_terminator(blk->term.op))
                    return fail("instruction after terminator");
                if (!in.has_result())
                    in.id = next_synth_id++;
                blk->insts.push_back(std::move(in));
            }
        }
        if (fn)
            return fail("unterminated function");
        for (auto &f : m.functions)
            for (auto &b : f.blocks)
                if (!is_terminator(b.term.op))
                    return fail("block %b" + std::to_string(b.id) + " lacks terminator");
        m.next_value_id = std::max(max_value, next_synth_id);
        m.next_block_id = max_block;
        return true;
    }
};

} // namespace

Result<Module, IrParseError> parse_module(const std::string &text) {
    IrParser p;
    if (!p.run(text))
        return p.err;
    // Renumber densely so synthetic void-instruction ids disappear.
    return canonicalize(p.m);
}

} // namespace mshade::ir
