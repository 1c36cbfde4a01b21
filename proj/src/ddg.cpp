#include "mshade/ir/ddg.hpp"

#include <algorithm>
#include <unordered_map>

namespace mshade::ir {

namespace {

template <typename F>
void each_inst(const Module &m, F f) {
    for (auto &fn : m.functions)
        for (auto &b : fn.blocks) {
            for (auto &in : b.insts)
                f(in);
            f(b.term);
        }
}

} // namespace

Ddg build_ddg(const Module &m) {
    Ddg d;
    each_inst(m, [&](const Inst &in) {
        d.nodes.push_back(in.id);
        for (auto &o : in.args)
            if (!o.is_const)
                d.edges.emplace_back(o.id, in.id);
    });
    std::sort(d.nodes.begin(), d.nodes.end());
    std::sort(d.edges.begin(), d.edges.end());
    return d;
}

OutputSlices slice_outputs(const Module &m, const Ddg &d) {
    // def -> uses is given; slicing walks use -> defs
    std::unordered_map<uint32_t, std::vector<uint32_t>> deps; // use -> defs
    for (auto &[def, use] : d.edges)
        deps[use].push_back(def);

    OutputSlices slices;
    for (auto &g : m.globals)
        if (g.role == Role::Output)
            slices[g.name] = {};

    each_inst(m, [&](const Inst &in) {
        bool writes_output = in.op == Op::Store ||
                             (in.op == Op::Call && in.intr == Intrinsic::FSet);
        if (!writes_output)
            return;
        const std::string &slot = m.globals[in.slot].name;
        auto &slice = slices[slot];
        std::vector<uint32_t> work{in.id};
        while (!work.empty()) {
            uint32_t id = work.back();
            work.pop_back();
            if (!slice.insert(id).second)
                continue;
            auto it = deps.find(id);
            if (it != deps.end())
                for (uint32_t def : it->second)
                    work.push_back(def);
        }
    });
    return slices;
}

namespace {

struct NodeSig {
    uint32_t id = 0;
    std::string opcode; // opcode + predicate/intrinsic qualifier
    size_t arity = 0;
    std::vector<Constant> consts;
    bool has_undef = false;

    bool matches(const NodeSig &o) const {
        if (opcode != o.opcode || arity != o.arity || consts.size() != o.consts.size())
            return false;
        for (size_t i = 0; i < consts.size(); i++)
            if (!(consts[i] == o.consts[i]))
                return false;
        return true;
    }
};

std::vector<NodeSig> slice_signatures(const Module &m, const std::set<uint32_t> &slice) {
    std::vector<NodeSig> sigs;
    each_inst(m, [&](const Inst &in) {
        if (!slice.count(in.id))
            return;
        NodeSig s;
        s.id = in.id;
        s.opcode = op_text(in.op);
        if (in.op == Op::ICmp || in.op == Op::FCmp)
            s.opcode += std::string(".") + cmp_text(in.cmp);
        if (in.op == Op::Call)
            s.opcode += std::string(".") + intrinsic_text(in.intr);
        s.arity = in.args.size();
        for (auto &o : in.args) {
            if (o.is_const) {
                s.consts.push_back(o.c);
                if (o.c.undef)
                    s.has_undef = true;
            }
        }
        sigs.push_back(std::move(s));
    });
    return sigs;
}

} // namespace

DivergenceSummary ddg_diff(const Module &variant, const std::set<uint32_t> &variant_slice,
                           const Module &reference, const std::set<uint32_t> &reference_slice,
                           const std::string &slot) {
    DivergenceSummary sum;
    sum.slot = slot;

    std::vector<NodeSig> vs = slice_signatures(variant, variant_slice);
    std::vector<NodeSig> rs = slice_signatures(reference, reference_slice);

    for (auto &s : vs)
        if (s.has_undef)
            sum.undef_sites.push_back(s.id);

    std::vector<bool> ref_used(rs.size(), false);
    std::vector<const NodeSig *> v_left;
    for (auto &v : vs) {
        bool matched = false;
        for (size_t i = 0; i < rs.size(); i++) {
            if (ref_used[i] || !v.matches(rs[i]))
                continue;
            ref_used[i] = true;
            matched = true;
            sum.matched++;
            break;
        }
        if (!matched)
            v_left.push_back(&v);
    }
    for (auto *v : v_left)
        sum.only_in_variant.emplace_back(v->id, v->opcode);
    std::vector<const NodeSig *> r_left;
    for (size_t i = 0; i < rs.size(); i++)
        if (!ref_used[i])
            r_left.push_back(&rs[i]);
    for (auto *r : r_left)
        sum.only_in_reference.emplace_back(r->id, r->opcode);

    size_t pairs = std::min(v_left.size(), r_left.size());
    for (size_t i = 0; i < pairs; i++)
        sum.opcode_pairs.emplace_back(r_left[i]->opcode, v_left[i]->opcode);
    return sum;
}

} // namespace mshade::ir
