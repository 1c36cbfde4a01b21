#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mshade/ir/ddg.hpp"
#include "mshade/ir/text.hpp"
#include "mshade/metamorph/generate.hpp"
#include "support/ast_interp.hpp"
#include "support/helpers.hpp"

using namespace mshade;
using namespace mshade::testsupport;

TEST_CASE("lowering an input copy produces fget and fset") {
    auto sh = compile_shader_text("copy", R"(
in vec4 a_color;
out vec4 v_out;
void main() { v_out = a_color; }
)");
    ir::Module m = ir::lower(sh);
    REQUIRE(!ir::verify(m).has_value());
    std::string text = ir::print_module(m);
    CHECK(text.find("call f32 fget @a_color") != std::string::npos);
    CHECK(text.find("call fset @v_out") != std::string::npos);
}

TEST_CASE("a mediump initializer lowers through fptrunc") {
    auto sh = compile_shader_text("med", R"(
in float a_x;
out vec4 v_out;
void main() {
    mediump float h = a_x;
    mediump float h2 = h * h;
    v_out = vec4(h2, 0.25, 0.5, 1.0);
}
)");
    ir::Module m = ir::lower(sh);
    REQUIRE(!ir::verify(m).has_value());
    std::string text = ir::print_module(m);
    CHECK(text.find("fptrunc") != std::string::npos);
    CHECK(text.find("fmul f16") != std::string::npos);
}

TEST_CASE("an empty main lowers to a single returning block") {
    auto sh = compile_shader_text("empty", "void main() {}\n");
    ir::Module m = ir::lower(sh);
    REQUIRE(!ir::verify(m).has_value());
    REQUIRE(m.main()->blocks.size() == 1);
    CHECK(m.main()->blocks[0].insts.empty());
    CHECK(m.main()->blocks[0].term.op == ir::Op::Ret);
}

TEST_CASE("verify flags duplicate value ids") {
    auto parsed = ir::parse_module(R"(
global @v out f32
func @main {
%b0:
  %0 = fadd f32 1.0, 2.0
  call fset @v, 0, %0
  ret
}
)");
    REQUIRE(parsed.ok());
    ir::Module m = parsed.take();
    ir::Inst dup = m.main()->blocks[0].insts[0];
    m.main()->blocks[0].insts.push_back(dup);
    auto err = ir::verify(m);
    REQUIRE(err.has_value());
    CHECK(err->invariant == "SsaViolation");
}

TEST_CASE("verify flags a missing terminator") {
    ir::Module m;
    m.globals.push_back({"v", ir::f32(), ir::Role::Output, false});
    ir::Function fn;
    fn.name = "main";
    ir::Block b;
    b.id = 0;
    b.term.op = ir::Op::Add; // not a terminator
    fn.blocks.push_back(std::move(b));
    m.functions.push_back(std::move(fn));
    auto err = ir::verify(m);
    REQUIRE(err.has_value());
    CHECK(err->invariant == "MissingTerminator");
}

TEST_CASE("textual IR round-trips for every fixture shader") {
    for (auto &sh : load_fixture_corpus()) {
        ir::Module m = ir::lower(sh);
        REQUIRE_MESSAGE(!ir::verify(m).has_value(), sh.name);
        std::string t1 = ir::print_module(m);
        auto parsed = ir::parse_module(t1);
        REQUIRE_MESSAGE(parsed.ok(),
                        sh.name + ": " + (parsed.ok() ? "" : parsed.error().message));
        CHECK_MESSAGE(!ir::verify(parsed.value()).has_value(), sh.name);
        CHECK_MESSAGE(ir::print_module(parsed.value()) == t1, sh.name);
    }
}

TEST_CASE("ddg edges mirror operand references") {
    auto parsed = ir::parse_module(R"(
global @a in f32
global @v out f32
func @main {
%b0:
  %0 = call f32 fget @a, 0
  %1 = call f32 fget @a, 0
  %2 = fadd f32 %0, %1
  call fset @v, 0, %2
  ret
}
)");
    REQUIRE(parsed.ok());
    ir::Module m = parsed.take();
    ir::Ddg d = ir::build_ddg(m);
    // nodes: 2 fgets + fadd + fset + ret
    CHECK(d.nodes.size() == 5);
    // edges: %0->%2, %1->%2, %2->fset
    CHECK(d.edges.size() == 3);

    // edge count equals the total non-constant operand count
    size_t operands = 0;
    for (auto &fn : m.functions)
        for (auto &b : fn.blocks) {
            for (auto &in : b.insts)
                for (auto &o : in.args)
                    operands += o.is_const ? 0 : 1;
            for (auto &o : b.term.args)
                operands += o.is_const ? 0 : 1;
        }
    CHECK(d.edges.size() == operands);
}

TEST_CASE("constant-only instructions have no incoming edges") {
    auto parsed = ir::parse_module(R"(
global @v out f32
func @main {
%b0:
  %0 = fadd f32 1.0, 2.0
  call fset @v, 0, %0
  ret
}
)");
    REQUIRE(parsed.ok());
    ir::Ddg d = ir::build_ddg(parsed.value());
    for (auto &[def, use] : d.edges)
        CHECK(def != 0); // %0 has no incoming edge
}

TEST_CASE("ddg node and edge counts match a hand-enumerated module") {
    // 7 instructions incl. terminator; hand count: fget->fmul, fget2->fmul,
    // fmul->fadd, const op omitted, fadd->fset = 4 edges plus condbr use = 5.
    auto parsed = ir::parse_module(R"(
global @a in f32
global @v out f32
func @main {
%b0:
  %0 = call f32 fget @a, 0
  %1 = call f32 fget @a, 0
  %2 = fmul f32 %0, %1
  %3 = fadd f32 %2, 0.5
  %4 = fcmp olt f32 %3, 2.0
  condbr %4, %b1, %b2
%b1:
  call fset @v, 0, %3
  br %b2
%b2:
  ret
}
)");
    REQUIRE(parsed.ok());
    REQUIRE(!ir::verify(parsed.value()).has_value());
    ir::Ddg d = ir::build_ddg(parsed.value());
    CHECK(d.nodes.size() == 9);
    CHECK(d.edges.size() == 6);
}

TEST_CASE("output slices include feeding instructions and exclude dead code") {
    auto parsed = ir::parse_module(R"(
global @a in f32
global @v out f32
func @main {
%b0:
  %0 = call f32 fget @a, 0
  %1 = fadd f32 %0, 1.5
  %2 = fmul f32 %0, 3.0
  call fset @v, 0, %1
  ret
}
)");
    REQUIRE(parsed.ok());
    ir::Module m = parsed.take();
    ir::Ddg d = ir::build_ddg(m);
    auto slices = ir::slice_outputs(m, d);
    REQUIRE(slices.count("v"));
    const auto &slice = slices.at("v");
    CHECK(slice.count(0)); // fget
    CHECK(slice.count(1)); // fadd
    CHECK(!slice.count(2)); // dead fmul not in the slice
}

TEST_CASE("ddg_diff of identical modules is empty") {
    auto sh = compile_shader_text("same", R"(
in vec4 a_color;
out vec4 v_out;
void main() { v_out = a_color * 0.5; }
)");
    ir::Module m = ir::lower(sh);
    ir::Ddg d = ir::build_ddg(m);
    auto slices = ir::slice_outputs(m, d);
    auto sum = ir::ddg_diff(m, slices.at("v_out"), m, slices.at("v_out"), "v_out");
    CHECK(sum.empty());
    CHECK(sum.matched > 0);
}

TEST_CASE("ddg_diff flags undef operands in the variant chain") {
    auto ref = ir::parse_module(R"(
global @v out f32
func @main {
%b0:
  %0 = fadd f32 0.25, 0.5
  call fset @v, 0, %0
  ret
}
)");
    auto var = ir::parse_module(R"(
global @v out f32
func @main {
%b0:
  call fset @v, 0, undef
  ret
}
)");
    REQUIRE(ref.ok());
    REQUIRE(var.ok());
    ir::Module rm = ref.take(), vm = var.take();
    auto rs = ir::slice_outputs(rm, ir::build_ddg(rm));
    auto vs = ir::slice_outputs(vm, ir::build_ddg(vm));
    auto sum = ir::ddg_diff(vm, vs.at("v"), rm, rs.at("v"), "v");
    CHECK(!sum.empty());
    CHECK(sum.undef_sites.size() == 1);
}

TEST_CASE("lowered variants verify: closure under transformation") {
    auto corpus = load_fixture_corpus();
    const ast::ShaderAst &ref = corpus[3];
    for (uint64_t seed = 1; seed <= 8; seed++) {
        auto gen = meta::generate_variant(ref, corpus, seed, 4, nullptr);
        REQUIRE(gen.ok());
        ir::Module m = ir::lower(gen.value().ast);
        CHECK(!ir::verify(m).has_value());
    }
}

TEST_CASE("lowering agrees with the tree-walking oracle on fixture shaders") {
    auto corpus = load_fixture_corpus();
    for (auto &sh : corpus) {
        ir::Module pm = opt::half_promote(ir::lower(sh)).first;
        for (uint64_t seed = 1; seed <= 5; seed++) {
            exec::ExecEnv env = env_for(sh, pm, seed * 1231);
            auto ir_result = exec::execute(pm, env);
            auto oracle = interpret_shader(sh, env);
            REQUIRE_MESSAGE(ir_result.status == exec::ExecStatus::Ok, sh.name);
            REQUIRE_MESSAGE(oracle.ok, sh.name);
            CHECK_MESSAGE(ir_result.output_hash == oracle.output_hash, sh.name);
            REQUIRE(ir_result.outputs.size() == oracle.outputs.size());
            for (size_t i = 0; i < oracle.outputs.size(); i++)
                CHECK_MESSAGE(ir_result.outputs[i].lanes == oracle.outputs[i].lanes,
                              sh.name + "/" + oracle.outputs[i].name);
        }
    }
}
