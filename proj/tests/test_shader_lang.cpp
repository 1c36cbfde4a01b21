#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/helpers.hpp"

using namespace mshade;
using namespace mshade::testsupport;

namespace {

ast::TypeError type_error_of(const std::string &text) {
    ast::SourceShader src{text, ast::Stage::Fragment, "t"};
    auto parsed = ast::parse(src);
    REQUIRE(parsed.ok());
    auto typed = ast::typecheck(parsed.take());
    REQUIRE(!typed.ok());
    return typed.error();
}

} // namespace

TEST_CASE("minimal program parses to one global and one function") {
    ast::SourceShader src{"out vec4 v_out;\nvoid main() { v_out = vec4(1.0); }",
                          ast::Stage::Fragment, "mini"};
    auto parsed = ast::parse(src);
    REQUIRE(parsed.ok());
    CHECK(parsed.value().globals.size() == 1);
    CHECK(parsed.value().functions.size() == 1);
    CHECK(parsed.value().entry() != nullptr);
}

TEST_CASE("malformed input reports a position on line 1") {
    ast::SourceShader src{"void main( {", ast::Stage::Fragment, "bad"};
    auto parsed = ast::parse(src);
    REQUIRE(!parsed.ok());
    CHECK(parsed.error().pos.line == 1);
    CHECK(parsed.error().pos.col > 1);
}

TEST_CASE("empty source is rejected") {
    ast::SourceShader src{"", ast::Stage::Fragment, "empty"};
    CHECK(!ast::parse(src).ok());
}

TEST_CASE("pretty-print round trip is stable for every fixture shader") {
    for (auto &sh : load_fixture_corpus()) {
        std::string printed = ast::pretty_print(sh);
        ast::SourceShader again{printed, sh.stage, sh.name};
        auto reparsed = ast::parse(again);
        REQUIRE_MESSAGE(reparsed.ok(), sh.name);
        CHECK_MESSAGE(ast::pretty_print(reparsed.value()) == printed, sh.name);
    }
}

TEST_CASE("parsing is deterministic") {
    auto corpus = load_fixture_corpus();
    for (auto &sh : corpus) {
        std::string p1 = ast::pretty_print(sh);
        ast::SourceShader src{p1, sh.stage, sh.name};
        auto a = ast::parse(src);
        auto b = ast::parse(src);
        REQUIRE(a.ok());
        REQUIRE(b.ok());
        CHECK(ast::pretty_print(a.value()) == ast::pretty_print(b.value()));
    }
}

TEST_CASE("typecheck annotates scalar arithmetic") {
    auto sh = compile_shader_text("scalars", R"(
out vec4 v_out;
void main() {
    float x = 1.0 + 2.0;
    v_out = vec4(x);
}
)");
    CHECK(sh.typechecked);
}

TEST_CASE("vector shape mismatch is a TypeMismatch") {
    auto err = type_error_of(R"(
out vec4 v_out;
void main() {
    vec3 v = vec2(1.0, 2.0);
    v_out = vec4(v, 1.0);
}
)");
    CHECK(err.kind == ast::TypeErrorKind::TypeMismatch);
}

TEST_CASE("mix of two vec4 operands with a float weight yields vec4") {
    auto sh = compile_shader_text("mix4", R"(
in vec4 a_color;
out vec4 v_out;
void main() {
    vec4 m = mix(a_color, vec4(0.25), 0.5);
    v_out = m;
}
)");
    CHECK(sh.typechecked);
}

TEST_CASE("undeclared identifiers are rejected") {
    auto err = type_error_of("out vec4 v;\nvoid main() { v = vec4(nope); }");
    CHECK(err.kind == ast::TypeErrorKind::UndeclaredIdentifier);
}

TEST_CASE("builtin arity is enforced") {
    auto err = type_error_of("out vec4 v;\nvoid main() { v = vec4(dot(1.0)); }");
    CHECK(err.kind == ast::TypeErrorKind::ArityMismatch);
}

TEST_CASE("a second main is MultipleMain") {
    auto err = type_error_of("out vec4 v;\nvoid main() { v = vec4(0.5); }\nvoid main() {}");
    CHECK(err.kind == ast::TypeErrorKind::MultipleMain);
}

TEST_CASE("reading an out global is an InvalidQualifier error") {
    auto err = type_error_of(R"(
out vec4 v_out;
void main() {
    float x = v_out.x;
    v_out = vec4(x);
}
)");
    CHECK(err.kind == ast::TypeErrorKind::InvalidQualifier);
}

TEST_CASE("mediump int is rejected") {
    auto err = type_error_of("out vec4 v;\nvoid main() { mediump int i = 1; v = vec4(0.5); }");
    CHECK(err.kind == ast::TypeErrorKind::InvalidQualifier);
}

TEST_CASE("functions must be defined before use, so recursion cannot typecheck") {
    auto err = type_error_of(R"(
out vec4 v;
float f(float x) {
    return f(x) + 1.0;
}
void main() { v = vec4(f(1.0)); }
)");
    CHECK(err.kind == ast::TypeErrorKind::UndeclaredIdentifier);
}

TEST_CASE("break outside a loop is rejected") {
    auto err = type_error_of("out vec4 v;\nvoid main() { break; v = vec4(0.5); }");
    CHECK(err.kind == ast::TypeErrorKind::TypeMismatch);
}

TEST_CASE("an unwritten out produces a warning, not an error") {
    auto sh = compile_shader_text("warn", R"(
out vec4 v_out;
out float v_unused;
void main() {
    v_out = vec4(0.5);
}
)");
    REQUIRE(sh.warnings.size() == 1);
    CHECK(sh.warnings[0].find("v_unused") != std::string::npos);
}

TEST_CASE("declarations require initializers") {
    ast::SourceShader src{"out vec4 v;\nvoid main() { float x; v = vec4(0.5); }",
                          ast::Stage::Fragment, "noinit"};
    CHECK(!ast::parse(src).ok());
}

TEST_CASE("float literals round-trip bit-exactly through printing") {
    auto sh = compile_shader_text("lit", R"(
out vec4 v;
void main() {
    float tiny = 0.100000001;
    float big = 123456.789;
    v = vec4(tiny, big, 0.333333343, 1.0);
}
)");
    std::string printed = ast::pretty_print(sh);
    ast::SourceShader src{printed, ast::Stage::Fragment, "lit2"};
    auto again = ast::parse(src);
    REQUIRE(again.ok());
    CHECK(ast::pretty_print(again.value()) == printed);
}

TEST_CASE("corpus loader rejects duplicate names") {
    std::string dir = "/tmp/mshade_corpus_test";
    run_cmd("mkdir -p " + dir);
    write_file(dir + "/a.frag", "out vec4 v;\nvoid main() { v = vec4(0.5); }\n");
    write_file(dir + "/m.txt", "x a.frag fragment\nx a.frag fragment\n");
    auto corpus = ast::load_corpus(dir + "/m.txt");
    CHECK(!corpus.ok());
}
