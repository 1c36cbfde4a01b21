// Test stub for the external-compiler adapter protocol: reads a shader from
// stdin and writes textual IR to stdout. Extra modes simulate misbehaving
// compilers for harness tests.

#include "mshade/ir/lower.hpp"
#include "mshade/ir/text.hpp"
#include "mshade/shader/front.hpp"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <sstream>
#include <thread>

using namespace mshade;

int main(int argc, char **argv) {
    const char *mode = argc > 1 ? argv[1] : "identity";

    std::stringstream ss;
    ss << std::cin.rdbuf();
    std::string text = ss.str();

    if (std::strcmp(mode, "sleep") == 0) {
        std::this_thread::sleep_for(std::chrono::seconds(3600));
        return 0;
    }
    if (std::strcmp(mode, "crash") == 0)
        std::abort();
    if (std::strcmp(mode, "exit2") == 0)
        return 2;
    if (std::strcmp(mode, "garbage") == 0) {
        std::cout << "this is not textual IR\n";
        return 0;
    }

    // identity: front-end lowering, no optimization
    ast::SourceShader src;
    src.text = text;
    src.name = "stdin";
    src.stage = ast::Stage::Fragment;
    auto parsed = ast::parse(src);
    if (!parsed.ok()) {
        std::cerr << "parse error: " << parsed.error().message << "\n";
        return 1;
    }
    auto typed = ast::typecheck(parsed.take());
    if (!typed.ok()) {
        std::cerr << "type error: " << typed.error().message << "\n";
        return 1;
    }
    std::cout << ir::print_module(ir::lower(typed.value()));
    return 0;
}
