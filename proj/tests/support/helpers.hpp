#pragma once

#include "mshade/exec/exec.hpp"
#include "mshade/ir/lower.hpp"
#include "mshade/opt/passes.hpp"
#include "mshade/shader/front.hpp"
#include "mshade/support/fnv.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace mshade::testsupport {

inline ast::ShaderAst compile_shader_text(const std::string &name, const std::string &text) {
    ast::SourceShader src{text, ast::Stage::Fragment, name};
    auto parsed = ast::parse(src);
    if (!parsed.ok())
        throw std::runtime_error(name + ": parse error at " +
                                 std::to_string(parsed.error().pos.line) + ":" +
                                 std::to_string(parsed.error().pos.col) + ": " +
                                 parsed.error().message);
    auto typed = ast::typecheck(parsed.take());
    if (!typed.ok())
        throw std::runtime_error(name + ": type error: " + typed.error().message);
    return typed.take();
}

inline std::vector<ast::ShaderAst> load_fixture_corpus() {
    auto corpus = ast::load_corpus(std::string(FIXTURES_DIR) + "/manifest.txt");
    if (!corpus.ok())
        throw std::runtime_error(corpus.error().message);
    return corpus.take();
}

// Campaign-compatible environment derivation for one reference.
inline exec::ExecEnv env_for(const ast::ShaderAst &ref, const ir::Module &promoted,
                             uint64_t campaign_seed) {
    exec::ExecEnv env;
    env.input_seed = derive64(campaign_seed, fnv1a64(ref.name), 0x494E505554ull);
    env.sampler_seed = derive64(campaign_seed, fnv1a64(ref.name), 0x53414D50ull);
    env.uniform_values = exec::derive_uniforms(promoted, env.input_seed);
    return env;
}

struct CmdResult {
    int exit_code = -1;
    std::string output; // stdout only
};

inline CmdResult run_cmd(const std::string &cmd) {
    CmdResult r;
    FILE *p = popen(cmd.c_str(), "r");
    if (!p)
        return r;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0)
        r.output.append(buf, n);
    int status = pclose(p);
    if (WIFEXITED(status))
        r.exit_code = WEXITSTATUS(status);
    return r;
}

inline bool write_file(const std::string &path, const std::string &content) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        return false;
    f << content;
    return true;
}

inline std::string read_file(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace mshade::testsupport
