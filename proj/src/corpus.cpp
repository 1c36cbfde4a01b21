#include "mshade/shader/front.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace mshade::ast {

namespace {

std::string dir_of(const std::string &path) {
    auto pos = path.find_last_of('/');
    if (pos == std::string::npos)
        return ".";
    return path.substr(0, pos);
}

} // namespace

Result<std::vector<ShaderAst>, CorpusError> load_corpus(const std::string &manifest_path) {
    std::ifstream in(manifest_path);
    if (!in)
        return CorpusError{"cannot open corpus manifest: " + manifest_path};
    std::string base = dir_of(manifest_path);

    std::vector<ShaderAst> corpus;
    std::set<std::string> names;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        std::string trimmed = line;
        auto h = trimmed.find('#');
        if (h != std::string::npos)
            trimmed = trimmed.substr(0, h);
        std::istringstream fields(trimmed);
        std::string name, path, stage;
        if (!(fields >> name))
            continue; // blank line
        if (!(fields >> path >> stage))
            return CorpusError{manifest_path + ":" + std::to_string(lineno) +
                               ": manifest entries are 'name path stage'"};
        if (stage != "vertex" && stage != "fragment")
            return CorpusError{manifest_path + ":" + std::to_string(lineno) +
                               ": stage must be 'vertex' or 'fragment'"};
        if (!names.insert(name).second)
            return CorpusError{"duplicate shader name '" + name + "' in corpus"};

        std::ifstream sf(base + "/" + path);
        if (!sf)
            return CorpusError{"cannot open shader file: " + base + "/" + path};
        std::stringstream buf;
        buf << sf.rdbuf();

        SourceShader src;
        src.text = buf.str();
        src.name = name;
        src.stage = stage == "vertex" ? Stage::Vertex : Stage::Fragment;
        auto parsed = parse(src);
        if (!parsed.ok())
            return CorpusError{name + ": parse error at " +
                               std::to_string(parsed.error().pos.line) + ":" +
                               std::to_string(parsed.error().pos.col) + ": " +
                               parsed.error().message};
        auto typed = typecheck(parsed.take());
        if (!typed.ok())
            return CorpusError{name + ": type error at " +
                               std::to_string(typed.error().pos.line) + ":" +
                               std::to_string(typed.error().pos.col) + ": " +
                               typed.error().message};
        corpus.push_back(typed.take());
    }
    if (corpus.empty())
        return CorpusError{"corpus manifest lists no shaders"};
    return corpus;
}

} // namespace mshade::ast
