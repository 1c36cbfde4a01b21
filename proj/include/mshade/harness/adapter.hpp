#pragma once

#include <string>

namespace mshade::harness {

// External-compiler subprocess protocol: shader source on stdin, textual IR
// on stdout until EOF. Nonzero exit or a signal is a Crash; exceeding the
// wall-clock timeout is a Stall.
struct AdapterResult {
    enum Kind { Ok, Crash, Stall, SpawnError } kind = Ok;
    std::string output; // textual IR on Ok
    std::string detail; // exit/signal/timeout description
};

AdapterResult adapter_compile(const std::string &command, const std::string &shader_text,
                              double timeout_seconds);

} // namespace mshade::harness
