#include "mshade/harness/adapter.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace mshade::harness {

namespace {

void ignore_sigpipe() {
    static bool done = false;
    if (!done) {
        std::signal(SIGPIPE, SIG_IGN);
        done = true;
    }
}

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

} // namespace

AdapterResult adapter_compile(const std::string &command, const std::string &shader_text,
                              double timeout_seconds) {
    ignore_sigpipe();
    AdapterResult res;

    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
        res.kind = AdapterResult::SpawnError;
        res.detail = std::strerror(errno);
        return res;
    }
    pid_t pid = fork();
    if (pid < 0) {
        res.kind = AdapterResult::SpawnError;
        res.detail = std::strerror(errno);
        return res;
    }
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char *>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);

    // Feed the shader; a dead child (EPIPE) resolves via wait status below.
    size_t off = 0;
    while (off < shader_text.size()) {
        ssize_t n = write(in_pipe[1], shader_text.data() + off, shader_text.size() - off);
        if (n <= 0)
            break;
        off += static_cast<size_t>(n);
    }
    close(in_pipe[1]);

    double deadline = now_seconds() + timeout_seconds;
    std::string out;
    char buf[4096];
    bool timed_out = false;
    for (;;) {
        double remain = deadline - now_seconds();
        if (remain <= 0) {
            timed_out = true;
            break;
        }
        struct pollfd pfd {
            out_pipe[0], POLLIN, 0
        };
        int pr = poll(&pfd, 1, static_cast<int>(remain * 1000) + 1);
        if (pr < 0) {
            if (errno == EINTR)
                continue;
            break;
        }
        if (pr == 0) {
            timed_out = true;
            break;
        }
        ssize_t n = read(out_pipe[0], buf, sizeof buf);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            break;
        }
        if (n == 0)
            break; // EOF
        out.append(buf, static_cast<size_t>(n));
    }
    close(out_pipe[0]);

    if (timed_out) {
        kill(pid, SIGKILL);
        int status;
        waitpid(pid, &status, 0);
        res.kind = AdapterResult::Stall;
        res.detail = "adapter exceeded wall-clock timeout";
        return res;
    }

    int status = 0;
    waitpid(pid, &status, 0);
    if (WIFSIGNALED(status)) {
        res.kind = AdapterResult::Crash;
        res.detail = std::string("adapter killed by signal ") +
                     std::to_string(WTERMSIG(status));
        return res;
    }
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (code != 0) {
        res.kind = AdapterResult::Crash;
        res.detail = "adapter exited with code " + std::to_string(code);
        return res;
    }
    res.kind = AdapterResult::Ok;
    res.output = std::move(out);
    return res;
}

} // namespace mshade::harness
