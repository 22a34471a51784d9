#pragma once

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace cli_util {

struct Run {
    int code = -1;
    std::string output;
};

/// Runs the CLI with `args` through the shell, capturing stdout and stderr together.
inline Run run(const std::string& args, const std::string& log_path) {
    const std::string cmd = std::string("\"") + FRADIAG_CLI + "\" " + args + " > \"" + log_path + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log_path);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace cli_util
