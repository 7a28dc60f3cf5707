#include "subprocess.hpp"

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dicti::detail {

WorkDir::WorkDir(const std::filesystem::path& base, const std::string& prefix) {
    static std::atomic<std::uint64_t> counter{0};
    const auto root = base.empty() ? std::filesystem::temp_directory_path() : base;
    path_ = root / (prefix + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
}

WorkDir::~WorkDir() {
    if (std::getenv("DICTI_KEEP_WORK_DIRS")) return;
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

int run_logged(const std::vector<std::string>& command, const std::vector<std::string>& args,
               const std::filesystem::path& log) {
    std::string cmd;
    for (const auto& part : command) cmd += shell_quote(part) + " ";
    for (const auto& a : args) cmd += shell_quote(a) + " ";
    cmd += "> " + shell_quote(log.string()) + " 2>&1";
    return std::system(cmd.c_str());
}

std::string log_tail(const std::filesystem::path& log, std::size_t max_bytes) {
    std::ifstream in(log, std::ios::binary);
    if (!in) return "";
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    if (text.size() > max_bytes) text = text.substr(text.size() - max_bytes);
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
}

}  // namespace dicti::detail
