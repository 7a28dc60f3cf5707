#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dicti::detail {

/// Scratch directory `<base>/<prefix>-<pid>-<n>`, removed on destruction
/// unless DICTI_KEEP_WORK_DIRS is set.
class WorkDir {
public:
    WorkDir(const std::filesystem::path& base, const std::string& prefix);
    ~WorkDir();
    WorkDir(const WorkDir&) = delete;
    WorkDir& operator=(const WorkDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::string shell_quote(const std::string& s);

/// Runs `command... args...` through the shell with stdout and stderr sent
/// to `log`. Returns the raw exit status.
int run_logged(const std::vector<std::string>& command, const std::vector<std::string>& args,
               const std::filesystem::path& log);

/// Last `max_bytes` of a text file, or "" when unreadable.
std::string log_tail(const std::filesystem::path& log, std::size_t max_bytes = 2000);

}  // namespace dicti::detail
