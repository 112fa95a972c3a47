#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace thermstack {

inline constexpr const char* tool_version = "0.1.0";

/// Files written by one command. Unless committed, they are deleted on destruction so
/// a failed run leaves no partial outputs behind.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir);
    ~OutputSet();
    OutputSet(const OutputSet&) = delete;
    OutputSet& operator=(const OutputSet&) = delete;

    /// Registers `name` inside the output directory and returns its full path.
    std::filesystem::path add(const std::string& name);
    void commit() { committed_ = true; }

    const std::filesystem::path& dir() const { return dir_; }
    const std::vector<std::filesystem::path>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> files_;
    bool created_dir_ = false;
    bool committed_ = false;
};

/// Entry point shared by the executable and the tests. Returns the process exit code:
/// 0 success, 1 validation failure, 2 solver failure, 3 I/O failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace thermstack
