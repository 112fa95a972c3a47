#pragma once

#include "thermstack/config.hpp"
#include "thermstack/scenario.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline std::filesystem::path data_dir() { return THERMSTACK_DATA_DIR; }

/// The bundled dual-CPU study, loaded once per process.
inline const thermstack::RunConfig& study()
{
    static const thermstack::RunConfig rc = thermstack::load_run_config(data_dir() / "configs" / "study.toml");
    return rc;
}

/// Bundled library and maps on a coarse mesh, for tests that only need a realistic stack.
inline thermstack::StudyContext coarse_context(int n = 16)
{
    auto ctx = study().context();
    ctx.mesh.nx = n;
    ctx.mesh.ny = n;
    return ctx;
}

/// Scratch directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("thermstack_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Random floorplan blocks inside a w x h extent.
inline std::vector<thermstack::FloorplanBlock> random_blocks(std::mt19937_64& rng, double w, double h, int count)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<thermstack::FloorplanBlock> blocks;
    for (int i = 0; i < count; ++i) {
        const double x0 = u(rng) * 0.95 * w, y0 = u(rng) * 0.95 * h;
        const double x1 = x0 + (0.01 + 0.99 * u(rng)) * (w - x0);
        const double y1 = y0 + (0.01 + 0.99 * u(rng)) * (h - y0);
        blocks.push_back({"b" + std::to_string(i), {x0, y0, x1, y1}, u(rng) * 3.0, thermstack::BlockKind::logic});
    }
    return blocks;
}

} // namespace testing
