#pragma once

#include "thermstack/calibrate.hpp"
#include "thermstack/experiments.hpp"
#include "thermstack/materials.hpp"
#include "thermstack/mesh.hpp"
#include "thermstack/powermap.hpp"
#include "thermstack/scenario.hpp"
#include "thermstack/solver.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace thermstack {

/// Environment variable naming the default material table.
inline constexpr const char* materials_env_var = "THERMSTACK_MATERIALS";

struct TransientSettings {
    double duration_s = 60.0;
    double dt_s = 0.0;
    std::optional<double> threshold_c;
    /// Threshold as a fraction of the baseline's steady rise, used when threshold_c is unset.
    double threshold_fraction = 0.8;
    std::string region = "die";
    std::vector<std::string> configs; ///< matrix labels; empty means the [scenario] config
};

struct CalibrateSettings {
    std::optional<std::filesystem::path> measurements;
    double htc_lo = 100.0;
    double htc_hi = 1e5;
    std::string region = "die";
    double log_tolerance = 1e-4;
    double dt_s = 0.0;
};

struct MatrixSettings {
    std::string baseline;
    std::vector<std::string> workloads;
    std::vector<StackConfig> configs;
};

struct SweepSettings {
    std::vector<double> offsets_um;
    std::vector<double> htc_multipliers;
    std::vector<std::string> workloads;
};

struct InputFile {
    std::filesystem::path path;
    std::string hash;
};

/// Parsed and resolved run configuration.
struct RunConfig {
    std::filesystem::path source;
    std::string name;
    std::filesystem::path output_dir;
    MaterialTable materials;
    StackLibrary library;
    PowerMapSet maps;
    StackConfig scenario;
    MeshOptions mesh;
    SolverOptions solver;
    TransientSettings transient;
    CalibrateSettings calibrate;
    MatrixSettings matrix;
    SweepSettings sweep;
    int workers = 1;

    /// Dotted keys that took their default value.
    std::vector<std::string> defaulted;
    /// Every file read, with its digest.
    std::vector<InputFile> inputs;
    /// Self-contained TOML: overrides applied, defaults filled in, materials and
    /// stackups inlined, paths absolute.
    std::string resolved_toml;
    /// Digest of the resolved configuration minus the output directory.
    std::string config_hash;

    StudyContext context() const;
    /// Matrix configuration by label, or the [scenario] config when it carries that label.
    const StackConfig& config(std::string_view label) const;
};

struct LoadOptions {
    std::vector<std::string> overrides; ///< "section.key=value"
    /// Default material table; falls back to the environment variable.
    std::optional<std::filesystem::path> materials_path;
};

/// Reads a run configuration. Unknown keys, dangling material references and missing
/// referenced files raise ValidationError; stackup invariants are left to validation.
RunConfig load_run_config(const std::filesystem::path& path, const LoadOptions& options = {});
RunConfig load_run_config_text(const std::string& toml_text, const std::filesystem::path& base_dir,
                               const std::string& source, const LoadOptions& options = {});

/// Material table file: `[materials.<name>]` sections.
MaterialTable load_material_table(const std::filesystem::path& path);

/// Floorplan file: a `[grid]` table and `[[block]]` entries.
struct Floorplan {
    GridSpec grid;
    std::vector<FloorplanBlock> blocks;
};

Floorplan load_floorplan(const std::filesystem::path& path);

} // namespace thermstack
