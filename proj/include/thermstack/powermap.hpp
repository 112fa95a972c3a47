#pragma once

#include "thermstack/geometry.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace thermstack {

/// Equal-sized tiles carrying watts, indexed (ix, iy) from the lower-left corner.
/// Coordinates are micrometres in whatever frame `origin` refers to: the CPU's own
/// frame when ingested, the package frame once placed on a die.
struct PowerTileGrid {
    int nx = 0;
    int ny = 0;
    double pitch_x_um = 0.0;
    double pitch_y_um = 0.0;
    Offset origin;
    Eigen::MatrixXd tile_power; ///< nx x ny, watts
    /// Optional per-layer metal density maps (nx x ny fractions), in file column order.
    std::vector<std::pair<std::string, Eigen::MatrixXd>> metal_density;
    std::string workload;

    Rect extent() const;
    Rect tile_rect(int ix, int iy) const;
    double tile_area_um2() const { return pitch_x_um * pitch_y_um; }
    double total_power() const;
    /// Density map for `layer`, or nullptr.
    const Eigen::MatrixXd* density_for(std::string_view layer) const;
};

/// Throws ValidationError naming the first violated invariant.
void validate(const PowerTileGrid& grid);

enum class BlockKind { logic, memory, slc_margin };

std::string_view to_string(BlockKind kind);
BlockKind parse_block_kind(std::string_view name);

struct FloorplanBlock {
    std::string name;
    Rect rect; ///< micrometres
    double total_power = 0.0;
    BlockKind kind = BlockKind::logic;
};

/// Target lattice for rasterization.
struct GridSpec {
    int nx = 0;
    int ny = 0;
    double pitch_x_um = 0.0;
    double pitch_y_um = 0.0;
    Offset origin;
    std::string workload;
};

PowerTileGrid read_power_map(std::istream& in, const std::string& source = "<stream>");
PowerTileGrid read_power_map(const std::filesystem::path& path);
void write_power_map(std::ostream& out, const PowerTileGrid& grid);
void write_power_map(const std::filesystem::path& path, const PowerTileGrid& grid);

/// Spreads each block's power over the tiles it overlaps, proportionally to overlap area.
PowerTileGrid synthesize_power_map(const std::vector<FloorplanBlock>& blocks, const GridSpec& spec);

/// Same tiles, origin moved by `offset`.
PowerTileGrid place_power_map(const PowerTileGrid& grid, Offset offset);

/// Scales every tile by `factor` (>= 0).
PowerTileGrid scaled(const PowerTileGrid& grid, double factor);

struct PowerDensityStats {
    double max_density = 0.0; ///< W/mm^2
    double avg_density = 0.0; ///< W/mm^2, total power over grid area
    double total_power = 0.0; ///< W
};

PowerDensityStats power_density_stats(const PowerTileGrid& grid);

/// Density of several grids seen through the same footprint (stacked tiers): the
/// grids are summed on a common lattice before taking stats.
PowerDensityStats footprint_density_stats(const std::vector<PowerTileGrid>& grids);

} // namespace thermstack
