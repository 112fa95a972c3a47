#pragma once

#include "thermstack/geometry.hpp"
#include "thermstack/materials.hpp"
#include "thermstack/powermap.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace thermstack {

/// Convective boundary conditions. HTCs in W/(m^2 K), ambient in degC.
struct BoundaryConditions {
    double htc_top = 0.0;    ///< lid face, lumps heat sink and fan
    double htc_bottom = 0.0; ///< board face
    double htc_side = 0.0;   ///< package side walls; adiabatic by default
    double ambient_c = 25.0;
};

void validate(const BoundaryConditions& bc);

enum class Topology { planar_2d, f2f, f2b };
enum class Partition { none, logic_on_mem, mem_on_logic, cpu_on_cpu };
enum class BondKind { none, f2f_pads, f2b_tsv };

std::string_view to_string(Topology t);
std::string_view to_string(Partition p);
std::string_view to_string(BondKind b);
Topology parse_topology(std::string_view s);
Partition parse_partition(std::string_view s);

struct StackConfig {
    std::string label = "2d";
    Topology topology = Topology::planar_2d;
    Partition partition = Partition::none;
    int cpu_count = 2;
    double cpu_spacing_um = 200.0;
    double margin_um = 1000.0;
    Offset tier_offset;
    double package_width_mm = 10.0;
    double package_height_mm = 10.0;
    std::string workload = "maxpower";
    BoundaryConditions bc{2500.0, 100.0, 0.0, 25.0};
    /// Static cache power in the margin, as a fraction of the cluster's maxpower.
    double margin_power_fraction = 0.05;
    std::string maxpower_workload = "maxpower";
};

/// Throws ValidationError when a StackConfig invariant is violated.
void validate(const StackConfig& config);

/// Power maps of one workload, each in its own CPU-local frame.
struct WorkloadMaps {
    std::optional<PowerTileGrid> cpu;    ///< complete 2D CPU
    std::optional<PowerTileGrid> logic;  ///< 3D logic tier of one CPU
    std::optional<PowerTileGrid> memory; ///< 3D memory tier of one CPU
};

using PowerMapSet = std::map<std::string, WorkloadMaps, std::less<>>;

/// Named layer templates (lateral size assigned at build time) plus the material
/// filling die-level slabs outside the die footprint.
struct StackLibrary {
    std::map<std::string, Stackup, std::less<>> stackups;
    Material fill;

    /// Names build_scenario looks up.
    static constexpr const char* required[] = {"package",      "bumps",        "die_2d", "tier_bottom",
                                               "tier_top_f2f", "tier_top_f2b", "tim",    "lid"};
    const Stackup& get(std::string_view name) const;
};

struct Tier {
    std::string name; ///< "die", "logic", "memory", "cpu_bottom", "cpu_top"
    Stackup stackup;
    std::vector<PowerTileGrid> cpu_grids; ///< placed, package frame
    std::optional<PowerTileGrid> margin_grid;
    /// BEOL below the active silicon (die mounted face-down).
    bool face_down = false;

    double total_power() const;
};

/// Complete simulation case. Lateral coordinates are micrometres in the package
/// frame (origin at the package's lower-left corner); every die-level section is
/// centred on the package.
struct Scenario {
    std::string label;
    Topology topology = Topology::planar_2d;
    Partition partition = Partition::none;
    BondKind bond = BondKind::none;
    Stackup package; ///< package-sized, bottom of the stack
    Stackup bumps;   ///< die-sized, between package and bottom tier
    std::vector<Tier> tiers; ///< bottom to top
    Stackup tim;     ///< die-sized
    Stackup lid;     ///< package-sized, top face carries htc_top
    Material fill;
    BoundaryConditions bc;
    double margin_power = 0.0;
    Rect die_rect;
    Rect package_rect;

    double total_power() const;
};

/// Index of the active silicon layer of a die stackup (substrate or TSV region
/// adjacent to the BEOL). Throws ValidationError when there is none.
std::size_t active_layer_index(const Stackup& die);

/// True when the die's BEOL lies below its active silicon.
bool is_face_down(const Stackup& die);

/// Throws ValidationError/PlacementError on any violated Scenario invariant.
void validate(const Scenario& scenario);

Scenario build_scenario(const StackConfig& config, const StackLibrary& library, const PowerMapSet& maps);

/// Moves the top tier's CPU grids by `offset`; the bottom tier and margin power stay put.
Scenario apply_tier_offset(const Scenario& scenario, Offset offset);

/// Same scenario with a different lid-face HTC.
Scenario with_htc_top(const Scenario& scenario, double htc_top);

} // namespace thermstack
