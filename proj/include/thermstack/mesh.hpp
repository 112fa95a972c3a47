#pragma once

#include "thermstack/geometry.hpp"
#include "thermstack/scenario.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace thermstack {

using Index = Eigen::Index;

/// Two-half-cell series conductance across a shared face, W/K. Lengths in metres.
double face_conductance(double area_m2, double extent_a_m, double k_a, double extent_b_m, double k_b);

/// Half-cell conduction in series with surface convection, W/K; zero when htc is zero.
double boundary_conductance(double area_m2, double extent_m, double k, double htc);

enum class Section { package, bumps, tier, tim, lid };

std::string_view to_string(Section s);

struct SlabInfo {
    Section section = Section::package;
    int tier = -1;          ///< tier index for Section::tier
    std::size_t layer = 0;  ///< index within the section's stackup
    std::string layer_name;
    double thickness_m = 0.0;
    Rect footprint;         ///< micrometres, package frame
};

struct BoundaryFace {
    enum class Side { top, bottom, west, east, south, north };
    Index cell = 0;
    Side side = Side::top;
    double area_m2 = 0.0;
    double htc = 0.0;
    double ambient_c = 0.0;
    double conductance = 0.0; ///< W/K, half cell plus convection
};

/// Structured finite-volume grid over the package footprint. Cells are indexed
/// (ix, iy, iz) with ix fastest; iz = 0 is the board-side slab.
struct Mesh {
    int nx = 0;
    int ny = 0;
    int nz = 0;
    double dx_m = 0.0;
    double dy_m = 0.0;
    std::vector<SlabInfo> slabs;

    Eigen::VectorXd k_lateral;   ///< W/(m K)
    Eigen::VectorXd k_vertical;  ///< W/(m K)
    Eigen::VectorXd capacitance; ///< J/K
    Eigen::VectorXd power;       ///< W

    std::vector<BoundaryFace> boundary;
    double ambient_c = 25.0; ///< reference temperature of the solve

    /// Named cell sets: "all", "die", "package", "bumps", "tim", "lid",
    /// "tier:<name>", "tier:<name>:<layer>", "source:<name>".
    std::map<std::string, std::vector<Index>, std::less<>> regions;
    std::vector<std::string> tier_names;
    std::vector<int> source_slab; ///< heat-source slab per tier
    std::vector<std::string> diagnostics;

    Index cell_count() const { return static_cast<Index>(nx) * ny * nz; }
    Index index(int ix, int iy, int iz) const { return (static_cast<Index>(iz) * ny + iy) * nx + ix; }
    void coords(Index cell, int& ix, int& iy, int& iz) const;
    double slab_thickness(int iz) const { return slabs[iz].thickness_m; }

    /// Conductance between two face-adjacent cells.
    double conductance(Index a, Index b) const;

    const std::vector<Index>& region(std::string_view label) const;
};

struct MeshOptions {
    int nx = 64;
    int ny = 64;
    int min_slabs = 1;          ///< per layer
    int max_slabs = 4;          ///< per layer before refinement
    double slab_target_um = 60; ///< thick layers split into slabs of about this size
    int z_refine = 1;           ///< multiplies every layer's slab count
};

/// Slab count the policy assigns to a layer of this thickness.
int slabs_for_layer(double thickness_um, const MeshOptions& options);

Mesh discretize(const Scenario& scenario, const MeshOptions& options);

/// Homogeneous box with zero power, for analytic checks. Top/bottom/side faces take
/// the corresponding HTCs of `bc`; the only region is "all".
Mesh box_mesh(int nx, int ny, int nz, double dx_m, double dy_m, double dz_m, const Material& material,
              const BoundaryConditions& bc);

/// Steady operator: interior conductances plus boundary conductances on the diagonal.
Eigen::SparseMatrix<double> assemble_conductance(const Mesh& mesh);

/// Right-hand side for the rise above mesh.ambient_c: power plus boundary sources
/// from faces whose ambient differs from the reference.
Eigen::VectorXd assemble_source(const Mesh& mesh, double power_scale = 1.0);

/// Debug dump: `cell_a,cell_b,conductance_w_per_k`, boundary faces with cell_b = -1.
void write_conductance_csv(const Mesh& mesh, const std::filesystem::path& path);

} // namespace thermstack
