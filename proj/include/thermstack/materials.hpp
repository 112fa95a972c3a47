#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace thermstack {

/// Bulk thermal properties. Conductivities in W/(m K), heat capacity in J/(m^3 K).
struct Material {
    std::string name;
    double k_lateral = 0.0;
    double k_vertical = 0.0;
    double volumetric_heat_capacity = 0.0;

    static Material isotropic(std::string name, double k, double volumetric_heat_capacity)
    {
        return {std::move(name), k, k, volumetric_heat_capacity};
    }
    bool is_isotropic() const { return k_lateral == k_vertical; }

    friend bool operator==(const Material&, const Material&) = default;
};

using MaterialTable = std::map<std::string, Material, std::less<>>;

enum class LayerRole {
    substrate,
    beol,
    bond_interface,
    tsv_region,
    tim,
    lid,
    underfill,
    bump_array,
    package_buildup,
    board,
};

std::string_view to_string(LayerRole role);
/// Throws ValidationError for unknown names.
LayerRole parse_layer_role(std::string_view name);

/// Directional conductivity pair, W/(m K).
struct Conductivity {
    double lateral = 0.0;
    double vertical = 0.0;
};

/// Homogenized metal/dielectric layer with the metal running laterally (BEOL wiring,
/// package build-up planes): parallel mixing in-plane, series mixing through-plane.
Conductivity effective_composite_conductivity(double metal_density, double k_fill, double k_base);

/// Homogenized via array (TSVs, bumps, bond pads): columns run vertically, so the
/// vertical direction mixes in parallel and the lateral one in series.
Conductivity effective_tsv_conductivity(double area_fraction, double k_via, double k_silicon);

struct Layer {
    std::string name;
    double thickness_um = 0.0;
    Material base;
    LayerRole role = LayerRole::substrate;
    std::optional<double> metal_density;
    std::optional<Material> fill;

    /// Effective conductivity after applying the role's mixing rule to the fill.
    Conductivity conductivity() const;
    /// Volume-averaged heat capacity of base and fill.
    double volumetric_heat_capacity() const;
};

/// Bottom-to-top ordered layers over a rectangular footprint (mm).
struct Stackup {
    std::vector<Layer> layers;
    double lateral_width_mm = 0.0;
    double lateral_height_mm = 0.0;

    double total_thickness_um() const;
    /// Index of the named layer, or nullopt.
    std::optional<std::size_t> find(std::string_view layer_name) const;
};

struct Violation {
    std::string layer; ///< empty for stackup-level problems
    std::string message;
};

using ValidationReport = std::vector<Violation>;

std::string format_report(const ValidationReport& report);

ValidationReport validate_material(const Material& m);

/// Empty iff every layer and stackup invariant holds.
ValidationReport validate_stackup(const Stackup& stackup);

/// Rejects via a ValidationError listing every violation.
void require_valid(const Stackup& stackup, std::string_view what);

} // namespace thermstack
