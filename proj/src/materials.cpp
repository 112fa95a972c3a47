#include "thermstack/materials.hpp"

#include "thermstack/error.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

namespace thermstack {

namespace {

constexpr std::array<std::pair<LayerRole, std::string_view>, 10> role_names{{
    {LayerRole::substrate, "substrate"},
    {LayerRole::beol, "beol"},
    {LayerRole::bond_interface, "bond_interface"},
    {LayerRole::tsv_region, "tsv_region"},
    {LayerRole::tim, "tim"},
    {LayerRole::lid, "lid"},
    {LayerRole::underfill, "underfill"},
    {LayerRole::bump_array, "bump_array"},
    {LayerRole::package_buildup, "package_buildup"},
    {LayerRole::board, "board"},
}};

bool in_unit_interval(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

void check_mixing_inputs(double fraction, double k_a, double k_b, const char* op)
{
    if (!in_unit_interval(fraction))
        throw DomainError(std::string(op) + ": fraction must lie in [0, 1]");
    if (!(k_a > 0.0) || !(k_b > 0.0) || !std::isfinite(k_a) || !std::isfinite(k_b))
        throw DomainError(std::string(op) + ": conductivities must be positive and finite");
}

double parallel(double f, double k_a, double k_b) { return f * k_a + (1.0 - f) * k_b; }
double series(double f, double k_a, double k_b) { return 1.0 / (f / k_a + (1.0 - f) / k_b); }

// Via-like roles conduct along the columns; wiring-like roles in-plane.
bool vertical_fill(LayerRole role)
{
    return role == LayerRole::tsv_region || role == LayerRole::bump_array || role == LayerRole::bond_interface;
}

} // namespace

std::string_view to_string(LayerRole role)
{
    for (const auto& [r, name] : role_names)
        if (r == role) return name;
    return "unknown";
}

LayerRole parse_layer_role(std::string_view name)
{
    for (const auto& [r, n] : role_names)
        if (n == name) return r;
    throw ValidationError("unknown layer role '" + std::string(name) + "'");
}

Conductivity effective_composite_conductivity(double metal_density, double k_fill, double k_base)
{
    check_mixing_inputs(metal_density, k_fill, k_base, "effective_composite_conductivity");
    return {parallel(metal_density, k_fill, k_base), series(metal_density, k_fill, k_base)};
}

Conductivity effective_tsv_conductivity(double area_fraction, double k_via, double k_silicon)
{
    check_mixing_inputs(area_fraction, k_via, k_silicon, "effective_tsv_conductivity");
    return {series(area_fraction, k_via, k_silicon), parallel(area_fraction, k_via, k_silicon)};
}

Conductivity Layer::conductivity() const
{
    if (!metal_density || !fill) return {base.k_lateral, base.k_vertical};
    const double rho = *metal_density;
    if (vertical_fill(role)) {
        return {effective_tsv_conductivity(rho, fill->k_lateral, base.k_lateral).lateral,
                effective_tsv_conductivity(rho, fill->k_vertical, base.k_vertical).vertical};
    }
    return {effective_composite_conductivity(rho, fill->k_lateral, base.k_lateral).lateral,
            effective_composite_conductivity(rho, fill->k_vertical, base.k_vertical).vertical};
}

double Layer::volumetric_heat_capacity() const
{
    if (!metal_density || !fill) return base.volumetric_heat_capacity;
    return parallel(*metal_density, fill->volumetric_heat_capacity, base.volumetric_heat_capacity);
}

double Stackup::total_thickness_um() const
{
    return std::accumulate(layers.begin(), layers.end(), 0.0,
                            [](double acc, const Layer& l) { return acc + l.thickness_um; });
}

std::optional<std::size_t> Stackup::find(std::string_view layer_name) const
{
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].name == layer_name) return i;
    return std::nullopt;
}

std::string format_report(const ValidationReport& report)
{
    std::ostringstream os;
    for (const auto& v : report) {
        if (!v.layer.empty()) os << "layer '" << v.layer << "': ";
        os << v.message << '\n';
    }
    return os.str();
}

ValidationReport validate_material(const Material& m)
{
    ValidationReport r;
    const auto bad = [](double x) { return !(x > 0.0) || !std::isfinite(x); };
    if (bad(m.k_lateral)) r.push_back({"", "material '" + m.name + "': non-positive k_lateral"});
    if (bad(m.k_vertical)) r.push_back({"", "material '" + m.name + "': non-positive k_vertical"});
    if (bad(m.volumetric_heat_capacity))
        r.push_back({"", "material '" + m.name + "': non-positive volumetric_heat_capacity"});
    return r;
}

ValidationReport validate_stackup(const Stackup& stackup)
{
    ValidationReport r;
    if (stackup.layers.empty()) r.push_back({"", "stackup has no layers"});
    if (!(stackup.lateral_width_mm > 0.0) || !(stackup.lateral_height_mm > 0.0))
        r.push_back({"", "non-positive lateral dimensions"});

    std::set<std::string, std::less<>> seen;
    for (const auto& layer : stackup.layers) {
        const auto add = [&](std::string msg) { r.push_back({layer.name, std::move(msg)}); };
        if (!seen.insert(layer.name).second) add("duplicate layer name");
        if (!(layer.thickness_um > 0.0) || !std::isfinite(layer.thickness_um)) add("non-positive thickness");
        for (auto v : validate_material(layer.base)) add(v.message);
        if (layer.metal_density && !layer.fill) add("metal_density given without fill_material (missing fill material)");
        if (layer.fill && !layer.metal_density) add("fill_material given without metal_density");
        if (layer.metal_density && !in_unit_interval(*layer.metal_density)) add("metal_density outside [0, 1]");
        if (layer.fill)
            for (auto v : validate_material(*layer.fill)) add(v.message);
    }
    return r;
}

void require_valid(const Stackup& stackup, std::string_view what)
{
    const auto report = validate_stackup(stackup);
    if (!report.empty()) throw ValidationError("invalid stackup '" + std::string(what) + "':\n" + format_report(report));
}

} // namespace thermstack
