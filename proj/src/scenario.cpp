#include "thermstack/scenario.hpp"

#include "thermstack/error.hpp"

#include <cmath>

namespace thermstack {

void validate(const BoundaryConditions& bc)
{
    if (!(bc.htc_top >= 0.0) || !(bc.htc_bottom >= 0.0) || !(bc.htc_side >= 0.0))
        throw ValidationError("boundary conditions: HTCs must be non-negative");
    if (!(bc.htc_top > 0.0 || bc.htc_bottom > 0.0 || bc.htc_side > 0.0))
        throw ValidationError("boundary conditions: at least one HTC must be positive");
    if (!std::isfinite(bc.ambient_c)) throw ValidationError("boundary conditions: ambient must be finite");
}

std::string_view to_string(Topology t)
{
    switch (t) {
    case Topology::planar_2d: return "planar_2d";
    case Topology::f2f: return "f2f";
    case Topology::f2b: return "f2b";
    }
    return "planar_2d";
}

std::string_view to_string(Partition p)
{
    switch (p) {
    case Partition::none: return "none";
    case Partition::logic_on_mem: return "logic_on_mem";
    case Partition::mem_on_logic: return "mem_on_logic";
    case Partition::cpu_on_cpu: return "cpu_on_cpu";
    }
    return "none";
}

std::string_view to_string(BondKind b)
{
    switch (b) {
    case BondKind::none: return "none";
    case BondKind::f2f_pads: return "f2f_pads";
    case BondKind::f2b_tsv: return "f2b_tsv";
    }
    return "none";
}

Topology parse_topology(std::string_view s)
{
    for (auto t : {Topology::planar_2d, Topology::f2f, Topology::f2b})
        if (to_string(t) == s) return t;
    throw ValidationError("unknown topology '" + std::string(s) + "'");
}

Partition parse_partition(std::string_view s)
{
    for (auto p : {Partition::none, Partition::logic_on_mem, Partition::mem_on_logic, Partition::cpu_on_cpu})
        if (to_string(p) == s) return p;
    throw ValidationError("unknown partition '" + std::string(s) + "'");
}

void validate(const StackConfig& c)
{
    if ((c.partition == Partition::none) != (c.topology == Topology::planar_2d))
        throw ValidationError("config '" + c.label + "': partition 'none' goes with topology 'planar_2d' only");
    if (c.cpu_count < 1) throw ValidationError("config '" + c.label + "': cpu_count must be >= 1");
    if (c.partition == Partition::cpu_on_cpu && c.cpu_count % 2 != 0)
        throw ValidationError("config '" + c.label + "': cpu_on_cpu needs an even cpu_count (half per tier)");
    if (!(c.cpu_spacing_um >= 0.0) || !(c.margin_um >= 0.0))
        throw ValidationError("config '" + c.label + "': spacing and margin must be non-negative");
    if (!(c.package_width_mm > 0.0) || !(c.package_height_mm > 0.0))
        throw ValidationError("config '" + c.label + "': package dimensions must be positive");
    if (!(c.margin_power_fraction >= 0.0)) throw ValidationError("config '" + c.label + "': negative margin power");
    validate(c.bc);
}

const Stackup& StackLibrary::get(std::string_view name) const
{
    const auto it = stackups.find(name);
    if (it == stackups.end()) throw ValidationError("stackup library has no entry '" + std::string(name) + "'");
    return it->second;
}

double Tier::total_power() const
{
    double p = 0.0;
    for (const auto& g : cpu_grids) p += g.total_power();
    if (margin_grid) p += margin_grid->total_power();
    return p;
}

double Scenario::total_power() const
{
    double p = 0.0;
    for (const auto& t : tiers) p += t.total_power();
    return p;
}

namespace {

bool is_active_role(LayerRole r) { return r == LayerRole::substrate || r == LayerRole::tsv_region; }

std::optional<std::size_t> beol_index(const Stackup& s)
{
    for (std::size_t i = 0; i < s.layers.size(); ++i)
        if (s.layers[i].role == LayerRole::beol) return i;
    return std::nullopt;
}

Stackup sized(Stackup s, double width_mm, double height_mm)
{
    s.lateral_width_mm = width_mm;
    s.lateral_height_mm = height_mm;
    return s;
}

const PowerTileGrid& need(const std::optional<PowerTileGrid>& g, const std::string& workload, const char* which)
{
    if (!g) throw ValidationError("missing power map: workload '" + workload + "' has no '" + which + "' map");
    return *g;
}

/// Lower-left of `grid` moved to `target`.
PowerTileGrid placed_at(const PowerTileGrid& grid, double x, double y)
{
    return place_power_map(grid, {x - grid.origin.dx, y - grid.origin.dy});
}

/// Uniform static power over the die minus the CPU cluster rectangle.
std::optional<PowerTileGrid> margin_grid(const Rect& die, const Rect& cluster, double power, double margin_um)
{
    if (power <= 0.0) return std::nullopt;
    if (!(margin_um > 0.0)) throw ValidationError("margin power is set but the margin is zero");

    const double target_pitch = margin_um / std::max(1.0, std::ceil(margin_um / 100.0));
    PowerTileGrid g;
    g.nx = std::max(1, static_cast<int>(std::lround(die.width() / target_pitch)));
    g.ny = std::max(1, static_cast<int>(std::lround(die.height() / target_pitch)));
    g.pitch_x_um = die.width() / g.nx;
    g.pitch_y_um = die.height() / g.ny;
    g.origin = {die.x0, die.y0};
    g.workload = "static";
    g.tile_power = Eigen::MatrixXd::Zero(g.nx, g.ny);

    double total_weight = 0.0;
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const Rect t = g.tile_rect(ix, iy);
            const double w = std::max(0.0, t.area() - overlap_area(t, cluster));
            g.tile_power(ix, iy) = w;
            total_weight += w;
        }
    g.tile_power *= power / total_weight;
    return g;
}

} // namespace

std::size_t active_layer_index(const Stackup& die)
{
    const auto b = beol_index(die);
    if (!b) throw ValidationError("die stackup has no beol layer");
    if (*b + 1 < die.layers.size() && is_active_role(die.layers[*b + 1].role)) return *b + 1;
    if (*b > 0 && is_active_role(die.layers[*b - 1].role)) return *b - 1;
    throw ValidationError("die stackup has no substrate or tsv_region layer adjacent to its beol");
}

bool is_face_down(const Stackup& die) { return active_layer_index(die) > *beol_index(die); }

void validate(const Scenario& s)
{
    validate(s.bc);
    require_valid(s.package, "package");
    require_valid(s.bumps, "bumps");
    require_valid(s.tim, "tim");
    require_valid(s.lid, "lid");
    for (auto v : validate_material(s.fill)) throw ValidationError(v.message);
    if (s.tiers.empty() || s.tiers.size() > 2) throw ValidationError("scenario must have one or two tiers");
    for (const auto& t : s.tiers) {
        require_valid(t.stackup, t.name);
        (void)active_layer_index(t.stackup);
        for (const auto& g : t.cpu_grids) {
            validate(g);
            if (!s.die_rect.contains(g.extent()))
                throw PlacementError("placement overflow: a power grid on tier '" + t.name + "' leaves the die");
        }
        if (t.margin_grid) validate(*t.margin_grid);
    }
    if (!s.package_rect.contains(s.die_rect)) throw PlacementError("placement overflow: die larger than package");

    if (s.tiers.size() == 2) {
        const auto& bottom = s.tiers[0].stackup;
        const auto& top = s.tiers[1].stackup;
        if (is_face_down(bottom)) throw ValidationError("3D bottom tier must face up toward the bond");
        if (s.bond == BondKind::f2f_pads && !is_face_down(top))
            throw ValidationError("f2f: top tier must be flipped so the BEOLs face each other");
        if (s.bond == BondKind::f2b_tsv) {
            std::size_t first = 0;
            while (first < top.layers.size() && top.layers[first].role == LayerRole::bond_interface) ++first;
            if (first >= top.layers.size() || !is_active_role(top.layers[first].role))
                throw ValidationError("f2b: top tier's substrate must face the bottom tier's BEOL");
        }
    }
}

Scenario build_scenario(const StackConfig& c, const StackLibrary& lib, const PowerMapSet& maps)
{
    validate(c);
    const auto wl_it = maps.find(c.workload);
    if (wl_it == maps.end()) throw ValidationError("missing power map: no maps for workload '" + c.workload + "'");
    const WorkloadMaps& wl = wl_it->second;

    Scenario s;
    s.label = c.label;
    s.topology = c.topology;
    s.partition = c.partition;
    s.bc = c.bc;
    s.fill = lib.fill;
    s.bond = c.topology == Topology::f2f ? BondKind::f2f_pads
             : c.topology == Topology::f2b ? BondKind::f2b_tsv
                                           : BondKind::none;

    // Per-tier content, bottom first.
    struct Plan {
        std::string name;
        const PowerTileGrid* map;
        int count;
        std::string stackup;
    };
    std::vector<Plan> plan;
    const std::string top_name = c.topology == Topology::f2f ? "tier_top_f2f" : "tier_top_f2b";
    switch (c.partition) {
    case Partition::none:
        plan.push_back({"die", &need(wl.cpu, c.workload, "cpu"), c.cpu_count, "die_2d"});
        break;
    case Partition::logic_on_mem:
        plan.push_back({"memory", &need(wl.memory, c.workload, "memory"), c.cpu_count, "tier_bottom"});
        plan.push_back({"logic", &need(wl.logic, c.workload, "logic"), c.cpu_count, top_name});
        break;
    case Partition::mem_on_logic:
        plan.push_back({"logic", &need(wl.logic, c.workload, "logic"), c.cpu_count, "tier_bottom"});
        plan.push_back({"memory", &need(wl.memory, c.workload, "memory"), c.cpu_count, top_name});
        break;
    case Partition::cpu_on_cpu:
        plan.push_back({"cpu_bottom", &need(wl.cpu, c.workload, "cpu"), c.cpu_count / 2, "tier_bottom"});
        plan.push_back({"cpu_top", &need(wl.cpu, c.workload, "cpu"), c.cpu_count / 2, top_name});
        break;
    }

    // CPU footprint is the largest extent among the tier maps.
    double cpu_w = 0.0, cpu_h = 0.0;
    for (const auto& p : plan) {
        cpu_w = std::max(cpu_w, p.map->extent().width());
        cpu_h = std::max(cpu_h, p.map->extent().height());
    }
    const int per_tier = plan.front().count;
    const double die_w = per_tier * cpu_w + (per_tier - 1) * c.cpu_spacing_um + 2.0 * c.margin_um;
    const double die_h = cpu_h + 2.0 * c.margin_um;
    const double pkg_w = c.package_width_mm * 1000.0;
    const double pkg_h = c.package_height_mm * 1000.0;
    s.package_rect = {0.0, 0.0, pkg_w, pkg_h};
    s.die_rect = {(pkg_w - die_w) / 2.0, (pkg_h - die_h) / 2.0, (pkg_w + die_w) / 2.0, (pkg_h + die_h) / 2.0};
    if (die_w > pkg_w || die_h > pkg_h)
        throw PlacementError("placement overflow: CPUs plus margin (" + std::to_string(die_w / 1000.0) + " x " +
                             std::to_string(die_h / 1000.0) + " mm) exceed the package");

    const Rect cluster{s.die_rect.x0 + c.margin_um, s.die_rect.y0 + c.margin_um, s.die_rect.x1 - c.margin_um,
                       s.die_rect.y1 - c.margin_um};

    // Static cache power: fraction of the cluster's maxpower, independent of workload.
    double per_cpu_max = 0.0;
    if (c.margin_power_fraction > 0.0) {
        const auto mx = maps.find(c.maxpower_workload);
        if (mx == maps.end())
            throw ValidationError("missing power map: margin power needs workload '" + c.maxpower_workload + "'");
        if (mx->second.cpu) per_cpu_max = mx->second.cpu->total_power();
        else per_cpu_max = need(mx->second.logic, c.maxpower_workload, "logic").total_power() +
                           need(mx->second.memory, c.maxpower_workload, "memory").total_power();
    }
    s.margin_power = c.margin_power_fraction * c.cpu_count * per_cpu_max;
    const double die_w_mm = die_w / 1000.0, die_h_mm = die_h / 1000.0;

    for (const auto& p : plan) {
        Tier t;
        t.name = p.name;
        t.stackup = sized(lib.get(p.stackup), die_w_mm, die_h_mm);
        t.face_down = is_face_down(t.stackup);
        for (int i = 0; i < p.count; ++i)
            t.cpu_grids.push_back(placed_at(*p.map, cluster.x0 + i * (cpu_w + c.cpu_spacing_um), cluster.y0));
        if (auto m = margin_grid(s.die_rect, cluster, s.margin_power / plan.size(), c.margin_um)) t.margin_grid = *m;
        s.tiers.push_back(std::move(t));
    }

    s.package = sized(lib.get("package"), c.package_width_mm, c.package_height_mm);
    s.bumps = sized(lib.get("bumps"), die_w_mm, die_h_mm);
    s.tim = sized(lib.get("tim"), die_w_mm, die_h_mm);
    s.lid = sized(lib.get("lid"), c.package_width_mm, c.package_height_mm);

    validate(s);
    if (c.tier_offset.dx != 0.0 || c.tier_offset.dy != 0.0) return apply_tier_offset(s, c.tier_offset);
    return s;
}

Scenario apply_tier_offset(const Scenario& scenario, Offset offset)
{
    if (offset.dx == 0.0 && offset.dy == 0.0) return scenario;
    if (scenario.tiers.size() < 2) throw ValidationError("tier offset needs a two-tier scenario");
    Scenario out = scenario;
    for (auto& g : out.tiers.back().cpu_grids) {
        g = place_power_map(g, offset);
        if (!out.die_rect.contains(g.extent()))
            throw PlacementError("placement overflow: offset (" + std::to_string(offset.dx) + ", " +
                                 std::to_string(offset.dy) + ") um moves a top-tier grid off the die");
    }
    return out;
}

Scenario with_htc_top(const Scenario& scenario, double htc_top)
{
    Scenario out = scenario;
    out.bc.htc_top = htc_top;
    validate(out.bc);
    return out;
}

} // namespace thermstack
