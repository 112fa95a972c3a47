#include "thermstack/mesh.hpp"

#include "thermstack/error.hpp"
#include "thermstack/textio.hpp"

#include <cmath>
#include <sstream>

namespace thermstack {

double face_conductance(double area_m2, double extent_a_m, double k_a, double extent_b_m, double k_b)
{
    return area_m2 / (extent_a_m / (2.0 * k_a) + extent_b_m / (2.0 * k_b));
}

double boundary_conductance(double area_m2, double extent_m, double k, double htc)
{
    if (htc <= 0.0) return 0.0;
    if (std::isinf(htc)) return 2.0 * k * area_m2 / extent_m;
    return area_m2 / (extent_m / (2.0 * k) + 1.0 / htc);
}

std::string_view to_string(Section s)
{
    switch (s) {
    case Section::package: return "package";
    case Section::bumps: return "bumps";
    case Section::tier: return "tier";
    case Section::tim: return "tim";
    case Section::lid: return "lid";
    }
    return "package";
}

void Mesh::coords(Index cell, int& ix, int& iy, int& iz) const
{
    ix = static_cast<int>(cell % nx);
    iy = static_cast<int>((cell / nx) % ny);
    iz = static_cast<int>(cell / (static_cast<Index>(nx) * ny));
}

double Mesh::conductance(Index a, Index b) const
{
    if (a > b) std::swap(a, b);
    const Index d = b - a;
    int ix, iy, iz, jx, jy, jz;
    coords(a, ix, iy, iz);
    coords(b, jx, jy, jz);
    if (d == 1 && jy == iy && jz == iz)
        return face_conductance(dy_m * slabs[iz].thickness_m, dx_m, k_lateral[a], dx_m, k_lateral[b]);
    if (d == nx && jz == iz)
        return face_conductance(dx_m * slabs[iz].thickness_m, dy_m, k_lateral[a], dy_m, k_lateral[b]);
    if (d == static_cast<Index>(nx) * ny)
        return face_conductance(dx_m * dy_m, slabs[iz].thickness_m, k_vertical[a], slabs[jz].thickness_m,
                                k_vertical[b]);
    throw ValidationError("cells " + std::to_string(a) + " and " + std::to_string(b) + " do not share a face");
}

const std::vector<Index>& Mesh::region(std::string_view label) const
{
    const auto it = regions.find(label);
    if (it == regions.end()) throw ValidationError("unknown region '" + std::string(label) + "'");
    return it->second;
}

int slabs_for_layer(double thickness_um, const MeshOptions& o)
{
    const int base = static_cast<int>(std::ceil(thickness_um / o.slab_target_um - 1e-9));
    return std::clamp(base, std::max(1, o.min_slabs), std::max(o.max_slabs, o.min_slabs)) * std::max(1, o.z_refine);
}

namespace {

Rect centred(const Stackup& s, const Rect& package)
{
    const double w = s.lateral_width_mm * 1000.0, h = s.lateral_height_mm * 1000.0;
    const double cx = (package.x0 + package.x1) / 2.0, cy = (package.y0 + package.y1) / 2.0;
    return {cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
}

struct SectionRef {
    Section section;
    int tier;
    const Stackup* stackup;
};

} // namespace

Mesh discretize(const Scenario& scenario, const MeshOptions& o)
{
    if (o.nx < 2 || o.ny < 2) throw ValidationError("discretize: lateral resolution must be at least 2 x 2");
    validate(scenario);

    Mesh m;
    m.nx = o.nx;
    m.ny = o.ny;
    const Rect pkg = scenario.package_rect;
    const double dx_um = pkg.width() / o.nx, dy_um = pkg.height() / o.ny;
    m.dx_m = dx_um * 1e-6;
    m.dy_m = dy_um * 1e-6;
    m.ambient_c = scenario.bc.ambient_c;

    std::vector<SectionRef> sections{{Section::package, -1, &scenario.package}, {Section::bumps, -1, &scenario.bumps}};
    for (std::size_t t = 0; t < scenario.tiers.size(); ++t)
        sections.push_back({Section::tier, static_cast<int>(t), &scenario.tiers[t].stackup});
    sections.push_back({Section::tim, -1, &scenario.tim});
    sections.push_back({Section::lid, -1, &scenario.lid});

    m.source_slab.assign(scenario.tiers.size(), -1);
    for (const auto& t : scenario.tiers) m.tier_names.push_back(t.name);

    // Slab layout.
    for (const auto& sec : sections) {
        const Rect fp = centred(*sec.stackup, pkg);
        if (!pkg.contains(fp)) throw PlacementError("placement overflow: section larger than the package");
        std::size_t active = 0;
        bool face_down = false;
        if (sec.section == Section::tier) {
            active = active_layer_index(*sec.stackup);
            face_down = is_face_down(*sec.stackup);
        }
        for (std::size_t li = 0; li < sec.stackup->layers.size(); ++li) {
            const auto& layer = sec.stackup->layers[li];
            const int n = slabs_for_layer(layer.thickness_um, o);
            for (int k = 0; k < n; ++k) {
                if (sec.section == Section::tier && li == active && (face_down ? k == 0 : k == n - 1))
                    m.source_slab[sec.tier] = static_cast<int>(m.slabs.size());
                m.slabs.push_back({sec.section, sec.tier, li, layer.name, layer.thickness_um * 1e-6 / n, fp});
            }
        }
    }
    m.nz = static_cast<int>(m.slabs.size());
    const Index n_cells = m.cell_count();
    const Index per_slab = static_cast<Index>(m.nx) * m.ny;
    m.k_lateral.resize(n_cells);
    m.k_vertical.resize(n_cells);
    m.capacitance.resize(n_cells);
    m.power = Eigen::VectorXd::Zero(n_cells);

    const auto centre_inside = [&](int ix, int iy, const Rect& fp) {
        const double cx = pkg.x0 + (ix + 0.5) * dx_um, cy = pkg.y0 + (iy + 0.5) * dy_um;
        return cx >= fp.x0 && cx <= fp.x1 && cy >= fp.y0 && cy <= fp.y1;
    };

    const Conductivity fill_k{scenario.fill.k_lateral, scenario.fill.k_vertical};
    std::vector<Index>& all = m.regions["all"];
    all.reserve(n_cells);
    for (Index c = 0; c < n_cells; ++c) all.push_back(c);

    for (int iz = 0; iz < m.nz; ++iz) {
        const SlabInfo& slab = m.slabs[iz];
        const SectionRef* sec = nullptr;
        for (const auto& s : sections)
            if (s.section == slab.section && s.tier == slab.tier) sec = &s;
        const Layer& layer = sec->stackup->layers[slab.layer];
        const Conductivity layer_k = layer.conductivity();
        const double layer_c = layer.volumetric_heat_capacity();
        const double volume = m.dx_m * m.dy_m * slab.thickness_m;

        // Optional metal-density maps from the tier's power grids override the layer scalar.
        Eigen::ArrayXd dens_area, covered_area;
        if (slab.section == Section::tier) {
            const Tier& tier = scenario.tiers[slab.tier];
            for (const auto& g : tier.cpu_grids) {
                const Eigen::MatrixXd* map = g.density_for(layer.name);
                if (!map) continue;
                if (!layer.fill) {
                    m.diagnostics.push_back("density map for layer '" + layer.name +
                                            "' ignored: layer has no fill material");
                    continue;
                }
                if (dens_area.size() == 0) {
                    dens_area = Eigen::ArrayXd::Zero(per_slab);
                    covered_area = Eigen::ArrayXd::Zero(per_slab);
                }
                const double tile_area = g.tile_area_um2();
                for (int ty = 0; ty < g.ny; ++ty)
                    for (int tx = 0; tx < g.nx; ++tx)
                        for_each_overlap(g.tile_rect(tx, ty), {pkg.x0, pkg.y0}, dx_um, dy_um, m.nx, m.ny,
                                         [&](int ix, int iy, double share) {
                                             const Index p = static_cast<Index>(iy) * m.nx + ix;
                                             dens_area[p] += share * tile_area * (*map)(tx, ty);
                                             covered_area[p] += share * tile_area;
                                         });
            }
        }

        std::string tier_region, layer_region, source_region;
        if (slab.section == Section::tier) {
            const auto& name = scenario.tiers[slab.tier].name;
            tier_region = "tier:" + name;
            layer_region = tier_region + ":" + slab.layer_name;
            if (m.source_slab[slab.tier] == iz) source_region = "source:" + name;
        }
        auto& section_cells = slab.section == Section::tier ? m.regions[tier_region]
                                                             : m.regions[std::string(to_string(slab.section))];

        for (int iy = 0; iy < m.ny; ++iy)
            for (int ix = 0; ix < m.nx; ++ix) {
                const Index c = m.index(ix, iy, iz);
                const bool inside = centre_inside(ix, iy, slab.footprint);
                Conductivity k = fill_k;
                double cv = scenario.fill.volumetric_heat_capacity;
                if (inside) {
                    k = layer_k;
                    cv = layer_c;
                    const Index p = static_cast<Index>(iy) * m.nx + ix;
                    if (dens_area.size() && covered_area[p] > 0.0) {
                        const double cell_area = dx_um * dy_um;
                        const double cov = std::min(covered_area[p], cell_area);
                        const double rho = (dens_area[p] + (cell_area - cov) * layer.metal_density.value_or(0.0)) /
                                           cell_area;
                        Layer local = layer;
                        local.metal_density = std::clamp(rho, 0.0, 1.0);
                        k = local.conductivity();
                        cv = local.volumetric_heat_capacity();
                    }
                }
                m.k_lateral[c] = k.lateral;
                m.k_vertical[c] = k.vertical;
                m.capacitance[c] = cv * volume;

                if (slab.section != Section::tier) {
                    section_cells.push_back(c);
                } else if (inside) {
                    section_cells.push_back(c);
                    m.regions["die"].push_back(c);
                    m.regions[layer_region].push_back(c);
                    if (!source_region.empty()) m.regions[source_region].push_back(c);
                }
            }
    }

    // Power injection at each tier's transistor slab.
    for (std::size_t t = 0; t < scenario.tiers.size(); ++t) {
        const Tier& tier = scenario.tiers[t];
        const int iz = m.source_slab[t];
        std::vector<const PowerTileGrid*> grids;
        for (const auto& g : tier.cpu_grids) grids.push_back(&g);
        if (tier.margin_grid) grids.push_back(&*tier.margin_grid);
        for (const PowerTileGrid* g : grids) {
            const Rect e = g->extent();
            if (e.width() < dx_um || e.height() < dy_um) {
                std::ostringstream os;
                os << "warning: a power grid on tier '" << tier.name << "' is smaller than one mesh cell";
                m.diagnostics.push_back(os.str());
            }
            for (int ty = 0; ty < g->ny; ++ty)
                for (int tx = 0; tx < g->nx; ++tx) {
                    const double p = g->tile_power(tx, ty);
                    if (p == 0.0) continue;
                    for_each_overlap(g->tile_rect(tx, ty), {pkg.x0, pkg.y0}, dx_um, dy_um, m.nx, m.ny,
                                     [&](int ix, int iy, double share) { m.power[m.index(ix, iy, iz)] += share * p; });
                }
        }
    }
    const double expected = scenario.total_power();
    const double injected = m.power.sum();
    if (std::abs(injected - expected) > 1e-9 * std::max(expected, 1e-300) && injected != expected)
        throw ValidationError("discretize: injected power " + textio::format_double(injected) +
                              " W does not match scenario power " + textio::format_double(expected) + " W");

    // Convective faces.
    const auto& bc = scenario.bc;
    const auto add_face = [&](Index c, BoundaryFace::Side side, double area, double extent, double k, double htc) {
        const double g = boundary_conductance(area, extent, k, htc);
        if (g > 0.0) m.boundary.push_back({c, side, area, htc, bc.ambient_c, g});
    };
    for (int iy = 0; iy < m.ny; ++iy)
        for (int ix = 0; ix < m.nx; ++ix) {
            const Index top = m.index(ix, iy, m.nz - 1), bottom = m.index(ix, iy, 0);
            add_face(bottom, BoundaryFace::Side::bottom, m.dx_m * m.dy_m, m.slabs.front().thickness_m,
                     m.k_vertical[bottom], bc.htc_bottom);
            add_face(top, BoundaryFace::Side::top, m.dx_m * m.dy_m, m.slabs.back().thickness_m, m.k_vertical[top],
                     bc.htc_top);
        }
    if (bc.htc_side > 0.0)
        for (int iz = 0; iz < m.nz; ++iz) {
            const double dz = m.slabs[iz].thickness_m;
            for (int iy = 0; iy < m.ny; ++iy) {
                const Index w = m.index(0, iy, iz), e = m.index(m.nx - 1, iy, iz);
                add_face(w, BoundaryFace::Side::west, m.dy_m * dz, m.dx_m, m.k_lateral[w], bc.htc_side);
                add_face(e, BoundaryFace::Side::east, m.dy_m * dz, m.dx_m, m.k_lateral[e], bc.htc_side);
            }
            for (int ix = 0; ix < m.nx; ++ix) {
                const Index s = m.index(ix, 0, iz), n = m.index(ix, m.ny - 1, iz);
                add_face(s, BoundaryFace::Side::south, m.dx_m * dz, m.dy_m, m.k_lateral[s], bc.htc_side);
                add_face(n, BoundaryFace::Side::north, m.dx_m * dz, m.dy_m, m.k_lateral[n], bc.htc_side);
            }
        }
    return m;
}

Mesh box_mesh(int nx, int ny, int nz, double dx_m, double dy_m, double dz_m, const Material& material,
              const BoundaryConditions& bc)
{
    if (nx < 1 || ny < 1 || nz < 1) throw ValidationError("box_mesh: cell counts must be positive");
    Mesh m;
    m.nx = nx;
    m.ny = ny;
    m.nz = nz;
    m.dx_m = dx_m;
    m.dy_m = dy_m;
    m.ambient_c = bc.ambient_c;
    const Rect fp{0.0, 0.0, nx * dx_m * 1e6, ny * dy_m * 1e6};
    for (int iz = 0; iz < nz; ++iz) m.slabs.push_back({Section::package, -1, 0, material.name, dz_m, fp});
    const Index n = m.cell_count();
    m.k_lateral = Eigen::VectorXd::Constant(n, material.k_lateral);
    m.k_vertical = Eigen::VectorXd::Constant(n, material.k_vertical);
    m.capacitance = Eigen::VectorXd::Constant(n, material.volumetric_heat_capacity * dx_m * dy_m * dz_m);
    m.power = Eigen::VectorXd::Zero(n);
    auto& all = m.regions["all"];
    for (Index c = 0; c < n; ++c) all.push_back(c);

    const auto add_face = [&](Index c, BoundaryFace::Side side, double area, double extent, double k, double htc) {
        const double g = boundary_conductance(area, extent, k, htc);
        if (g > 0.0) m.boundary.push_back({c, side, area, htc, bc.ambient_c, g});
    };
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            add_face(m.index(ix, iy, 0), BoundaryFace::Side::bottom, dx_m * dy_m, dz_m, material.k_vertical,
                     bc.htc_bottom);
            add_face(m.index(ix, iy, nz - 1), BoundaryFace::Side::top, dx_m * dy_m, dz_m, material.k_vertical,
                     bc.htc_top);
        }
    if (bc.htc_side > 0.0)
        for (int iz = 0; iz < nz; ++iz) {
            for (int iy = 0; iy < ny; ++iy) {
                add_face(m.index(0, iy, iz), BoundaryFace::Side::west, dy_m * dz_m, dx_m, material.k_lateral,
                         bc.htc_side);
                add_face(m.index(nx - 1, iy, iz), BoundaryFace::Side::east, dy_m * dz_m, dx_m, material.k_lateral,
                         bc.htc_side);
            }
            for (int ix = 0; ix < nx; ++ix) {
                add_face(m.index(ix, 0, iz), BoundaryFace::Side::south, dx_m * dz_m, dy_m, material.k_lateral,
                         bc.htc_side);
                add_face(m.index(ix, ny - 1, iz), BoundaryFace::Side::north, dx_m * dz_m, dy_m, material.k_lateral,
                         bc.htc_side);
            }
        }
    return m;
}

namespace {

template <class Emit>
void for_each_interior_pair(const Mesh& m, Emit&& emit)
{
    const Index stride_z = static_cast<Index>(m.nx) * m.ny;
    for (int iz = 0; iz < m.nz; ++iz) {
        const double dz = m.slabs[iz].thickness_m;
        for (int iy = 0; iy < m.ny; ++iy)
            for (int ix = 0; ix < m.nx; ++ix) {
                const Index c = m.index(ix, iy, iz);
                if (ix + 1 < m.nx)
                    emit(c, c + 1, face_conductance(m.dy_m * dz, m.dx_m, m.k_lateral[c], m.dx_m, m.k_lateral[c + 1]));
                if (iy + 1 < m.ny)
                    emit(c, c + m.nx,
                         face_conductance(m.dx_m * dz, m.dy_m, m.k_lateral[c], m.dy_m, m.k_lateral[c + m.nx]));
                if (iz + 1 < m.nz)
                    emit(c, c + stride_z,
                         face_conductance(m.dx_m * m.dy_m, dz, m.k_vertical[c], m.slabs[iz + 1].thickness_m,
                                          m.k_vertical[c + stride_z]));
            }
    }
}

} // namespace

Eigen::SparseMatrix<double> assemble_conductance(const Mesh& m)
{
    const Index n = m.cell_count();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n) * 7);
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    for_each_interior_pair(m, [&](Index a, Index b, double g) {
        trips.emplace_back(a, b, -g);
        trips.emplace_back(b, a, -g);
        diag[a] += g;
        diag[b] += g;
    });
    for (const auto& f : m.boundary) diag[f.cell] += f.conductance;
    for (Index i = 0; i < n; ++i) trips.emplace_back(i, i, diag[i]);
    Eigen::SparseMatrix<double> G(n, n);
    G.setFromTriplets(trips.begin(), trips.end());
    return G;
}

Eigen::VectorXd assemble_source(const Mesh& m, double power_scale)
{
    Eigen::VectorXd b = m.power * power_scale;
    for (const auto& f : m.boundary)
        if (f.ambient_c != m.ambient_c) b[f.cell] += f.conductance * (f.ambient_c - m.ambient_c);
    return b;
}

void write_conductance_csv(const Mesh& m, const std::filesystem::path& path)
{
    std::ostringstream os;
    os << "cell_a,cell_b,conductance_w_per_k\n";
    for_each_interior_pair(m, [&](Index a, Index b, double g) {
        os << a << ',' << b << ',' << textio::format_double(g) << '\n';
    });
    for (const auto& f : m.boundary) os << f.cell << ",-1," << textio::format_double(f.conductance) << '\n';
    textio::write_file(path, os.str());
}

} // namespace thermstack
