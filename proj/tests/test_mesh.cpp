#include "support.hpp"

#include "thermstack/error.hpp"
#include "thermstack/mesh.hpp"
#include "thermstack/textio.hpp"

#include <doctest.h>

#include <fstream>

using namespace thermstack;
using doctest::Approx;

namespace {

Scenario bundled(Topology t, Partition p, const std::string& workload = "maxpower")
{
    StackConfig c;
    c.topology = t;
    c.partition = p;
    c.workload = workload;
    return build_scenario(c, testing::study().library, testing::study().maps);
}

/// Scales every power source of a scenario so it dissipates `target` watts.
Scenario with_total_power(Scenario s, double target)
{
    const double f = target / s.total_power();
    for (auto& t : s.tiers) {
        for (auto& g : t.cpu_grids) g = scaled(g, f);
        if (t.margin_grid) t.margin_grid = scaled(*t.margin_grid, f);
    }
    s.margin_power *= f;
    return s;
}

MeshOptions lateral(int nx, int ny)
{
    MeshOptions o;
    o.nx = nx;
    o.ny = ny;
    return o;
}

} // namespace

TEST_SUITE("mesh")
{
    TEST_CASE("face conductance of two identical cubes")
    {
        CHECK(face_conductance(1e-6, 1e-3, 100, 1e-3, 100) == Approx(0.1).epsilon(1e-12));
    }

    TEST_CASE("face conductance limits and symmetry")
    {
        const double a = 2e-6, da = 3e-4, db = 7e-4, kb = 35;
        CHECK(face_conductance(a, da, 1e12, db, kb) == Approx(a * 2 * kb / db).epsilon(1e-9));
        std::mt19937_64 rng(31);
        std::uniform_real_distribution<double> u(0.1, 10.0);
        for (int i = 0; i < 200; ++i) {
            const double A = u(rng) * 1e-8, d1 = u(rng) * 1e-5, d2 = u(rng) * 1e-5, k1 = u(rng) * 40, k2 = u(rng) * 40;
            CHECK(face_conductance(A, d1, k1, d2, k2) == face_conductance(A, d2, k2, d1, k1));
        }
    }

    TEST_CASE("boundary conductance")
    {
        CHECK(boundary_conductance(1e-4, 1e-3, 100, 1000) == Approx(1e-4 / (0.0005 / 100 + 0.001)).epsilon(1e-12));
        CHECK(boundary_conductance(1e-4, 1e-3, 100, 1000) == Approx(0.09950).epsilon(1e-4));
        CHECK(boundary_conductance(1e-4, 1e-3, 100, 0.0) == 0.0);
        CHECK(boundary_conductance(1e-4, 1e-3, 100, 1e15) == Approx(2 * 100 * 1e-4 / 1e-3).epsilon(1e-9));
    }

    TEST_CASE("uniform slab cells share one capacitance")
    {
        const auto mat = Material::isotropic("si", 120, 1.63e6);
        const auto m = box_mesh(2, 2, 1, 1e-3, 2e-3, 5e-4, mat, {1000, 0, 0, 25});
        REQUIRE(m.cell_count() == 4);
        for (Index i = 0; i < 4; ++i) CHECK(m.capacitance[i] == Approx(1.63e6 * 1e-3 * 2e-3 * 5e-4));
        CHECK(m.boundary.size() == 4);
        CHECK(m.region("all").size() == 4);
        CHECK(m.conductance(0, 1) == Approx(face_conductance(2e-3 * 5e-4, 1e-3, 120, 1e-3, 120)));
        CHECK_THROWS_AS((void)m.conductance(0, 3), ValidationError);
        CHECK_THROWS_AS((void)m.region("nope"), ValidationError);
    }

    TEST_CASE("discretization conserves the scenario power")
    {
        const auto s = with_total_power(bundled(Topology::f2f, Partition::logic_on_mem), 7.3);
        CHECK(s.total_power() == Approx(7.3).epsilon(1e-12));
        for (int n : {4, 13, 32}) {
            const auto m = discretize(s, lateral(n, n));
            CHECK(std::abs(m.power.sum() - 7.3) <= 1e-9 * 7.3);
            CHECK((m.capacitance.array() > 0.0).all());
            CHECK((m.k_lateral.array() > 0.0).all());
            CHECK((m.k_vertical.array() > 0.0).all());
        }
    }

    TEST_CASE("doubling lateral resolution splits each cell's power among its children")
    {
        const auto s = bundled(Topology::planar_2d, Partition::none);
        const auto c = discretize(s, lateral(16, 12));
        const auto f = discretize(s, lateral(32, 24));
        REQUIRE(c.nz == f.nz);
        CHECK(f.power.sum() == Approx(c.power.sum()).epsilon(1e-12));
        double worst = 0.0;
        for (int iz = 0; iz < c.nz; ++iz)
            for (int iy = 0; iy < c.ny; ++iy)
                for (int ix = 0; ix < c.nx; ++ix) {
                    double kids = 0.0;
                    for (int j = 0; j < 2; ++j)
                        for (int i = 0; i < 2; ++i) kids += f.power[f.index(2 * ix + i, 2 * iy + j, iz)];
                    worst = std::max(worst, std::abs(kids - c.power[c.index(ix, iy, iz)]));
                }
        CHECK(worst <= 1e-12 * c.power.sum());
        // Uniform margin power quarters per cell.
        const int iz = c.source_slab[0];
        const Index cc = c.index(0, c.ny / 2, iz);
        if (c.power[cc] > 0.0) CHECK(f.power[f.index(0, f.ny / 2, iz)] == Approx(c.power[cc] / 4));
    }

    TEST_CASE("assembled operator is a symmetric M-matrix")
    {
        for (auto [t, p] : {std::pair{Topology::planar_2d, Partition::none},
                            std::pair{Topology::f2b, Partition::cpu_on_cpu}}) {
            const auto m = discretize(bundled(t, p), lateral(10, 9));
            const Eigen::SparseMatrix<double> G = assemble_conductance(m);
            const Eigen::SparseMatrix<double> Gt = G.transpose();
            CHECK((G - Gt).norm() == 0.0);
            Eigen::VectorXd off = Eigen::VectorXd::Zero(G.rows());
            bool signs = true;
            for (int k = 0; k < G.outerSize(); ++k)
                for (Eigen::SparseMatrix<double>::InnerIterator it(G, k); it; ++it)
                    if (it.row() != it.col()) {
                        signs = signs && it.value() < 0.0;
                        off[it.row()] += -it.value();
                    }
            CHECK(signs);
            const Eigen::VectorXd diag = G.diagonal();
            CHECK(((diag - off).array() >= -1e-12 * diag.array()).all());
            // Row sums are the boundary conductances.
            Eigen::VectorXd gb = Eigen::VectorXd::Zero(G.rows());
            for (const auto& f : m.boundary) gb[f.cell] += f.conductance;
            CHECK(((diag - off - gb).array().abs() <= 1e-9 * diag.array()).all());
        }
    }

    TEST_CASE("every slab belongs to one layer and slabs add up to layer thickness")
    {
        const auto s = bundled(Topology::f2f, Partition::mem_on_logic);
        const auto m = discretize(s, lateral(8, 8));
        REQUIRE(static_cast<int>(m.slabs.size()) == m.nz);
        std::map<std::string, double> sums;
        for (const auto& sl : m.slabs) {
            CHECK_FALSE(sl.layer_name.empty());
            sums[std::string(to_string(sl.section)) + ":" + std::to_string(sl.tier) + ":" + sl.layer_name] +=
                sl.thickness_m;
        }
        const auto check_stack = [&](const Stackup& st, Section sec, int tier) {
            for (const auto& l : st.layers) {
                const auto key = std::string(to_string(sec)) + ":" + std::to_string(tier) + ":" + l.name;
                CHECK(sums[key] == Approx(l.thickness_um * 1e-6).epsilon(1e-12));
            }
        };
        check_stack(s.package, Section::package, -1);
        check_stack(s.bumps, Section::bumps, -1);
        for (std::size_t t = 0; t < s.tiers.size(); ++t) check_stack(s.tiers[t].stackup, Section::tier, int(t));
        check_stack(s.tim, Section::tim, -1);
        check_stack(s.lid, Section::lid, -1);
    }

    TEST_CASE("slab policy splits thick layers only")
    {
        MeshOptions o;
        CHECK(slabs_for_layer(3, o) == 1);
        CHECK(slabs_for_layer(100, o) == 2);
        CHECK(slabs_for_layer(200, o) == 4);
        CHECK(slabs_for_layer(1000, o) == 4);
        o.z_refine = 2;
        CHECK(slabs_for_layer(3, o) == 2);
    }

    TEST_CASE("heat enters at the transistor slab of each tier")
    {
        const auto s = bundled(Topology::f2f, Partition::logic_on_mem);
        const auto m = discretize(s, lateral(12, 12));
        REQUIRE(m.source_slab.size() == 2);
        for (std::size_t t = 0; t < 2; ++t) {
            const auto& slab = m.slabs[static_cast<std::size_t>(m.source_slab[t])];
            CHECK(slab.tier == static_cast<int>(t));
            const auto role = s.tiers[t].stackup.layers[slab.layer].role;
            CHECK((role == LayerRole::substrate || role == LayerRole::tsv_region));
            double tier_power = 0.0;
            for (int iy = 0; iy < m.ny; ++iy)
                for (int ix = 0; ix < m.nx; ++ix) tier_power += m.power[m.index(ix, iy, m.source_slab[t])];
            CHECK(tier_power == Approx(s.tiers[t].total_power()).epsilon(1e-12));
        }
        // The active slab of a face-down tier sits right above its BEOL.
        const auto& top = m.slabs[static_cast<std::size_t>(m.source_slab[1])];
        CHECK(m.slabs[static_cast<std::size_t>(m.source_slab[1]) - 1].layer_name ==
              s.tiers[1].stackup.layers.at(top.layer - 1).name);
    }

    TEST_CASE("regions and boundary faces")
    {
        const auto m = discretize(bundled(Topology::f2b, Partition::logic_on_mem), lateral(8, 8));
        for (const char* r : {"all", "die", "package", "tier:memory", "tier:logic", "source:logic", "lid", "tim"})
            CHECK_FALSE(m.region(r).empty());
        CHECK(m.region("all").size() == static_cast<std::size_t>(m.cell_count()));
        double top = 0.0, bottom = 0.0;
        for (const auto& f : m.boundary) {
            if (f.side == BoundaryFace::Side::top) top += f.area_m2;
            if (f.side == BoundaryFace::Side::bottom) bottom += f.area_m2;
        }
        CHECK(top == Approx(1e-4));
        CHECK(bottom == Approx(1e-4));
    }

    TEST_CASE("coarse meshes warn about unresolved power grids")
    {
        const auto s = bundled(Topology::planar_2d, Partition::none);
        const auto m = discretize(s, lateral(2, 2));
        CHECK_FALSE(m.diagnostics.empty());
        CHECK(m.power.sum() == Approx(s.total_power()).epsilon(1e-12));
        CHECK_THROWS_AS(discretize(s, lateral(1, 4)), ValidationError);
        CHECK(discretize(s, lateral(64, 64)).diagnostics.empty());
    }

    TEST_CASE("conductance dump lists every connection")
    {
        testing::TempDir tmp("dump");
        const auto mat = Material::isotropic("si", 120, 1.63e6);
        const auto m = box_mesh(3, 2, 2, 1e-3, 1e-3, 1e-3, mat, {1000, 10, 0, 25});
        write_conductance_csv(m, tmp / "g.csv");
        std::ifstream in(tmp / "g.csv");
        std::string line;
        std::getline(in, line);
        CHECK(line == "cell_a,cell_b,conductance_w_per_k");
        int rows = 0, boundary = 0;
        while (std::getline(in, line)) {
            ++rows;
            boundary += line.find(",-1,") != std::string::npos;
        }
        const int interior = 2 * 2 * 2 + 3 * 1 * 2 + 3 * 2 * 1;
        CHECK(boundary == 12);
        CHECK(rows == interior + boundary);
    }
}
