#include "support.hpp"

#include "thermstack/error.hpp"
#include "thermstack/mesh.hpp"
#include "thermstack/solver.hpp"
#include "thermstack/textio.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace thermstack;
using doctest::Approx;

namespace {

/// One cell, heat capacity C, single boundary of conductance g to 25 C.
std::shared_ptr<Mesh> lumped(double power_w, double g, double capacitance)
{
    auto m = std::make_shared<Mesh>(box_mesh(1, 1, 1, 1e-3, 1e-3, 1e-3, Material::isotropic("x", 100, 1e6),
                                             {1000, 0, 0, 25}));
    REQUIRE(m->boundary.size() == 1);
    m->boundary[0].conductance = g;
    m->power[0] = power_w;
    m->capacitance[0] = capacitance;
    return m;
}

std::shared_ptr<const Mesh> bundled_mesh(Topology t, Partition p, int n, const std::string& wl = "maxpower")
{
    StackConfig c;
    c.topology = t;
    c.partition = p;
    c.workload = wl;
    MeshOptions o;
    o.nx = o.ny = n;
    return std::make_shared<const Mesh>(
        discretize(build_scenario(c, testing::study().library, testing::study().maps), o));
}

} // namespace

TEST_SUITE("solver")
{
    TEST_CASE("lumped steady temperature")
    {
        const auto f = solve_steady(lumped(1.0, 0.01, 1.0));
        CHECK(std::abs(f.temperature_c[0] - 125.0) <= 1e-6 * 125.0);
        const auto eb = energy_balance(f);
        CHECK_FALSE(eb.absolute);
        CHECK(eb.residual <= 1e-9);
        CHECK(eb.injected_w == Approx(1.0));
    }

    TEST_CASE("lumped RC response at one time constant")
    {
        const double g = 0.01, c = 0.5, tau = c / g;
        TransientOptions o;
        o.duration_s = tau;
        o.dt_s = tau / 50;
        const auto tr = solve_transient(lumped(1.0, g, c), o);
        const double rise = tr.max_series("all").back() - 25.0;
        const double exact = (1.0 - std::exp(-1.0)) * 1.0 / g;
        CHECK(std::abs(rise - exact) <= 0.02 * exact);
        CHECK(tr.times_s.back() == Approx(tau));
        CHECK(tr.times_s.size() == 51);
    }

    TEST_CASE("1D column with end heat flux and convective far end")
    {
        const int n = 40;
        const double k = 150, h = 5000, dz = 25e-6, side = 1e-3, q = 2.0;
        const double area = side * side, length = n * dz;
        auto m = std::make_shared<Mesh>(
            box_mesh(1, 1, n, side, side, dz, Material::isotropic("si", k, 1.6e6), {h, 0, 0, 20}));
        m->power[m->index(0, 0, 0)] = q;
        const auto f = solve_steady(m);
        double worst = 0.0;
        for (int iz = 0; iz < n; ++iz) {
            const double z = (iz + 0.5) * dz;
            const double exact = 20 + q / (h * area) + q * (length - z) / (k * area);
            worst = std::max(worst, std::abs(f.temperature_c[m->index(0, 0, iz)] - exact) / (exact - 20));
        }
        CHECK(worst < 0.01);
        // Surface temperature at the heated end, extrapolated half a cell.
        const double hot_face = f.temperature_c[0] + q * (dz / 2) / (k * area);
        CHECK(hot_face - 20 == Approx(q * length / (k * area) + q / (h * area)).epsilon(0.01));
    }

    TEST_CASE("zero power gives ambient everywhere")
    {
        auto m = std::make_shared<Mesh>(
            box_mesh(4, 3, 5, 1e-4, 1e-4, 1e-4, Material::isotropic("si", 120, 1.6e6), {1000, 50, 10, 31.5}));
        const auto f = solve_steady(m);
        CHECK(((f.temperature_c.array() - 31.5).abs() <= 1e-9).all());
        const auto eb = energy_balance(f);
        CHECK(eb.absolute);
        CHECK(eb.residual == Approx(0.0));

        TransientOptions o;
        o.duration_s = 1.0;
        const auto tr = solve_transient(m, o);
        CHECK(((tr.max_c.array() - 31.5).abs() <= 1e-9).all());
    }

    TEST_CASE("all-adiabatic boundary is singular")
    {
        auto m = std::make_shared<Mesh>(
            box_mesh(2, 2, 2, 1e-4, 1e-4, 1e-4, Material::isotropic("si", 120, 1.6e6), {0, 0, 0, 25}));
        m->power[0] = 1.0;
        CHECK_THROWS_AS(solve_steady(m), SolverError);
    }

    TEST_CASE("energy audit catches a sloppy solve")
    {
        const auto m = bundled_mesh(Topology::f2f, Partition::cpu_on_cpu, 16);
        SolverOptions loose;
        loose.tolerance = 1e-2;
        loose.method = SolverOptions::Method::cg_diagonal;
        CHECK(energy_balance(solve_steady(m, loose)).residual > 1e-6);
        CHECK(energy_balance(solve_steady(m)).residual <= 1e-6);
    }

    TEST_CASE("non-convergence reports the residual reached")
    {
        const auto m = bundled_mesh(Topology::planar_2d, Partition::none, 12);
        SolverOptions o;
        o.max_iterations = 2;
        try {
            solve_steady(m, o);
            FAIL("expected non-convergence");
        } catch (const SolverError& e) {
            CHECK(e.residual() > o.tolerance);
            CHECK(std::string(e.what()).find("did not converge") != std::string::npos);
        }
    }

    TEST_CASE("solver backends agree")
    {
        const auto m = bundled_mesh(Topology::f2b, Partition::logic_on_mem, 10);
        const auto ref = solve_steady(m);
        CHECK(ref.residual <= 1e-8 * 10);
        for (auto method : {SolverOptions::Method::cg_diagonal, SolverOptions::Method::direct}) {
            SolverOptions o;
            o.method = method;
            const auto f = solve_steady(m, o);
            CHECK((f.temperature_c - ref.temperature_c).cwiseAbs().maxCoeff() < 1e-5);
        }
        for (auto method : {SolverOptions::Method::cg_ichol, SolverOptions::Method::cg_diagonal,
                            SolverOptions::Method::direct})
            CHECK(parse_solver_method(to_string(method)) == method);
        CHECK_THROWS_AS(parse_solver_method("gauss"), ValidationError);
    }

    TEST_CASE("steady solves are deterministic")
    {
        const auto m = bundled_mesh(Topology::f2f, Partition::mem_on_logic, 12);
        CHECK(solve_steady(m).temperature_c == solve_steady(m).temperature_c);
    }

    TEST_CASE("region statistics")
    {
        auto m = std::make_shared<Mesh>(
            box_mesh(2, 1, 1, 1e-4, 1e-4, 1e-4, Material::isotropic("si", 120, 1.6e6), {1000, 0, 0, 25}));
        TemperatureField f{m, Eigen::VectorXd::Constant(2, 25.0)};
        auto s = region_stats(f, "all");
        CHECK(s.max == 25);
        CHECK(s.avg == 25);
        CHECK(s.min == 25);

        f.temperature_c << 30, 40;
        s = region_stats(f, "all");
        CHECK(s.max == 40);
        CHECK(s.avg == 35);
        CHECK(s.min == 30);
        CHECK(s.argmax == 1);
        CHECK(region_stats(f, "all", 25).max == 15);
        CHECK_THROWS_AS(region_stats(f, "die"), ValidationError);
    }

    TEST_CASE("logic runs cooler next to the lid than under the memory tier")
    {
        const auto lom = solve_steady(bundled_mesh(Topology::f2f, Partition::logic_on_mem, 24));
        const auto mol = solve_steady(bundled_mesh(Topology::f2f, Partition::mem_on_logic, 24));
        CHECK(region_stats(mol, "tier:logic").max > region_stats(mol, "tier:memory").max);
        CHECK(region_stats(lom, "tier:logic").max < region_stats(mol, "tier:logic").max);
    }

    TEST_CASE("long transient settles at the steady solution")
    {
        const auto m = bundled_mesh(Topology::planar_2d, Partition::none, 8);
        const double steady = region_stats(solve_steady(m), "die").max;
        TransientOptions o;
        o.duration_s = 5000;
        o.regions = {"die"};
        const auto tr = solve_transient(m, o);
        CHECK(std::abs(tr.max_series("die").back() - steady) < 0.5);
        const auto series = tr.max_series("die");
        for (std::size_t i = 1; i < series.size(); ++i) CHECK(series[i] >= series[i - 1] - 1e-9);
        CHECK(series.front() == Approx(25.0));
    }

    TEST_CASE("sample instants are hit exactly and snapshots are taken")
    {
        const auto m = bundled_mesh(Topology::planar_2d, Partition::none, 6);
        TransientOptions o;
        o.duration_s = 2.0;
        o.dt_s = 0.3;
        o.sample_times = {0.45, 1.0};
        o.snapshot_times = {1.0, 2.0};
        const auto tr = solve_transient(m, o);
        for (double t : {0.45, 1.0, 2.0})
            CHECK(std::find(tr.times_s.begin(), tr.times_s.end(), t) != tr.times_s.end());
        for (std::size_t i = 1; i < tr.times_s.size(); ++i) {
            CHECK(tr.times_s[i] > tr.times_s[i - 1]);
            CHECK(tr.times_s[i] - tr.times_s[i - 1] <= 0.3 + 1e-12);
        }
        REQUIRE(tr.snapshots.size() == 2);
        CHECK(tr.snapshots[1].first == 2.0);
        CHECK(tr.snapshots[1].second.maxCoeff() == Approx(tr.max_c.bottomRows(1).maxCoeff()));
        CHECK(tr.regions.front() == "tier:die");
    }

    TEST_CASE("switching power off lets the die cool")
    {
        const auto m = bundled_mesh(Topology::planar_2d, Partition::none, 6);
        TransientOptions o;
        o.duration_s = 4.0;
        o.dt_s = 0.1;
        o.sample_times = {2.0};
        o.regions = {"die"};
        o.power_schedule = [](double t) { return t <= 2.0 ? 1.0 : 0.0; };
        const auto tr = solve_transient(m, o);
        const auto s = tr.max_series("die");
        const auto at2 = static_cast<std::size_t>(std::find(tr.times_s.begin(), tr.times_s.end(), 2.0) -
                                                  tr.times_s.begin());
        CHECK(s.back() < s[at2]);
        CHECK(s.back() > 25.0);
    }

    TEST_CASE("transient preconditions")
    {
        const auto m = lumped(1.0, 0.01, 1.0);
        TransientOptions o;
        o.duration_s = 0.5;
        o.dt_s = 1.0;
        CHECK_THROWS_AS(solve_transient(m, o), ValidationError);
        o.duration_s = -1.0;
        CHECK_THROWS_AS(solve_transient(m, o), ValidationError);
        o.duration_s = 1.0;
        o.dt_s = 0.1;
        o.regions = {"nowhere"};
        CHECK_THROWS_AS(solve_transient(m, o), ValidationError);
        const auto mb = bundled_mesh(Topology::planar_2d, Partition::none, 6);
        const double dt = default_time_step(*mb, 10.0);
        CHECK(dt <= 10.0);
        CHECK(dt >= 10.0 / 100);
    }

    TEST_CASE("heat map files round trip")
    {
        testing::TempDir tmp("heat");
        const auto m = bundled_mesh(Topology::planar_2d, Partition::none, 7);
        const auto f = solve_steady(m);
        const auto h = slab_heatmap(f, m->source_slab[0]);
        write_heatmap_csv(tmp / "h.csv", h);
        const auto r = read_heatmap_csv(tmp / "h.csv");
        CHECK(r.nx == h.nx);
        CHECK(r.ny == h.ny);
        CHECK(r.temp_c == h.temp_c);
        CHECK(h.temp_c.maxCoeff() == region_stats(f, "source:die").max);

        write_heatmap_pgm(tmp / "h.pgm", h, h.temp_c.minCoeff(), h.temp_c.maxCoeff());
        std::ifstream pgm(tmp / "h.pgm");
        std::string magic, comment;
        pgm >> magic;
        CHECK(magic == "P2");
        int w = 0, ht = 0, maxval = 0, v = 0, hi = 0, lo = 255;
        std::getline(pgm, comment);
        std::getline(pgm, comment);
        CHECK(comment.rfind("# range_c", 0) == 0);
        pgm >> w >> ht >> maxval;
        CHECK(w == 7);
        CHECK(ht == 7);
        CHECK(maxval == 255);
        while (pgm >> v) {
            hi = std::max(hi, v);
            lo = std::min(lo, v);
        }
        CHECK(hi == 255);
        CHECK(lo == 0);

        std::istringstream partial("ix,iy,temp_c\n0,0,1\n1,1,2\n");
        CHECK_THROWS_AS(read_heatmap_csv(partial), ParseError);
        CHECK_THROWS_AS(slab_heatmap(f, m->nz), ValidationError);
    }

    TEST_CASE("trace CSV round trip is exact")
    {
        const auto m = bundled_mesh(Topology::f2f, Partition::logic_on_mem, 6);
        TransientOptions o;
        o.duration_s = 1.0;
        o.dt_s = 0.07;
        const auto tr = solve_transient(m, o);
        std::ostringstream out;
        write_trace_csv(out, tr);
        std::istringstream in(out.str());
        const auto back = read_trace_csv(in);
        CHECK(back.times_s == tr.times_s);
        CHECK(back.regions == tr.regions);
        CHECK(back.max_c == tr.max_c);
        CHECK(back.avg_c == tr.avg_c);

        std::istringstream bad("time_s,region,max_c,avg_c\n1,die,30,29\n0.5,die,30,29\n");
        CHECK_THROWS_AS(read_trace_csv(bad), ParseError);
    }
}
