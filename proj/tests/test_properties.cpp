#include "support.hpp"

#include "thermstack/error.hpp"
#include "thermstack/experiments.hpp"

#include <doctest.h>

#include <sstream>

using namespace thermstack;
using doctest::Approx;

namespace {

constexpr int trials = 6;

struct Case {
    StackConfig config;
    MeshOptions mesh;
};

Case random_case(std::mt19937_64& rng)
{
    static const std::pair<Topology, Partition> shapes[] = {
        {Topology::planar_2d, Partition::none},       {Topology::f2f, Partition::logic_on_mem},
        {Topology::f2f, Partition::mem_on_logic},     {Topology::f2f, Partition::cpu_on_cpu},
        {Topology::f2b, Partition::logic_on_mem},     {Topology::f2b, Partition::mem_on_logic},
        {Topology::f2b, Partition::cpu_on_cpu}};
    std::uniform_int_distribution<int> pick(0, 6), res(8, 14), coin(0, 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Case c;
    const auto [t, p] = shapes[pick(rng)];
    c.config.topology = t;
    c.config.partition = p;
    c.config.workload = coin(rng) ? "maxpower" : "dhrystone";
    if (t != Topology::planar_2d) c.config.tier_offset = {(u(rng) - 0.5) * 1000, (u(rng) - 0.5) * 1000};
    c.config.bc.htc_top = 500 + u(rng) * 20000;
    c.config.bc.htc_bottom = u(rng) * 200;
    c.config.bc.ambient_c = 10 + u(rng) * 30;
    c.mesh.nx = res(rng);
    c.mesh.ny = res(rng);
    return c;
}

std::shared_ptr<Mesh> mesh_for(const Case& c)
{
    const auto s = build_scenario(c.config, testing::study().library, testing::study().maps);
    return std::make_shared<Mesh>(discretize(s, c.mesh));
}

SolverOptions tight()
{
    SolverOptions o;
    o.method = SolverOptions::Method::direct;
    o.tolerance = 1e-12;
    return o;
}

Eigen::VectorXd rise(const std::shared_ptr<Mesh>& m)
{
    return solve_steady(m, tight()).temperature_c.array() - m->ambient_c;
}

double rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / b.norm(); }

} // namespace

TEST_SUITE("properties")
{
    TEST_CASE("rise is linear in power")
    {
        std::mt19937_64 rng(101);
        std::uniform_real_distribution<double> u(0.1, 5.0);
        for (int i = 0; i < trials; ++i) {
            const auto c = random_case(rng);
            const auto m = mesh_for(c);
            const auto base = rise(m);
            const double f = u(rng);
            auto scaled_mesh = std::make_shared<Mesh>(*m);
            scaled_mesh->power *= f;
            CHECK(rel_diff(rise(scaled_mesh), f * base) < 1e-6);
        }
    }

    TEST_CASE("rises superpose")
    {
        std::mt19937_64 rng(202);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < trials; ++i) {
            const auto c = random_case(rng);
            const auto m = mesh_for(c);
            auto a = std::make_shared<Mesh>(*m), b = std::make_shared<Mesh>(*m);
            for (Index k = 0; k < m->cell_count(); ++k) {
                const double w = u(rng);
                a->power[k] = w * m->power[k];
                b->power[k] = (1 - w) * m->power[k];
            }
            CHECK(rel_diff(rise(a) + rise(b), rise(m)) < 1e-6);
        }
    }

    TEST_CASE("no cell falls below ambient and the hottest cell carries power")
    {
        std::mt19937_64 rng(303);
        for (int i = 0; i < trials; ++i) {
            const auto c = random_case(rng);
            const auto m = mesh_for(c);
            const auto f = solve_steady(m, tight());
            const double amb = m->ambient_c;
            CHECK(f.temperature_c.minCoeff() >= amb - 1e-9);
            // Discrete maximum principle: a power-free cell is a weighted mean of its
            // neighbours and ambient, so it cannot exceed all of them.
            Index hot;
            f.temperature_c.maxCoeff(&hot);
            CHECK(m->power[hot] > 0.0);
            CHECK(energy_balance(f).residual <= 1e-9);
        }
    }

    TEST_CASE("conductance operator is symmetric and power is conserved for random stacks")
    {
        std::mt19937_64 rng(404);
        for (int i = 0; i < trials; ++i) {
            const auto c = random_case(rng);
            const auto s = build_scenario(c.config, testing::study().library, testing::study().maps);
            const auto m = discretize(s, c.mesh);
            const Eigen::SparseMatrix<double> G = assemble_conductance(m);
            const Eigen::SparseMatrix<double> Gt = G.transpose();
            CHECK((G - Gt).norm() == 0.0);
            CHECK(std::abs(m.power.sum() - s.total_power()) <= 1e-9 * s.total_power());
        }
    }

    TEST_CASE("rasterization conserves block power")
    {
        std::mt19937_64 rng(505);
        std::uniform_int_distribution<int> n(1, 40), count(1, 12);
        std::uniform_real_distribution<double> pitch(5.0, 80.0);
        for (int i = 0; i < 50; ++i) {
            GridSpec spec{n(rng), n(rng), pitch(rng), pitch(rng), {}, "w"};
            const auto blocks =
                testing::random_blocks(rng, spec.nx * spec.pitch_x_um, spec.ny * spec.pitch_y_um, count(rng));
            double total = 0.0;
            for (const auto& b : blocks) total += b.total_power;
            const auto g = synthesize_power_map(blocks, spec);
            CHECK(g.total_power() == Approx(total).epsilon(1e-12));
            CHECK((g.tile_power.array() >= 0.0).all());
        }
    }

    TEST_CASE("power maps survive a CSV round trip bit for bit")
    {
        std::mt19937_64 rng(606);
        std::uniform_int_distribution<int> n(1, 20);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 30; ++i) {
            PowerTileGrid g;
            g.nx = n(rng);
            g.ny = n(rng);
            g.pitch_x_um = 1 + 100 * u(rng);
            g.pitch_y_um = 1 + 100 * u(rng);
            g.workload = "random";
            g.tile_power = Eigen::MatrixXd::NullaryExpr(g.nx, g.ny, [&] { return u(rng) * u(rng) * 3; });
            std::ostringstream out;
            write_power_map(out, g);
            std::istringstream in(out.str());
            const auto back = read_power_map(in);
            CHECK(back.nx == g.nx);
            CHECK(back.pitch_x_um == g.pitch_x_um);
            CHECK(back.pitch_y_um == g.pitch_y_um);
            CHECK(back.tile_power == g.tile_power);
        }
    }

    TEST_CASE("heat maps and traces survive a CSV round trip")
    {
        std::mt19937_64 rng(707);
        std::uniform_real_distribution<double> u(-40.0, 200.0);
        HeatMap h{7, 5, Eigen::MatrixXd::NullaryExpr(7, 5, [&] { return u(rng); })};
        std::ostringstream out;
        write_heatmap_csv(out, h);
        std::istringstream in(out.str());
        CHECK(read_heatmap_csv(in).temp_c == h.temp_c);

        TransientTrace tr;
        tr.times_s = {0, 0.1, 1.0 / 3.0};
        tr.regions = {"die", "package"};
        tr.max_c = Eigen::MatrixXd::NullaryExpr(3, 2, [&] { return u(rng); });
        tr.avg_c = Eigen::MatrixXd::NullaryExpr(3, 2, [&] { return u(rng); });
        std::ostringstream t;
        write_trace_csv(t, tr);
        std::istringstream ti(t.str());
        const auto back = read_trace_csv(ti);
        CHECK(back.times_s == tr.times_s);
        CHECK(back.max_c == tr.max_c);
        CHECK(back.avg_c == tr.avg_c);
    }

    TEST_CASE("raising the lid HTC cools every configuration")
    {
        std::mt19937_64 rng(808);
        for (int i = 0; i < trials; ++i) {
            auto c = random_case(rng);
            auto ctx = testing::coarse_context();
            ctx.mesh = c.mesh;
            ctx.solver = tight();
            double prev = 1e300;
            const double h0 = c.config.bc.htc_top;
            for (double f : {1.0, 1.5, 3.0, 10.0}) {
                c.config.bc.htc_top = h0 * f;
                const double t = region_stats(solve_config(c.config, ctx), "die").max;
                CHECK(t < prev);
                prev = t;
            }
        }
    }
}
