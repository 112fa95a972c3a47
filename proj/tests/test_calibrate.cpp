#include "support.hpp"

#include "thermstack/calibrate.hpp"
#include "thermstack/error.hpp"

#include <doctest.h>

#include <sstream>

using namespace thermstack;
using doctest::Approx;

namespace {

struct Fixture {
    Scenario tmpl;
    CalibrationOptions opts;
};

/// Four-core stand-in on a coarse mesh.
const Fixture& soc()
{
    static const Fixture f = [] {
        const auto rc = load_run_config(testing::data_dir() / "configs" / "calibration.toml");
        Fixture x{build_scenario(rc.scenario, rc.library, rc.maps), {}};
        x.opts.mesh = rc.mesh;
        x.opts.mesh.nx = 12;
        x.opts.mesh.ny = 8;
        x.opts.htc_lo = 500;
        x.opts.htc_hi = 50000;
        return x;
    }();
    return f;
}

MeasurementSet synthetic(double htc, std::vector<MeasurementPoint> points)
{
    MeasurementSet set{std::move(points), 25.0};
    const auto sim = simulate_points(soc().tmpl, set, htc, soc().opts);
    for (std::size_t i = 0; i < sim.size(); ++i) set.points[i].measured_max_c = sim[i];
    return set;
}

} // namespace

TEST_SUITE("calibrate")
{
    TEST_CASE("noise-free synthetic data recovers the generating HTC")
    {
        const auto set = synthetic(8000, {{"a", 6, 30.0, 0}, {"b", 9.5, 20.0, 0}, {"c", 13.5, 15.0, 0},
                                          {"d", 18, std::nullopt, 0}});
        const auto r = calibrate_htc(soc().tmpl, set, soc().opts);
        CHECK(r.htc == Approx(8000).epsilon(0.01));
        CHECK(r.objective <= r.objective_lo);
        CHECK(r.objective <= r.objective_hi);
        CHECK(r.points.size() == 4);
        for (const auto& p : r.points) CHECK(std::abs(p.residual_c) < 0.05);
    }

    TEST_CASE("single point matches the bisection root")
    {
        MeasurementSet set{{{"only", 12, 10.0, 48.0}}, 25.0};
        const auto r = calibrate_htc(soc().tmpl, set, soc().opts);
        CHECK(std::abs(r.points[0].residual_c) < 0.1);

        // Independent root of T_sim(htc) = measured by bisection in ln(htc).
        double lo = std::log(soc().opts.htc_lo), hi = std::log(soc().opts.htc_hi);
        for (int i = 0; i < 40; ++i) {
            const double mid = 0.5 * (lo + hi);
            const double t = simulate_points(soc().tmpl, set, std::exp(mid), soc().opts)[0];
            (t > 48.0 ? lo : hi) = mid;
        }
        CHECK(r.htc == Approx(std::exp(0.5 * (lo + hi))).epsilon(1e-3));
    }

    TEST_CASE("simulated maxima fall with HTC and scale with power")
    {
        MeasurementSet set{{{"p", 5, std::nullopt, 0}, {"q", 10, std::nullopt, 0}}, 25.0};
        double prev = 1e300;
        for (double h : {600.0, 2000.0, 8000.0, 30000.0}) {
            const auto t = simulate_points(soc().tmpl, set, h, soc().opts);
            CHECK(t[0] < prev);
            prev = t[0];
            CHECK(t[1] - 25 == Approx(2 * (t[0] - 25)).epsilon(1e-9));
        }
    }

    TEST_CASE("doubling powers and rises leaves the fit unchanged")
    {
        MeasurementSet set{{{"a", 8, 12.0, 38.0}, {"b", 14, std::nullopt, 49.0}}, 25.0};
        auto doubled = set;
        for (auto& p : doubled.points) {
            p.power_w *= 2;
            p.measured_max_c = 25 + 2 * (p.measured_max_c - 25);
        }
        const auto a = calibrate_htc(soc().tmpl, set, soc().opts);
        const auto b = calibrate_htc(soc().tmpl, doubled, soc().opts);
        CHECK(b.htc == Approx(a.htc).epsilon(1e-3));
    }

    TEST_CASE("bracketing failures name the bound")
    {
        const auto too_hot = MeasurementSet{{{"x", 10, std::nullopt, 900.0}}, 25.0};
        try {
            calibrate_htc(soc().tmpl, too_hot, soc().opts);
            FAIL("expected bracketing failure");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("lower bound") != std::string::npos);
        }
        const auto too_cold = MeasurementSet{{{"x", 10, std::nullopt, 25.001}}, 25.0};
        try {
            calibrate_htc(soc().tmpl, too_cold, soc().opts);
            FAIL("expected bracketing failure");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("upper bound") != std::string::npos);
        }
        auto bad = soc().opts;
        bad.htc_lo = 0;
        CHECK_THROWS_AS(calibrate_htc(soc().tmpl, too_hot, bad), ValidationError);
        bad = soc().opts;
        bad.htc_hi = bad.htc_lo;
        CHECK_THROWS_AS(calibrate_htc(soc().tmpl, too_hot, bad), ValidationError);
    }

    TEST_CASE("measurement set invariants")
    {
        CHECK_THROWS_AS(validate(MeasurementSet{}), ValidationError);
        CHECK_THROWS_AS(validate(MeasurementSet{{{"z", 0, 1.0, 25}}, 25}), ValidationError);
        CHECK_THROWS_AS(validate(MeasurementSet{{{"z", 1, 0.0, 25}}, 25}), ValidationError);
        CHECK_THROWS_AS(validate(MeasurementSet{{{"z", 1, -2.0, 25}}, 25}), ValidationError);
        CHECK_NOTHROW(validate(MeasurementSet{{{"z", 1, std::nullopt, 25}}, 25}));
    }

    TEST_CASE("measurement CSV round trip")
    {
        MeasurementSet set{{{"f1", 6.25, 30.0, 31.99}, {"eq", 1.0 / 3.0, std::nullopt, 47.125}}, 22.5};
        std::ostringstream out;
        write_measurements(out, set);
        CHECK(out.str().find("steady") != std::string::npos);
        std::istringstream in(out.str());
        const auto back = read_measurements(in);
        CHECK(back.ambient_c == 22.5);
        REQUIRE(back.points.size() == 2);
        CHECK(back.points[1].power_w == 1.0 / 3.0);
        CHECK_FALSE(back.points[1].duration_s.has_value());
        CHECK(back.points[0].duration_s == std::optional<double>(30.0));
        CHECK(back.points[1].measured_max_c == 47.125);

        std::istringstream bad("label,power_w,duration_s,measured_max_c\nx,1,fast,30\n");
        CHECK_THROWS_AS(read_measurements(bad), ParseError);
        std::istringstream neg("label,power_w,duration_s,measured_max_c\nx,-1,1,30\n");
        CHECK_THROWS_AS(read_measurements(neg), ValidationError);
    }

    TEST_CASE("calibration report lists every point")
    {
        const auto set = synthetic(3000, {{"a", 6, 5.0, 0}, {"b", 12, std::nullopt, 0}});
        const auto r = calibrate_htc(soc().tmpl, set, soc().opts);
        std::ostringstream out;
        write_calibration_report(out, r);
        std::istringstream in(out.str());
        std::string first, header;
        std::getline(in, first);
        std::getline(in, header);
        CHECK(first.rfind("# htc_top=", 0) == 0);
        CHECK(header == "label,power_w,duration_s,measured_max_c,simulated_max_c,residual_c");
        int rows = 0;
        for (std::string line; std::getline(in, line);) rows += !line.empty();
        CHECK(rows == 2);
    }
}
