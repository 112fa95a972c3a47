#include "thermstack/calibrate.hpp"

#include "thermstack/error.hpp"
#include "thermstack/textio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace thermstack {

using textio::format_double;

void validate(const MeasurementSet& set)
{
    if (set.points.empty()) throw ValidationError("measurements: at least one operating point is required");
    for (const auto& p : set.points) {
        if (!(p.power_w > 0.0) || !std::isfinite(p.power_w))
            throw ValidationError("measurements: point '" + p.label + "' needs positive power");
        if (p.duration_s && (!(*p.duration_s > 0.0) || !std::isfinite(*p.duration_s)))
            throw ValidationError("measurements: point '" + p.label + "' needs positive duration");
        if (!std::isfinite(p.measured_max_c))
            throw ValidationError("measurements: point '" + p.label + "' has a non-finite temperature");
    }
    if (!std::isfinite(set.ambient_c)) throw ValidationError("measurements: ambient must be finite");
}

MeasurementSet read_measurements(std::istream& in, const std::string& source)
{
    MeasurementSet set;
    std::string line;
    int line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = textio::trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            const auto body = textio::trim(t.substr(1));
            if (body.rfind("ambient_c=", 0) == 0)
                set.ambient_c = textio::parse_double(body.substr(10), source, line_no);
            else if (!body.empty())
                throw ParseError(source, line_no, "unknown header key");
            continue;
        }
        if (!header) {
            if (t != "label,power_w,duration_s,measured_max_c")
                throw ParseError(source, line_no, "expected header 'label,power_w,duration_s,measured_max_c'");
            header = true;
            continue;
        }
        const auto f = textio::split(t);
        if (f.size() != 4) throw ParseError(source, line_no, "expected 4 fields");
        MeasurementPoint p;
        p.label = std::string(textio::trim(f[0]));
        p.power_w = textio::parse_double(f[1], source, line_no);
        if (textio::trim(f[2]) != "steady") p.duration_s = textio::parse_double(f[2], source, line_no);
        p.measured_max_c = textio::parse_double(f[3], source, line_no);
        set.points.push_back(std::move(p));
    }
    if (!header) throw ParseError(source, 0, "missing header");
    try {
        validate(set);
    } catch (const ValidationError& e) {
        throw ParseError(source, 0, e.what());
    }
    return set;
}

MeasurementSet read_measurements(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open measurements '" + path.string() + "'");
    return read_measurements(in, path.string());
}

void write_measurements(std::ostream& out, const MeasurementSet& set)
{
    out << "# ambient_c=" << format_double(set.ambient_c) << "\nlabel,power_w,duration_s,measured_max_c\n";
    for (const auto& p : set.points)
        out << p.label << ',' << format_double(p.power_w) << ','
            << (p.duration_s ? format_double(*p.duration_s) : std::string("steady")) << ','
            << format_double(p.measured_max_c) << '\n';
}

void write_measurements(const std::filesystem::path& path, const MeasurementSet& set)
{
    std::ostringstream os;
    write_measurements(os, set);
    textio::write_file(path, os.str());
}

std::vector<double> simulate_points(const Scenario& tmpl, const MeasurementSet& set, double htc,
                                    const CalibrationOptions& o)
{
    const double p_ref = tmpl.total_power();
    if (!(p_ref > 0.0)) throw ValidationError("calibration: scenario template carries no power");

    Scenario s = with_htc_top(tmpl, htc);
    s.bc.ambient_c = set.ambient_c;
    auto mesh = std::make_shared<const Mesh>(discretize(s, o.mesh));

    // Rise of the region maximum at reference power, per distinct duration.
    std::map<double, double> transient_rise;
    std::optional<double> steady_rise;
    double longest = 0.0;
    for (const auto& p : set.points) {
        if (p.duration_s) {
            transient_rise[*p.duration_s] = 0.0;
            longest = std::max(longest, *p.duration_s);
        }
    }
    if (!transient_rise.empty()) {
        TransientOptions to;
        to.duration_s = longest;
        to.dt_s = o.dt_s;
        to.regions = {o.region};
        for (const auto& [d, _] : transient_rise) to.sample_times.push_back(d);
        const auto trace = solve_transient(mesh, to, o.solver);
        for (std::size_t i = 0; i < trace.times_s.size(); ++i) {
            auto it = transient_rise.find(trace.times_s[i]);
            if (it != transient_rise.end()) it->second = trace.max_c(static_cast<Index>(i), 0) - trace.ambient_c;
        }
    }
    if (std::any_of(set.points.begin(), set.points.end(), [](const auto& p) { return !p.duration_s; })) {
        const auto field = solve_steady(mesh, o.solver);
        steady_rise = region_stats(field, o.region).max - mesh->ambient_c;
    }

    std::vector<double> out;
    out.reserve(set.points.size());
    for (const auto& p : set.points) {
        const double rise = p.duration_s ? transient_rise.at(*p.duration_s) : *steady_rise;
        out.push_back(set.ambient_c + rise * (p.power_w / p_ref));
    }
    return out;
}

namespace {

double sum_squares(const MeasurementSet& set, const std::vector<double>& sim)
{
    double s = 0.0;
    for (std::size_t i = 0; i < sim.size(); ++i) {
        const double r = sim[i] - set.points[i].measured_max_c;
        s += r * r;
    }
    return s;
}

struct Evaluation {
    double htc;
    std::vector<double> sim;
    double objective;
};

} // namespace

CalibrationResult calibrate_htc(const Scenario& tmpl, const MeasurementSet& set, const CalibrationOptions& o)
{
    validate(set);
    if (!(o.htc_lo > 0.0) || !(o.htc_hi > o.htc_lo))
        throw ValidationError("calibration: htc bounds must satisfy 0 < lo < hi");

    std::vector<Evaluation> evals;
    auto evaluate = [&](double htc) -> const Evaluation& {
        if (static_cast<int>(evals.size()) >= o.max_evaluations)
            throw SolverError("calibration: evaluation budget exhausted");
        auto sim = simulate_points(tmpl, set, htc, o);
        const double f = sum_squares(set, sim);
        // Simulated maxima must fall as htc rises; compare with every earlier evaluation.
        for (const auto& e : evals) {
            const bool lower = e.htc < htc;
            for (std::size_t i = 0; i < sim.size(); ++i) {
                const double hot = lower ? e.sim[i] : sim[i];
                const double cold = lower ? sim[i] : e.sim[i];
                if (cold > hot + 1e-6 * std::max(1.0, std::abs(hot)))
                    throw SolverError("calibration: internal inconsistency, simulated temperature of '" +
                                      set.points[i].label + "' is not monotone in htc");
            }
        }
        evals.push_back({htc, std::move(sim), f});
        return evals.back();
    };

    const Evaluation lo = evaluate(o.htc_lo);
    const Evaluation hi = evaluate(o.htc_hi);
    for (std::size_t i = 0; i < set.points.size(); ++i)
        if (!(lo.sim[i] > set.points[i].measured_max_c))
            throw ValidationError("calibration: bracketing failure at lower bound htc=" + format_double(o.htc_lo) +
                                  ", simulated " + format_double(lo.sim[i]) + " C does not exceed measured " +
                                  format_double(set.points[i].measured_max_c) + " C for '" + set.points[i].label +
                                  "'");
    bool below = false;
    for (std::size_t i = 0; i < set.points.size(); ++i) below = below || hi.sim[i] < set.points[i].measured_max_c;
    if (!below)
        throw ValidationError("calibration: bracketing failure at upper bound htc=" + format_double(o.htc_hi) +
                              ", every simulated maximum is still above its measurement");

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::log(o.htc_lo);
    double b = std::log(o.htc_hi);
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = evaluate(std::exp(c)).objective;
    double fd = evaluate(std::exp(d)).objective;
    while (b - a > o.log_tolerance) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = evaluate(std::exp(c)).objective;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = evaluate(std::exp(d)).objective;
        }
    }
    evaluate(std::exp(0.5 * (a + b)));

    const auto best = std::min_element(evals.begin(), evals.end(),
                                       [](const auto& x, const auto& y) { return x.objective < y.objective; });
    CalibrationResult r;
    r.htc = best->htc;
    r.objective = best->objective;
    r.objective_lo = lo.objective;
    r.objective_hi = hi.objective;
    r.evaluations = static_cast<int>(evals.size());
    for (std::size_t i = 0; i < set.points.size(); ++i)
        r.points.push_back({set.points[i], best->sim[i], best->sim[i] - set.points[i].measured_max_c});
    return r;
}

void write_calibration_report(std::ostream& out, const CalibrationResult& r)
{
    out << "# htc_top=" << format_double(r.htc) << " objective=" << format_double(r.objective) << '\n'
        << "label,power_w,duration_s,measured_max_c,simulated_max_c,residual_c\n";
    for (const auto& p : r.points)
        out << p.measurement.label << ',' << format_double(p.measurement.power_w) << ','
            << (p.measurement.duration_s ? format_double(*p.measurement.duration_s) : std::string("steady")) << ','
            << format_double(p.measurement.measured_max_c) << ',' << format_double(p.simulated_max_c) << ','
            << format_double(p.residual_c) << '\n';
}

void write_calibration_report(const std::filesystem::path& path, const CalibrationResult& r)
{
    std::ostringstream os;
    write_calibration_report(os, r);
    textio::write_file(path, os.str());
}

} // namespace thermstack
