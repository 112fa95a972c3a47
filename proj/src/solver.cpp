#include "thermstack/solver.hpp"

#include "thermstack/error.hpp"
#include "thermstack/textio.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <variant>

namespace thermstack {

std::string_view to_string(SolverOptions::Method m)
{
    switch (m) {
    case SolverOptions::Method::cg_ichol: return "cg_ichol";
    case SolverOptions::Method::cg_diagonal: return "cg_diagonal";
    case SolverOptions::Method::direct: return "direct";
    }
    return "cg_ichol";
}

SolverOptions::Method parse_solver_method(std::string_view s)
{
    for (auto m : {SolverOptions::Method::cg_ichol, SolverOptions::Method::cg_diagonal, SolverOptions::Method::direct})
        if (to_string(m) == s) return m;
    throw ValidationError("unknown solver method '" + std::string(s) + "'");
}

using SpMat = Eigen::SparseMatrix<double>;
using IcholCg = Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::NaturalOrdering<int>>>;
using JacobiCg = Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>>;
using Direct = Eigen::SimplicialLDLT<SpMat>;

struct LinearSolver::Impl {
    std::variant<std::monostate, IcholCg, JacobiCg, Direct> backend;
};

LinearSolver::LinearSolver(SolverOptions options) : options_(options), impl_(std::make_unique<Impl>()) {}
LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

void LinearSolver::compute(const SpMat& A)
{
    matrix_ = &A;
    auto setup_cg = [&](auto& cg) {
        cg.setTolerance(options_.tolerance);
        cg.setMaxIterations(options_.max_iterations);
        cg.compute(A);
        if (cg.info() != Eigen::Success) throw SolverError("preconditioner construction failed");
    };
    switch (options_.method) {
    case SolverOptions::Method::cg_ichol: setup_cg(impl_->backend.emplace<IcholCg>()); break;
    case SolverOptions::Method::cg_diagonal: setup_cg(impl_->backend.emplace<JacobiCg>()); break;
    case SolverOptions::Method::direct: {
        auto& ldlt = impl_->backend.emplace<Direct>();
        ldlt.compute(A);
        if (ldlt.info() != Eigen::Success) throw SolverError("factorization failed: matrix is singular");
        break;
    }
    }
}

void LinearSolver::solve(const Eigen::VectorXd& b, Eigen::VectorXd& x)
{
    if (!matrix_) throw SolverError("solve called before compute");
    if (x.size() != b.size()) x = Eigen::VectorXd::Zero(b.size());
    std::visit(
        [&](auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                throw SolverError("solver backend not initialized");
            } else if constexpr (std::is_same_v<T, Direct>) {
                x = s.solve(b);
                iterations_ = 1;
            } else {
                Eigen::VectorXd guess = x;
                x = s.solveWithGuess(b, guess);
                iterations_ = static_cast<int>(s.iterations());
            }
        },
        impl_->backend);

    const double bnorm = b.norm();
    const double rnorm = (b - (*matrix_) * x).norm();
    residual_ = bnorm > 0.0 ? rnorm / bnorm : rnorm;
    if (!x.allFinite()) throw SolverError("linear solve produced non-finite values", residual_);
    // Iterative residual estimates drift slightly from the true one; allow a small margin.
    if (residual_ > options_.tolerance * 10.0 && bnorm > 0.0)
        throw SolverError("linear solve did not converge: relative residual " + textio::format_double(residual_) +
                              " after " + std::to_string(iterations_) + " iterations",
                          residual_);
}

TemperatureField solve_steady(std::shared_ptr<const Mesh> mesh, const SolverOptions& options)
{
    if (!mesh) throw SolverError("solve_steady: no mesh");
    bool any = false;
    for (const auto& f : mesh->boundary) any = any || f.conductance > 0.0;
    if (!any) throw SolverError("singular system: every boundary is adiabatic");

    const SpMat G = assemble_conductance(*mesh);
    const Eigen::VectorXd b = assemble_source(*mesh);
    LinearSolver solver(options);
    solver.compute(G);
    Eigen::VectorXd rise = Eigen::VectorXd::Zero(b.size());
    solver.solve(b, rise);

    TemperatureField f;
    f.mesh = std::move(mesh);
    f.temperature_c = rise.array() + f.mesh->ambient_c;
    f.iterations = solver.last_iterations();
    f.residual = solver.last_residual();
    f.tolerance = options.tolerance;
    return f;
}

EnergyBalance energy_balance(const TemperatureField& field)
{
    const Mesh& m = *field.mesh;
    EnergyBalance e;
    e.injected_w = m.power.sum();
    for (const auto& f : m.boundary) e.outflow_w += f.conductance * (field.temperature_c[f.cell] - f.ambient_c);
    const double diff = std::abs(e.outflow_w - e.injected_w);
    if (e.injected_w == 0.0) {
        e.absolute = true;
        e.residual = diff;
    } else {
        e.residual = diff / std::abs(e.injected_w);
    }
    return e;
}

RegionStats region_stats(const Mesh& mesh, const Eigen::VectorXd& t, std::string_view region, double baseline)
{
    const auto& cells = mesh.region(region);
    if (cells.empty()) throw ValidationError("region '" + std::string(region) + "' is empty");
    RegionStats s;
    s.max = -std::numeric_limits<double>::infinity();
    s.min = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (Index c : cells) {
        const double v = t[c];
        if (v > s.max) {
            s.max = v;
            s.argmax = c;
        }
        s.min = std::min(s.min, v);
        sum += v;
    }
    s.avg = sum / static_cast<double>(cells.size());
    s.max -= baseline;
    s.min -= baseline;
    s.avg -= baseline;
    return s;
}

RegionStats region_stats(const TemperatureField& field, std::string_view region, double baseline)
{
    return region_stats(*field.mesh, field.temperature_c, region, baseline);
}

std::size_t TransientTrace::region_index(std::string_view region) const
{
    for (std::size_t i = 0; i < regions.size(); ++i)
        if (regions[i] == region) return i;
    throw ValidationError("trace has no region '" + std::string(region) + "'");
}

std::vector<double> TransientTrace::max_series(std::string_view region) const
{
    const auto r = static_cast<Index>(region_index(region));
    std::vector<double> out(times_s.size());
    for (std::size_t i = 0; i < times_s.size(); ++i) out[i] = max_c(static_cast<Index>(i), r);
    return out;
}

double default_time_step(const Mesh& mesh, double duration_s, int max_steps)
{
    const SpMat G = assemble_conductance(mesh);
    double tau_min = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < G.rows(); ++i) {
        const double g = G.coeff(i, i);
        if (g > 0.0) tau_min = std::min(tau_min, mesh.capacitance[i] / g);
    }
    double dt = tau_min / 10.0;
    if (max_steps > 0) dt = std::max(dt, duration_s / max_steps);
    return std::min(dt, duration_s);
}

TransientTrace solve_transient(std::shared_ptr<const Mesh> mesh, const TransientOptions& o, const SolverOptions& so)
{
    if (!mesh) throw SolverError("solve_transient: no mesh");
    if (!(o.duration_s > 0.0)) throw ValidationError("transient: duration must be positive");
    const double dt = o.dt_s > 0.0 ? o.dt_s : default_time_step(*mesh, o.duration_s);
    if (!(dt > 0.0)) throw ValidationError("transient: dt must be positive");
    if (o.duration_s < dt * (1.0 - 1e-12)) throw ValidationError("transient: duration must be at least dt");

    const Mesh& m = *mesh;
    TransientTrace trace;
    trace.ambient_c = m.ambient_c;
    trace.regions = o.regions;
    if (trace.regions.empty()) {
        for (const auto& name : m.tier_names) trace.regions.push_back("tier:" + name);
        if (m.regions.count("die")) trace.regions.push_back("die");
        if (m.regions.count("package")) trace.regions.push_back("package");
        if (trace.regions.empty()) trace.regions.push_back("all");
    }
    for (const auto& r : trace.regions) (void)m.region(r);

    std::vector<double> breaks;
    for (double t : o.sample_times)
        if (t > 0.0 && t < o.duration_s) breaks.push_back(t);
    for (double t : o.snapshot_times)
        if (t > 0.0 && t < o.duration_s) breaks.push_back(t);
    breaks.push_back(o.duration_s);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    const SpMat G = assemble_conductance(m);
    const Eigen::VectorXd source = assemble_source(m, 0.0); // ambient-driven part, independent of the schedule
    const auto schedule = [&](double t) { return o.power_schedule ? o.power_schedule(t) : 1.0; };

    Eigen::VectorXd rise = o.initial_c.size() ? Eigen::VectorXd(o.initial_c.array() - m.ambient_c)
                                              : Eigen::VectorXd::Zero(m.cell_count());
    if (rise.size() != m.cell_count()) throw ValidationError("transient: initial field has the wrong size");

    std::vector<Eigen::VectorXd> rows_max, rows_avg;
    const auto record = [&](double t) {
        Eigen::VectorXd mx(trace.regions.size()), av(trace.regions.size());
        const Eigen::VectorXd temp = rise.array() + m.ambient_c;
        for (std::size_t r = 0; r < trace.regions.size(); ++r) {
            const auto s = region_stats(m, temp, trace.regions[r]);
            mx[static_cast<Index>(r)] = s.max;
            av[static_cast<Index>(r)] = s.avg;
        }
        trace.times_s.push_back(t);
        rows_max.push_back(std::move(mx));
        rows_avg.push_back(std::move(av));
        for (double ts : o.snapshot_times)
            if (std::abs(ts - t) <= 1e-12 * std::max(1.0, std::abs(t))) trace.snapshots.emplace_back(t, temp);
    };
    record(0.0);

    LinearSolver solver(so);
    SpMat A;
    double current_h = -1.0;
    double t = 0.0;
    for (double stop : breaks) {
        const double span = stop - t;
        if (span <= 0.0) continue;
        const int n = std::max(1, static_cast<int>(std::ceil(span / dt - 1e-9)));
        const double h = span / n;
        if (std::abs(h - current_h) > 1e-12 * h) {
            A = G;
            A.diagonal() += m.capacitance / h;
            solver.compute(A);
            current_h = h;
        }
        for (int k = 1; k <= n; ++k) {
            const double t_next = (k == n) ? stop : t + k * h;
            const Eigen::VectorXd rhs =
                m.capacitance.cwiseProduct(rise) / h + m.power * schedule(t_next) + source;
            try {
                solver.solve(rhs, rise);
            } catch (const SolverError& e) {
                throw SolverError(std::string("transient step at t=") + textio::format_double(t_next) + " s: " +
                                      e.what(),
                                  e.residual());
            }
            record(t_next);
        }
        t = stop;
    }

    const auto n_t = static_cast<Index>(trace.times_s.size());
    const auto n_r = static_cast<Index>(trace.regions.size());
    trace.max_c.resize(n_t, n_r);
    trace.avg_c.resize(n_t, n_r);
    for (Index i = 0; i < n_t; ++i) {
        trace.max_c.row(i) = rows_max[static_cast<std::size_t>(i)].transpose();
        trace.avg_c.row(i) = rows_avg[static_cast<std::size_t>(i)].transpose();
    }
    return trace;
}

HeatMap slab_heatmap(const TemperatureField& field, int slab)
{
    const Mesh& m = *field.mesh;
    if (slab < 0 || slab >= m.nz) throw ValidationError("slab index out of range");
    HeatMap h;
    h.nx = m.nx;
    h.ny = m.ny;
    h.temp_c.resize(m.nx, m.ny);
    for (int iy = 0; iy < m.ny; ++iy)
        for (int ix = 0; ix < m.nx; ++ix) h.temp_c(ix, iy) = field.temperature_c[m.index(ix, iy, slab)];
    return h;
}

void write_heatmap_csv(std::ostream& out, const HeatMap& map)
{
    out << "ix,iy,temp_c\n";
    for (int iy = 0; iy < map.ny; ++iy)
        for (int ix = 0; ix < map.nx; ++ix)
            out << ix << ',' << iy << ',' << textio::format_double(map.temp_c(ix, iy)) << '\n';
}

void write_heatmap_csv(const std::filesystem::path& path, const HeatMap& map)
{
    std::ostringstream os;
    write_heatmap_csv(os, map);
    textio::write_file(path, os.str());
}

HeatMap read_heatmap_csv(std::istream& in, const std::string& source)
{
    std::string line;
    int line_no = 0;
    struct Row {
        long long ix, iy;
        double t;
    };
    std::vector<Row> rows;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = textio::trim(line);
        if (t.empty()) continue;
        if (!header) {
            if (t != "ix,iy,temp_c") throw ParseError(source, line_no, "expected header 'ix,iy,temp_c'");
            header = true;
            continue;
        }
        const auto f = textio::split(t);
        if (f.size() != 3) throw ParseError(source, line_no, "expected 3 fields");
        rows.push_back({textio::parse_int(f[0], source, line_no), textio::parse_int(f[1], source, line_no),
                        textio::parse_double(f[2], source, line_no)});
    }
    if (!header) throw ParseError(source, 0, "missing header");
    HeatMap h;
    for (const auto& r : rows) {
        if (r.ix < 0 || r.iy < 0) throw ParseError(source, 0, "negative cell index");
        h.nx = std::max<int>(h.nx, static_cast<int>(r.ix) + 1);
        h.ny = std::max<int>(h.ny, static_cast<int>(r.iy) + 1);
    }
    if (static_cast<long long>(h.nx) * h.ny != static_cast<long long>(rows.size()))
        throw ParseError(source, 0, "heat map is not a complete grid");
    h.temp_c = Eigen::MatrixXd::Constant(h.nx, h.ny, std::numeric_limits<double>::quiet_NaN());
    for (const auto& r : rows) h.temp_c(r.ix, r.iy) = r.t;
    if (h.temp_c.hasNaN()) throw ParseError(source, 0, "heat map has duplicate cells");
    return h;
}

HeatMap read_heatmap_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open heat map '" + path.string() + "'");
    return read_heatmap_csv(in, path.string());
}

void write_heatmap_pgm(const std::filesystem::path& path, const HeatMap& map, double lo_c, double hi_c)
{
    if (!(hi_c > lo_c)) hi_c = lo_c + 1.0;
    std::ostringstream os;
    os << "P2\n# range_c " << textio::format_double(lo_c) << ' ' << textio::format_double(hi_c) << '\n'
       << map.nx << ' ' << map.ny << "\n255\n";
    // Image rows run top to bottom, so iy is flipped.
    for (int iy = map.ny - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < map.nx; ++ix) {
            const double u = std::clamp((map.temp_c(ix, iy) - lo_c) / (hi_c - lo_c), 0.0, 1.0);
            os << (ix ? " " : "") << static_cast<int>(std::lround(u * 255.0));
        }
        os << '\n';
    }
    textio::write_file(path, os.str());
}

void write_trace_csv(std::ostream& out, const TransientTrace& trace)
{
    out << "time_s,region,max_c,avg_c\n";
    for (std::size_t i = 0; i < trace.times_s.size(); ++i)
        for (std::size_t r = 0; r < trace.regions.size(); ++r)
            out << textio::format_double(trace.times_s[i]) << ',' << trace.regions[r] << ','
                << textio::format_double(trace.max_c(static_cast<Index>(i), static_cast<Index>(r))) << ','
                << textio::format_double(trace.avg_c(static_cast<Index>(i), static_cast<Index>(r))) << '\n';
}

void write_trace_csv(const std::filesystem::path& path, const TransientTrace& trace)
{
    std::ostringstream os;
    write_trace_csv(os, trace);
    textio::write_file(path, os.str());
}

TransientTrace read_trace_csv(std::istream& in, const std::string& source)
{
    std::string line;
    int line_no = 0;
    bool header = false;
    TransientTrace tr;
    std::vector<std::vector<std::pair<double, double>>> rows; // per time, per region
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = textio::trim(line);
        if (t.empty()) continue;
        if (!header) {
            if (t != "time_s,region,max_c,avg_c") throw ParseError(source, line_no, "unexpected trace header");
            header = true;
            continue;
        }
        const auto f = textio::split(t);
        if (f.size() != 4) throw ParseError(source, line_no, "expected 4 fields");
        const double time = textio::parse_double(f[0], source, line_no);
        const std::string region(f[1]);
        if (tr.times_s.empty() || time != tr.times_s.back()) {
            if (!tr.times_s.empty() && time <= tr.times_s.back())
                throw ParseError(source, line_no, "timestamps must increase");
            tr.times_s.push_back(time);
            rows.emplace_back();
        }
        auto& row = rows.back();
        if (tr.times_s.size() == 1) tr.regions.push_back(region);
        else if (row.size() >= tr.regions.size() || tr.regions[row.size()] != region)
            throw ParseError(source, line_no, "region order differs from the first timestamp");
        row.emplace_back(textio::parse_double(f[2], source, line_no), textio::parse_double(f[3], source, line_no));
    }
    if (!header) throw ParseError(source, 0, "missing header");
    tr.max_c.resize(static_cast<Index>(rows.size()), static_cast<Index>(tr.regions.size()));
    tr.avg_c.resizeLike(tr.max_c);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != tr.regions.size()) throw ParseError(source, 0, "incomplete timestamp block");
        for (std::size_t r = 0; r < rows[i].size(); ++r) {
            tr.max_c(static_cast<Index>(i), static_cast<Index>(r)) = rows[i][r].first;
            tr.avg_c(static_cast<Index>(i), static_cast<Index>(r)) = rows[i][r].second;
        }
    }
    return tr;
}

} // namespace thermstack
