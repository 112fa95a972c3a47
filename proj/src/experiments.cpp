#include "thermstack/experiments.hpp"

#include "thermstack/error.hpp"
#include "thermstack/textio.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace thermstack {

using textio::format_double;

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task)
{
    const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        task(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
    }
    if (failure) std::rethrow_exception(failure);
}

namespace {

Provenance provenance_of(const StudyContext& c)
{
    return {c.config_hash, c.mesh.nx, c.mesh.ny, c.solver.tolerance};
}

std::string error_text(const std::exception& e) { return e.what(); }

} // namespace

TemperatureField solve_config(const StackConfig& config, const StudyContext& context, Scenario* scenario_out)
{
    Scenario s = build_scenario(config, context.library, context.maps);
    auto mesh = std::make_shared<const Mesh>(discretize(s, context.mesh));
    auto field = solve_steady(mesh, context.solver);
    if (scenario_out) *scenario_out = std::move(s);
    return field;
}

const ReportRow& ExperimentReport::row(std::string_view config, std::string_view workload) const
{
    for (const auto& r : rows)
        if (r.config == config && r.workload == workload) return r;
    throw ValidationError("report has no row for " + std::string(config) + "/" + std::string(workload));
}

ExperimentReport run_config_matrix(const std::vector<StackConfig>& configs, const std::vector<std::string>& workloads,
                                   std::string_view baseline, const StudyContext& context, const FieldSink& sink)
{
    if (std::none_of(configs.begin(), configs.end(), [&](const auto& c) { return c.label == baseline; }))
        throw ValidationError("matrix: baseline '" + std::string(baseline) + "' is not among the configurations");
    if (workloads.empty()) throw ValidationError("matrix: no workloads");

    ExperimentReport report;
    report.baseline = std::string(baseline);
    report.provenance = provenance_of(context);
    report.rows.resize(configs.size() * workloads.size());

    parallel_for(report.rows.size(), context.workers, [&](std::size_t i) {
        StackConfig cfg = configs[i / workloads.size()];
        cfg.workload = workloads[i % workloads.size()];
        ReportRow& row = report.rows[i];
        row.config = cfg.label;
        row.workload = cfg.workload;
        try {
            Scenario s;
            const auto field = solve_config(cfg, context, &s);
            for (const auto& t : s.tiers) {
                const auto st = region_stats(field, "tier:" + t.name);
                row.tiers.push_back({t.name, st.max, st.avg});
            }
            row.die_max_c = region_stats(field, "die").max;
            row.package_max_c = region_stats(field, "package").max;
            std::vector<PowerTileGrid> grids;
            for (const auto& t : s.tiers) grids.insert(grids.end(), t.cpu_grids.begin(), t.cpu_grids.end());
            const auto density = footprint_density_stats(grids);
            row.max_density_w_mm2 = density.max_density;
            row.avg_density_w_mm2 = density.avg_density;
            row.total_power_w = s.total_power();
            if (sink) sink(cfg, s, field);
        } catch (const Error& e) {
            row.error = error_text(e);
        }
    });

    for (const auto& w : workloads) {
        const auto& base = report.row(baseline, w);
        if (base.error) throw SolverError("matrix: baseline '" + std::string(baseline) + "' failed: " + *base.error);
        for (auto& r : report.rows)
            if (r.workload == w && !r.error) r.delta_t_c = r.config == baseline ? 0.0 : r.die_max_c - base.die_max_c;
    }
    return report;
}

std::optional<double> time_to_threshold(const TransientTrace& trace, double threshold_c, std::string_view region)
{
    const auto series = trace.max_series(region);
    if (series.empty()) return std::nullopt;
    if (series.front() >= threshold_c) return trace.times_s.front();
    for (std::size_t i = 1; i < series.size(); ++i) {
        if (series[i] >= threshold_c) {
            const double f = (threshold_c - series[i - 1]) / (series[i] - series[i - 1]);
            return trace.times_s[i - 1] + f * (trace.times_s[i] - trace.times_s[i - 1]);
        }
    }
    return std::nullopt;
}

std::vector<TransientRow> run_transient_study(const std::vector<StackConfig>& configs, double threshold_c,
                                              const TransientStudyOptions& options, const StudyContext& context)
{
    std::vector<TransientRow> rows(configs.size());
    parallel_for(configs.size(), context.workers, [&](std::size_t i) {
        const auto& cfg = configs[i];
        auto mesh = std::make_shared<const Mesh>(discretize(build_scenario(cfg, context.library, context.maps),
                                                            context.mesh));
        TransientOptions to;
        to.duration_s = options.duration_s;
        to.dt_s = options.dt_s;
        to.regions = {options.region};
        rows[i].config = cfg.label;
        rows[i].workload = cfg.workload;
        rows[i].trace = solve_transient(mesh, to, context.solver);
        rows[i].time_s = time_to_threshold(rows[i].trace, threshold_c, options.region);
        rows[i].final_max_c = rows[i].trace.max_series(options.region).back();
    });
    return rows;
}

std::vector<double> SweepTable::series(std::string_view workload) const
{
    std::vector<double> out;
    for (const auto& r : rows)
        if (r.workload == workload) out.push_back(r.max_c);
    return out;
}

namespace {

SweepTable run_sweep(std::string name, const StackConfig& config, std::vector<double> values,
                     const std::vector<std::string>& workloads, const StudyContext& context,
                     const std::function<Scenario(const Scenario&, double)>& modify)
{
    std::sort(values.begin(), values.end());
    SweepTable table;
    table.parameter_name = std::move(name);
    table.provenance = provenance_of(context);
    table.rows.resize(values.size() * workloads.size());
    parallel_for(table.rows.size(), context.workers, [&](std::size_t i) {
        StackConfig cfg = config;
        cfg.workload = workloads[i / values.size()];
        SweepRow& row = table.rows[i];
        row.parameter = values[i % values.size()];
        row.workload = cfg.workload;
        try {
            const Scenario s = modify(build_scenario(cfg, context.library, context.maps), row.parameter);
            auto mesh = std::make_shared<const Mesh>(discretize(s, context.mesh));
            row.max_c = region_stats(solve_steady(mesh, context.solver), "die").max;
        } catch (const Error& e) {
            row.error = error_text(e);
        }
    });
    return table;
}

} // namespace

SweepTable sweep_offset(const StackConfig& config, std::vector<double> offsets_um,
                        const std::vector<std::string>& workloads, const StudyContext& context)
{
    if (config.topology == Topology::planar_2d)
        throw ValidationError("sweep-offset: configuration '" + config.label + "' is not 3D");
    return run_sweep("offset_um", config, std::move(offsets_um), workloads, context,
                     [](const Scenario& s, double dx) { return apply_tier_offset(s, {dx, 0.0}); });
}

SweepTable sweep_htc(const StackConfig& config, std::vector<double> multipliers,
                     const std::vector<std::string>& workloads, const StudyContext& context)
{
    for (double m : multipliers)
        if (!(m > 0.0)) throw ValidationError("sweep-htc: multipliers must be positive");
    return run_sweep("htc_multiplier", config, std::move(multipliers), workloads, context,
                     [](const Scenario& s, double m) { return with_htc_top(s, s.bc.htc_top * m); });
}

namespace {

void write_provenance(std::ostream& out, const Provenance& p)
{
    out << "# config_hash=" << p.config_hash << " resolution=" << p.nx << 'x' << p.ny
        << " tolerance=" << format_double(p.tolerance) << '\n';
}

std::string fixed(double v, int digits = 2)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

/// Prints rows of cells with every column padded to its widest entry.
void aligned(std::ostream& out, const std::vector<std::vector<std::string>>& cells)
{
    std::vector<std::size_t> width;
    for (const auto& r : cells)
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (width.size() <= c) width.push_back(0);
            width[c] = std::max(width[c], r[c].size());
        }
    for (const auto& r : cells) {
        std::string line;
        for (std::size_t c = 0; c < r.size(); ++c) {
            std::string cell = r[c];
            if (c + 1 < r.size()) cell.resize(width[c] + 2, ' ');
            line += cell;
        }
        out << line << '\n';
    }
}

} // namespace

void write_report_csv(std::ostream& out, const ExperimentReport& report)
{
    write_provenance(out, report.provenance);
    out << "config,workload,die_max_c,delta_t_c,package_max_c,bottom_tier,bottom_max_c,bottom_avg_c,top_tier,"
           "top_max_c,top_avg_c,total_power_w,error\n";
    for (const auto& r : report.rows) {
        out << r.config << ',' << r.workload << ',';
        if (r.error) {
            out << ",,,,,,,,,," << '"' << *r.error << '"' << '\n';
            continue;
        }
        out << format_double(r.die_max_c) << ',' << format_double(r.delta_t_c) << ','
            << format_double(r.package_max_c);
        for (std::size_t t = 0; t < 2; ++t) {
            if (t < r.tiers.size())
                out << ',' << r.tiers[t].tier << ',' << format_double(r.tiers[t].max_c) << ','
                    << format_double(r.tiers[t].avg_c);
            else
                out << ",,,";
        }
        out << ',' << format_double(r.total_power_w) << ",\n";
    }
}

void write_report_table(std::ostream& out, const ExperimentReport& report)
{
    std::vector<std::vector<std::string>> cells{
        {"config", "workload", "die_max_c", "delta_t_c", "package_max_c", "bottom", "top"}};
    for (const auto& r : report.rows) {
        if (r.error) {
            cells.push_back({r.config, r.workload, "error: " + *r.error});
            continue;
        }
        auto tier = [&](std::size_t t) {
            return t < r.tiers.size() ? r.tiers[t].tier + " " + fixed(r.tiers[t].max_c) + "/" + fixed(r.tiers[t].avg_c)
                                      : std::string("-");
        };
        cells.push_back({r.config, r.workload, fixed(r.die_max_c), fixed(r.delta_t_c), fixed(r.package_max_c),
                         tier(0), tier(1)});
    }
    aligned(out, cells);
    out << "baseline: " << report.baseline << "; tier columns show max/avg degC\n";
}

void write_sweep_csv(std::ostream& out, const SweepTable& table)
{
    write_provenance(out, table.provenance);
    out << table.parameter_name << ",workload,max_c,error\n";
    for (const auto& r : table.rows) {
        out << format_double(r.parameter) << ',' << r.workload << ',';
        if (r.error)
            out << ",\"" << *r.error << "\"\n";
        else
            out << format_double(r.max_c) << ",\n";
    }
}

void write_sweep_table(std::ostream& out, const SweepTable& table)
{
    std::vector<std::vector<std::string>> cells{{table.parameter_name, "workload", "max_c"}};
    for (const auto& r : table.rows)
        cells.push_back({format_double(r.parameter), r.workload, r.error ? "error: " + *r.error : fixed(r.max_c)});
    aligned(out, cells);
}

void write_transient_csv(std::ostream& out, const std::vector<TransientRow>& rows, double threshold_c)
{
    out << "# threshold_c=" << format_double(threshold_c) << '\n' << "config,workload,time_to_threshold_s,final_max_c\n";
    for (const auto& r : rows)
        out << r.config << ',' << r.workload << ',' << (r.time_s ? format_double(*r.time_s) : std::string("never"))
            << ',' << format_double(r.final_max_c) << '\n';
}

void write_density_csv(std::ostream& out, const ExperimentReport& report)
{
    out << "config,workload,max_density_w_mm2,avg_density_w_mm2,total_power_w\n";
    for (const auto& r : report.rows) {
        if (r.error) continue;
        out << r.config << ',' << r.workload << ',' << format_double(r.max_density_w_mm2) << ','
            << format_double(r.avg_density_w_mm2) << ',' << format_double(r.total_power_w) << '\n';
    }
}

} // namespace thermstack
