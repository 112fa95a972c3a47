#pragma once

#include "thermstack/mesh.hpp"
#include "thermstack/scenario.hpp"
#include "thermstack/solver.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace thermstack {

/// Everything a study needs besides the configurations themselves.
struct StudyContext {
    StackLibrary library;
    PowerMapSet maps;
    MeshOptions mesh;
    SolverOptions solver;
    int workers = 1;
    std::string config_hash; ///< provenance only
};

struct Provenance {
    std::string config_hash;
    int nx = 0;
    int ny = 0;
    double tolerance = 0.0;
};

struct TierStats {
    std::string tier;
    double max_c = 0.0;
    double avg_c = 0.0;
};

struct ReportRow {
    std::string config;
    std::string workload;
    std::vector<TierStats> tiers; ///< bottom to top
    double die_max_c = 0.0;
    double package_max_c = 0.0;
    double delta_t_c = 0.0; ///< die maximum minus the baseline's, same workload
    double max_density_w_mm2 = 0.0;
    double avg_density_w_mm2 = 0.0;
    double total_power_w = 0.0;
    std::optional<std::string> error;
};

struct ExperimentReport {
    std::string baseline;
    std::vector<ReportRow> rows;
    Provenance provenance;

    /// Row for (config, workload); throws ValidationError when absent.
    const ReportRow& row(std::string_view config, std::string_view workload) const;
};

/// Called once per successful steady solve; may run on a worker thread.
using FieldSink = std::function<void(const StackConfig&, const Scenario&, const TemperatureField&)>;

/// Steady solve of a configuration under its own workload.
TemperatureField solve_config(const StackConfig& config, const StudyContext& context, Scenario* scenario = nullptr);

/// One steady solve per (config, workload). Rows are ordered config-major in input
/// order. Solve failures are recorded on their row; the baseline's own failure is
/// fatal because no delta can be formed without it.
ExperimentReport run_config_matrix(const std::vector<StackConfig>& configs, const std::vector<std::string>& workloads,
                                   std::string_view baseline, const StudyContext& context,
                                   const FieldSink& sink = {});

/// First time the region maximum reaches `threshold_c`, interpolated linearly between
/// samples; empty when it never does.
std::optional<double> time_to_threshold(const TransientTrace& trace, double threshold_c, std::string_view region);

struct TransientRow {
    std::string config;
    std::string workload;
    std::optional<double> time_s;
    double final_max_c = 0.0;
    TransientTrace trace;
};

struct TransientStudyOptions {
    double duration_s = 60.0;
    double dt_s = 0.0;
    std::string region = "die";
};

std::vector<TransientRow> run_transient_study(const std::vector<StackConfig>& configs, double threshold_c,
                                              const TransientStudyOptions& options, const StudyContext& context);

struct SweepRow {
    double parameter = 0.0;
    std::string workload;
    double max_c = 0.0;
    std::optional<std::string> error;
};

struct SweepTable {
    std::string parameter_name;
    std::vector<SweepRow> rows; ///< workload-major, parameter ascending
    Provenance provenance;

    std::vector<double> series(std::string_view workload) const;
};

/// Moves the top tier by (dx, 0) for each offset; needs a 3D configuration.
SweepTable sweep_offset(const StackConfig& config, std::vector<double> offsets_um,
                        const std::vector<std::string>& workloads, const StudyContext& context);

/// Scales htc_top by each multiplier.
SweepTable sweep_htc(const StackConfig& config, std::vector<double> multipliers,
                     const std::vector<std::string>& workloads, const StudyContext& context);

void write_report_csv(std::ostream& out, const ExperimentReport& report);
void write_report_table(std::ostream& out, const ExperimentReport& report);
void write_sweep_csv(std::ostream& out, const SweepTable& table);
void write_sweep_table(std::ostream& out, const SweepTable& table);
void write_transient_csv(std::ostream& out, const std::vector<TransientRow>& rows, double threshold_c);

/// `config,workload,max_density_w_mm2,avg_density_w_mm2,total_power_w`.
void write_density_csv(std::ostream& out, const ExperimentReport& report);

/// Runs `task(i)` for i in [0, n) on up to `workers` threads. The first exception is
/// rethrown after all threads finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task);

} // namespace thermstack
