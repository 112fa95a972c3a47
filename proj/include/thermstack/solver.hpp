#pragma once

#include "thermstack/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace thermstack {

struct SolverOptions {
    enum class Method { cg_ichol, cg_diagonal, direct };
    Method method = Method::cg_ichol;
    double tolerance = 1e-8; ///< relative residual ||b - A x|| / ||b||
    int max_iterations = 20000;
};

std::string_view to_string(SolverOptions::Method m);
SolverOptions::Method parse_solver_method(std::string_view s);

/// SPD linear solve with a choice of backend. One instance per solve; not shareable
/// across threads while solving.
class LinearSolver {
public:
    explicit LinearSolver(SolverOptions options);
    ~LinearSolver();
    LinearSolver(LinearSolver&&) noexcept;
    LinearSolver& operator=(LinearSolver&&) noexcept;

    /// Factorizes or builds the preconditioner for `A`.
    void compute(const Eigen::SparseMatrix<double>& A);

    /// Solves A x = b starting from `x` (warm start for iterative methods). Throws
    /// SolverError when the tolerance is not met within the iteration budget.
    void solve(const Eigen::VectorXd& b, Eigen::VectorXd& x);

    int last_iterations() const { return iterations_; }
    double last_residual() const { return residual_; }

private:
    struct Impl;
    SolverOptions options_;
    std::unique_ptr<Impl> impl_;
    const Eigen::SparseMatrix<double>* matrix_ = nullptr;
    int iterations_ = 0;
    double residual_ = 0.0;
};

struct TemperatureField {
    std::shared_ptr<const Mesh> mesh;
    Eigen::VectorXd temperature_c;
    int iterations = 0;
    double residual = 0.0; ///< relative residual of the assembled system
    double tolerance = 0.0;
};

/// Steady conduction: G T = P + G_b T_ambient.
TemperatureField solve_steady(std::shared_ptr<const Mesh> mesh, const SolverOptions& options = {});

struct EnergyBalance {
    double residual = 0.0;  ///< relative unless `absolute`
    bool absolute = false;  ///< set when the injected power is zero
    double injected_w = 0.0;
    double outflow_w = 0.0;
};

/// Compares convective outflow with injected power for a steady field.
EnergyBalance energy_balance(const TemperatureField& field);

struct RegionStats {
    double max = 0.0;
    double avg = 0.0; ///< arithmetic mean over the region's cells
    double min = 0.0;
    Index argmax = -1;
};

/// Exact reductions over a labelled region; values are reported minus `baseline`.
RegionStats region_stats(const TemperatureField& field, std::string_view region, double baseline = 0.0);
RegionStats region_stats(const Mesh& mesh, const Eigen::VectorXd& temperature_c, std::string_view region,
                         double baseline = 0.0);

/// Time series of region maxima and means.
struct TransientTrace {
    std::vector<double> times_s;
    std::vector<std::string> regions;
    Eigen::MatrixXd max_c; ///< times x regions
    Eigen::MatrixXd avg_c; ///< times x regions
    std::vector<std::pair<double, Eigen::VectorXd>> snapshots;
    double ambient_c = 0.0;

    std::size_t region_index(std::string_view region) const;
    /// Max-temperature series of one region.
    std::vector<double> max_series(std::string_view region) const;
};

struct TransientOptions {
    double duration_s = 1.0;
    double dt_s = 0.0; ///< zero selects default_time_step
    /// Multiplies the injected power at time t; constant one when empty.
    std::function<double(double)> power_schedule;
    /// Regions to record; empty selects every tier plus "die" and "package" when present.
    std::vector<std::string> regions;
    /// Steps are shortened so these instants are hit exactly and recorded.
    std::vector<double> sample_times;
    std::vector<double> snapshot_times;
    /// Initial temperatures; ambient when empty.
    Eigen::VectorXd initial_c;
};

/// Suggested step: a tenth of the fastest cell time constant C_i / sum_j G_ij, but no
/// more than `max_steps` steps over `duration`.
double default_time_step(const Mesh& mesh, double duration_s, int max_steps = 100);

/// Backward Euler on C dT/dt = -G T + P(t) + boundary terms.
TransientTrace solve_transient(std::shared_ptr<const Mesh> mesh, const TransientOptions& options,
                               const SolverOptions& solver = {});

/// Heat map of one z-slab: `ix,iy,temp_c` rows.
struct HeatMap {
    int nx = 0;
    int ny = 0;
    Eigen::MatrixXd temp_c; ///< nx x ny
};

HeatMap slab_heatmap(const TemperatureField& field, int slab);
void write_heatmap_csv(std::ostream& out, const HeatMap& map);
void write_heatmap_csv(const std::filesystem::path& path, const HeatMap& map);
HeatMap read_heatmap_csv(std::istream& in, const std::string& source = "<stream>");
HeatMap read_heatmap_csv(const std::filesystem::path& path);

/// Portable graymap (P2, maxval 255) with [lo_c, hi_c] mapped onto [0, 255], clamped.
void write_heatmap_pgm(const std::filesystem::path& path, const HeatMap& map, double lo_c, double hi_c);

/// `time_s,region,max_c,avg_c` rows.
void write_trace_csv(std::ostream& out, const TransientTrace& trace);
void write_trace_csv(const std::filesystem::path& path, const TransientTrace& trace);
TransientTrace read_trace_csv(std::istream& in, const std::string& source = "<stream>");

} // namespace thermstack
