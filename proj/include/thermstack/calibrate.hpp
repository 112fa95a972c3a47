#pragma once

#include "thermstack/mesh.hpp"
#include "thermstack/scenario.hpp"
#include "thermstack/solver.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace thermstack {

/// One operating point. A missing duration means the measurement was taken at
/// thermal equilibrium.
struct MeasurementPoint {
    std::string label;
    double power_w = 0.0;
    std::optional<double> duration_s;
    double measured_max_c = 0.0;
};

struct MeasurementSet {
    std::vector<MeasurementPoint> points;
    double ambient_c = 25.0;
};

void validate(const MeasurementSet& set);

/// `label,power_w,duration_s,measured_max_c`; duration may read `steady`. An optional
/// `# ambient_c=<float>` line precedes the header.
MeasurementSet read_measurements(std::istream& in, const std::string& source = "<stream>");
MeasurementSet read_measurements(const std::filesystem::path& path);
void write_measurements(std::ostream& out, const MeasurementSet& set);
void write_measurements(const std::filesystem::path& path, const MeasurementSet& set);

struct CalibrationOptions {
    double htc_lo = 100.0;
    double htc_hi = 1e5;
    MeshOptions mesh;
    SolverOptions solver;
    /// Region whose maximum is compared with the sensor reading.
    std::string region = "die";
    /// Search stops when the bracket is narrower than this in ln(htc).
    double log_tolerance = 1e-4;
    int max_evaluations = 80;
    /// Transient step; zero lets the solver choose.
    double dt_s = 0.0;
};

struct CalibrationPoint {
    MeasurementPoint measurement;
    double simulated_max_c = 0.0;
    double residual_c = 0.0; ///< simulated minus measured
};

struct CalibrationResult {
    double htc = 0.0;
    double objective = 0.0; ///< sum of squared residuals at htc
    double objective_lo = 0.0;
    double objective_hi = 0.0;
    int evaluations = 0;
    std::vector<CalibrationPoint> points;
};

/// Simulated maxima of every point at one lid HTC. The model is linear in power, so
/// one solve at the template's power is scaled to each point.
std::vector<double> simulate_points(const Scenario& scenario_template, const MeasurementSet& set, double htc,
                                    const CalibrationOptions& options);

/// Least-squares fit of htc_top by golden-section search in ln(htc).
CalibrationResult calibrate_htc(const Scenario& scenario_template, const MeasurementSet& set,
                                const CalibrationOptions& options);

/// Per-point comparison: `label,power_w,duration_s,measured_max_c,simulated_max_c,residual_c`.
void write_calibration_report(std::ostream& out, const CalibrationResult& result);
void write_calibration_report(const std::filesystem::path& path, const CalibrationResult& result);

} // namespace thermstack
