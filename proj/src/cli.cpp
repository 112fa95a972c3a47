#include "thermstack/cli.hpp"

#include "thermstack/calibrate.hpp"
#include "thermstack/config.hpp"
#include "thermstack/error.hpp"
#include "thermstack/experiments.hpp"
#include "thermstack/textio.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>

namespace thermstack {

namespace fs = std::filesystem;
using json = nlohmann::json;
using textio::format_double;

OutputSet::OutputSet(fs::path dir) : dir_(std::move(dir)) {}

OutputSet::~OutputSet()
{
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
    if (created_dir_) fs::remove(dir_, ec); // only succeeds when empty
}

fs::path OutputSet::add(const std::string& name)
{
    if (files_.empty() && !fs::exists(dir_)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
        created_dir_ = true;
    }
    files_.push_back(dir_ / name);
    return files_.back();
}

namespace {

/// Options shared by the config-driven subcommands.
struct Common {
    std::string config;
    std::string out;
    std::string resolution;
    std::optional<double> tol;
    std::optional<int> workers;
    std::vector<std::string> sets;
    std::string label;
    bool dump_conductance = false;
};

/// What replay needs to re-run a command.
struct Invocation {
    std::string command;
    std::string label;
    bool dump_conductance = false;
};

std::vector<std::string> overrides_of(const Common& c)
{
    std::vector<std::string> o = c.sets;
    if (!c.resolution.empty()) {
        const auto parts = textio::split(c.resolution, ',');
        if (parts.size() != 2) throw ValidationError("--resolution expects NX,NY");
        o.push_back("mesh.nx=" + std::string(textio::trim(parts[0])));
        o.push_back("mesh.ny=" + std::string(textio::trim(parts[1])));
    }
    if (c.tol) o.push_back("solver.tolerance=" + format_double(*c.tol));
    if (c.workers) o.push_back("run.workers=" + std::to_string(*c.workers));
    if (!c.out.empty()) o.push_back("run.output_dir=\"" + fs::absolute(c.out).lexically_normal().string() + "\"");
    return o;
}

std::string file_stem(const std::string& s)
{
    std::string out = s;
    for (char& ch : out)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
    return out;
}

void write_text(const fs::path& p, const std::string& s) { textio::write_file(p, s); }

template <typename Fn>
std::string render(Fn&& fn)
{
    std::ostringstream os;
    fn(os);
    return os.str();
}

void write_manifest(OutputSet& outs, const RunConfig& rc, const Invocation& inv)
{
    json m;
    m["tool"] = "thermstack";
    m["version"] = tool_version;
    m["command"] = inv.command;
    m["label"] = inv.label;
    m["dump_conductance"] = inv.dump_conductance;
    m["resolved_config"] = rc.resolved_toml;
    m["config_hash"] = rc.config_hash;
    m["defaults"] = rc.defaulted;
    json inputs = json::array();
    for (const auto& in : rc.inputs) inputs.push_back({{"path", in.path.string()}, {"hash", in.hash}});
    m["inputs"] = inputs;
    std::vector<fs::path> files = outs.files();
    std::sort(files.begin(), files.end());
    json outputs = json::array();
    for (const auto& f : files)
        outputs.push_back({{"file", f.filename().string()}, {"hash", textio::fnv1a_hex(textio::read_file(f))}});
    m["outputs"] = outputs;
    write_text(outs.add("manifest.json"), m.dump(2) + "\n");
}

/// Heat maps of every tier's active slab, with a shared PGM range.
void export_heatmaps(OutputSet& outs, std::mutex* lock, const std::string& label, const std::string& workload,
                     const Scenario& s, const TemperatureField& field)
{
    const Mesh& m = *field.mesh;
    std::vector<HeatMap> maps;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t t = 0; t < s.tiers.size(); ++t) {
        maps.push_back(slab_heatmap(field, m.source_slab[t]));
        lo = std::min(lo, maps.back().temp_c.minCoeff());
        hi = std::max(hi, maps.back().temp_c.maxCoeff());
    }
    for (std::size_t t = 0; t < s.tiers.size(); ++t) {
        const std::string stem = file_stem(label + "_" + workload + "_" + s.tiers[t].name);
        fs::path csv, pgm;
        {
            std::unique_lock guard = lock ? std::unique_lock(*lock) : std::unique_lock<std::mutex>();
            csv = outs.add(stem + ".csv");
            pgm = outs.add(stem + ".pgm");
        }
        write_heatmap_csv(csv, maps[t]);
        write_heatmap_pgm(pgm, maps[t], lo, hi);
    }
}

std::string density_csv(const std::string& label, const std::string& workload, const Scenario& s)
{
    std::ostringstream os;
    os << "config,workload,scope,max_density_w_mm2,avg_density_w_mm2,total_power_w\n";
    std::vector<PowerTileGrid> all;
    for (const auto& t : s.tiers) {
        const auto d = footprint_density_stats(t.cpu_grids);
        os << label << ',' << workload << ",tier:" << t.name << ',' << format_double(d.max_density) << ','
           << format_double(d.avg_density) << ',' << format_double(d.total_power) << '\n';
        all.insert(all.end(), t.cpu_grids.begin(), t.cpu_grids.end());
    }
    const auto d = footprint_density_stats(all);
    os << label << ',' << workload << ",footprint," << format_double(d.max_density) << ','
       << format_double(d.avg_density) << ',' << format_double(d.total_power) << '\n';
    return os.str();
}

const StackConfig& pick_config(const RunConfig& rc, const std::string& label)
{
    return label.empty() ? rc.scenario : rc.config(label);
}

int cmd_validate(const RunConfig& rc, std::ostream& out, std::ostream& err)
{
    std::vector<std::string> problems;
    for (const auto& [name, st] : rc.library.stackups) {
        Stackup sized = st;
        sized.lateral_width_mm = sized.lateral_height_mm = 1.0;
        for (const auto& v : validate_stackup(sized))
            problems.push_back("stackup '" + name + "'" + (v.layer.empty() ? "" : ", layer '" + v.layer + "'") + ": " +
                               v.message);
    }
    for (const auto& name : StackLibrary::required)
        if (!rc.library.stackups.count(name)) problems.push_back("stackup library is missing '" + std::string(name) + "'");
    for (const auto& [wl, maps] : rc.maps)
        for (const auto* g : {&maps.cpu, &maps.logic, &maps.memory})
            if (*g) try {
                    validate(**g);
                } catch (const Error& e) {
                    problems.push_back("powermaps." + wl + ": " + e.what());
                }
    if (problems.empty()) {
        std::vector<StackConfig> configs{rc.scenario};
        configs.insert(configs.end(), rc.matrix.configs.begin(), rc.matrix.configs.end());
        for (auto c : configs) {
            std::vector<std::string> workloads{c.workload};
            for (const auto& w : rc.matrix.workloads)
                if (std::find(workloads.begin(), workloads.end(), w) == workloads.end()) workloads.push_back(w);
            for (const auto& w : workloads) {
                c.workload = w;
                try {
                    (void)build_scenario(c, rc.library, rc.maps);
                } catch (const Error& e) {
                    problems.push_back("config '" + c.label + "' (" + w + "): " + e.what());
                }
            }
        }
    }
    if (problems.empty()) {
        out << "ok: " << rc.source.string() << '\n';
        return 0;
    }
    for (const auto& p : problems) err << "error: " << p << '\n';
    return static_cast<int>(ErrorKind::validation);
}

int cmd_steady(const RunConfig& rc, const Invocation& inv, std::ostream& out, std::ostream& err)
{
    const StackConfig& cfg = pick_config(rc, inv.label);
    const Scenario s = build_scenario(cfg, rc.library, rc.maps);
    auto mesh = std::make_shared<const Mesh>(discretize(s, rc.mesh));
    for (const auto& d : mesh->diagnostics) err << "warning: " << d << '\n';
    const auto field = solve_steady(mesh, rc.solver);
    const auto eb = energy_balance(field);

    OutputSet outs(rc.output_dir);
    export_heatmaps(outs, nullptr, cfg.label, cfg.workload, s, field);
    std::ostringstream summary;
    summary << "region,max_c,avg_c,min_c\n";
    std::vector<std::string> regions;
    for (const auto& t : s.tiers) {
        regions.push_back("tier:" + t.name);
        regions.push_back("source:" + t.name);
    }
    regions.insert(regions.end(), {"die", "package"});
    for (const auto& r : regions) {
        const auto st = region_stats(field, r);
        summary << r << ',' << format_double(st.max) << ',' << format_double(st.avg) << ',' << format_double(st.min)
                << '\n';
    }
    write_text(outs.add("steady_summary.csv"), summary.str());
    write_text(outs.add("power_density.csv"), density_csv(cfg.label, cfg.workload, s));
    if (inv.dump_conductance) write_conductance_csv(*mesh, outs.add("conductance.csv"));
    write_manifest(outs, rc, inv);
    outs.commit();

    out << "config " << cfg.label << ", workload " << cfg.workload << ", " << mesh->nx << 'x' << mesh->ny << 'x'
        << mesh->nz << " cells, " << field.iterations << " iterations, residual " << format_double(field.residual)
        << '\n';
    out << summary.str();
    out << "energy balance residual " << format_double(eb.residual) << (eb.absolute ? " (absolute)" : "") << '\n';
    return 0;
}

double steady_rise(const StackConfig& cfg, const RunConfig& rc)
{
    const auto field = solve_config(cfg, rc.context());
    return region_stats(field, rc.transient.region).max - field.mesh->ambient_c;
}

int cmd_transient(const RunConfig& rc, const Invocation& inv, std::ostream& out, std::ostream&)
{
    std::vector<StackConfig> configs;
    if (!inv.label.empty()) configs.push_back(rc.config(inv.label));
    else if (rc.transient.configs.empty()) configs.push_back(rc.scenario);
    else
        for (const auto& l : rc.transient.configs) configs.push_back(rc.config(l));

    double threshold;
    if (rc.transient.threshold_c) {
        threshold = *rc.transient.threshold_c;
    } else {
        StackConfig base = rc.config(rc.matrix.baseline);
        base.workload = configs.front().workload;
        threshold = base.bc.ambient_c + rc.transient.threshold_fraction * steady_rise(base, rc);
    }
    TransientStudyOptions opts;
    opts.duration_s = rc.transient.duration_s;
    opts.dt_s = rc.transient.dt_s;
    opts.region = rc.transient.region;
    const auto rows = run_transient_study(configs, threshold, opts, rc.context());

    OutputSet outs(rc.output_dir);
    for (const auto& r : rows)
        write_trace_csv(outs.add(file_stem(r.config + "_" + r.workload + "_trace.csv")), r.trace);
    const std::string table = render([&](std::ostream& os) { write_transient_csv(os, rows, threshold); });
    write_text(outs.add("transient.csv"), table);
    write_manifest(outs, rc, inv);
    outs.commit();
    out << table;
    return 0;
}

int cmd_calibrate(const RunConfig& rc, const Invocation& inv, std::ostream& out, std::ostream&)
{
    if (!rc.calibrate.measurements) throw ValidationError("calibrate.measurements is not set");
    const auto set = read_measurements(*rc.calibrate.measurements);
    const Scenario tmpl = build_scenario(pick_config(rc, inv.label), rc.library, rc.maps);
    CalibrationOptions o;
    o.htc_lo = rc.calibrate.htc_lo;
    o.htc_hi = rc.calibrate.htc_hi;
    o.region = rc.calibrate.region;
    o.log_tolerance = rc.calibrate.log_tolerance;
    o.dt_s = rc.calibrate.dt_s;
    o.mesh = rc.mesh;
    o.solver = rc.solver;
    const auto result = calibrate_htc(tmpl, set, o);

    OutputSet outs(rc.output_dir);
    const std::string report = render([&](std::ostream& os) { write_calibration_report(os, result); });
    write_text(outs.add("calibration.csv"), report);
    write_manifest(outs, rc, inv);
    outs.commit();
    out << report << "calibrated htc_top " << format_double(result.htc) << " W/(m^2 K) after " << result.evaluations
        << " evaluations\n";
    return 0;
}

int cmd_matrix(const RunConfig& rc, const Invocation& inv, std::ostream& out, std::ostream& err)
{
    std::vector<StackConfig> configs = rc.matrix.configs;
    if (configs.empty()) configs.push_back(rc.scenario);
    OutputSet outs(rc.output_dir);
    std::mutex lock;
    std::vector<std::pair<std::string, std::string>> densities;
    const auto report = run_config_matrix(
        configs, rc.matrix.workloads, rc.matrix.baseline, rc.context(),
        [&](const StackConfig& c, const Scenario& s, const TemperatureField& f) {
            export_heatmaps(outs, &lock, c.label, c.workload, s, f);
            std::lock_guard g(lock);
            densities.emplace_back(c.label + "/" + c.workload, density_csv(c.label, c.workload, s));
        });
    write_text(outs.add("matrix_report.csv"), render([&](std::ostream& os) { write_report_csv(os, report); }));
    std::sort(densities.begin(), densities.end());
    std::string dens = "config,workload,scope,max_density_w_mm2,avg_density_w_mm2,total_power_w\n";
    for (const auto& [key, text] : densities) dens += text.substr(text.find('\n') + 1);
    write_text(outs.add("power_density.csv"), dens);
    write_manifest(outs, rc, inv);
    outs.commit();
    write_report_table(out, report);
    for (const auto& r : report.rows)
        if (r.error) err << "error: " << r.config << '/' << r.workload << ": " << *r.error << '\n';
    const bool failed = std::any_of(report.rows.begin(), report.rows.end(), [](const auto& r) { return r.error; });
    return failed ? static_cast<int>(ErrorKind::solver) : 0;
}

int cmd_sweep(const RunConfig& rc, const Invocation& inv, bool offset, std::ostream& out, std::ostream& err)
{
    const StackConfig& cfg = pick_config(rc, inv.label);
    const auto table = offset ? sweep_offset(cfg, rc.sweep.offsets_um, rc.sweep.workloads, rc.context())
                              : sweep_htc(cfg, rc.sweep.htc_multipliers, rc.sweep.workloads, rc.context());
    OutputSet outs(rc.output_dir);
    write_text(outs.add(offset ? "sweep_offset.csv" : "sweep_htc.csv"),
               render([&](std::ostream& os) { write_sweep_csv(os, table); }));
    write_manifest(outs, rc, inv);
    outs.commit();
    write_sweep_table(out, table);
    for (const auto& r : table.rows)
        if (r.error) err << "error: " << r.workload << " at " << format_double(r.parameter) << ": " << *r.error << '\n';
    const bool failed = std::any_of(table.rows.begin(), table.rows.end(), [](const auto& r) { return r.error; });
    return failed ? static_cast<int>(ErrorKind::validation) : 0;
}

int dispatch(const RunConfig& rc, const Invocation& inv, std::ostream& out, std::ostream& err)
{
    if (inv.command == "validate") return cmd_validate(rc, out, err);
    if (inv.command == "steady") return cmd_steady(rc, inv, out, err);
    if (inv.command == "transient") return cmd_transient(rc, inv, out, err);
    if (inv.command == "calibrate") return cmd_calibrate(rc, inv, out, err);
    if (inv.command == "matrix") return cmd_matrix(rc, inv, out, err);
    if (inv.command == "sweep-offset") return cmd_sweep(rc, inv, true, out, err);
    if (inv.command == "sweep-htc") return cmd_sweep(rc, inv, false, out, err);
    throw ValidationError("unknown command '" + inv.command + "'");
}

int cmd_replay(const std::string& manifest_path, const std::string& out_dir, std::ostream& out, std::ostream& err)
{
    json m;
    try {
        m = json::parse(textio::read_file(manifest_path));
    } catch (const json::exception& e) {
        throw ParseError(manifest_path, 0, e.what());
    }
    Invocation inv;
    std::string resolved;
    try {
        inv.command = m.at("command").get<std::string>();
        inv.label = m.at("label").get<std::string>();
        inv.dump_conductance = m.at("dump_conductance").get<bool>();
        resolved = m.at("resolved_config").get<std::string>();
        for (const auto& in : m.at("inputs")) {
            const fs::path p = in.at("path").get<std::string>();
            if (p.extension() == ".toml") continue; // definitions are inlined in the resolved config
            if (!fs::is_regular_file(p)) throw ValidationError("replay: input '" + p.string() + "' is missing");
            if (textio::fnv1a_hex(textio::read_file(p)) != in.at("hash").get<std::string>())
                throw ValidationError("replay: input '" + p.string() + "' changed since the recorded run");
        }
    } catch (const json::exception& e) {
        throw ParseError(manifest_path, 0, std::string("malformed manifest: ") + e.what());
    }
    LoadOptions lo;
    if (!out_dir.empty())
        lo.overrides.push_back("run.output_dir=\"" + fs::absolute(out_dir).lexically_normal().string() + "\"");
    lo.materials_path = std::nullopt;
    const RunConfig rc =
        load_run_config_text(resolved, fs::absolute(manifest_path).parent_path(), manifest_path, lo);
    return dispatch(rc, inv, out, err);
}

int cmd_synth(const std::string& floorplan, const std::string& output, std::ostream& out)
{
    const auto fp = load_floorplan(floorplan);
    const auto grid = synthesize_power_map(fp.blocks, fp.grid);
    OutputSet outs(fs::path(output).parent_path().empty() ? fs::path(".") : fs::path(output).parent_path());
    write_power_map(outs.add(fs::path(output).filename().string()), grid);
    outs.commit();
    const auto st = power_density_stats(grid);
    out << "wrote " << output << ": " << grid.nx << 'x' << grid.ny << " tiles, " << format_double(st.total_power)
        << " W, max density " << format_double(st.max_density) << " W/mm^2\n";
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Finite-volume thermal simulation of 2D and 3D-stacked processor packages", "thermstack"};
    app.set_version_flag("--version", tool_version);
    app.require_subcommand(1);

    Common c;
    auto add_common = [&](CLI::App* sub, bool with_label) {
        sub->add_option("config", c.config, "run configuration (TOML)")->required();
        sub->add_option("--out", c.out, "output directory (overrides run.output_dir)");
        sub->add_option("--resolution", c.resolution, "lateral cells NX,NY");
        sub->add_option("--tol", c.tol, "linear solver relative tolerance");
        sub->add_option("--workers", c.workers, "parallel solves")->check(CLI::PositiveNumber);
        sub->add_option("--set", c.sets, "override a key: section.key=value")->take_all();
        if (with_label) sub->add_option("--label", c.label, "configuration label from [matrix] (default [scenario])");
    };
    add_common(app.add_subcommand("validate", "check stackups, power maps and scenarios"), false);
    auto* steady = app.add_subcommand("steady", "steady-state solve with heat-map export");
    add_common(steady, true);
    steady->add_flag("--dump-conductance", c.dump_conductance, "write the conductance network as CSV");
    add_common(app.add_subcommand("transient", "transient solve and time to threshold"), true);
    add_common(app.add_subcommand("calibrate", "fit the lid HTC to measurements"), true);
    add_common(app.add_subcommand("matrix", "configuration matrix relative to a baseline"), false);
    add_common(app.add_subcommand("sweep-offset", "offset between tiers"), true);
    add_common(app.add_subcommand("sweep-htc", "lid HTC multipliers"), true);

    std::string floorplan, synth_out;
    auto* synth = app.add_subcommand("synth", "rasterize a floorplan into a power-map CSV");
    synth->add_option("floorplan", floorplan, "floorplan (TOML)")->required();
    synth->add_option("-o,--output", synth_out, "power-map CSV to write")->required();

    std::string manifest, replay_out;
    auto* replay = app.add_subcommand("replay", "re-run a command from its manifest.json");
    replay->add_option("manifest", manifest, "manifest.json of an earlier run")->required();
    replay->add_option("--out", replay_out, "output directory (default: the recorded one)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::validation);
    }

    try {
        if (synth->parsed()) return cmd_synth(floorplan, synth_out, out);
        if (replay->parsed()) return cmd_replay(manifest, replay_out, out, err);
        Invocation inv;
        inv.command = app.get_subcommands().front()->get_name();
        inv.label = c.label;
        inv.dump_conductance = c.dump_conductance;
        LoadOptions lo;
        lo.overrides = overrides_of(c);
        const RunConfig rc = load_run_config(c.config, lo);
        return dispatch(rc, inv, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::io);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::solver);
    }
}

} // namespace thermstack
