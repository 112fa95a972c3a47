#include "thermstack/config.hpp"

#include "thermstack/error.hpp"
#include "thermstack/textio.hpp"

#include <toml.hpp>

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

namespace thermstack {

namespace fs = std::filesystem;

namespace {

/// Typed access to one TOML table that records defaults and rejects unknown keys.
class KeyReader {
public:
    KeyReader(toml::table& table, std::string path, std::vector<std::string>* defaulted)
        : table_(table), path_(std::move(path)), defaulted_(defaulted)
    {
    }

    /// Throws on any key that no accessor asked for.
    void done() const
    {
        for (auto&& [k, v] : table_)
            if (!seen_.count(std::string(k.str())))
                throw ValidationError("unknown key '" + dotted(k.str()) + "'");
    }

    std::string dotted(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

    bool has(std::string_view key)
    {
        seen_.insert(std::string(key));
        return table_.contains(key);
    }

    toml::node* node(std::string_view key)
    {
        seen_.insert(std::string(key));
        return table_.get(key);
    }

    double number(std::string_view key, double fallback)
    {
        if (auto v = opt_number(key)) return *v;
        remember(key, fallback);
        return fallback;
    }

    std::optional<double> opt_number(std::string_view key)
    {
        auto* n = node(key);
        if (!n) return std::nullopt;
        if (!n->is_number()) throw ValidationError("key '" + dotted(key) + "' must be a number");
        return n->value<double>();
    }

    int integer(std::string_view key, int fallback)
    {
        auto* n = node(key);
        if (!n) {
            remember(key, static_cast<int64_t>(fallback));
            return fallback;
        }
        if (!n->is_integer()) throw ValidationError("key '" + dotted(key) + "' must be an integer");
        return static_cast<int>(*n->value<int64_t>());
    }

    std::string string(std::string_view key, const std::string& fallback)
    {
        if (auto v = opt_string(key)) return *v;
        remember(key, fallback);
        return fallback;
    }

    std::optional<std::string> opt_string(std::string_view key)
    {
        auto* n = node(key);
        if (!n) return std::nullopt;
        if (!n->is_string()) throw ValidationError("key '" + dotted(key) + "' must be a string");
        return *n->value<std::string>();
    }

    std::vector<double> numbers(std::string_view key, const std::vector<double>& fallback)
    {
        auto* n = node(key);
        if (!n) {
            toml::array a;
            for (double v : fallback) a.push_back(v);
            remember(key, std::move(a));
            return fallback;
        }
        std::vector<double> out;
        auto* a = n->as_array();
        if (!a) throw ValidationError("key '" + dotted(key) + "' must be an array of numbers");
        for (auto&& e : *a) {
            if (!e.is_number()) throw ValidationError("key '" + dotted(key) + "' must be an array of numbers");
            out.push_back(*e.value<double>());
        }
        return out;
    }

    std::vector<std::string> strings(std::string_view key, const std::vector<std::string>& fallback)
    {
        auto* n = node(key);
        if (!n) {
            toml::array a;
            for (const auto& v : fallback) a.push_back(v);
            remember(key, std::move(a));
            return fallback;
        }
        std::vector<std::string> out;
        auto* a = n->as_array();
        if (!a) throw ValidationError("key '" + dotted(key) + "' must be an array of strings");
        for (auto&& e : *a) {
            if (!e.is_string()) throw ValidationError("key '" + dotted(key) + "' must be an array of strings");
            out.push_back(*e.value<std::string>());
        }
        return out;
    }

    /// Number or two-element array.
    std::pair<double, double> pair(std::string_view key, std::pair<double, double> fallback, bool scalar_is_square)
    {
        auto* n = node(key);
        if (!n) {
            remember(key, toml::array{fallback.first, fallback.second});
            return fallback;
        }
        if (n->is_number()) {
            const double v = *n->value<double>();
            return {v, scalar_is_square ? v : 0.0};
        }
        auto* a = n->as_array();
        if (!a || a->size() != 2 || !a->get(0)->is_number() || !a->get(1)->is_number())
            throw ValidationError("key '" + dotted(key) + "' must be a number or a pair of numbers");
        return {*a->get(0)->value<double>(), *a->get(1)->value<double>()};
    }

    void set(std::string_view key, toml::node&& value) { table_.insert_or_assign(key, std::move(value)); }
    template <typename T>
    void set(std::string_view key, T&& value)
    {
        table_.insert_or_assign(key, std::forward<T>(value));
    }

private:
    template <typename T>
    void remember(std::string_view key, T&& value)
    {
        if (!defaulted_) return;
        table_.insert_or_assign(key, std::forward<T>(value));
        defaulted_->push_back(dotted(key));
    }

    toml::table& table_;
    std::string path_;
    std::vector<std::string>* defaulted_;
    std::set<std::string> seen_;
};

toml::table& subtable(toml::table& parent, std::string_view key, const std::string& where)
{
    if (!parent.contains(key)) parent.insert(key, toml::table{});
    auto* t = parent.get(key)->as_table();
    if (!t) throw ValidationError("'" + where + "' must be a table");
    return *t;
}

toml::table parse_toml(const std::string& text, const std::string& source)
{
    try {
        return toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        throw ParseError(source, static_cast<int>(e.source().begin.line), std::string(e.description()));
    }
}

toml::table parse_toml_file(const fs::path& path)
{
    return parse_toml(textio::read_file(path), path.string());
}

fs::path resolve(const fs::path& base, const fs::path& p)
{
    return (p.is_absolute() ? p : base / p).lexically_normal();
}

fs::path require_file(const fs::path& p, const std::string& what)
{
    if (!fs::is_regular_file(p)) throw ValidationError("missing " + what + " file '" + p.string() + "'");
    return p;
}

Material parse_material(const std::string& name, toml::table& t)
{
    KeyReader s(t, "materials." + name, nullptr);
    Material m;
    m.name = name;
    if (auto k = s.opt_number("k")) {
        if (s.has("k_lateral") || s.has("k_vertical"))
            throw ValidationError("material '" + name + "': give either k or k_lateral/k_vertical");
        m.k_lateral = m.k_vertical = *k;
    } else {
        auto kl = s.opt_number("k_lateral");
        auto kv = s.opt_number("k_vertical");
        if (!kl || !kv) throw ValidationError("material '" + name + "': missing k_lateral/k_vertical");
        m.k_lateral = *kl;
        m.k_vertical = *kv;
    }
    auto c = s.opt_number("volumetric_heat_capacity");
    if (!c) throw ValidationError("material '" + name + "': missing volumetric_heat_capacity");
    m.volumetric_heat_capacity = *c;
    s.done();
    if (auto v = validate_material(m); !v.empty()) throw ValidationError(v.front().message);
    return m;
}

/// Definitions shared by material tables, stackup libraries and run files.
struct Definitions {
    MaterialTable materials;
    std::map<std::string, toml::table, std::less<>> stackups;
    std::optional<std::string> fill;
};

void collect_definitions(toml::table& doc, Definitions& defs, const std::string& source)
{
    if (auto* n = doc.get("materials")) {
        auto* t = n->as_table();
        if (!t) throw ValidationError(source + ": 'materials' must be a table");
        for (auto&& [k, v] : *t) {
            auto* mt = v.as_table();
            if (!mt) throw ValidationError(source + ": material '" + std::string(k.str()) + "' must be a table");
            defs.materials[std::string(k.str())] = parse_material(std::string(k.str()), *mt);
        }
    }
    if (auto* n = doc.get("stackup")) {
        auto* t = n->as_table();
        if (!t) throw ValidationError(source + ": 'stackup' must be a table");
        for (auto&& [k, v] : *t) {
            auto* st = v.as_table();
            if (!st) throw ValidationError(source + ": stackup '" + std::string(k.str()) + "' must be a table");
            defs.stackups[std::string(k.str())] = *st;
        }
    }
    if (auto* n = doc.get("library")) {
        auto* t = n->as_table();
        if (!t) throw ValidationError(source + ": 'library' must be a table");
        KeyReader s(*t, "library", nullptr);
        if (auto f = s.opt_string("fill_material")) defs.fill = *f;
        s.done();
    }
}

const Material& lookup(const MaterialTable& table, const std::string& name, const std::string& where)
{
    auto it = table.find(name);
    if (it == table.end()) throw ValidationError(where + ": unknown material '" + name + "'");
    return it->second;
}

Stackup parse_stackup(const std::string& name, toml::table t, const MaterialTable& materials)
{
    KeyReader s(t, "stackup." + name, nullptr);
    Stackup st;
    auto* n = s.node("layers");
    auto* arr = n ? n->as_array() : nullptr;
    if (!arr) throw ValidationError("stackup '" + name + "': 'layers' must be an array of tables");
    int i = 0;
    for (auto&& e : *arr) {
        auto* lt = e.as_table();
        if (!lt) throw ValidationError("stackup '" + name + "': layer entries must be tables");
        toml::table copy = *lt;
        KeyReader ls(copy, "stackup." + name + ".layers[" + std::to_string(i++) + "]", nullptr);
        Layer l;
        auto lname = ls.opt_string("name");
        if (!lname) throw ValidationError("stackup '" + name + "': layer without a name");
        l.name = *lname;
        const std::string where = "stackup '" + name + "', layer '" + l.name + "'";
        auto th = ls.opt_number("thickness_um");
        if (!th) throw ValidationError(where + ": missing thickness_um");
        l.thickness_um = *th;
        auto mat = ls.opt_string("material");
        if (!mat) throw ValidationError(where + ": missing material");
        l.base = lookup(materials, *mat, where);
        auto role = ls.opt_string("role");
        if (!role) throw ValidationError(where + ": missing role");
        l.role = parse_layer_role(*role);
        l.metal_density = ls.opt_number("metal_density");
        if (auto f = ls.opt_string("fill_material")) l.fill = lookup(materials, *f, where);
        ls.done();
        st.layers.push_back(std::move(l));
    }
    s.done();
    return st;
}

toml::table material_toml(const Material& m)
{
    toml::table t;
    t.insert("k_lateral", m.k_lateral);
    t.insert("k_vertical", m.k_vertical);
    t.insert("volumetric_heat_capacity", m.volumetric_heat_capacity);
    return t;
}

toml::table stackup_toml(const Stackup& s)
{
    toml::array layers;
    for (const auto& l : s.layers) {
        toml::table t;
        t.insert("name", l.name);
        t.insert("thickness_um", l.thickness_um);
        t.insert("material", l.base.name);
        t.insert("role", std::string(to_string(l.role)));
        if (l.metal_density) t.insert("metal_density", *l.metal_density);
        if (l.fill) t.insert("fill_material", l.fill->name);
        layers.push_back(std::move(t));
    }
    toml::table t;
    t.insert("layers", std::move(layers));
    return t;
}

StackConfig parse_stack_config(KeyReader& s, StackConfig c)
{
    c.label = s.string("label", c.label);
    c.topology = parse_topology(s.string("topology", std::string(to_string(c.topology))));
    c.partition = parse_partition(s.string("partition", std::string(to_string(c.partition))));
    c.cpu_count = s.integer("cpu_count", c.cpu_count);
    c.cpu_spacing_um = s.number("spacing_um", c.cpu_spacing_um);
    c.margin_um = s.number("margin_um", c.margin_um);
    auto off = s.pair("offset_um", {c.tier_offset.dx, c.tier_offset.dy}, false);
    c.tier_offset = {off.first, off.second};
    auto pkg = s.pair("package_mm", {c.package_width_mm, c.package_height_mm}, true);
    c.package_width_mm = pkg.first;
    c.package_height_mm = pkg.second;
    c.workload = s.string("workload", c.workload);
    c.bc.htc_top = s.number("htc_top", c.bc.htc_top);
    c.bc.htc_bottom = s.number("htc_bottom", c.bc.htc_bottom);
    c.bc.htc_side = s.number("htc_side", c.bc.htc_side);
    c.bc.ambient_c = s.number("ambient_c", c.bc.ambient_c);
    c.margin_power_fraction = s.number("margin_power_fraction", c.margin_power_fraction);
    c.maxpower_workload = s.string("maxpower_workload", c.maxpower_workload);
    return c;
}

void apply_override(toml::table& doc, const std::string& spec)
{
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects section.key=value, got '" + spec + "'");
    const std::string path = std::string(textio::trim(std::string_view(spec).substr(0, eq)));
    const std::string raw = std::string(textio::trim(std::string_view(spec).substr(eq + 1)));

    std::vector<std::string> parts;
    for (auto p : textio::split(path, '.')) parts.emplace_back(textio::trim(p));
    if (parts.size() < 2 || std::any_of(parts.begin(), parts.end(), [](const auto& p) { return p.empty(); }))
        throw ValidationError("--set key must be section.key, got '" + path + "'");

    toml::table* t = &doc;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) t = &subtable(*t, parts[i], path);

    toml::table value;
    try {
        value = toml::parse("v = " + raw);
    } catch (const toml::parse_error&) {
        value.insert("v", raw); // bare words are strings
    }
    t->insert_or_assign(parts.back(), std::move(*value.get("v")));
}

} // namespace

MaterialTable load_material_table(const fs::path& path)
{
    auto doc = parse_toml_file(require_file(path, "material table"));
    Definitions defs;
    collect_definitions(doc, defs, path.string());
    for (auto&& [k, v] : doc)
        if (k.str() != "materials") throw ValidationError(path.string() + ": unknown section '" + std::string(k.str()) + "'");
    return defs.materials;
}

RunConfig load_run_config(const fs::path& path, const LoadOptions& options)
{
    const auto file = require_file(path, "configuration");
    RunConfig rc = load_run_config_text(textio::read_file(file), fs::absolute(file).parent_path(), file.string(),
                                        options);
    rc.source = file;
    rc.inputs.insert(rc.inputs.begin(), {fs::absolute(file).lexically_normal(), textio::fnv1a_hex(textio::read_file(file))});
    return rc;
}

RunConfig load_run_config_text(const std::string& text, const fs::path& base_dir, const std::string& source,
                               const LoadOptions& options)
{
    RunConfig rc;
    rc.source = source;
    toml::table doc = parse_toml(text, source);
    for (const auto& o : options.overrides) apply_override(doc, o);

    static const std::set<std::string, std::less<>> sections{"run",       "materials", "stackup",   "library",
                                                             "powermaps", "scenario",  "mesh",      "solver",
                                                             "transient", "calibrate", "matrix",    "sweep"};
    for (auto&& [k, v] : doc)
        if (!sections.count(k.str())) throw ValidationError(source + ": unknown section '" + std::string(k.str()) + "'");

    auto* defaulted = &rc.defaulted;
    auto record_input = [&](const fs::path& p) {
        rc.inputs.push_back({p, textio::fnv1a_hex(textio::read_file(p))});
    };

    // [run] and the definition files it points at.
    Definitions defs;
    {
        KeyReader run(subtable(doc, "run", "run"), "run", defaulted);
        rc.name = run.string("name", fs::path(source).stem().string());
        rc.output_dir = resolve(base_dir, run.string("output_dir", "out/" + rc.name));
        run.set("output_dir", rc.output_dir.string());
        rc.workers = run.integer("workers", 1);
        if (rc.workers < 1) throw ValidationError("run.workers must be >= 1");

        std::optional<fs::path> materials_file;
        if (auto m = run.opt_string("materials")) materials_file = resolve(base_dir, *m);
        else if (options.materials_path) materials_file = *options.materials_path;
        else if (const char* env = std::getenv(materials_env_var); env && *env) materials_file = fs::path(env);
        if (materials_file) {
            require_file(*materials_file, "material table");
            auto mdoc = parse_toml_file(*materials_file);
            collect_definitions(mdoc, defs, materials_file->string());
            record_input(*materials_file);
        }
        if (auto lib = run.opt_string("library")) {
            const auto p = require_file(resolve(base_dir, *lib), "stackup library");
            auto ldoc = parse_toml_file(p);
            collect_definitions(ldoc, defs, p.string());
            record_input(p);
        }
        run.done();
        if (auto* t = doc.get_as<toml::table>("run")) {
            t->erase("materials");
            t->erase("library");
        }
    }
    collect_definitions(doc, defs, source);
    rc.materials = defs.materials;
    for (auto& [name, table] : defs.stackups) rc.library.stackups[name] = parse_stackup(name, table, rc.materials);
    if (!defs.fill) throw ValidationError(source + ": library.fill_material is not set");
    rc.library.fill = lookup(rc.materials, *defs.fill, "library.fill_material");

    // Inline every definition so the resolved document stands alone.
    {
        toml::table mats, stacks;
        for (const auto& [name, m] : rc.materials) mats.insert(name, material_toml(m));
        for (const auto& [name, s] : rc.library.stackups) stacks.insert(name, stackup_toml(s));
        doc.insert_or_assign("materials", std::move(mats));
        doc.insert_or_assign("stackup", std::move(stacks));
        toml::table lib;
        lib.insert("fill_material", *defs.fill);
        doc.insert_or_assign("library", std::move(lib));
    }

    // [powermaps.<workload>]
    if (auto* n = doc.get("powermaps")) {
        auto* t = n->as_table();
        if (!t) throw ValidationError("'powermaps' must be a table");
        for (auto&& [wl, v] : *t) {
            auto* wt = v.as_table();
            const std::string where = "powermaps." + std::string(wl.str());
            if (!wt) throw ValidationError("'" + where + "' must be a table");
            KeyReader s(*wt, where, nullptr);
            WorkloadMaps maps;
            auto load = [&](const char* key, std::optional<PowerTileGrid>& slot) {
                auto p = s.opt_string(key);
                if (!p) return;
                const auto file = require_file(resolve(base_dir, *p), "power-map");
                slot = read_power_map(file);
                record_input(file);
                s.set(key, file.string());
            };
            load("cpu", maps.cpu);
            load("logic", maps.logic);
            load("memory", maps.memory);
            s.done();
            rc.maps[std::string(wl.str())] = std::move(maps);
        }
    }

    {
        KeyReader s(subtable(doc, "scenario", "scenario"), "scenario", defaulted);
        rc.scenario = parse_stack_config(s, StackConfig{});
        s.done();
    }
    {
        KeyReader s(subtable(doc, "mesh", "mesh"), "mesh", defaulted);
        const MeshOptions d;
        rc.mesh.nx = s.integer("nx", d.nx);
        rc.mesh.ny = s.integer("ny", d.ny);
        rc.mesh.min_slabs = s.integer("min_slabs", d.min_slabs);
        rc.mesh.max_slabs = s.integer("max_slabs", d.max_slabs);
        rc.mesh.slab_target_um = s.number("slab_target_um", d.slab_target_um);
        rc.mesh.z_refine = s.integer("z_refine", d.z_refine);
        s.done();
    }
    {
        KeyReader s(subtable(doc, "solver", "solver"), "solver", defaulted);
        const SolverOptions d;
        rc.solver.method = parse_solver_method(s.string("method", std::string(to_string(d.method))));
        rc.solver.tolerance = s.number("tolerance", d.tolerance);
        rc.solver.max_iterations = s.integer("max_iterations", d.max_iterations);
        if (!(rc.solver.tolerance > 0.0)) throw ValidationError("solver.tolerance must be positive");
        s.done();
    }
    {
        KeyReader s(subtable(doc, "matrix", "matrix"), "matrix", defaulted);
        rc.matrix.baseline = s.string("baseline", rc.scenario.label);
        rc.matrix.workloads = s.strings("workloads", {rc.scenario.workload});
        if (auto* n = s.node("configs")) {
            auto* arr = n->as_array();
            if (!arr) throw ValidationError("matrix.configs must be an array of tables");
            int i = 0;
            for (auto&& e : *arr) {
                auto* t = e.as_table();
                if (!t) throw ValidationError("matrix.configs entries must be tables");
                KeyReader cs(*t, "matrix.configs[" + std::to_string(i++) + "]", nullptr);
                if (!cs.has("label")) throw ValidationError("matrix.configs entries need a label");
                rc.matrix.configs.push_back(parse_stack_config(cs, rc.scenario));
                cs.done();
            }
            std::set<std::string> labels;
            for (const auto& c : rc.matrix.configs)
                if (!labels.insert(c.label).second)
                    throw ValidationError("matrix.configs: duplicate label '" + c.label + "'");
        }
        s.done();
    }
    {
        KeyReader s(subtable(doc, "transient", "transient"), "transient", defaulted);
        const TransientSettings d;
        rc.transient.duration_s = s.number("duration_s", d.duration_s);
        rc.transient.dt_s = s.number("dt_s", d.dt_s);
        rc.transient.threshold_c = s.opt_number("threshold_c");
        rc.transient.threshold_fraction = s.number("threshold_fraction", d.threshold_fraction);
        rc.transient.region = s.string("region", d.region);
        rc.transient.configs = s.strings("configs", {});
        s.done();
    }
    {
        KeyReader s(subtable(doc, "calibrate", "calibrate"), "calibrate", defaulted);
        const CalibrateSettings d;
        if (auto m = s.opt_string("measurements")) {
            const auto p = require_file(resolve(base_dir, *m), "measurement");
            rc.calibrate.measurements = p;
            record_input(p);
            s.set("measurements", p.string());
        }
        rc.calibrate.htc_lo = s.number("htc_lo", d.htc_lo);
        rc.calibrate.htc_hi = s.number("htc_hi", d.htc_hi);
        rc.calibrate.region = s.string("region", d.region);
        rc.calibrate.log_tolerance = s.number("log_tolerance", d.log_tolerance);
        rc.calibrate.dt_s = s.number("dt_s", d.dt_s);
        s.done();
    }
    {
        KeyReader s(subtable(doc, "sweep", "sweep"), "sweep", defaulted);
        rc.sweep.offsets_um = s.numbers("offsets_um", {0.0, 250.0, 500.0, 750.0, 1000.0});
        rc.sweep.htc_multipliers = s.numbers("htc_multipliers", {1.0, 2.0, 3.0, 4.0});
        rc.sweep.workloads = s.strings("workloads", {rc.scenario.workload});
        s.done();
    }

    std::ostringstream os;
    os << doc << '\n';
    rc.resolved_toml = os.str();
    // Where results go does not change them.
    if (auto* run = doc.get_as<toml::table>("run")) run->erase("output_dir");
    std::ostringstream hashed;
    hashed << doc << '\n';
    rc.config_hash = textio::fnv1a_hex(hashed.str());
    return rc;
}

StudyContext RunConfig::context() const
{
    StudyContext c;
    c.library = library;
    c.maps = maps;
    c.mesh = mesh;
    c.solver = solver;
    c.workers = workers;
    c.config_hash = config_hash;
    return c;
}

const StackConfig& RunConfig::config(std::string_view label) const
{
    for (const auto& c : matrix.configs)
        if (c.label == label) return c;
    if (scenario.label == label) return scenario;
    throw ValidationError("no configuration labelled '" + std::string(label) + "'");
}

Floorplan load_floorplan(const fs::path& path)
{
    auto doc = parse_toml_file(require_file(path, "floorplan"));
    Floorplan fp;
    for (auto&& [k, v] : doc)
        if (k.str() != "grid" && k.str() != "block")
            throw ValidationError(path.string() + ": unknown section '" + std::string(k.str()) + "'");
    {
        auto* t = doc.get_as<toml::table>("grid");
        if (!t) throw ValidationError(path.string() + ": missing [grid]");
        KeyReader s(*t, "grid", nullptr);
        fp.grid.nx = s.integer("nx", 0);
        fp.grid.ny = s.integer("ny", 0);
        fp.grid.pitch_x_um = s.number("pitch_x_um", 0.0);
        fp.grid.pitch_y_um = s.number("pitch_y_um", 0.0);
        auto o = s.pair("origin_um", {0.0, 0.0}, false);
        fp.grid.origin = {o.first, o.second};
        fp.grid.workload = s.string("workload", "");
        if (fp.grid.workload.empty()) throw ValidationError(path.string() + ": grid.workload is required");
        s.done();
    }
    if (auto* arr = doc.get_as<toml::array>("block")) {
        int i = 0;
        for (auto&& e : *arr) {
            auto* t = e.as_table();
            if (!t) throw ValidationError(path.string() + ": block entries must be tables");
            KeyReader s(*t, "block[" + std::to_string(i++) + "]", nullptr);
            FloorplanBlock b;
            b.name = s.string("name", "");
            auto* r = s.node("rect_um");
            auto* ra = r ? r->as_array() : nullptr;
            if (!ra || ra->size() != 4) throw ValidationError(path.string() + ": block '" + b.name + "' needs rect_um = [x0, y0, x1, y1]");
            double c[4];
            for (std::size_t j = 0; j < 4; ++j) {
                if (!ra->get(j)->is_number()) throw ValidationError(path.string() + ": rect_um must hold numbers");
                c[j] = *ra->get(j)->value<double>();
            }
            b.rect = {c[0], c[1], c[2], c[3]};
            b.total_power = s.number("power_w", -1.0);
            b.kind = parse_block_kind(s.string("kind", "logic"));
            if (!b.rect.valid() || b.total_power < 0.0)
                throw ValidationError(path.string() + ": block '" + b.name + "' needs a valid rect and power_w >= 0");
            s.done();
            fp.blocks.push_back(std::move(b));
        }
    }
    return fp;
}

} // namespace thermstack
