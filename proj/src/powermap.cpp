#include "thermstack/powermap.hpp"

#include "thermstack/error.hpp"
#include "thermstack/textio.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace thermstack {

using textio::format_double;

Rect PowerTileGrid::extent() const
{
    return {origin.dx, origin.dy, origin.dx + nx * pitch_x_um, origin.dy + ny * pitch_y_um};
}

Rect PowerTileGrid::tile_rect(int ix, int iy) const
{
    return {origin.dx + ix * pitch_x_um, origin.dy + iy * pitch_y_um, origin.dx + (ix + 1) * pitch_x_um,
            origin.dy + (iy + 1) * pitch_y_um};
}

double PowerTileGrid::total_power() const
{
    // Fixed row-major traversal so the sum is reproducible and matches the writer.
    double sum = 0.0;
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) sum += tile_power(ix, iy);
    return sum;
}

const Eigen::MatrixXd* PowerTileGrid::density_for(std::string_view layer) const
{
    for (const auto& [name, map] : metal_density)
        if (name == layer) return &map;
    return nullptr;
}

void validate(const PowerTileGrid& g)
{
    if (g.nx <= 0 || g.ny <= 0) throw ValidationError("power map: tile counts must be positive");
    if (!(g.pitch_x_um > 0.0) || !(g.pitch_y_um > 0.0)) throw ValidationError("power map: pitches must be positive");
    if (g.tile_power.rows() != g.nx || g.tile_power.cols() != g.ny)
        throw ValidationError("power map: tile array does not match nx x ny");
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const double p = g.tile_power(ix, iy);
            if (!std::isfinite(p) || p < 0.0)
                throw ValidationError("power map: tile (" + std::to_string(ix) + "," + std::to_string(iy) +
                                      ") has negative or non-finite power");
        }
    for (const auto& [name, m] : g.metal_density) {
        if (m.rows() != g.nx || m.cols() != g.ny)
            throw ValidationError("power map: density map '" + name + "' does not match nx x ny");
        if (!(m.array() >= 0.0).all() || !(m.array() <= 1.0).all())
            throw ValidationError("power map: density map '" + name + "' outside [0, 1]");
    }
}

std::string_view to_string(BlockKind kind)
{
    switch (kind) {
    case BlockKind::logic: return "logic";
    case BlockKind::memory: return "memory";
    case BlockKind::slc_margin: return "slc_margin";
    }
    return "logic";
}

BlockKind parse_block_kind(std::string_view name)
{
    if (name == "logic") return BlockKind::logic;
    if (name == "memory") return BlockKind::memory;
    if (name == "slc_margin") return BlockKind::slc_margin;
    throw ValidationError("unknown block kind '" + std::string(name) + "'");
}

namespace {

struct Header {
    std::map<std::string, std::string, std::less<>> kv;
    int line = 0;
};

Header parse_header(std::string_view text, const std::string& source, int line_no)
{
    Header h;
    h.line = line_no;
    std::istringstream ss{std::string(text)};
    std::string tok;
    while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0) throw ParseError(source, line_no, "malformed header token '" + tok + "'");
        const auto key = tok.substr(0, eq);
        static const char* known[] = {"nx",          "ny",          "pitch_x_um", "pitch_y_um",    "origin_x_um",
                                      "origin_y_um", "workload",    "total_w",    "density_layers"};
        bool ok = false;
        for (auto* k : known) ok = ok || key == k;
        if (!ok) throw ParseError(source, line_no, "unknown header key '" + key + "'");
        if (!h.kv.emplace(key, tok.substr(eq + 1)).second)
            throw ParseError(source, line_no, "duplicate header key '" + key + "'");
    }
    return h;
}

const std::string& require(const Header& h, const char* key, const std::string& source)
{
    const auto it = h.kv.find(key);
    if (it == h.kv.end()) throw ParseError(source, h.line, std::string("missing header key '") + key + "'");
    return it->second;
}

} // namespace

PowerTileGrid read_power_map(std::istream& in, const std::string& source)
{
    std::string line;
    int line_no = 0;
    Header header;
    bool have_header = false;
    PowerTileGrid g;
    std::vector<std::string> density_names;
    std::vector<std::vector<bool>> seen;
    long long rows = 0;

    while (std::getline(in, line)) {
        ++line_no;
        const auto t = textio::trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            if (have_header) throw ParseError(source, line_no, "second header line");
            header = parse_header(t.substr(1), source, line_no);
            have_header = true;
            g.nx = static_cast<int>(textio::parse_int(require(header, "nx", source), source, line_no));
            g.ny = static_cast<int>(textio::parse_int(require(header, "ny", source), source, line_no));
            g.pitch_x_um = textio::parse_double(require(header, "pitch_x_um", source), source, line_no);
            g.pitch_y_um = textio::parse_double(require(header, "pitch_y_um", source), source, line_no);
            g.origin.dx = textio::parse_double(require(header, "origin_x_um", source), source, line_no);
            g.origin.dy = textio::parse_double(require(header, "origin_y_um", source), source, line_no);
            g.workload = require(header, "workload", source);
            if (g.nx <= 0 || g.ny <= 0) throw ParseError(source, line_no, "nx and ny must be positive");
            if (!(g.pitch_x_um > 0.0) || !(g.pitch_y_um > 0.0))
                throw ParseError(source, line_no, "pitches must be positive");
            if (auto it = header.kv.find("density_layers"); it != header.kv.end())
                for (auto name : textio::split(it->second, ';')) {
                    if (name.empty()) throw ParseError(source, line_no, "empty density layer name");
                    density_names.emplace_back(name);
                }
            g.tile_power = Eigen::MatrixXd::Zero(g.nx, g.ny);
            for (const auto& name : density_names) g.metal_density.emplace_back(name, Eigen::MatrixXd::Zero(g.nx, g.ny));
            seen.assign(g.nx, std::vector<bool>(g.ny, false));
            continue;
        }
        if (!have_header) throw ParseError(source, line_no, "data row before header");

        const auto fields = textio::split(t);
        if (fields.size() != 3 + density_names.size())
            throw ParseError(source, line_no,
                             "expected " + std::to_string(3 + density_names.size()) + " fields, got " +
                                 std::to_string(fields.size()));
        const auto ix = textio::parse_int(fields[0], source, line_no);
        const auto iy = textio::parse_int(fields[1], source, line_no);
        if (ix < 0 || ix >= g.nx || iy < 0 || iy >= g.ny)
            throw ParseError(source, line_no, "tile index out of range (dimension mismatch)");
        if (seen[ix][iy]) throw ParseError(source, line_no, "duplicate tile");
        seen[ix][iy] = true;
        const double p = textio::parse_double(fields[2], source, line_no);
        if (!std::isfinite(p) || p < 0.0)
            throw ParseError(source, line_no, "row " + std::to_string(line_no) + ": negative or non-finite power");
        g.tile_power(ix, iy) = p;
        for (std::size_t k = 0; k < density_names.size(); ++k) {
            const double d = textio::parse_double(fields[3 + k], source, line_no);
            if (!(d >= 0.0 && d <= 1.0)) throw ParseError(source, line_no, "metal density outside [0, 1]");
            g.metal_density[k].second(ix, iy) = d;
        }
        ++rows;
    }
    if (!have_header) throw ParseError(source, 0, "missing header line");
    const long long expected = static_cast<long long>(g.nx) * g.ny;
    if (rows != expected)
        throw ParseError(source, 0,
                         "dimension mismatch: header declares " + std::to_string(expected) + " tiles, body has " +
                             std::to_string(rows) + " rows");
    if (auto it = header.kv.find("total_w"); it != header.kv.end()) {
        const double declared = textio::parse_double(it->second, source, header.line);
        const double sum = g.total_power();
        if (std::abs(sum - declared) > 1e-9 * std::max(std::abs(declared), 1e-300) && sum != declared)
            throw ParseError(source, header.line,
                             "declared total " + format_double(declared) + " W does not match tile sum " +
                                 format_double(sum) + " W");
    }
    return g;
}

PowerTileGrid read_power_map(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open power map '" + path.string() + "'");
    return read_power_map(in, path.string());
}

void write_power_map(std::ostream& out, const PowerTileGrid& g)
{
    validate(g);
    out << "# nx=" << g.nx << " ny=" << g.ny << " pitch_x_um=" << format_double(g.pitch_x_um)
        << " pitch_y_um=" << format_double(g.pitch_y_um) << " origin_x_um=" << format_double(g.origin.dx)
        << " origin_y_um=" << format_double(g.origin.dy) << " workload=" << g.workload
        << " total_w=" << format_double(g.total_power());
    if (!g.metal_density.empty()) {
        out << " density_layers=";
        for (std::size_t k = 0; k < g.metal_density.size(); ++k) out << (k ? ";" : "") << g.metal_density[k].first;
    }
    out << '\n';
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            out << ix << ',' << iy << ',' << format_double(g.tile_power(ix, iy));
            for (const auto& [name, m] : g.metal_density) out << ',' << format_double(m(ix, iy));
            out << '\n';
        }
}

void write_power_map(const std::filesystem::path& path, const PowerTileGrid& grid)
{
    std::ostringstream os;
    write_power_map(os, grid);
    textio::write_file(path, os.str());
}

PowerTileGrid synthesize_power_map(const std::vector<FloorplanBlock>& blocks, const GridSpec& spec)
{
    PowerTileGrid g;
    g.nx = spec.nx;
    g.ny = spec.ny;
    g.pitch_x_um = spec.pitch_x_um;
    g.pitch_y_um = spec.pitch_y_um;
    g.origin = spec.origin;
    g.workload = spec.workload;
    if (g.nx <= 0 || g.ny <= 0 || !(g.pitch_x_um > 0.0) || !(g.pitch_y_um > 0.0))
        throw ValidationError("synthesize_power_map: invalid grid spec");
    g.tile_power = Eigen::MatrixXd::Zero(g.nx, g.ny);

    const Rect ext = g.extent();
    for (const auto& b : blocks) {
        if (!b.rect.valid()) throw ValidationError("block '" + b.name + "': degenerate rectangle");
        if (!(b.total_power >= 0.0) || !std::isfinite(b.total_power))
            throw ValidationError("block '" + b.name + "': negative or non-finite power");
        if (!ext.contains(b.rect)) throw PlacementError("block '" + b.name + "' lies outside the grid extent");
        for_each_overlap(b.rect, g.origin, g.pitch_x_um, g.pitch_y_um, g.nx, g.ny,
                         [&](int ix, int iy, double share) { g.tile_power(ix, iy) += share * b.total_power; });
    }
    return g;
}

PowerTileGrid place_power_map(const PowerTileGrid& grid, Offset offset)
{
    PowerTileGrid out = grid;
    out.origin = grid.origin + offset;
    return out;
}

PowerTileGrid scaled(const PowerTileGrid& grid, double factor)
{
    if (!(factor >= 0.0) || !std::isfinite(factor)) throw DomainError("power scale factor must be non-negative");
    PowerTileGrid out = grid;
    out.tile_power *= factor;
    return out;
}

PowerDensityStats power_density_stats(const PowerTileGrid& grid)
{
    const double tile_mm2 = grid.tile_area_um2() * 1e-6;
    PowerDensityStats s;
    s.total_power = grid.total_power();
    s.max_density = grid.tile_power.size() ? grid.tile_power.maxCoeff() / tile_mm2 : 0.0;
    s.avg_density = s.total_power / (grid.extent().area() * 1e-6);
    return s;
}

PowerDensityStats footprint_density_stats(const std::vector<PowerTileGrid>& grids)
{
    if (grids.empty()) return {};
    if (grids.size() == 1) return power_density_stats(grids.front());

    double px = grids.front().pitch_x_um, py = grids.front().pitch_y_um;
    Rect box = grids.front().extent();
    for (const auto& g : grids) {
        px = std::min(px, g.pitch_x_um);
        py = std::min(py, g.pitch_y_um);
        const Rect e = g.extent();
        box = {std::min(box.x0, e.x0), std::min(box.y0, e.y0), std::max(box.x1, e.x1), std::max(box.y1, e.y1)};
    }
    GridSpec spec;
    spec.nx = std::max(1, static_cast<int>(std::ceil(box.width() / px - 1e-9)));
    spec.ny = std::max(1, static_cast<int>(std::ceil(box.height() / py - 1e-9)));
    spec.pitch_x_um = px;
    spec.pitch_y_um = py;
    spec.origin = {box.x0, box.y0};

    PowerTileGrid sum;
    sum.nx = spec.nx;
    sum.ny = spec.ny;
    sum.pitch_x_um = px;
    sum.pitch_y_um = py;
    sum.origin = spec.origin;
    sum.tile_power = Eigen::MatrixXd::Zero(sum.nx, sum.ny);
    for (const auto& g : grids)
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                const double p = g.tile_power(ix, iy);
                if (p == 0.0) continue;
                for_each_overlap(g.tile_rect(ix, iy), sum.origin, px, py, sum.nx, sum.ny,
                                 [&](int jx, int jy, double share) { sum.tile_power(jx, jy) += share * p; });
            }
    PowerDensityStats s = power_density_stats(sum);
    s.avg_density = s.total_power / (box.area() * 1e-6);
    return s;
}

} // namespace thermstack
