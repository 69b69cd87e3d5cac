#include "volfn/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "volfn/errors.hpp"

namespace volfn {

ObservationGrid::ObservationGrid(int d, double mesh, std::vector<double> values, double origin_time)
    : dim_(d), mesh_(mesh), origin_(origin_time), values_(std::move(values)) {
    if (d < 1) throw DataError("observation grid: dimension must be >= 1");
    if (!(mesh > 0.0) || !std::isfinite(mesh))
        throw DataError("observation grid: mesh must be positive and finite");
    if (values_.size() % static_cast<std::size_t>(d) != 0)
        throw DataError("observation grid: value buffer size is not a multiple of the dimension");
    if (values_.size() < 2 * static_cast<std::size_t>(d))
        throw DataError("observation grid: need at least 2 rows (1 increment)");
    for (std::size_t i = 0; i < values_.size(); ++i)
        if (!std::isfinite(values_[i]))
            throw DataError("observation grid: non-finite value at row " +
                            std::to_string(i / static_cast<std::size_t>(d)) + ", column " +
                            std::to_string(i % static_cast<std::size_t>(d)));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const char* b = s.c_str();
    char* end = nullptr;
    out = std::strtod(b, &end);
    if (end == b) return false;
    while (*end == ' ' || *end == '\t') ++end;
    return *end == '\0';
}

} // namespace

ObservationGrid read_grid_csv(std::istream& in, const std::string& origin_label) {
    std::string line;
    std::vector<double> times;
    std::vector<double> values;
    int dim = -1;
    std::size_t lineno = 0;
    bool header_checked = false;

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (!header_checked) {
            header_checked = true;
            double probe;
            if (!parse_double(fields[0], probe)) continue; // header row
        }
        if (dim < 0) {
            dim = static_cast<int>(fields.size()) - 1;
            if (dim < 1)
                throw DataError(origin_label + ": line " + std::to_string(lineno) +
                                ": need a time column plus at least one component");
        } else if (static_cast<int>(fields.size()) != dim + 1) {
            throw DataError(origin_label + ": line " + std::to_string(lineno) + ": expected " +
                            std::to_string(dim + 1) + " columns, got " +
                            std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v;
            if (!parse_double(fields[c], v) || !std::isfinite(v))
                throw DataError(origin_label + ": line " + std::to_string(lineno) + ", column " +
                                std::to_string(c + 1) + ": cannot parse '" + fields[c] + "'");
            if (c == 0)
                times.push_back(v);
            else
                values.push_back(v);
        }
    }
    if (times.size() < 2)
        throw DataError(origin_label + ": need at least 2 observation rows, got " +
                        std::to_string(times.size()));

    const std::size_t n = times.size() - 1;
    std::vector<double> steps(n);
    for (std::size_t i = 0; i < n; ++i) {
        steps[i] = times[i + 1] - times[i];
        if (!(steps[i] > 0.0))
            throw DataError(origin_label + ": times are not strictly increasing at row " +
                            std::to_string(i + 1));
    }
    std::vector<double> sorted = steps;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double mesh = sorted[sorted.size() / 2];
    for (std::size_t i = 0; i < n; ++i) {
        if (std::fabs(steps[i] - mesh) > 1e-6 * mesh)
            throw DataError(origin_label + ": irregular spacing at observation " +
                            std::to_string(i + 1) + " (step " + std::to_string(steps[i]) +
                            " vs mesh " + std::to_string(mesh) +
                            "); resample to a regular grid before estimating");
    }
    return ObservationGrid(dim, mesh, std::move(values), times.front());
}

ObservationGrid read_grid_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "' for reading");
    return read_grid_csv(in, path);
}

void write_grid_csv(const ObservationGrid& grid, std::ostream& out) {
    out << "time";
    for (int c = 1; c <= grid.dim(); ++c) out << ",X" << c;
    out << "\n";
    char buf[40];
    for (int r = 0; r <= grid.n(); ++r) {
        std::snprintf(buf, sizeof buf, "%.17g", grid.origin_time() + r * grid.mesh());
        out << buf;
        for (int c = 0; c < grid.dim(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", grid.value(r, c));
            out << ',' << buf;
        }
        out << "\n";
    }
}

void write_grid_csv(const ObservationGrid& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    write_grid_csv(grid, out);
    if (!out.good()) throw DataError("failed while writing '" + path + "'");
}

} // namespace volfn
