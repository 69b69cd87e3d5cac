#pragma once
#include <iosfwd>
#include <string>
#include <vector>

namespace volfn {

// Regularly spaced observations of a d-dimensional path: n+1 rows at times
// t0, t0+mesh, ..., t0+n*mesh. Rows are stored flat, row major.
class ObservationGrid {
public:
    ObservationGrid() = default;
    // values.size() must be a positive multiple of d with at least 2 rows.
    ObservationGrid(int d, double mesh, std::vector<double> values, double origin_time = 0.0);

    int dim() const { return dim_; }
    double mesh() const { return mesh_; }
    double origin_time() const { return origin_; }
    int n() const { return static_cast<int>(values_.size() / dim_) - 1; }
    double horizon() const { return n() * mesh_; }

    double value(int row, int comp) const {
        return values_[static_cast<std::size_t>(row) * dim_ + comp];
    }
    const double* row(int r) const { return values_.data() + static_cast<std::size_t>(r) * dim_; }
    // Increment i (1-based, i = 1..n): X_{t_i} - X_{t_{i-1}}, component comp.
    double increment(int i, int comp) const {
        return value(i, comp) - value(i - 1, comp);
    }
    double increment_norm2(int i) const {
        double s = 0.0;
        for (int c = 0; c < dim_; ++c) {
            double v = increment(i, c);
            s += v * v;
        }
        return s;
    }

    const std::vector<double>& values() const { return values_; }

private:
    int dim_ = 0;
    double mesh_ = 0.0;
    double origin_ = 0.0;
    std::vector<double> values_;
};

// CSV with columns time,X1,...,Xd. A header row is detected by a non-numeric
// first field. Spacing must be regular to relative tolerance 1e-6 of the
// median step; otherwise DataError telling the caller to resample, naming the
// first offending row.
ObservationGrid read_grid_csv(const std::string& path);
ObservationGrid read_grid_csv(std::istream& in, const std::string& origin_label);

void write_grid_csv(const ObservationGrid& grid, const std::string& path);
void write_grid_csv(const ObservationGrid& grid, std::ostream& out);

} // namespace volfn
