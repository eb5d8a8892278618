#pragma once

#include <fftw3.h>

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "constrank/errors.hpp"
#include "constrank/multiindex.hpp"

namespace constrank {

struct GridSpec {
    int dim_n = 0;
    int points_per_axis = 0;
    double period = 1.0;

    static constexpr int64_t kMaxPoints = int64_t(1) << 24;

    void validate() const {
        if (dim_n < 1 || dim_n > kMaxDim) throw ConfigError("grid dim_n must be 1..3");
        int n = points_per_axis;
        if (n < 8 || (n & (n - 1)) != 0)
            throw ConfigError("points_per_axis must be a power of two >= 8");
        if (total_points() > kMaxPoints) throw ConfigError("grid exceeds the point budget");
        if (!(period > 0)) throw ConfigError("period must be positive");
    }

    int64_t total_points() const {
        int64_t t = 1;
        for (int i = 0; i < dim_n; ++i) t *= points_per_axis;
        return t;
    }

    double cell() const { return period / points_per_axis; }
    double cell_volume() const {
        double v = 1.0;
        for (int i = 0; i < dim_n; ++i) v *= cell();
        return v;
    }
    double volume() const {
        double v = 1.0;
        for (int i = 0; i < dim_n; ++i) v *= period;
        return v;
    }

    std::array<int, kMaxDim> site_coords(int64_t site) const {
        std::array<int, kMaxDim> c{0, 0, 0};
        for (int i = dim_n - 1; i >= 0; --i) {
            c[size_t(i)] = static_cast<int>(site % points_per_axis);
            site /= points_per_axis;
        }
        return c;
    }

    Eigen::VectorXd site_point(int64_t site) const {
        auto c = site_coords(site);
        Eigen::VectorXd x(dim_n);
        for (int i = 0; i < dim_n; ++i) x[i] = c[size_t(i)] * cell();
        return x;
    }

    /// Signed integer frequency of a site in the spectral layout;
    /// the index N/2 is the (self-conjugate) Nyquist mode -N/2.
    std::array<int, kMaxDim> site_freq(int64_t site) const {
        auto c = site_coords(site);
        std::array<int, kMaxDim> m{0, 0, 0};
        for (int i = 0; i < dim_n; ++i)
            m[size_t(i)] = c[size_t(i)] <= points_per_axis / 2 ? c[size_t(i)]
                                                               : c[size_t(i)] - points_per_axis;
        return m;
    }

    bool freq_is_nyquist(const std::array<int, kMaxDim>& m) const {
        for (int i = 0; i < dim_n; ++i)
            if (m[size_t(i)] == -points_per_axis / 2 || m[size_t(i)] == points_per_axis / 2)
                return true;
        return false;
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

namespace detail {

/// Component-wise complex FFT through FFTW. ESTIMATE plans keep results
/// bit-reproducible across runs; plans are cached per (dims, sign).
class Fft {
  public:
    static Fft& instance() {
        static Fft fft;
        return fft;
    }

    void transform(const GridSpec& grid, std::complex<double>* data, int sign) {
        fftw_plan plan = plan_for(grid, sign);
        fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(data),
                         reinterpret_cast<fftw_complex*>(data));
    }

  private:
    Fft() = default;

    fftw_plan plan_for(const GridSpec& grid, int sign) {
        std::array<int, 4> key{grid.dim_n, grid.points_per_axis, sign, 0};
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        // plan on a scratch buffer, execute on caller arrays (same layout,
        // FFTW_ESTIMATE tolerates differing alignment via UNALIGNED)
        std::vector<std::complex<double>> scratch(static_cast<size_t>(grid.total_points()));
        int dims[kMaxDim];
        for (int i = 0; i < grid.dim_n; ++i) dims[i] = grid.points_per_axis;
        fftw_plan p = fftw_plan_dft(grid.dim_n, dims,
                                    reinterpret_cast<fftw_complex*>(scratch.data()),
                                    reinterpret_cast<fftw_complex*>(scratch.data()), sign,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, p);
        return p;
    }

    std::map<std::array<int, 4>, fftw_plan> plans_;
};

}  // namespace detail

/// Real vector field sampled on the torus grid, fiber-fastest layout,
/// with lazily cached Fourier coefficients (normalized so that
/// f(x) = sum_m fhat(m) exp(2 pi i m.x / period)). Value semantics;
/// nothing mutates in place.
class PeriodicField {
  public:
    PeriodicField() = default;
    PeriodicField(GridSpec grid, int fiber_dim, std::vector<double> values)
        : grid_(grid), fiber_(fiber_dim), values_(std::move(values)) {
        grid_.validate();
        if (static_cast<int64_t>(values_.size()) != grid_.total_points() * fiber_)
            throw ShapeMismatch("field storage size");
    }

    static PeriodicField zero(const GridSpec& grid, int fiber_dim) {
        return PeriodicField(grid, fiber_dim,
                             std::vector<double>(static_cast<size_t>(grid.total_points()) *
                                                 static_cast<size_t>(fiber_dim)));
    }

    static PeriodicField constant(const GridSpec& grid, const Eigen::VectorXd& value) {
        PeriodicField f = zero(grid, static_cast<int>(value.size()));
        for (int64_t s = 0; s < grid.total_points(); ++s)
            for (int c = 0; c < f.fiber_; ++c) f.values_[f.index(s, c)] = value[c];
        return f;
    }

    static PeriodicField from_function(
        const GridSpec& grid, int fiber_dim,
        const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn) {
        PeriodicField f = zero(grid, fiber_dim);
        for (int64_t s = 0; s < grid.total_points(); ++s) {
            Eigen::VectorXd v = fn(grid.site_point(s));
            for (int c = 0; c < fiber_dim; ++c) f.values_[f.index(s, c)] = v[c];
        }
        return f;
    }

    /// Inverse transform of given coefficients; the residual imaginary part
    /// is dropped (inputs are expected conjugate-symmetric).
    static PeriodicField from_spectrum(const GridSpec& grid, int fiber_dim,
                                       const std::vector<std::complex<double>>& spec) {
        const int64_t total = grid.total_points();
        if (static_cast<int64_t>(spec.size()) != total * fiber_dim)
            throw ShapeMismatch("spectrum storage size");
        PeriodicField f = zero(grid, fiber_dim);
        std::vector<std::complex<double>> buf(static_cast<size_t>(total));
        for (int c = 0; c < fiber_dim; ++c) {
            for (int64_t s = 0; s < total; ++s) buf[size_t(s)] = spec[size_t(s * fiber_dim + c)];
            detail::Fft::instance().transform(grid, buf.data(), FFTW_BACKWARD);
            for (int64_t s = 0; s < total; ++s) f.values_[f.index(s, c)] = buf[size_t(s)].real();
        }
        return f;
    }

    const GridSpec& grid() const { return grid_; }
    int fiber_dim() const { return fiber_; }
    const std::vector<double>& values() const { return values_; }

    size_t index(int64_t site, int comp) const {
        return static_cast<size_t>(site) * static_cast<size_t>(fiber_) +
               static_cast<size_t>(comp);
    }

    double value(int64_t site, int comp) const { return values_[index(site, comp)]; }

    Eigen::VectorXd at_site(int64_t site) const {
        Eigen::VectorXd v(fiber_);
        for (int c = 0; c < fiber_; ++c) v[c] = values_[index(site, c)];
        return v;
    }

    /// Fourier coefficients, computed once and shared between copies.
    const std::vector<std::complex<double>>& spectrum() const {
        if (!spectrum_) {
            const int64_t total = grid_.total_points();
            auto spec = std::make_shared<std::vector<std::complex<double>>>(
                static_cast<size_t>(total * fiber_));
            std::vector<std::complex<double>> buf(static_cast<size_t>(total));
            const double norm = 1.0 / static_cast<double>(total);
            for (int c = 0; c < fiber_; ++c) {
                for (int64_t s = 0; s < total; ++s) buf[size_t(s)] = values_[index(s, c)];
                detail::Fft::instance().transform(grid_, buf.data(), FFTW_FORWARD);
                for (int64_t s = 0; s < total; ++s)
                    (*spec)[size_t(s * fiber_ + c)] = buf[size_t(s)] * norm;
            }
            spectrum_ = std::move(spec);
        }
        return *spectrum_;
    }

    Eigen::VectorXd mean() const {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(fiber_);
        for (int64_t s = 0; s < grid_.total_points(); ++s)
            for (int c = 0; c < fiber_; ++c) m[c] += values_[index(s, c)];
        return m / static_cast<double>(grid_.total_points());
    }

    double l2_norm() const {
        double acc = 0;
        for (double v : values_) acc += v * v;
        return std::sqrt(acc * grid_.cell_volume());
    }

    double sup_norm() const {
        double m = 0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    double dot(const PeriodicField& o) const {
        check_same_shape(o);
        double acc = 0;
        for (size_t i = 0; i < values_.size(); ++i) acc += values_[i] * o.values_[i];
        return acc * grid_.cell_volume();
    }

    PeriodicField operator+(const PeriodicField& o) const {
        check_same_shape(o);
        std::vector<double> v(values_.size());
        for (size_t i = 0; i < v.size(); ++i) v[i] = values_[i] + o.values_[i];
        return PeriodicField(grid_, fiber_, std::move(v));
    }

    PeriodicField operator-(const PeriodicField& o) const {
        check_same_shape(o);
        std::vector<double> v(values_.size());
        for (size_t i = 0; i < v.size(); ++i) v[i] = values_[i] - o.values_[i];
        return PeriodicField(grid_, fiber_, std::move(v));
    }

    PeriodicField operator*(double a) const {
        std::vector<double> v(values_.size());
        for (size_t i = 0; i < v.size(); ++i) v[i] = a * values_[i];
        return PeriodicField(grid_, fiber_, std::move(v));
    }

    PeriodicField shifted_mean(const Eigen::VectorXd& target_mean) const {
        Eigen::VectorXd d = target_mean - mean();
        std::vector<double> v(values_.size());
        for (int64_t s = 0; s < grid_.total_points(); ++s)
            for (int c = 0; c < fiber_; ++c) v[index(s, c)] = values_[index(s, c)] + d[c];
        return PeriodicField(grid_, fiber_, std::move(v));
    }

  private:
    void check_same_shape(const PeriodicField& o) const {
        if (!(grid_ == o.grid_) || fiber_ != o.fiber_)
            throw ShapeMismatch("field shapes differ");
    }

    GridSpec grid_;
    int fiber_ = 0;
    std::vector<double> values_;
    mutable std::shared_ptr<const std::vector<std::complex<double>>> spectrum_;
};

inline PeriodicField operator*(double a, const PeriodicField& f) { return f * a; }

// ---------------------------------------------------------------------------
// Dump format: one JSON header line, then the raw little-endian doubles.
// ---------------------------------------------------------------------------

inline void save_field(const PeriodicField& f, const std::string& path) {
    nlohmann::json header;
    header["dim_n"] = f.grid().dim_n;
    header["points_per_axis"] = f.grid().points_per_axis;
    header["period"] = f.grid().period;
    header["fiber_dim"] = f.fiber_dim();
    header["layout"] = "row-major, fiber-fastest";
    header["dtype"] = "float64-le";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << header.dump() << "\n";
    out.write(reinterpret_cast<const char*>(f.values().data()),
              static_cast<std::streamsize>(f.values().size() * sizeof(double)));
}

inline PeriodicField load_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open field file: " + path);
    std::string line;
    std::getline(in, line);
    nlohmann::json header = nlohmann::json::parse(line);
    GridSpec grid{header.at("dim_n").get<int>(), header.at("points_per_axis").get<int>(),
                  header.at("period").get<double>()};
    int fiber = header.at("fiber_dim").get<int>();
    std::vector<double> vals(static_cast<size_t>(grid.total_points()) * size_t(fiber));
    in.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
    if (!in) throw ConfigError("truncated field file: " + path);
    return PeriodicField(grid, fiber, std::move(vals));
}

/// CSV slice along one axis through a base point (other coordinates fixed
/// at index 0): columns x, v_0..v_{fiber-1}.
inline void export_csv_slice(const PeriodicField& f, const std::string& path, int axis = 0) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << "x";
    for (int c = 0; c < f.fiber_dim(); ++c) out << ",v" << c;
    out << "\n";
    const auto& g = f.grid();
    out.precision(17);
    for (int i = 0; i < g.points_per_axis; ++i) {
        int64_t site = 0;
        for (int d = 0; d < g.dim_n; ++d)
            site = site * g.points_per_axis + (d == axis ? i : 0);
        out << i * g.cell();
        for (int c = 0; c < f.fiber_dim(); ++c) out << "," << f.value(site, c);
        out << "\n";
    }
}

}  // namespace constrank
