#pragma once

// Posterior summaries: mean/std table, Gaussian KDE on prior-spanning grids,
// and a corner-plot export (CSV panels plus one SVG figure).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "vehid/errors.hpp"
#include "vehid/inference.hpp"

namespace vehid {

struct PosteriorRow {
    std::string name;
    std::optional<double> truth;
    double mean = 0.0;
    double std = 0.0;
    double prior_lower = 0.0;
    double prior_upper = 0.0;
};

using PosteriorTable = std::vector<PosteriorRow>;

/// Per-column sample mean and (n-1) standard deviation of an n x d sample matrix.
inline PosteriorTable posterior_table(const Eigen::MatrixXd& samples, const PriorBox& box,
                                      std::span<const std::string> names,
                                      const std::optional<Eigen::VectorXd>& truth = std::nullopt)
{
    const Eigen::Index n = samples.rows();
    const Eigen::Index d = samples.cols();
    if (n < 2) throw InvalidParameter("posterior table needs at least two samples");
    if (static_cast<std::size_t>(d) != box.dim() || names.size() != box.dim()) {
        throw InvalidParameter("sample, prior and name dimensions differ");
    }
    if (truth && truth->size() != d) throw InvalidParameter("truth has the wrong dimension");
    PosteriorTable table;
    for (Eigen::Index i = 0; i < d; ++i) {
        PosteriorRow row;
        row.name = names[static_cast<std::size_t>(i)];
        if (truth) row.truth = (*truth)[i];
        row.mean = samples.col(i).mean();
        row.std = std::sqrt((samples.col(i).array() - row.mean).square().sum() / static_cast<double>(n - 1));
        row.prior_lower = box.lower[static_cast<std::size_t>(i)];
        row.prior_upper = box.upper[static_cast<std::size_t>(i)];
        table.push_back(std::move(row));
    }
    return table;
}

/// Evenly spaced grid including both ends.
inline std::vector<double> linear_grid(double lo, double hi, std::size_t n)
{
    if (n < 2 || !(hi > lo)) throw InvalidParameter("grid needs n >= 2 and hi > lo");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    g.back() = hi;
    return g;
}

namespace detail {

inline double sample_std(std::span<const double> x)
{
    if (x.size() < 2) throw InvalidParameter("KDE needs at least two samples");
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

/// Scott's rule h = sigma * n^(-1/(d+4)).
inline double scott_bandwidth(std::span<const double> x, int dims)
{
    const double s = sample_std(x);
    if (!(s > 0.0)) {
        throw InvalidParameter("samples have zero spread; KDE is undefined, use the table output only");
    }
    return s * std::pow(static_cast<double>(x.size()), -1.0 / (dims + 4));
}

}  // namespace detail

struct Kde1d {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
};

struct Kde2d {
    std::vector<double> grid_x;
    std::vector<double> grid_y;
    Eigen::MatrixXd density;   // grid_x.size() x grid_y.size()
    double bandwidth_x = 0.0;
    double bandwidth_y = 0.0;
};

/// Gaussian KDE; Scott's-rule bandwidth unless one is given.
inline Kde1d kde_1d(std::span<const double> samples, std::vector<double> grid,
                    std::optional<double> bandwidth = std::nullopt)
{
    if (samples.empty()) throw InvalidParameter("KDE needs samples");
    Kde1d out;
    out.bandwidth = bandwidth ? *bandwidth : detail::scott_bandwidth(samples, 1);
    if (!(out.bandwidth > 0.0)) throw InvalidParameter("bandwidth must be positive");
    const double h = out.bandwidth;
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    out.density.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double s = 0.0;
        for (double x : samples) {
            const double u = (grid[g] - x) / h;
            s += std::exp(-0.5 * u * u);
        }
        out.density[g] = s * norm;
    }
    out.grid = std::move(grid);
    return out;
}

/// Product-kernel Gaussian KDE of paired samples on a rectangular grid.
inline Kde2d kde_2d(std::span<const double> xs, std::span<const double> ys, std::vector<double> grid_x,
                    std::vector<double> grid_y)
{
    if (xs.size() != ys.size()) throw InvalidParameter("paired samples differ in length");
    Kde2d out;
    out.bandwidth_x = detail::scott_bandwidth(xs, 2);
    out.bandwidth_y = detail::scott_bandwidth(ys, 2);
    const double hx = out.bandwidth_x;
    const double hy = out.bandwidth_y;
    const std::size_t n = xs.size();
    // Separable kernel: precompute per-sample factors on each axis.
    Eigen::MatrixXd kx(static_cast<Eigen::Index>(grid_x.size()), static_cast<Eigen::Index>(n));
    Eigen::MatrixXd ky(static_cast<Eigen::Index>(grid_y.size()), static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t g = 0; g < grid_x.size(); ++g) {
            const double u = (grid_x[g] - xs[s]) / hx;
            kx(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(s)) = std::exp(-0.5 * u * u);
        }
        for (std::size_t g = 0; g < grid_y.size(); ++g) {
            const double u = (grid_y[g] - ys[s]) / hy;
            ky(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(s)) = std::exp(-0.5 * u * u);
        }
    }
    out.density = kx * ky.transpose() / (static_cast<double>(n) * 2.0 * std::numbers::pi * hx * hy);
    out.grid_x = std::move(grid_x);
    out.grid_y = std::move(grid_y);
    return out;
}

struct KdeGrid {
    std::vector<Kde1d> marginals;
    std::vector<std::pair<std::size_t, std::size_t>> pair_index;   // (i, j), i < j
    std::vector<Kde2d> pairs;                                      // x = param i, y = param j
};

inline constexpr std::size_t kMarginalGridPoints = 200;
inline constexpr std::size_t kPairGridPoints = 50;

/// Marginal and pairwise KDEs on grids spanning the prior box.
inline KdeGrid kde_grid(const Eigen::MatrixXd& samples, const PriorBox& box)
{
    const auto d = static_cast<std::size_t>(samples.cols());
    if (d != box.dim()) throw InvalidParameter("sample and prior dimensions differ");
    std::vector<std::vector<double>> cols(d);
    for (std::size_t i = 0; i < d; ++i) {
        const auto c = samples.col(static_cast<Eigen::Index>(i));
        cols[i].assign(c.data(), c.data() + c.size());
    }
    KdeGrid out;
    for (std::size_t i = 0; i < d; ++i) {
        out.marginals.push_back(kde_1d(cols[i], linear_grid(box.lower[i], box.upper[i], kMarginalGridPoints)));
    }
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            out.pair_index.emplace_back(i, j);
            out.pairs.push_back(kde_2d(cols[i], cols[j], linear_grid(box.lower[i], box.upper[i], kPairGridPoints),
                                       linear_grid(box.lower[j], box.upper[j], kPairGridPoints)));
        }
    }
    return out;
}

/// Affine map of a data interval onto a pixel interval.
struct PanelAxis {
    double lo = 0.0;
    double hi = 1.0;
    double px0 = 0.0;
    double px1 = 1.0;

    [[nodiscard]] double map(double v) const { return px0 + (v - lo) / (hi - lo) * (px1 - px0); }
};

struct CornerLayout {
    double panel = 130.0;
    double gap = 10.0;
    double margin = 60.0;

    /// Horizontal axis of column `col` for the interval [lo, hi].
    [[nodiscard]] PanelAxis x_axis(std::size_t col, double lo, double hi) const
    {
        const double x0 = margin + static_cast<double>(col) * (panel + gap);
        return {lo, hi, x0, x0 + panel};
    }

    /// Vertical axis of row `row`; larger values sit higher.
    [[nodiscard]] PanelAxis y_axis(std::size_t row, double lo, double hi) const
    {
        const double y0 = margin + static_cast<double>(row) * (panel + gap);
        return {lo, hi, y0 + panel, y0};
    }

    [[nodiscard]] double extent(std::size_t d) const
    {
        return 2.0 * margin + static_cast<double>(d) * panel + static_cast<double>(d - 1) * gap;
    }
};

namespace detail {

inline std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string px(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << content;
    if (!f.good()) throw IoError("write failed for " + path.string());
}

/// White-to-blue ramp for t in [0, 1].
inline std::string heat_color(double t)
{
    t = std::clamp(t, 0.0, 1.0);
    const auto r = static_cast<int>(std::lround(255.0 * (1.0 - 0.85 * t)));
    const auto g = static_cast<int>(std::lround(255.0 * (1.0 - 0.65 * t)));
    const auto b = static_cast<int>(std::lround(255.0 * (1.0 - 0.25 * t)));
    return "rgb(" + std::to_string(r) + "," + std::to_string(g) + "," + std::to_string(b) + ")";
}

}  // namespace detail

/// Corner-plot SVG: marginals on the diagonal with truth lines, pairwise
/// density heatmaps below it with truth markers.
inline std::string corner_svg(const KdeGrid& kde, const PriorBox& box, std::span<const std::string> names,
                              const std::optional<Eigen::VectorXd>& truth, const CornerLayout& layout = {})
{
    const std::size_t d = box.dim();
    const double size = layout.extent(d);
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::px(size) << "\" height=\""
      << detail::px(size) << "\" viewBox=\"0 0 " << detail::px(size) << ' ' << detail::px(size) << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (std::size_t i = 0; i < d; ++i) {
        const Kde1d& m = kde.marginals[i];
        const double peak = *std::max_element(m.density.begin(), m.density.end());
        const PanelAxis ax = layout.x_axis(i, box.lower[i], box.upper[i]);
        const PanelAxis ay = layout.y_axis(i, 0.0, peak > 0.0 ? 1.05 * peak : 1.0);
        s << "<g id=\"diag-" << names[i] << "\">\n";
        s << "<rect x=\"" << detail::px(ax.px0) << "\" y=\"" << detail::px(ay.px1) << "\" width=\""
          << detail::px(layout.panel) << "\" height=\"" << detail::px(layout.panel)
          << "\" fill=\"none\" stroke=\"black\"/>\n";
        s << "<polyline fill=\"none\" stroke=\"navy\" points=\"";
        for (std::size_t g = 0; g < m.grid.size(); ++g) {
            s << (g ? " " : "") << detail::px(ax.map(m.grid[g])) << ',' << detail::px(ay.map(m.density[g]));
        }
        s << "\"/>\n";
        if (truth && box.contains(*truth)) {
            const double x = ax.map((*truth)[static_cast<Eigen::Index>(i)]);
            s << "<line class=\"truth\" x1=\"" << detail::px(x) << "\" y1=\"" << detail::px(ay.px1) << "\" x2=\""
              << detail::px(x) << "\" y2=\"" << detail::px(ay.px0) << "\" stroke=\"red\"/>\n";
        }
        s << "</g>\n";
    }

    for (std::size_t k = 0; k < kde.pairs.size(); ++k) {
        const auto [i, j] = kde.pair_index[k];
        const Kde2d& p = kde.pairs[k];
        // Row j, column i: horizontal axis is parameter i, vertical is j.
        const PanelAxis ax = layout.x_axis(i, box.lower[i], box.upper[i]);
        const PanelAxis ay = layout.y_axis(j, box.lower[j], box.upper[j]);
        const double peak = p.density.maxCoeff();
        const double cw = layout.panel / static_cast<double>(p.grid_x.size());
        const double ch = layout.panel / static_cast<double>(p.grid_y.size());
        s << "<g id=\"pair-" << names[i] << '-' << names[j] << "\">\n";
        for (Eigen::Index a = 0; a < p.density.rows(); ++a) {
            for (Eigen::Index b = 0; b < p.density.cols(); ++b) {
                const double t = peak > 0.0 ? p.density(a, b) / peak : 0.0;
                if (t < 0.01) continue;
                s << "<rect x=\"" << detail::px(ax.px0 + static_cast<double>(a) * cw) << "\" y=\""
                  << detail::px(ay.px0 - static_cast<double>(b + 1) * ch) << "\" width=\"" << detail::px(cw)
                  << "\" height=\"" << detail::px(ch) << "\" fill=\"" << detail::heat_color(t) << "\"/>\n";
            }
        }
        s << "<rect x=\"" << detail::px(ax.px0) << "\" y=\"" << detail::px(ay.px1) << "\" width=\""
          << detail::px(layout.panel) << "\" height=\"" << detail::px(layout.panel)
          << "\" fill=\"none\" stroke=\"black\"/>\n";
        if (truth && box.contains(*truth)) {
            s << "<circle class=\"truth\" cx=\"" << detail::px(ax.map((*truth)[static_cast<Eigen::Index>(i)]))
              << "\" cy=\"" << detail::px(ay.map((*truth)[static_cast<Eigen::Index>(j)]))
              << "\" r=\"3\" fill=\"red\"/>\n";
        }
        s << "</g>\n";
    }

    for (std::size_t i = 0; i < d; ++i) {
        const PanelAxis ax = layout.x_axis(i, box.lower[i], box.upper[i]);
        const PanelAxis ay = layout.y_axis(i, box.lower[i], box.upper[i]);
        const double bottom = layout.extent(d) - layout.margin;
        s << "<text x=\"" << detail::px(0.5 * (ax.px0 + ax.px1)) << "\" y=\"" << detail::px(bottom + 35.0)
          << "\" font-size=\"12\" text-anchor=\"middle\">" << names[i] << "</text>\n";
        s << "<text x=\"" << detail::px(ax.px0) << "\" y=\"" << detail::px(bottom + 15.0)
          << "\" font-size=\"9\" text-anchor=\"start\">" << detail::num(box.lower[i]) << "</text>\n";
        s << "<text x=\"" << detail::px(ax.px1) << "\" y=\"" << detail::px(bottom + 15.0)
          << "\" font-size=\"9\" text-anchor=\"end\">" << detail::num(box.upper[i]) << "</text>\n";
        if (i > 0) {
            s << "<text x=\"" << detail::px(layout.margin - 8.0) << "\" y=\""
              << detail::px(0.5 * (ay.px0 + ay.px1)) << "\" font-size=\"12\" text-anchor=\"end\">" << names[i]
              << "</text>\n";
        }
    }
    s << "</svg>\n";
    return s.str();
}

struct PairplotFiles {
    std::vector<std::filesystem::path> marginals;
    std::vector<std::filesystem::path> pairs;
    std::filesystem::path figure;
};

/// Writes marginal_<name>.csv, pair_<a>_<b>.csv and pairplot.svg into `dir`.
inline PairplotFiles pairplot_export(const Eigen::MatrixXd& samples, const PriorBox& box,
                                     std::span<const std::string> names,
                                     const std::optional<Eigen::VectorXd>& truth,
                                     const std::filesystem::path& dir)
{
    if (names.size() != box.dim()) throw InvalidParameter("one name per parameter is required");
    const KdeGrid kde = kde_grid(samples, box);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    PairplotFiles files;
    for (std::size_t i = 0; i < kde.marginals.size(); ++i) {
        const Kde1d& m = kde.marginals[i];
        std::string csv = names[i] + ",density\n";
        for (std::size_t g = 0; g < m.grid.size(); ++g) csv += detail::num(m.grid[g]) + ',' + detail::num(m.density[g]) + '\n';
        files.marginals.push_back(dir / ("marginal_" + names[i] + ".csv"));
        detail::write_text(files.marginals.back(), csv);
    }
    for (std::size_t k = 0; k < kde.pairs.size(); ++k) {
        const auto [i, j] = kde.pair_index[k];
        const Kde2d& p = kde.pairs[k];
        std::string csv = names[i] + ',' + names[j] + ",density\n";
        for (std::size_t a = 0; a < p.grid_x.size(); ++a) {
            for (std::size_t b = 0; b < p.grid_y.size(); ++b) {
                csv += detail::num(p.grid_x[a]) + ',' + detail::num(p.grid_y[b]) + ',' +
                       detail::num(p.density(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) + '\n';
            }
        }
        files.pairs.push_back(dir / ("pair_" + names[i] + "_" + names[j] + ".csv"));
        detail::write_text(files.pairs.back(), csv);
    }
    files.figure = dir / "pairplot.svg";
    detail::write_text(files.figure, corner_svg(kde, box, names, truth));
    return files;
}

}  // namespace vehid
