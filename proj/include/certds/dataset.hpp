#pragma once

// Demonstration trajectories: CSV ingestion, normalization into the canonical
// workspace with the attractor at the origin, and demo-level train/test split.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "certds/error.hpp"
#include "certds/geometry.hpp"
#include "certds/random.hpp"

namespace certds {

struct Demonstration {
    std::string id;
    std::vector<double> times;
    std::vector<Point> positions;
    std::vector<Point> velocities;

    std::size_t size() const { return positions.size(); }
};

struct DemonstrationSet {
    Index dim = 0;
    std::vector<Demonstration> demos;

    std::size_t num_samples() const {
        std::size_t total = 0;
        for (const auto& d : demos) total += d.size();
        return total;
    }

    /// All positions (columns) and matching velocities.
    std::pair<Eigen::MatrixXd, Eigen::MatrixXd> stacked() const {
        Eigen::MatrixXd x(dim, static_cast<Index>(num_samples()));
        Eigen::MatrixXd v(dim, x.cols());
        Index c = 0;
        for (const auto& d : demos) {
            for (std::size_t j = 0; j < d.size(); ++j, ++c) {
                x.col(c) = d.positions[j];
                v.col(c) = d.velocities[j];
            }
        }
        return {std::move(x), std::move(v)};
    }
};

/// p_normalized = scale ⊙ (p_raw − translation); velocities are scaled by the same factors.
struct NormalizationTransform {
    Point translation;
    Point scale;

    Point apply_position(const Point& p) const { return scale.cwiseProduct(p - translation); }
    Point apply_velocity(const Point& v) const { return scale.cwiseProduct(v); }
    Point invert_position(const Point& p) const { return p.cwiseQuotient(scale) + translation; }
    Point invert_velocity(const Point& v) const { return v.cwiseQuotient(scale); }
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_number(const std::string& cell, std::size_t line_no, const std::string& column) {
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(cell, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != cell.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": column '" + column + "' is not a number: '" +
                         cell + "'");
    }
    if (!std::isfinite(value)) {
        throw ParseError("line " + std::to_string(line_no) + ": column '" + column + "' is not finite");
    }
    return value;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Reads demo_id,t,x1..xn[,v1..vn]. Rows are grouped by demo_id (first-appearance
/// order) and sorted by t. With require_velocities = false the v columns may be absent
/// and velocities are left zero.
inline DemonstrationSet load_csv_stream(std::istream& in, bool require_velocities = true) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ParseError("empty CSV input (missing header)");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 3 || header[0] != "demo_id" || header[1] != "t") {
        throw ParseError("line 1: header must start with demo_id,t");
    }
    Index dim = 0;
    while (static_cast<std::size_t>(2 + dim) < header.size() && header[2 + dim] == "x" + std::to_string(dim + 1)) {
        ++dim;
    }
    if (dim == 0) throw ParseError("line 1: missing column 'x1'");
    const bool has_vel = header.size() > static_cast<std::size_t>(2 + dim);
    if (require_velocities || has_vel) {
        for (Index i = 0; i < dim; ++i) {
            const std::size_t col = static_cast<std::size_t>(2 + dim + i);
            const std::string want = "v" + std::to_string(i + 1);
            if (col >= header.size() || header[col] != want) {
                throw ParseError("line 1: missing column '" + want + "'");
            }
        }
    }
    const std::size_t width = static_cast<std::size_t>(2 + (has_vel ? 2 : 1) * dim);
    if (header.size() != width) throw ParseError("line 1: unexpected extra columns in header");

    struct Row {
        double t;
        Point x;
        Point v;
        std::size_t line;
    };
    std::vector<std::string> order;
    std::map<std::string, std::vector<Row>> groups;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != width) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                             " columns, found " + std::to_string(cells.size()));
        }
        Row row{detail::parse_number(cells[1], line_no, "t"), Point(dim), Point::Zero(dim), line_no};
        for (Index i = 0; i < dim; ++i) {
            row.x[i] = detail::parse_number(cells[static_cast<std::size_t>(2 + i)], line_no, header[2 + i]);
            if (has_vel) {
                const std::size_t col = static_cast<std::size_t>(2 + dim + i);
                row.v[i] = detail::parse_number(cells[col], line_no, header[col]);
            }
        }
        if (!groups.count(cells[0])) order.push_back(cells[0]);
        groups[cells[0]].push_back(std::move(row));
    }
    if (order.empty()) throw ParseError("CSV contains no data rows");

    DemonstrationSet set;
    set.dim = dim;
    for (const auto& id : order) {
        auto& rows = groups[id];
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
        Demonstration demo;
        demo.id = id;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (k > 0 && !(rows[k].t > rows[k - 1].t)) {
                throw ParseError("line " + std::to_string(rows[k].line) + ": time stamps of demo '" + id +
                                 "' are not strictly increasing");
            }
            demo.times.push_back(rows[k].t);
            demo.positions.push_back(rows[k].x);
            demo.velocities.push_back(rows[k].v);
        }
        if (demo.size() < 2) throw ParseError("demo '" + id + "' has fewer than two samples");
        set.demos.push_back(std::move(demo));
    }
    return set;
}

inline DemonstrationSet load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset '" + path + "'");
    try {
        return load_csv_stream(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_csv(std::ostream& out, const DemonstrationSet& set) {
    out << "demo_id,t";
    for (Index i = 0; i < set.dim; ++i) out << ",x" << i + 1;
    for (Index i = 0; i < set.dim; ++i) out << ",v" << i + 1;
    out << '\n';
    for (const auto& d : set.demos) {
        for (std::size_t j = 0; j < d.size(); ++j) {
            out << d.id << ',' << detail::format_double(d.times[j]);
            for (Index i = 0; i < set.dim; ++i) out << ',' << detail::format_double(d.positions[j][i]);
            for (Index i = 0; i < set.dim; ++i) out << ',' << detail::format_double(d.velocities[j][i]);
            out << '\n';
        }
    }
}

inline void write_csv(const std::string& path, const DemonstrationSet& set) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write dataset '" + path + "'");
    write_csv(out, set);
}

// ---------------------------------------------------------------------------
// Normalization

struct NormalizeOptions {
    double margin = 0.02;
    bool anisotropic = false;
};

/// Mean of the final raw positions.
inline Point estimate_attractor(const DemonstrationSet& set) {
    detail::require(!set.demos.empty(), "estimate_attractor: empty demonstration set");
    Point sum = Point::Zero(set.dim);
    for (const auto& d : set.demos) sum += d.positions.back();
    return sum / static_cast<double>(set.demos.size());
}

inline std::pair<DemonstrationSet, NormalizationTransform> normalize(const DemonstrationSet& set,
                                                                     const Point& attractor_raw,
                                                                     const NormalizeOptions& options = {}) {
    detail::require(!set.demos.empty(), "normalize: empty demonstration set");
    detail::require_dim(set.dim, attractor_raw.size(), "normalize attractor");
    detail::require(attractor_raw.allFinite(), "normalize: attractor must be finite");

    Point extent = Point::Zero(set.dim);
    for (const auto& d : set.demos)
        for (const auto& p : d.positions) extent = extent.cwiseMax((p - attractor_raw).cwiseAbs());

    const double target = 1.0 - options.margin;
    NormalizationTransform tf{attractor_raw, Point(set.dim)};
    if (options.anisotropic) {
        for (Index i = 0; i < set.dim; ++i) {
            if (!(extent[i] > 0.0)) {
                throw Error("normalize: zero positional spread on axis " + std::to_string(i + 1) +
                            "; scale undefined");
            }
            tf.scale[i] = target / extent[i];
        }
    } else {
        const double m = extent.maxCoeff();
        if (!(m > 0.0)) throw Error("normalize: zero positional spread on every axis; scale undefined");
        tf.scale.setConstant(target / m);
    }

    DemonstrationSet out;
    out.dim = set.dim;
    for (const auto& d : set.demos) {
        Demonstration nd;
        nd.id = d.id;
        nd.times = d.times;
        for (std::size_t j = 0; j < d.size(); ++j) {
            Point p = tf.apply_position(d.positions[j]);
            // Keep rounding from pushing boundary samples past the margin.
            p = p.cwiseMax(-target).cwiseMin(target);
            nd.positions.push_back(std::move(p));
            nd.velocities.push_back(tf.apply_velocity(d.velocities[j]));
        }
        nd.positions.back().setZero();
        nd.velocities.back().setZero();
        out.demos.push_back(std::move(nd));
    }
    return {std::move(out), std::move(tf)};
}

inline DemonstrationSet denormalize(const DemonstrationSet& set, const NormalizationTransform& tf) {
    DemonstrationSet out;
    out.dim = set.dim;
    for (const auto& d : set.demos) {
        Demonstration rd;
        rd.id = d.id;
        rd.times = d.times;
        for (std::size_t j = 0; j < d.size(); ++j) {
            rd.positions.push_back(tf.invert_position(d.positions[j]));
            rd.velocities.push_back(tf.invert_velocity(d.velocities[j]));
        }
        out.demos.push_back(std::move(rd));
    }
    return out;
}

inline nlohmann::json to_json(const NormalizationTransform& tf) {
    return {{"translation", detail::point_to_json(tf.translation)}, {"scale", detail::point_to_json(tf.scale)}};
}

inline NormalizationTransform transform_from_json(const nlohmann::json& j) {
    NormalizationTransform tf{detail::point_from_json(detail::field(j, "translation", "transform"), "translation"),
                              detail::point_from_json(detail::field(j, "scale", "transform"), "scale")};
    detail::require_dim(tf.translation.size(), tf.scale.size(), "transform");
    if (!(tf.scale.array() > 0.0).all()) throw ParseError("transform: scale must be positive");
    return tf;
}

// ---------------------------------------------------------------------------
// Split and conversion

/// Whole-demonstration split; the test share is round(N * fraction) clamped to [1, N-1].
inline std::pair<DemonstrationSet, DemonstrationSet> split(const DemonstrationSet& set, double test_fraction,
                                                           std::uint64_t seed) {
    detail::require(test_fraction > 0.0 && test_fraction < 1.0, "split: test_fraction must lie in (0, 1)");
    const std::size_t n = set.demos.size();
    detail::require(n >= 2, "split: need at least two demonstrations");
    std::size_t n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng() % (i + 1)]);
    std::vector<bool> is_test(n, false);
    for (std::size_t k = 0; k < n_test; ++k) is_test[idx[k]] = true;

    DemonstrationSet train{set.dim, {}};
    DemonstrationSet test{set.dim, {}};
    for (std::size_t i = 0; i < n; ++i) (is_test[i] ? test : train).demos.push_back(set.demos[i]);
    return {std::move(train), std::move(test)};
}

/// Keeps only the demonstrations whose ids are listed, in the listed order.
inline DemonstrationSet select_demos(const DemonstrationSet& set, const std::vector<std::string>& ids) {
    DemonstrationSet out{set.dim, {}};
    for (const auto& id : ids) {
        auto it = std::find_if(set.demos.begin(), set.demos.end(), [&](const Demonstration& d) { return d.id == id; });
        if (it == set.demos.end()) throw Error("dataset has no demonstration '" + id + "'");
        out.demos.push_back(*it);
    }
    return out;
}

/// Central differences in the interior, one-sided at the ends.
inline DemonstrationSet with_finite_difference_velocities(const DemonstrationSet& set) {
    DemonstrationSet out = set;
    for (auto& d : out.demos) {
        const std::size_t m = d.size();
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t a = j == 0 ? 0 : j - 1;
            const std::size_t b = j + 1 == m ? m - 1 : j + 1;
            d.velocities[j] = (d.positions[b] - d.positions[a]) / (d.times[b] - d.times[a]);
        }
    }
    return out;
}

}  // namespace certds
