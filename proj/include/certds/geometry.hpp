#pragma once

// Closed regions of R^n built from primitive shapes and set algebra, plus the
// problem description (workspace, initial set, unsafe set, attractor).

#include <cmath>
#include <cstddef>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "certds/error.hpp"
#include "certds/random.hpp"

namespace certds {

using Point = Eigen::VectorXd;
using Index = Eigen::Index;

class Region;

struct AxisBox {
    Point lo;
    Point hi;

    double volume() const { return (hi - lo).prod(); }
    Point center() const { return 0.5 * (lo + hi); }
};

struct Ball {
    Point center;
    double radius;
};

/// L1 ball.
struct Diamond {
    Point center;
    double radius;
};

/// Axis-aligned ellipsoid.
struct Ellipsoid {
    Point center;
    Point semi_axes;
};

struct Union {
    std::vector<Region> children;
};

struct Intersection {
    std::vector<Region> children;
};

struct Complement {
    std::shared_ptr<const Region> child;
};

/// Immutable closed region. Boundary points are members.
class Region {
public:
    using Shape = std::variant<AxisBox, Ball, Diamond, Ellipsoid, Union, Intersection, Complement>;

    static Region box(Point lo, Point hi) {
        detail::require_dim(lo.size(), hi.size(), "box bounds");
        detail::require(lo.size() > 0, "box: empty dimension");
        for (Index i = 0; i < lo.size(); ++i) {
            detail::require(std::isfinite(lo[i]) && std::isfinite(hi[i]), "box: non-finite bound");
            detail::require(lo[i] <= hi[i], "box: lo must not exceed hi on axis " + std::to_string(i));
        }
        const Index n = lo.size();
        return Region(AxisBox{std::move(lo), std::move(hi)}, n);
    }

    static Region ball(Point center, double radius) {
        detail::require(radius > 0.0, "ball: radius must be positive");
        const Index n = center.size();
        return Region(Ball{std::move(center), radius}, n);
    }

    static Region diamond(Point center, double radius) {
        detail::require(radius > 0.0, "diamond: radius must be positive");
        const Index n = center.size();
        return Region(Diamond{std::move(center), radius}, n);
    }

    static Region ellipsoid(Point center, Point semi_axes) {
        detail::require_dim(center.size(), semi_axes.size(), "ellipsoid semi-axes");
        detail::require((semi_axes.array() > 0.0).all(), "ellipsoid: semi-axes must be positive");
        const Index n = center.size();
        return Region(Ellipsoid{std::move(center), std::move(semi_axes)}, n);
    }

    static Region union_of(std::vector<Region> children) {
        const Index n = common_dim(children, "union");
        return Region(Union{std::move(children)}, n);
    }

    static Region intersection_of(std::vector<Region> children) {
        const Index n = common_dim(children, "intersection");
        return Region(Intersection{std::move(children)}, n);
    }

    static Region complement_of(Region child) {
        const Index n = child.dim();
        return Region(Complement{std::make_shared<const Region>(std::move(child))}, n);
    }

    Index dim() const { return dim_; }
    const Shape& shape() const { return shape_; }

    const AxisBox* as_box() const { return std::get_if<AxisBox>(&shape_); }

    bool contains(const Point& x) const {
        detail::require_dim(dim_, x.size(), "Region::contains");
        return contains_unchecked(x);
    }

private:
    Region(Shape shape, Index dim) : shape_(std::move(shape)), dim_(dim) {}

    static Index common_dim(const std::vector<Region>& children, const char* what) {
        detail::require(!children.empty(), std::string(what) + ": needs at least one child");
        const Index n = children.front().dim();
        for (const auto& c : children) detail::require_dim(n, c.dim(), what);
        return n;
    }

    bool contains_unchecked(const Point& x) const {
        struct Visitor {
            const Point& x;
            bool operator()(const AxisBox& b) const {
                return (x.array() >= b.lo.array()).all() && (x.array() <= b.hi.array()).all();
            }
            bool operator()(const Ball& b) const { return (x - b.center).squaredNorm() <= b.radius * b.radius; }
            bool operator()(const Diamond& d) const { return (x - d.center).lpNorm<1>() <= d.radius; }
            bool operator()(const Ellipsoid& e) const {
                return ((x - e.center).array() / e.semi_axes.array()).square().sum() <= 1.0;
            }
            bool operator()(const Union& u) const {
                for (const auto& c : u.children)
                    if (c.contains_unchecked(x)) return true;
                return false;
            }
            bool operator()(const Intersection& s) const {
                for (const auto& c : s.children)
                    if (!c.contains_unchecked(x)) return false;
                return true;
            }
            bool operator()(const Complement& c) const { return !c.child->contains_unchecked(x); }
        };
        return std::visit(Visitor{x}, shape_);
    }

    Shape shape_;
    Index dim_;
};

inline bool contains(const Region& region, const Point& x) { return region.contains(x); }

// ---------------------------------------------------------------------------
// Sampling

inline std::vector<Point> sample_uniform(const AxisBox& box, std::size_t count, std::uint64_t seed) {
    detail::require(count >= 1, "sample_uniform: count must be at least 1");
    Rng rng(seed);
    const Index n = box.lo.size();
    std::vector<Point> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Point p(n);
        for (Index i = 0; i < n; ++i) p[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * uniform01(rng);
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<Point> sample_uniform(const Region& box, std::size_t count, std::uint64_t seed) {
    const AxisBox* b = box.as_box();
    if (b == nullptr) throw Error("sample_uniform: region is not an axis-aligned box");
    return sample_uniform(*b, count, seed);
}

struct RegionSample {
    std::vector<Point> points;
    std::size_t draws = 0;

    double acceptance_rate() const {
        return draws == 0 ? 0.0 : static_cast<double>(points.size()) / static_cast<double>(draws);
    }
};

/// Rejection sampler, uniform on region ∩ within. max_tries = 0 means 1000 * count.
inline RegionSample sample_region(const Region& region, const AxisBox& within, std::size_t count,
                                  std::uint64_t seed, std::size_t max_tries = 0) {
    detail::require(count >= 1, "sample_region: count must be at least 1");
    detail::require_dim(region.dim(), within.lo.size(), "sample_region");
    if (max_tries == 0) max_tries = 1000 * count;
    Rng rng(seed);
    const Index n = within.lo.size();
    RegionSample out;
    out.points.reserve(count);
    Point p(n);
    while (out.points.size() < count) {
        if (out.draws >= max_tries) {
            throw Error("sample_region: only " + std::to_string(out.points.size()) + " of " +
                        std::to_string(count) + " points accepted after " + std::to_string(out.draws) +
                        " draws (acceptance rate estimate " + std::to_string(out.acceptance_rate()) + ")");
        }
        for (Index i = 0; i < n; ++i) p[i] = within.lo[i] + (within.hi[i] - within.lo[i]) * uniform01(rng);
        ++out.draws;
        if (region.contains(p)) out.points.push_back(p);
    }
    return out;
}

/// Cell centres of a regular grid with `per_axis` cells along every axis, as columns.
inline Eigen::MatrixXd grid_centers(const AxisBox& box, int per_axis) {
    detail::require(per_axis >= 1, "grid_centers: per_axis must be positive");
    const Index n = box.lo.size();
    Index total = 1;
    for (Index i = 0; i < n; ++i) total *= per_axis;
    Eigen::MatrixXd out(n, total);
    const Point step = (box.hi - box.lo) / static_cast<double>(per_axis);
    for (Index c = 0; c < total; ++c) {
        Index rem = c;
        for (Index i = 0; i < n; ++i) {
            const Index k = rem % per_axis;
            rem /= per_axis;
            out(i, c) = box.lo[i] + (static_cast<double>(k) + 0.5) * step[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Problem description

struct ProblemSpec {
    Index dim = 2;
    Region workspace = Region::box(Point::Constant(2, -1.0), Point::Constant(2, 1.0));
    Region initial = workspace;
    Region unsafe = workspace;
    Point attractor = Point::Zero(2);

    const AxisBox& workspace_box() const {
        const AxisBox* b = workspace.as_box();
        if (b == nullptr) throw Error("problem spec: workspace must be an axis-aligned box");
        return *b;
    }

    /// Checks dimensions and, by sampling, inclusion and disjointness constraints.
    void validate(std::size_t probes = 20000, std::uint64_t seed = 7) const {
        detail::require(dim >= 1, "problem spec: dim must be positive");
        detail::require_dim(dim, workspace.dim(), "problem spec workspace");
        detail::require_dim(dim, initial.dim(), "problem spec initial region");
        detail::require_dim(dim, unsafe.dim(), "problem spec unsafe region");
        detail::require_dim(dim, attractor.size(), "problem spec attractor");
        const AxisBox& ws = workspace_box();
        detail::require((ws.lo.array() < ws.hi.array()).all(), "problem spec: workspace box must have positive extent");
        detail::require(workspace.contains(attractor), "problem spec: attractor lies outside the workspace");
        detail::require(!unsafe.contains(attractor), "problem spec: attractor lies inside the unsafe region");

        const Point half = 0.5 * (ws.hi - ws.lo);
        const AxisBox enlarged{ws.center() - 1.5 * half, ws.center() + 1.5 * half};
        for (const Point& p : sample_uniform(enlarged, probes, seed)) {
            const bool in_ws = workspace.contains(p);
            const bool in_init = initial.contains(p);
            const bool in_unsafe = unsafe.contains(p);
            if (in_init && !in_ws) throw Error("problem spec: initial region extends outside the workspace");
            if (in_unsafe && !in_ws) throw Error("problem spec: unsafe region extends outside the workspace");
            if (in_init && in_unsafe) throw Error("problem spec: initial and unsafe regions overlap");
        }
    }
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline Point point_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw ParseError(std::string(what) + ": expected an array of numbers");
    Point p(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ParseError(std::string(what) + ": expected numbers");
        p[static_cast<Index>(i)] = j[i].get<double>();
    }
    return p;
}

inline nlohmann::json point_to_json(const Point& p) {
    nlohmann::json j = nlohmann::json::array();
    for (Index i = 0; i < p.size(); ++i) j.push_back(p[i]);
    return j;
}

inline const nlohmann::json& field(const nlohmann::json& j, const char* key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(ctx + ": missing field '" + key + "'");
    return *it;
}

}  // namespace detail

inline Region region_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("region: expected a JSON object");
    const std::string type = detail::field(j, "type", "region").get<std::string>();
    const std::string ctx = "region '" + type + "'";
    auto children = [&](const char* key) {
        std::vector<Region> out;
        const auto& arr = detail::field(j, key, ctx);
        if (!arr.is_array()) throw ParseError(ctx + ": 'children' must be an array");
        for (const auto& c : arr) out.push_back(region_from_json(c));
        return out;
    };
    try {
        if (type == "box")
            return Region::box(detail::point_from_json(detail::field(j, "lo", ctx), "box lo"),
                               detail::point_from_json(detail::field(j, "hi", ctx), "box hi"));
        if (type == "ball")
            return Region::ball(detail::point_from_json(detail::field(j, "center", ctx), "ball center"),
                                detail::field(j, "radius", ctx).get<double>());
        if (type == "diamond")
            return Region::diamond(detail::point_from_json(detail::field(j, "center", ctx), "diamond center"),
                                   detail::field(j, "radius", ctx).get<double>());
        if (type == "ellipsoid")
            return Region::ellipsoid(detail::point_from_json(detail::field(j, "center", ctx), "ellipsoid center"),
                                     detail::point_from_json(detail::field(j, "semi_axes", ctx), "semi_axes"));
        if (type == "union") return Region::union_of(children("children"));
        if (type == "intersection") return Region::intersection_of(children("children"));
        if (type == "complement") return Region::complement_of(region_from_json(detail::field(j, "child", ctx)));
    } catch (const ParseError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(ctx + ": " + e.what());
    } catch (const Error& e) {
        throw ParseError(ctx + ": " + e.what());
    }
    throw ParseError("region: unknown type '" + type + "'");
}

inline nlohmann::json to_json(const Region& region) {
    using nlohmann::json;
    struct Visitor {
        json operator()(const AxisBox& b) const {
            return {{"type", "box"}, {"lo", detail::point_to_json(b.lo)}, {"hi", detail::point_to_json(b.hi)}};
        }
        json operator()(const Ball& b) const {
            return {{"type", "ball"}, {"center", detail::point_to_json(b.center)}, {"radius", b.radius}};
        }
        json operator()(const Diamond& d) const {
            return {{"type", "diamond"}, {"center", detail::point_to_json(d.center)}, {"radius", d.radius}};
        }
        json operator()(const Ellipsoid& e) const {
            return {{"type", "ellipsoid"},
                    {"center", detail::point_to_json(e.center)},
                    {"semi_axes", detail::point_to_json(e.semi_axes)}};
        }
        json operator()(const Union& u) const { return {{"type", "union"}, {"children", list(u.children)}}; }
        json operator()(const Intersection& s) const {
            return {{"type", "intersection"}, {"children", list(s.children)}};
        }
        json operator()(const Complement& c) const { return {{"type", "complement"}, {"child", to_json(*c.child)}}; }
        static json list(const std::vector<Region>& rs) {
            json arr = json::array();
            for (const auto& r : rs) arr.push_back(to_json(r));
            return arr;
        }
    };
    return std::visit(Visitor{}, region.shape());
}

inline ProblemSpec problem_from_json(const nlohmann::json& j) {
    ProblemSpec spec;
    spec.workspace = region_from_json(detail::field(j, "workspace", "problem spec"));
    spec.dim = j.contains("dim") ? j.at("dim").get<Index>() : spec.workspace.dim();
    spec.initial = region_from_json(detail::field(j, "initial", "problem spec"));
    spec.unsafe = region_from_json(detail::field(j, "unsafe", "problem spec"));
    spec.attractor = j.contains("attractor") ? detail::point_from_json(j.at("attractor"), "attractor")
                                             : Point::Zero(spec.dim);
    spec.validate();
    return spec;
}

inline nlohmann::json to_json(const ProblemSpec& spec) {
    return {{"dim", spec.dim},
            {"workspace", to_json(spec.workspace)},
            {"initial", to_json(spec.initial)},
            {"unsafe", to_json(spec.unsafe)},
            {"attractor", detail::point_to_json(spec.attractor)}};
}

inline ProblemSpec load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open problem spec '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("problem spec '" + path + "': " + e.what());
    }
    return problem_from_json(j);
}

}  // namespace certds
