#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "certds/dataset.hpp"

using namespace certds;

namespace {

DemonstrationSet parse(const std::string& text) {
    std::istringstream in(text);
    return load_csv_stream(in);
}

std::string parse_error(const std::string& text) {
    try {
        parse(text);
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

/// Raw demos on x in [0, 40], y in [-10, 10] ending at (40, 0).
DemonstrationSet raw_arc_demos() {
    DemonstrationSet set;
    set.dim = 2;
    for (int k = 0; k < 3; ++k) {
        Demonstration d;
        d.id = "arc" + std::to_string(k);
        const double amp = 10.0 - 3.0 * k;
        for (int i = 0; i <= 200; ++i) {
            const double t = 0.01 * i;
            const double s = t / 2.0;
            Point x(2), v(2);
            x << 40.0 * s, amp * std::sin(std::numbers::pi * s);
            v << 20.0, amp * std::cos(std::numbers::pi * s) * std::numbers::pi / 2.0;
            d.times.push_back(t);
            d.positions.push_back(x);
            d.velocities.push_back(v);
        }
        set.demos.push_back(d);
    }
    return set;
}

}  // namespace

TEST(LoadCsv, MinimalDemo) {
    const auto set = parse("demo_id,t,x1,x2,v1,v2\na,0,1,2,3,4\na,0.1,0.5,1,2,3\n");
    ASSERT_EQ(set.dim, 2);
    ASSERT_EQ(set.demos.size(), 1u);
    EXPECT_EQ(set.demos[0].size(), 2u);
    EXPECT_DOUBLE_EQ(set.demos[0].velocities[1][1], 3.0);
}

TEST(LoadCsv, MissingVelocityColumnNamed) {
    const std::string msg = parse_error("demo_id,t,x1,x2,v1\na,0,1,2,3\na,1,1,2,3\n");
    EXPECT_NE(msg.find("'v2'"), std::string::npos) << msg;
}

TEST(LoadCsv, InterleavedDemosGroupedAndSorted) {
    const auto set = parse(
        "demo_id,t,x1,v1\n"
        "b,0.2,5,0\n"
        "a,0.1,1,0\n"
        "b,0.0,3,0\n"
        "a,0.0,0,0\n"
        "b,0.1,4,0\n");
    ASSERT_EQ(set.demos.size(), 2u);
    EXPECT_EQ(set.demos[0].id, "b");
    EXPECT_EQ(set.demos[1].id, "a");
    EXPECT_EQ(set.demos[0].times, (std::vector<double>{0.0, 0.1, 0.2}));
    EXPECT_EQ(set.demos[0].positions[0][0], 3.0);
    EXPECT_EQ(set.demos[0].positions[2][0], 5.0);
    EXPECT_EQ(set.demos[1].positions[0][0], 0.0);
}

TEST(LoadCsv, ErrorsCarryLineNumbers) {
    EXPECT_NE(parse_error("demo_id,t,x1,v1\na,0,1,0\na,1,2\n").find("line 3"), std::string::npos);
    EXPECT_NE(parse_error("demo_id,t,x1,v1\na,0,1,0\na,1,nan,0\n").find("line 3"), std::string::npos);
    EXPECT_NE(parse_error("demo_id,t,x1,v1\na,0,1,0\na,0,2,0\n").find("not strictly increasing"), std::string::npos);
    EXPECT_NE(parse_error("demo_id,t,x1,v1\na,0,abc,0\na,1,2,0\n").find("line 2"), std::string::npos);
}

TEST(LoadCsv, WriteReadRoundTripIsExact) {
    const auto set = raw_arc_demos();
    std::ostringstream out;
    write_csv(out, set);
    const auto back = parse(out.str());
    ASSERT_EQ(back.demos.size(), set.demos.size());
    for (std::size_t k = 0; k < set.demos.size(); ++k) {
        EXPECT_EQ(back.demos[k].times, set.demos[k].times);
        EXPECT_EQ(back.demos[k].positions, set.demos[k].positions);
        EXPECT_EQ(back.demos[k].velocities, set.demos[k].velocities);
    }
}

TEST(Normalize, IdentityWhenAlreadyNormalized) {
    DemonstrationSet set;
    set.dim = 2;
    Demonstration d;
    d.id = "a";
    for (int i = 0; i < 3; ++i) {
        Point x(2);
        x << 0.98 * (1.0 - i / 2.0), -0.5 * (1.0 - i / 2.0);
        d.times.push_back(i);
        d.positions.push_back(x);
        d.velocities.push_back(-x);
    }
    set.demos.push_back(d);
    const auto [norm, tf] = normalize(set, Point::Zero(2));
    EXPECT_NEAR(tf.scale[0], 1.0, 1e-15);
    EXPECT_NEAR(tf.scale[1], 1.0, 1e-15);
    EXPECT_EQ(tf.apply_position(Point::Zero(2)), Point::Zero(2));
}

TEST(Normalize, BoundsAndFinalPoint) {
    const auto set = raw_arc_demos();
    Point att(2);
    att << 40, 0;
    for (bool aniso : {false, true}) {
        const auto [norm, tf] = normalize(set, att, NormalizeOptions{0.02, aniso});
        for (const auto& d : norm.demos) {
            for (const auto& p : d.positions) ASSERT_LE(p.cwiseAbs().maxCoeff(), 0.98 + 1e-15);
            EXPECT_EQ(d.positions.back(), Point::Zero(2));
            EXPECT_EQ(d.velocities.back(), Point::Zero(2));
        }
        EXPECT_EQ(tf.apply_position(att), Point::Zero(2));
    }
}

TEST(Normalize, VelocitiesMatchFiniteDifferences) {
    const auto set = raw_arc_demos();
    Point att(2);
    att << 40, 0;
    const auto [norm, tf] = normalize(set, att);
    const auto fd = with_finite_difference_velocities(norm);
    for (std::size_t k = 0; k < norm.demos.size(); ++k) {
        for (std::size_t j = 1; j + 2 < norm.demos[k].size(); ++j) {
            ASSERT_LT((fd.demos[k].velocities[j] - norm.demos[k].velocities[j]).norm(), 1e-3);
        }
    }
}

TEST(Normalize, DenormalizeInverts) {
    const auto set = raw_arc_demos();
    Point att(2);
    att << 40, 0;
    const auto [norm, tf] = normalize(set, att, NormalizeOptions{0.02, true});
    const auto back = denormalize(norm, tf);
    for (std::size_t k = 0; k < set.demos.size(); ++k) {
        for (std::size_t j = 0; j + 1 < set.demos[k].size(); ++j) {
            const Point& a = set.demos[k].positions[j];
            const Point& b = back.demos[k].positions[j];
            ASSERT_LE((a - b).norm(), 1e-12 * std::max(1.0, a.norm()));
        }
    }
}

TEST(Normalize, ZeroSpreadRejected) {
    DemonstrationSet set;
    set.dim = 2;
    Demonstration d;
    d.id = "flat";
    for (int i = 0; i < 3; ++i) {
        Point x(2);
        x << i, 0.0;
        d.times.push_back(i);
        d.positions.push_back(x);
        d.velocities.push_back(Point::Zero(2));
    }
    set.demos.push_back(d);
    EXPECT_THROW(normalize(set, Point::Zero(2), NormalizeOptions{0.02, true}), Error);
    EXPECT_NO_THROW(normalize(set, Point::Zero(2)));
    EXPECT_THROW(normalize(set, Point::Constant(2, std::nan(""))), Error);
}

TEST(Normalize, AttractorEstimateIsMeanOfEndpoints) {
    const auto set = raw_arc_demos();
    const Point a = estimate_attractor(set);
    EXPECT_NEAR(a[0], 40.0, 1e-12);
    EXPECT_NEAR(a[1], 0.0, 1e-12);
}

TEST(Split, CountsDeterminismDisjointness) {
    DemonstrationSet set;
    set.dim = 1;
    for (int k = 0; k < 10; ++k) {
        Demonstration d;
        d.id = "d" + std::to_string(k);
        d.times = {0, 1};
        d.positions = {Point::Constant(1, k), Point::Zero(1)};
        d.velocities = {Point::Zero(1), Point::Zero(1)};
        set.demos.push_back(d);
    }
    const auto [train, test] = split(set, 0.2, 11);
    EXPECT_EQ(train.demos.size(), 8u);
    EXPECT_EQ(test.demos.size(), 2u);
    const auto [train2, test2] = split(set, 0.2, 11);
    ASSERT_EQ(test2.demos.size(), 2u);
    EXPECT_EQ(test.demos[0].id, test2.demos[0].id);
    EXPECT_EQ(test.demos[1].id, test2.demos[1].id);
    std::set<std::string> ids;
    for (const auto& d : train.demos) ids.insert(d.id);
    for (const auto& d : test.demos) EXPECT_FALSE(ids.count(d.id));
    EXPECT_EQ(ids.size() + test.demos.size(), 10u);

    DemonstrationSet one{1, {set.demos[0]}};
    EXPECT_THROW(split(one, 0.2, 1), Error);
}

TEST(Transform, JsonRoundTrip) {
    NormalizationTransform tf{Point::Constant(2, 3.5), Point::Constant(2, 0.125)};
    const auto back = transform_from_json(to_json(tf));
    EXPECT_EQ(back.translation, tf.translation);
    EXPECT_EQ(back.scale, tf.scale);
}
