#include "rfcdelay/io.hpp"
#include "rfcdelay/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

using namespace rfcdelay;

TEST(FormatDouble, RoundTripsBitExactly) {
    Rng rng(3);
    for (int i = 0; i < 20000; ++i) {
        const double v = std::ldexp(rng.uniform(-1.0, 1.0), rng.integer(-300, 300));
        EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
    }
    EXPECT_EQ(std::strtod(format_double(0.1).c_str(), nullptr), 0.1);
    EXPECT_EQ(format_double(0.0), "0");
    EXPECT_EQ(format_double(1.0), "1");
}

TEST(FormatDouble, NonFiniteValues) {
    EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
    EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(Csv, HeaderAndRows) {
    CsvTable t({"t", "x1", "ok"});
    t.add({0.5, 3, true});
    t.add({1e-300, std::string("a"), false});
    EXPECT_EQ(t.size(), 2u);
    EXPECT_EQ(t.str(), "t,x1,ok\n0.5,3,true\n1e-300,a,false\n");
    EXPECT_THROW(t.add({1.0}), InvalidSystem);
}

TEST(Svg, PolylineHasOnePointPerFiniteSample) {
    SvgPlot p{"peaks & more", "delta", "peak", true, true};
    const std::string svg = render_svg(p, {0.1, 0.01, -1.0, 0.001}, {1.0, 10.0, 5.0, std::nan("")});
    EXPECT_NE(svg.find("peaks &amp; more"), std::string::npos);
    const auto start = svg.find("points=\"");
    ASSERT_NE(start, std::string::npos);
    const auto end = svg.find('"', start + 8);
    const std::string pts = svg.substr(start + 8, end - start - 8);
    EXPECT_EQ(std::count(pts.begin(), pts.end(), ','), 2);
    EXPECT_THROW((void)render_svg(p, {1.0}, {}), InvalidSystem);
}

TEST(Svg, EmptySeriesStillRenders) {
    const std::string svg = render_svg({}, {}, {});
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
