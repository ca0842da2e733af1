#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "levitrap/io.hpp"
#include "levitrap/random.hpp"

using namespace levitrap;

TEST(TraceCsv, RoundTripIsBitExact) {
    TimeTrace tr;
    tr.t0 = 12.5;
    tr.dt = 1.0 / 3.0;
    tr.unit = SeriesUnit::Volt;
    const CounterRng rng(3);
    for (int i = 0; i < 500; ++i) tr.values.push_back(1e-7 * rng.normal(i) + 1e-300 * i);
    const auto back = io::trace_from_csv(io::trace_to_csv(tr, "apd"));
    EXPECT_EQ(back.name, "apd");
    EXPECT_EQ(back.trace.unit, SeriesUnit::Volt);
    EXPECT_EQ(back.trace.t0, tr.t0);
    EXPECT_EQ(back.trace.dt, tr.dt);
    EXPECT_EQ(back.trace.values, tr.values);
    EXPECT_TRUE(back.trace.lit.empty());
}

TEST(TraceCsv, LitMaskSurvives) {
    TimeTrace tr;
    tr.dt = 0.01;
    tr.values = {1.0, 2.0, 3.0, 4.0};
    tr.lit = {1, 0, 0, 1};
    const auto back = io::trace_from_csv(io::trace_to_csv(tr));
    EXPECT_EQ(back.trace.lit, tr.lit);
}

TEST(TraceCsv, InfersSpacingAndRenamesColumns) {
    const std::string text = "time,z\n0,1e-6\n0.5,2e-6\n1.0,3e-6\n";
    const auto back = io::trace_from_csv(text, {{"time", "t_s"}, {"z", "z_m"}});
    EXPECT_EQ(back.name, "z");
    EXPECT_EQ(back.trace.unit, SeriesUnit::Metre);
    EXPECT_DOUBLE_EQ(back.trace.dt, 0.5);
    EXPECT_EQ(back.trace.size(), 3u);
}

TEST(TraceCsv, MalformedInputsRaiseParseError) {
    const char* bad[] = {
        "",
        "t_s,z\n0,1\n1,2\n",                  // no unit suffix
        "time_s,z_m\n0,1\n1,2\n",             // wrong first column
        "t_s,z_m\n0,1\n1,abc\n",              // not a number
        "t_s,z_m\n0,1\n1,2,3\n",              // extra field
        "t_s,z_m\n0,1\n1,2\n3,3\n",           // uneven spacing
        "t_s,z_m\n1,1\n0,2\n",                // decreasing time
        "t_s,z_m,lit\n0,1,1\n1,2,2\n",        // bad mask value
        "t_s,z_m\n0,1\n",                     // spacing cannot be inferred
    };
    for (const char* t : bad) EXPECT_THROW(io::trace_from_csv(t), ParseError) << t;
}

TEST(ParseError, ReportsLine) {
    try {
        io::trace_from_csv("t_s,z_m\n0,1\n1,x\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);
    }
}

TEST(ProfileIo, CsvAndBinaryRoundTrip) {
    IntensityProfile p;
    p.metres_per_pixel = 1.7e-6;
    for (int i = 0; i < 64; ++i) p.intensities.push_back(std::exp(-0.01 * i) / 3.0);
    const auto c = io::profile_from_csv(io::profile_to_csv(p));
    EXPECT_EQ(c.intensities, p.intensities);
    EXPECT_EQ(c.metres_per_pixel, p.metres_per_pixel);
    const auto b = io::profile_from_binary(io::profile_to_binary(p));
    EXPECT_EQ(b.intensities, p.intensities);
    EXPECT_EQ(b.metres_per_pixel, p.metres_per_pixel);
    auto raw = io::profile_to_binary(p);
    raw[0] = 'X';
    EXPECT_THROW(io::profile_from_binary(raw), ParseError);
    EXPECT_THROW(io::profile_from_binary(io::profile_to_binary(p).substr(0, 40)), ParseError);
    EXPECT_THROW(io::profile_from_csv("position_m,intensity\n0,1\n1e-6,-1\n"), ParseError);
}

TEST(FitJson, RoundTrip) {
    FitResult f;
    f.add("gamma", 1.25e-4, 3e-6);
    f.add("a0", 2e-4, 1e-6);
    f.covariance = Eigen::MatrixXd{{9e-12, 1e-13}, {1e-13, 1e-12}};
    f.residuals = {0.1, -0.2};
    f.mse = 0.97;
    f.mean_variance = 1e-12;
    f.flags = {"excess_residual"};
    f.message = "ok";
    const auto back = io::fit_from_json(nlohmann::json::parse(io::to_json(f).dump()));
    ASSERT_EQ(back.parameters.size(), 2u);
    EXPECT_EQ(back.param("gamma").value, 1.25e-4);
    EXPECT_EQ(back.param("a0").sigma, 1e-6);
    EXPECT_EQ(back.covariance, f.covariance);
    EXPECT_EQ(back.mse, f.mse);
    EXPECT_EQ(back.flags, f.flags);
    EXPECT_TRUE(back.flagged("excess_residual"));
}

TEST(Hash, Fnv1aKnownVectors) {
    EXPECT_EQ(io::fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(io::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(io::fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(FileIo, MissingFileIsIoError) {
    EXPECT_THROW(io::read_file("/nonexistent/levitrap/file.csv"), IoError);
}
