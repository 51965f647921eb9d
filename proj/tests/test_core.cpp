#include "calib/csv.hpp"
#include "calib/rng.hpp"
#include "calib/types.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace calib;

namespace {

// Range column fixture: six parameters with their allowable ranges.
const char* kSixParameterSpec = R"([
  {"name": "res_pp",     "lower": 0.80, "upper": 1.00},
  {"name": "res_pw",     "lower": 0.80, "upper": 1.00},
  {"name": "fricang_pp", "lower": 25,   "upper": 45},
  {"name": "fricang_pw", "lower": 25,   "upper": 45},
  {"name": "pbvf",       "lower": 0.30, "upper": 0.40},
  {"name": "part_size",  "lower": 99,   "upper": 125}
])";

std::string temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "calibkit_test_core";
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("parse_parameter_space reads a six-parameter spec") {
    const ParameterSpace space = parse_parameter_space(kSixParameterSpec);
    REQUIRE(space.dim() == 6);
    CHECK(space.names[0] == "res_pp");
    CHECK(space.lower[0] == 0.80);
    CHECK(space.upper[1] == 1.00);
    CHECK(space.lower[2] == 25.0);
    CHECK(space.upper[3] == 45.0);
    CHECK(space.lower[4] == 0.30);
    CHECK(space.upper[4] == 0.40);
    CHECK(space.lower[5] == 99.0);
    CHECK(space.upper[5] == 125.0);
}

TEST_CASE("parse_parameter_space minimal and error cases") {
    const ParameterSpace one = parse_parameter_space(R"([{"name":"a","lower":0,"upper":1}])");
    CHECK(one.dim() == 1);

    CHECK_THROWS_WITH_AS(parse_parameter_space(R"([{"name":"a","lower":1,"upper":1}])"),
                         doctest::Contains("degenerate bound"), data_error);
    CHECK_THROWS_AS(parse_parameter_space(R"([{"name":"a","lower":2,"upper":1}])"), data_error);
    CHECK_THROWS_WITH_AS(
        parse_parameter_space(
            R"([{"name":"a","lower":0,"upper":1},{"name":"a","lower":0,"upper":1}])"),
        doctest::Contains("duplicate"), data_error);
    CHECK_THROWS_AS(parse_parameter_space(R"([{"name":"a","lower":0}])"), data_error);
    CHECK_THROWS_AS(parse_parameter_space("not json"), data_error);
    CHECK_THROWS_AS(parse_parameter_space("[]"), data_error);
}

TEST_CASE("parse_parameter_space is a pure function of its text") {
    const ParameterSpace a = parse_parameter_space(kSixParameterSpec);
    const ParameterSpace b = parse_parameter_space(kSixParameterSpec);
    CHECK(a.names == b.names);
    CHECK(a.lower == b.lower);
    CHECK(a.upper == b.upper);
}

TEST_CASE("scale_inputs maps endpoints and midpoints") {
    Eigen::MatrixXd col(3, 1);
    col << 25.0, 35.0, 45.0;
    const ScaledInputs scaled =
        scale_inputs(col, Eigen::VectorXd::Constant(1, 25.0), Eigen::VectorXd::Constant(1, 45.0));
    CHECK(scaled.unit(0, 0) == 0.0);
    CHECK(scaled.unit(1, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(scaled.unit(2, 0) == 1.0);
    CHECK_FALSE(scaled.clipped);

    Eigen::MatrixXd already(4, 1);
    already << 0.0, 0.25, 0.75, 1.0;
    const ScaledInputs id =
        scale_inputs(already, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
    CHECK((id.unit - already).cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXd narrow(2, 1);
    narrow << 0.80, 0.90;
    const ScaledInputs res = scale_inputs(narrow, Eigen::VectorXd::Constant(1, 0.80),
                                          Eigen::VectorXd::Constant(1, 1.00));
    // hand-applied (v - 0.80) / 0.20
    CHECK(res.unit(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.unit(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("scale_inputs clips out-of-bound values with a flag") {
    Eigen::MatrixXd col(2, 1);
    col << -0.5, 1.5;
    const ScaledInputs scaled =
        scale_inputs(col, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
    CHECK(scaled.clipped);
    CHECK(scaled.unit(0, 0) == 0.0);
    CHECK(scaled.unit(1, 0) == 1.0);
}

TEST_CASE("scale_inputs rejects bad bounds") {
    Eigen::MatrixXd col = Eigen::MatrixXd::Zero(2, 1);
    CHECK_THROWS_AS(scale_inputs(col, Eigen::VectorXd::Constant(1, 1.0),
                                 Eigen::VectorXd::Constant(1, 1.0)),
                    data_error);
    Eigen::VectorXd bad(1);
    bad << std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(scale_inputs(col, Eigen::VectorXd::Zero(1), bad), data_error);
}

TEST_CASE("scaling round trip is the identity within 1e-12 relative") {
    rng::Engine eng(321);
    for (int trial = 0; trial < 100; ++trial) {
        const int p = 1 + static_cast<int>(eng.below(4));
        Eigen::VectorXd lo(p), hi(p);
        for (int j = 0; j < p; ++j) {
            lo[j] = -100.0 + 200.0 * eng.uniform();
            hi[j] = lo[j] + 1e-3 + 100.0 * eng.uniform();
        }
        Eigen::MatrixXd data(20, p);
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < p; ++j) data(i, j) = lo[j] + (hi[j] - lo[j]) * eng.uniform();
        const ScalingMap map = ScalingMap::from_bounds(lo, hi);
        const Eigen::MatrixXd round = map.from_unit_rows(map.to_unit_rows(data));
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < p; ++j)
                CHECK(std::abs(round(i, j) - data(i, j)) <=
                      1e-12 * std::max(1.0, std::abs(data(i, j))));
    }
}

TEST_CASE("validate_dataset on a clean dataset") {
    ExperimentalDataset ds;
    ds.inputs.resize(10, 2);
    for (int i = 0; i < 10; ++i) {
        ds.inputs(i, 0) = i * 0.1;
        ds.inputs(i, 1) = 1.0 - i * 0.05;
    }
    ds.outputs = Eigen::VectorXd::LinSpaced(10, 0.0, 1.0);
    ds.input_names = {"x1", "x2"};
    const ValidationReport report = validate_dataset(ds);
    CHECK(report.issues.empty());
    CHECK(report.ok());
}

TEST_CASE("validate_dataset flags a NaN output with its row") {
    ExperimentalDataset ds;
    ds.inputs = Eigen::MatrixXd::Random(5, 1);
    ds.outputs = Eigen::VectorXd::Ones(5);
    ds.outputs[3] = std::numeric_limits<double>::quiet_NaN();
    const ValidationReport report = validate_dataset(ds);
    REQUIRE(report.issues.size() == 1);
    CHECK_FALSE(report.ok());
    CHECK(report.issues[0].row == 3);
    CHECK_FALSE(report.issues[0].warning);
}

TEST_CASE("validate_dataset flags a shape mismatch") {
    ExperimentalDataset ds;
    ds.inputs = Eigen::MatrixXd::Random(5, 1);
    ds.outputs = Eigen::VectorXd::Ones(4);
    const ValidationReport report = validate_dataset(ds);
    CHECK_FALSE(report.ok());
    bool found = false;
    for (const auto& issue : report.issues)
        if (issue.message.find("shape mismatch") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("duplicate design rows are a warning, not a violation") {
    ExperimentalDataset ds;
    ds.inputs.resize(4, 1);
    ds.inputs << 0.1, 0.2, 0.2, 0.3;
    ds.outputs = Eigen::VectorXd::Ones(4);
    const ValidationReport report = validate_dataset(ds);
    REQUIRE(report.issues.size() == 1);
    CHECK(report.issues[0].warning);
    CHECK(report.ok());
}

TEST_CASE("validate_dataset never mutates its argument") {
    ExperimentalDataset ds;
    ds.inputs = Eigen::MatrixXd::Random(6, 2);
    ds.outputs = Eigen::VectorXd::Random(6);
    ds.outputs[1] = std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd inputs_before = ds.inputs;
    const Eigen::VectorXd outputs_before = ds.outputs;
    (void)validate_dataset(ds);
    CHECK(ds.inputs == inputs_before);
    CHECK((ds.outputs.array() == outputs_before.array()).count() + 1 >= 6);  // inf compares equal
}

TEST_CASE("simulator dataset validation checks the surrogate row minimum") {
    SimulatorDataset ds;
    ds.inputs = Eigen::MatrixXd::Random(2, 1);
    ds.params = Eigen::MatrixXd::Random(2, 1);
    ds.outputs = Eigen::VectorXd::Ones(2);
    const ValidationReport report = validate_dataset(ds);  // needs m >= 3
    CHECK_FALSE(report.ok());
}

TEST_CASE("csv round trip preserves full precision") {
    const std::string dir = temp_dir();
    const std::string path = dir + "/exp.csv";
    Eigen::MatrixXd rows(3, 2);
    rows << 1.0 / 3.0, 0.1 + 0.2, 1e-17, -5.5, 3.141592653589793, 2.0 / 7.0;
    write_csv(path, {"x1", "y"}, rows);
    const ExperimentalDataset ds = read_experimental_csv(path);
    REQUIRE(ds.n() == 3);
    CHECK(ds.input_names[0] == "x1");
    CHECK(ds.output_name == "y");
    for (int i = 0; i < 3; ++i) {
        CHECK(ds.inputs(i, 0) == rows(i, 0));
        CHECK(ds.outputs[i] == rows(i, 1));
    }
}

TEST_CASE("format_double is read-back exact") {
    for (const double v : {1.0 / 3.0, 1e-300, -1e300, 0.1, -0.0, 12345.6789, 5e-324}) {
        const std::string s = format_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
}

TEST_CASE("simulator csv split and error reporting") {
    const std::string dir = temp_dir();
    const std::string path = dir + "/sim.csv";
    {
        std::ofstream out(path);
        out << "x1,t1,t2,y\n0.1,0.5,0.7,2.5\n0.2,0.6,0.8,3.5\n0.3,0.4,0.2,1.5\n0.9,0.1,0.3,0.5\n";
    }
    const SimulatorDataset ds = read_simulator_csv(path, 2);
    CHECK(ds.m() == 4);
    CHECK(ds.p() == 1);
    CHECK(ds.d() == 2);
    CHECK(ds.params(1, 1) == 0.8);

    const std::string bad = dir + "/bad.csv";
    {
        std::ofstream out(bad);
        out << "x1,t1,y\n0.1,0.5,2.5\n0.2,0.6\n";
    }
    CHECK_THROWS_WITH_AS(read_simulator_csv(bad, 1), doctest::Contains("bad.csv"), data_error);

    const std::string nonnum = dir + "/nonnum.csv";
    {
        std::ofstream out(nonnum);
        out << "x1,y\n0.1,abc\n";
    }
    CHECK_THROWS_AS(read_experimental_csv(nonnum), data_error);
}
