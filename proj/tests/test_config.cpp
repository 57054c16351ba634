#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "mtdc/config.hpp"
#include "mtdc/errors.hpp"
#include "oracles.hpp"

using namespace mtdc;

namespace {

const char* kMinimal = R"({
  "name": "two",
  "converters": [
    {"id": 7, "capacitance": "100 uF", "kp": "5 S", "regulator": true},
    {"id": 9, "capacitance": 2e-4, "kp": 4}
  ],
  "lines": [{"i": 7, "j": 9, "resistance": "0.5 ohm"}],
  "comm_links": [{"i": 9, "j": 7, "gain": 3}],
  "controller": {"kind": "distributed", "gamma": 0.1, "vnom": "10 kV", "tau": "20 ms"},
  "scenario": {"pre_injections": ["1 A", 2], "post_injections": [0, 0], "horizon": 5}
})";

std::string with(const std::string& base, const std::string& from, const std::string& to) {
  std::string s = base;
  const auto pos = s.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  if (pos != std::string::npos) s.replace(pos, from.size(), to);
  return s;
}

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text, "test.json");
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Quantity, UnitsAndDimensions) {
  EXPECT_DOUBLE_EQ(parse_quantity("100 kV", Dimension::kVoltage), 1e5);
  EXPECT_DOUBLE_EQ(parse_quantity("100kV", Dimension::kVoltage), 1e5);
  EXPECT_DOUBLE_EQ(parse_quantity("123.79 uF", Dimension::kCapacitance), 123.79e-6);
  EXPECT_DOUBLE_EQ(parse_quantity("0.0154 ohm", Dimension::kResistance), 0.0154);
  EXPECT_DOUBLE_EQ(parse_quantity("10 S", Dimension::kConductance), 10.0);
  EXPECT_DOUBLE_EQ(parse_quantity("220 ms", Dimension::kTime), 0.22);
  EXPECT_DOUBLE_EQ(parse_quantity("-300 A", Dimension::kCurrent), -300.0);
  EXPECT_DOUBLE_EQ(parse_quantity("0.22", Dimension::kTime), 0.22);
  EXPECT_THROW(parse_quantity("10 kV", Dimension::kCurrent), ValidationError);
  EXPECT_THROW(parse_quantity("10 furlong", Dimension::kVoltage), ValidationError);
  EXPECT_THROW(parse_quantity("abc", Dimension::kVoltage), ValidationError);
  EXPECT_THROW(parse_quantity("", Dimension::kVoltage), ValidationError);
  EXPECT_THROW(parse_quantity("inf V", Dimension::kVoltage), ValidationError);
}

TEST(Config, MinimalDocument) {
  const ConfigDocument d = parse_config_text(kMinimal);
  EXPECT_EQ(d.name, "two");
  ASSERT_EQ(d.node_count(), 2u);
  EXPECT_EQ(d.converter_ids, (std::vector<long>{7, 9}));
  EXPECT_DOUBLE_EQ(d.params.capacitance(0), 1e-4);
  EXPECT_DOUBLE_EQ(d.params.droop_gain(1), 4.0);
  EXPECT_EQ(d.params.regulator, Eigen::VectorXd(Eigen::Vector2d(1, 0)));
  EXPECT_DOUBLE_EQ(d.params.nominal_voltage, 1e4);
  EXPECT_DOUBLE_EQ(d.tau, 0.02);
  EXPECT_DOUBLE_EQ(d.gamma, 0.1);
  EXPECT_EQ(d.controller, ControllerKind::kDistributed);
  EXPECT_DOUBLE_EQ(build_laplacian(d.line_topology())(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(build_laplacian(d.comm_topology())(0, 1), -3.0);
  EXPECT_EQ(d.scenario.pre_injections, Eigen::VectorXd(Eigen::Vector2d(1, 2)));
  EXPECT_DOUBLE_EQ(d.scenario.horizon, 5.0);
  EXPECT_DOUBLE_EQ(d.scenario.delay, 0.02);
  EXPECT_EQ(kind_of(d.make_controller()), ControllerKind::kDistributed);
}

TEST(Config, DefaultRegulatorIsFirstConverter) {
  const ConfigDocument d = parse_config_text(with(kMinimal, "\"regulator\": true", "\"regulator\": false"));
  EXPECT_EQ(d.params.regulator(0), 1.0);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_NE(error_of(with(kMinimal, "\"name\"", "\"nmae\"")).find("unknown field 'nmae'"), std::string::npos);
  EXPECT_NE(error_of(with(kMinimal, "\"kp\": 4", "\"kp\": -4")).find("converters[1].kp"), std::string::npos);
  EXPECT_NE(error_of(with(kMinimal, "\"0.5 ohm\"", "\"0.5 V\"")).find("lines[0].resistance"), std::string::npos);
  EXPECT_NE(error_of(with(kMinimal, "\"j\": 9, \"resistance\"", "\"j\": 8, \"resistance\"")).find("unknown converter id 8"),
            std::string::npos);
  EXPECT_NE(error_of(with(kMinimal, "\"regulator\": true}", "\"regulator\": true},{\"id\": 7, \"capacitance\": 1, \"kp\": 1}"))
                .find("duplicate converter id 7"),
            std::string::npos);
  EXPECT_NE(error_of(with(kMinimal, "\"kp\": 4}", "\"kp\": 4, \"regulator\": true}")).find("more than one"),
            std::string::npos);
  EXPECT_NE(error_of(with(kMinimal, "\"post_injections\": [0, 0]", "\"post_injections\": [0]")).find("post_injections"),
            std::string::npos);
  EXPECT_NE(error_of(with(kMinimal, "\"kind\": \"distributed\"", "\"kind\": \"pid\"")).find("controller.kind"),
            std::string::npos);
  EXPECT_NE(error_of(with(kMinimal, "\"gamma\": 0.1", "\"gamma\": 0")).find("controller.gamma"), std::string::npos);
  EXPECT_NE(error_of(with(kMinimal, "\"horizon\": 5", "\"horizon\": 5, \"step_time\": 6")).find("scenario"),
            std::string::npos);
  EXPECT_NE(error_of("{").find("test.json"), std::string::npos);
  EXPECT_NE(error_of("[1, 2]").find("test.json"), std::string::npos);
}

TEST(Config, DuplicateLineNamedById) {
  const std::string text = with(kMinimal, "\"lines\": [{\"i\": 7, \"j\": 9, \"resistance\": \"0.5 ohm\"}]",
                                "\"lines\": [{\"i\": 7, \"j\": 9, \"resistance\": 1}, {\"i\": 9, \"j\": 7, \"resistance\": 2}]");
  EXPECT_NE(error_of(text).find("duplicate edge (9, 7)"), std::string::npos) << error_of(text);
}

TEST(Config, DisconnectedLinesRejected) {
  const std::string text = with(kMinimal, "\"lines\": [{\"i\": 7, \"j\": 9, \"resistance\": \"0.5 ohm\"}]", "\"lines\": []");
  EXPECT_NE(error_of(text).find("disconnected"), std::string::npos);
}

TEST(Config, DistributedNeedsCommLinks) {
  const std::string text = with(kMinimal, "\"comm_links\": [{\"i\": 9, \"j\": 7, \"gain\": 3}],", "");
  EXPECT_NE(error_of(text).find("comm_links"), std::string::npos);
  const ConfigDocument d =
      parse_config_text(with(text, "\"kind\": \"distributed\", \"gamma\": 0.1,", "\"kind\": \"droop\","));
  EXPECT_FALSE(d.has_comm());
  EXPECT_THROW(d.comm_topology(), ValidationError);
  EXPECT_EQ(kind_of(d.make_controller()), ControllerKind::kDroop);
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_THROW(parse_config("/nonexistent/dir/model.json"), IoError);
}

TEST(Preset, FourTerminalValues) {
  ASSERT_FALSE(preset_names().empty());
  const ConfigDocument d = load_preset("paper_4term");
  ASSERT_EQ(d.node_count(), 4u);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(d.params.capacitance(i), 123.79e-6);
    EXPECT_DOUBLE_EQ(d.params.droop_gain(i), 10.0);
    EXPECT_EQ(d.params.regulator(i), i == 0 ? 1.0 : 0.0);
  }
  EXPECT_DOUBLE_EQ(d.params.nominal_voltage, 1e5);
  EXPECT_DOUBLE_EQ(d.gamma, 0.005);
  EXPECT_TRUE(d.comm_mirrors_lines);
  const Eigen::MatrixXd Lr = build_laplacian(d.line_topology()).matrix();
  const Eigen::MatrixXd Lc = build_laplacian(d.comm_topology()).matrix();
  EXPECT_EQ(Lr, Lc);
  EXPECT_DOUBLE_EQ(-Lr(0, 1), 1.0 / 0.0154);
  EXPECT_DOUBLE_EQ(-Lr(0, 2), 1.0 / 0.0015);
  EXPECT_DOUBLE_EQ(-Lr(1, 3), 1.0 / 0.0015);
  EXPECT_DOUBLE_EQ(-Lr(2, 3), 1.0 / 0.0154);
  EXPECT_EQ(Lr(0, 3), 0.0);
  EXPECT_EQ(d.scenario.pre_injections, Eigen::VectorXd(Eigen::Vector4d(300, 200, -100, -400)));
  EXPECT_EQ(d.scenario.post_injections, Eigen::VectorXd(Eigen::Vector4d(300, 200, -300, -400)));
  EXPECT_DOUBLE_EQ(d.scenario.step_time, 0.0);
  EXPECT_THROW(load_preset("nope"), ValidationError);
}

TEST(RoundTrip, PresetIsIdempotent) {
  for (const auto& name : preset_names()) {
    const std::string once = serialize_config(load_preset(name));
    const std::string twice = serialize_config(parse_config_text(once));
    EXPECT_EQ(once, twice);
  }
  const std::string a = serialize_config(parse_config_text(kMinimal));
  EXPECT_EQ(a, serialize_config(parse_config_text(a)));
}

TEST(RoundTrip, ParseSerializeParsePreservesValues) {
  std::mt19937 rng(99);
  const auto path = std::filesystem::temp_directory_path() / "mtdc_roundtrip.json";
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial) % 7;
    ConfigDocument d;
    d.name = "random" + std::to_string(trial);
    for (std::size_t i = 0; i < n; ++i) d.converter_ids.push_back(static_cast<long>(10 * i + 3));
    d.params = oracle::random_params(n, rng);
    for (const auto& e : oracle::random_connected_edges(n, rng)) d.lines.push_back({e.from, e.to, 1.0 / e.weight});
    for (const auto& e : oracle::random_connected_edges(n, rng)) d.comm_links.push_back(e);
    d.controller = trial % 2 ? ControllerKind::kDroop : ControllerKind::kDistributed;
    d.gamma = 0.01 * (trial + 1);
    d.tau = 0.001 * trial;
    d.scenario.pre_injections = oracle::random_vector(n, rng, -500, 500);
    d.scenario.post_injections = oracle::random_vector(n, rng, -500, 500);
    d.scenario.horizon = 3.0;
    d.scenario.step_time = 0.5;
    const std::string text = serialize_config(d);
    {
      std::ofstream(path) << text;
    }
    const ConfigDocument back = parse_config(path);
    EXPECT_EQ(serialize_config(back), text);
    EXPECT_EQ(back.params.capacitance, d.params.capacitance);
    EXPECT_EQ(back.params.regulator, d.params.regulator);
    EXPECT_EQ(back.scenario.post_injections, d.scenario.post_injections);
    EXPECT_EQ(back.converter_ids, d.converter_ids);
    EXPECT_EQ(build_laplacian(back.comm_topology()).matrix(), build_laplacian(d.comm_topology()).matrix());
  }
  std::filesystem::remove(path);
}
