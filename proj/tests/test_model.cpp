#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "support/oracles.hpp"
#include "tilin/activation.hpp"
#include "tilin/model.hpp"

using namespace tilin;

namespace {

std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(TILIN_FIXTURE_DIR) / name; }

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / ("tilin_model_" + name);
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Activation, KnownValues) {
  EXPECT_DOUBLE_EQ(activation_value(ActivationKind::Sigmoid, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(activation_slope(ActivationKind::Sigmoid, 0.0), 0.25);
  EXPECT_DOUBLE_EQ(activation_value(ActivationKind::Tanh, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(activation_slope(ActivationKind::Tanh, 0.0), 1.0);
  EXPECT_NEAR(activation_value(ActivationKind::Sigmoid, 2.0), 0.880797, 1e-6);
  EXPECT_NEAR(activation_slope(ActivationKind::Sigmoid, 2.0), 0.104994, 1e-6);
  EXPECT_DOUBLE_EQ(activation_value(ActivationKind::ReLU, -3.0), 0.0);
  EXPECT_DOUBLE_EQ(activation_slope(ActivationKind::ReLU, 0.0), 1.0);
}

TEST(Activation, SlopeMatchesFiniteDifference) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> x(-15.0, 15.0);
  for (auto k : {ActivationKind::Sigmoid, ActivationKind::Tanh, ActivationKind::Arctan}) {
    for (int i = 0; i < 500; ++i) {
      const double t = x(rng);
      EXPECT_NEAR(activation_slope(k, t), oracle::fd_slope(k, t), 1e-8) << to_string(k) << " " << t;
      EXPECT_NEAR(activation_value(k, t), oracle::f(k, t), 1e-15);
    }
  }
}

TEST(Activation, SigmoidStableAtExtremes) {
  EXPECT_EQ(activation_value(ActivationKind::Sigmoid, -800.0), 0.0);
  EXPECT_EQ(activation_value(ActivationKind::Sigmoid, 800.0), 1.0);
  EXPECT_FALSE(std::isnan(activation_slope(ActivationKind::Sigmoid, -800.0)));
}

TEST(Activation, ParseNames) {
  EXPECT_EQ(parse_activation("atan"), ActivationKind::Arctan);
  EXPECT_EQ(parse_activation("relu"), ActivationKind::ReLU);
  EXPECT_THROW(parse_activation("gelu"), std::invalid_argument);
}

TEST(Model, IdentityNetworkFile) {
  const auto p = write_temp("id.json",
                            R"({"input_dim":2,"layers":[{"type":"affine","weight":[[1,0],[0,1]],"bias":[0,0]}]})");
  const Network net = load_network(p);
  ASSERT_EQ(net.num_layers(), 1u);
  const auto* a = std::get_if<Affine>(&net.layers()[0]);
  ASSERT_NE(a, nullptr);
  EXPECT_TRUE(a->weight.isApprox(Matrix::Identity(2, 2)));
  EXPECT_TRUE(a->bias.isZero());
}

TEST(Model, ToyFixtureWidths) {
  const Network net = load_network(fixture("fnn_relu_2x2.json"));
  EXPECT_EQ(net.num_layers(), 3u);
  EXPECT_EQ(net.widths(), (std::vector<std::size_t>{2, 2, 2, 2}));
  // hand forward pass: x = (1, 0.5) -> z = (1.5, 0.5) -> r = z -> y = (2, 0.5)
  const Vector y = forward(net, Vector{{1.0, 0.5}});
  EXPECT_DOUBLE_EQ(y[0], 2.0);
  EXPECT_DOUBLE_EQ(y[1], 0.5);
  // x = (-1, 0.5): z = (-0.5, -1.5) -> r = 0 -> y = 0
  EXPECT_TRUE(forward(net, Vector{{-1.0, 0.5}}).isZero());
}

TEST(Model, BiasLengthMismatch) {
  const auto p = write_temp("bad_bias.json",
                            R"({"input_dim":2,"layers":[{"type":"affine","weight":[[1,0],[0,1]],"bias":[0,0,0]}]})");
  try {
    load_network(p);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.layer_index(), 0);
  }
}

TEST(Model, ChainMismatchNamesLayer) {
  std::vector<Layer> layers{Affine{Matrix::Ones(3, 2), Vector::Zero(3)}, Activation{ActivationKind::ReLU},
                            Affine{Matrix::Ones(1, 4), Vector::Zero(1)}};
  try {
    Network(2, layers);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.layer_index(), 2);
  }
}

TEST(Model, ParseErrorsCarryPaths) {
  const auto p = write_temp("bad_num.json",
                            R"({"input_dim":2,"layers":[{"type":"affine","weight":[[1,"x"]]}]})");
  try {
    load_network(p);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("layers[0].weight"), std::string::npos) << e.what();
  }
  const auto q = write_temp("broken.json", "{\"input_dim\": 2,\n \"layers\": [}");
  EXPECT_THROW(load_network(q), ParseError);
  const auto r = write_temp("unknown.json", R"({"input_dim":2,"layers":[{"type":"softmax"}]})");
  EXPECT_THROW(load_network(r), ParseError);
}

TEST(Model, ForwardExamples) {
  const Network net(2, {Affine{Matrix{{1.0, -2.0}}, Vector{{0.5}}}});
  EXPECT_DOUBLE_EQ(forward(net, Vector::Zero(2))[0], 0.5);
  const Vector r = apply_layer(Activation{ActivationKind::ReLU}, Vector{{-1.0, 3.0}});
  EXPECT_DOUBLE_EQ(r[0], 0.0);
  EXPECT_DOUBLE_EQ(r[1], 3.0);
  EXPECT_DOUBLE_EQ(apply_layer(Activation{ActivationKind::Sigmoid}, Vector{{0.0}})[0], 0.5);
}

TEST(Model, ArgmaxLowestIndexOnTies) {
  EXPECT_EQ(argmax(Vector{{1.0, 3.0, 3.0}}), 1u);
  EXPECT_EQ(argmax(Vector{{2.0, 2.0}}), 0u);
}

TEST(Conv, OneByOneIdentity) {
  Conv2D c;
  c.in_channels = c.out_channels = 1;
  c.in_height = c.in_width = 3;
  c.kernel_height = c.kernel_width = 1;
  c.kernel = {1.0};
  c.bias = Vector::Zero(1);
  const Affine a = conv_to_affine(c);
  EXPECT_TRUE(a.weight.isApprox(Matrix::Identity(9, 9)));
}

TEST(Conv, AverageKernelMatchesDirect) {
  Conv2D c;
  c.in_channels = c.out_channels = 1;
  c.in_height = c.in_width = 3;
  c.kernel_height = c.kernel_width = 2;
  c.kernel = {0.25, 0.25, 0.25, 0.25};
  c.bias = Vector::Zero(1);
  const Affine a = conv_to_affine(c);
  ASSERT_EQ(a.weight.rows(), 4);
  ASSERT_EQ(a.weight.cols(), 9);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    Vector x(9);
    for (auto& v : x) v = d(rng);
    EXPECT_TRUE((a.weight * x + a.bias).isApprox(oracle::conv_direct(c, x), 1e-12));
    EXPECT_TRUE(apply_layer(c, x).isApprox(oracle::conv_direct(c, x), 1e-12));
  }
}

TEST(Conv, ZeroKernel) {
  Conv2D c;
  c.in_channels = 2;
  c.out_channels = 3;
  c.in_height = c.in_width = 4;
  c.kernel_height = c.kernel_width = 3;
  c.kernel.assign(2 * 3 * 3 * 3, 0.0);
  c.bias = Vector::Zero(3);
  EXPECT_TRUE(conv_to_affine(c).weight.isZero());
}

TEST(Conv, StridePaddingMultiChannelMatchesDirect) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Conv2D c;
  c.in_channels = 2;
  c.out_channels = 3;
  c.in_height = 5;
  c.in_width = 6;
  c.kernel_height = 3;
  c.kernel_width = 2;
  c.stride_height = 2;
  c.stride_width = 1;
  c.pad_height = 1;
  c.pad_width = 1;
  c.kernel.resize(3 * 2 * 3 * 2);
  for (auto& v : c.kernel) v = d(rng);
  c.bias = Vector{{0.1, -0.2, 0.3}};
  const Affine a = conv_to_affine(c);
  for (int t = 0; t < 20; ++t) {
    Vector x(static_cast<Eigen::Index>(c.input_size()));
    for (auto& v : x) v = d(rng);
    EXPECT_TRUE((a.weight * x + a.bias).isApprox(oracle::conv_direct(c, x), 1e-12));
  }
}

TEST(BatchNorm, FoldPreservesForward) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  Affine a{Matrix(3, 2), Vector(3)};
  for (auto& v : a.weight.reshaped()) v = g(rng);
  for (auto& v : a.bias) v = g(rng);
  BatchNorm bn{Vector{{1.5, 0.5, 2.0}}, Vector{{0.1, 0.0, -0.3}}, Vector{{0.2, -0.1, 1.0}},
               Vector{{0.5, 2.0, 1.0}}, 1e-5};
  // leading batchnorm (no affine before it) and one after an affine
  BatchNorm lead{Vector{{2.0, 1.0}}, Vector{{0.0, 1.0}}, Vector{{0.5, 0.5}}, Vector{{1.0, 4.0}}, 1e-5};
  const Network net(2, {lead, a, bn, Activation{ActivationKind::Tanh}});
  const Network folded = fold_batchnorm(net);
  EXPECT_TRUE(folded.is_normalized());
  EXPECT_EQ(folded.output_dim(), 3u);
  for (int t = 0; t < 20; ++t) {
    const Vector x{{g(rng), g(rng)}};
    EXPECT_TRUE(forward(net, x).isApprox(forward(folded, x), 1e-12));
  }
}

TEST(BatchNorm, CnnFixtureNormalizesToSameFunction) {
  const Network net = load_network(fixture("sigmoid_cnn.json"));
  EXPECT_FALSE(net.is_normalized());
  const Network norm = normalize(net);
  EXPECT_TRUE(norm.is_normalized());
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    Vector x(36);
    for (auto& v : x) v = d(rng);
    EXPECT_TRUE(forward(net, x).isApprox(forward(norm, x), 1e-12));
  }
}

TEST(Model, JsonRoundTrip) {
  const Network net = load_network(fixture("sigmoid_cnn.json"));
  const Network again = parse_network(network_to_json(net));
  const Vector x = Vector::Constant(36, 0.3);
  EXPECT_TRUE(forward(net, x).isApprox(forward(again, x), 1e-15));
}

TEST(Model, PoolWindows) {
  const auto w = pool_windows(1, 2, 4, 2, 2, 2, 2);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0], (std::vector<std::size_t>{0, 1, 4, 5}));
  EXPECT_EQ(w[1], (std::vector<std::size_t>{2, 3, 6, 7}));
}

TEST(Model, TensorRejectsNaN) {
  Tensor t{{2}, {1.0, std::nan("")}};
  EXPECT_THROW(t.validate(), ParseError);
  Tensor s{{3}, {1.0, 2.0}};
  EXPECT_THROW(s.validate(), DimensionError);
}
