#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tilin/cli.hpp"
#include "tilin/inputs.hpp"

using namespace tilin;

namespace {

std::string fixture(const std::string& name) {
  return (std::filesystem::path(TILIN_FIXTURE_DIR) / name).string();
}

std::filesystem::path temp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("tilin_cli_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "tilin");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST(Inputs, SourceFormats) {
  EXPECT_EQ(InputSource::parse("a.csv").format, InputFormat::Csv);
  EXPECT_EQ(InputSource::parse("a.json").format, InputFormat::Json);
  EXPECT_EQ(InputSource::parse("train-images-idx3-ubyte").format, InputFormat::Idx);
  const InputSource s = InputSource::parse("data.bin:idx");
  EXPECT_EQ(s.format, InputFormat::Idx);
  EXPECT_EQ(s.path, "data.bin");
}

TEST(Inputs, ParseIndices) {
  EXPECT_EQ(parse_indices("3"), (std::vector<std::size_t>{3}));
  EXPECT_EQ(parse_indices("0..3"), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(parse_indices("0,4,7"), (std::vector<std::size_t>{0, 4, 7}));
  EXPECT_EQ(parse_indices("0..1,5"), (std::vector<std::size_t>{0, 1, 5}));
  EXPECT_THROW(parse_indices("3..1"), std::invalid_argument);
  EXPECT_THROW(parse_indices("x"), std::invalid_argument);
  EXPECT_THROW(parse_indices(""), std::invalid_argument);
}

TEST(Inputs, IdxCsvAgree) {
  const auto idx = read_idx_images(fixture("sigmoid_cnn_images.idx"));
  const auto csv = read_csv_inputs(fixture("sigmoid_cnn_inputs.csv"));
  ASSERT_EQ(idx.size(), 10u);
  ASSERT_EQ(csv.size(), 10u);
  EXPECT_EQ(idx[0].shape, (std::vector<std::size_t>{6, 6}));
  for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_TRUE(idx[i].flat().isApprox(csv[i].flat(), 1e-15));
  const auto labels = read_idx_labels(fixture("sigmoid_cnn_labels.idx"));
  EXPECT_EQ(labels.size(), 10u);
  EXPECT_THROW(read_idx_labels(fixture("sigmoid_cnn_images.idx")), ParseError);
}

TEST(Inputs, JsonSingleAndBatch) {
  const auto p = temp("single.json");
  std::ofstream(p) << "[1, 2.5]";
  const auto one = read_json_inputs(p);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].values, (std::vector<double>{1.0, 2.5}));
  EXPECT_EQ(read_json_inputs(fixture("tanh_inputs.json")).size(), 10u);
  std::ofstream(p) << "[1, \"a\"]";
  EXPECT_THROW(read_json_inputs(p), ParseError);
}

TEST(Cli, VerifyPositiveRadius) {
  std::string out;
  ASSERT_EQ(run({"verify", "--model", fixture("tanh_fnn.json"), "--input", fixture("tanh_inputs.json"),
                 "--indices", "0..2", "--norm", "inf", "--policy", "forward"},
                &out),
            kExitOk);
  const auto doc = nlohmann::json::parse(out);
  ASSERT_EQ(doc.size(), 3u);
  for (const auto& r : doc) {
    EXPECT_GT(r["eps_cert"].get<double>(), 0.0);
    EXPECT_FALSE(r.contains("wall_time_sec"));
  }
  EXPECT_EQ(doc[2]["input_id"], "2");
}

TEST(Cli, BadNormIsUsageError) {
  std::string err;
  EXPECT_EQ(run({"verify", "--model", fixture("tanh_fnn.json"), "--input", fixture("tanh_inputs.json"),
                 "--norm", "3"},
                nullptr, &err),
            kExitError);
  EXPECT_FALSE(err.empty());
}

TEST(Cli, SingleIteration) {
  std::string out;
  ASSERT_EQ(run({"verify", "--model", fixture("affine_margin.json"), "--input", fixture("affine_inputs.json"),
                 "--iters", "1", "--eps0", "0.05"},
                &out),
            kExitOk);
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(out)[0]["eps_cert"].get<double>(), 0.05);
}

TEST(Cli, StrictMisclassified) {
  const std::vector<std::string> base{"verify", "--model", fixture("affine_margin.json"), "--input",
                                      fixture("affine_inputs.json"), "--label", "1"};
  EXPECT_EQ(run(base), kExitOk);
  auto strict = base;
  strict.push_back("--strict");
  EXPECT_EQ(run(strict), kExitMisclassified);
}

TEST(Cli, Errors) {
  EXPECT_EQ(run({"verify", "--model", "/nonexistent.json", "--input", fixture("tanh_inputs.json")}), kExitError);
  EXPECT_EQ(run({"verify", "--model", fixture("tanh_fnn.json"), "--input", fixture("affine_inputs.json")}),
            kExitError);  // dimension mismatch
  EXPECT_EQ(run({"verify", "--model", fixture("tanh_fnn.json"), "--input", fixture("tanh_inputs.json"),
                 "--indices", "50"}),
            kExitError);
  EXPECT_EQ(run({"verify", "--model", fixture("tanh_fnn.json"), "--input", fixture("tanh_inputs.json"),
                 "--label", "7"}),
            kExitError);
  EXPECT_EQ(run({}), kExitError);
  EXPECT_EQ(run({"--help"}), kExitOk);
}

TEST(Cli, DeterministicAcrossThreadCounts) {
  const auto a = temp("det_a.json"), b = temp("det_b.json");
  const std::vector<std::string> base{"verify", "--model", fixture("sigmoid_cnn.json"), "--input",
                                      fixture("sigmoid_cnn_images.idx"), "--seed", "5"};
  auto one = base, four = base;
  one.insert(one.end(), {"--threads", "1", "--out", a.string()});
  four.insert(four.end(), {"--threads", "4", "--out", b.string()});
  ASSERT_EQ(run(one), kExitOk);
  ASSERT_EQ(run(four), kExitOk);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_TRUE(std::filesystem::exists(a.string() + ".timing.json"));
}

TEST(Cli, BoundsAtZeroRadiusAreForwardValues) {
  std::string out;
  ASSERT_EQ(run({"bounds", "--model", fixture("sigmoid_cnn.json"), "--input", fixture("sigmoid_cnn_inputs.csv"),
                 "--indices", "0", "--eps", "0"},
                &out),
            kExitOk);
  const auto doc = nlohmann::json::parse(out);
  const Network net = normalize(load_network(fixture("sigmoid_cnn.json")));
  const auto trace = forward_trace(net, read_csv_inputs(fixture("sigmoid_cnn_inputs.csv"))[0].flat());
  const auto& layers = doc[0]["layers"];
  ASSERT_EQ(layers.size(), trace.size());
  for (std::size_t k = 0; k < trace.size(); ++k) {
    for (Eigen::Index i = 0; i < trace[k].size(); ++i) {
      EXPECT_NEAR(layers[k]["lower"][i].get<double>(), trace[k][i], 1e-12);
      EXPECT_NEAR(layers[k]["upper"][i].get<double>(), trace[k][i], 1e-12);
    }
  }
}

TEST(Cli, BoundsNeedsEps) {
  EXPECT_EQ(run({"bounds", "--model", fixture("tanh_fnn.json"), "--input", fixture("tanh_inputs.json")}),
            kExitError);
}

TEST(Cli, ImprovementFormula) {
  EXPECT_NEAR(improvement_pct(0.02, 0.03), 50.0, 1e-12);
  EXPECT_TRUE(std::isnan(improvement_pct(0.0, 0.1)));
}

TEST(Cli, CompareRowsAndSummary) {
  const auto summary = temp("summary.csv");
  std::string out;
  ASSERT_EQ(run({"compare", "--model", fixture("tanh_fnn.json"), "--input", fixture("tanh_inputs.json"),
                 "--indices", "0..9", "--norm", "all", "--summary", summary.string()},
                &out),
            kExitOk);
  std::istringstream lines(out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "input,method,norm,eps_cert,time,improvement_pct");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5) << line;
    if (line.find(",forward,") != std::string::npos) EXPECT_EQ(line.substr(line.rfind(',') + 1), "0");
  }
  EXPECT_EQ(rows, 2u * 10u * 3u);
  const std::string s = slurp(summary);
  EXPECT_EQ(s.substr(0, s.find('\n')), "method,norm,inputs,avg_eps_cert,avg_time,avg_improvement_pct");
}

TEST(Cli, OracleCheckPasses) {
  std::string out;
  EXPECT_EQ(run({"oracle-check", "--model", fixture("arctan_fnn.json"), "--input", fixture("arctan_inputs.json"),
                 "--indices", "0..2", "--samples", "2000", "--eps", "0.05"},
                &out),
            kExitOk);
  const auto doc = nlohmann::json::parse(out);
  for (const auto& r : doc) {
    EXPECT_TRUE(r["ok"].get<bool>());
    EXPECT_EQ(r["soundness"].size(), 2u);
  }
}

TEST(Cli, WorkerCount) {
  EXPECT_EQ(worker_count(3), 3u);
  ::setenv("TILIN_THREADS", "2", 1);
  EXPECT_EQ(worker_count(0), 2u);
  ::setenv("TILIN_THREADS", "zero", 1);
  EXPECT_THROW(worker_count(0), std::invalid_argument);
  ::unsetenv("TILIN_THREADS");
  EXPECT_GE(worker_count(0), 1u);
}
