#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "specstab/io.hpp"
#include "test_util.hpp"

using namespace specstab;
using specstab::testing::random_graph;

TEST(MatrixMarket, RoundTripIsExact) {
  std::mt19937_64 rng(40);
  const WeightMatrix w = random_graph(9, 0.4, rng);
  std::stringstream s;
  write_matrix_market(s, w.matrix());
  const WeightMatrix back = read_matrix_market(s);
  EXPECT_TRUE(back.matrix().same_pattern(w.matrix()));
  EXPECT_EQ((back.weights() - w.weights()).norm(), 0.0);
}

TEST(MatrixMarket, VariantsAndDiagonal) {
  std::istringstream pattern("%%MatrixMarket matrix coordinate pattern symmetric\n% comment\n3 3 3\n2 1\n3 2\n2 2\n");
  const WeightMatrix p = read_matrix_market(pattern);
  EXPECT_EQ(p.pattern().edge_count(), 2u);
  EXPECT_EQ(p.weights()[0], 1.0);
  std::istringstream general("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 0.5\n2 1 0.5\n");
  EXPECT_EQ(read_matrix_market(general).weights()[0], 0.5);
  std::istringstream integer("%%MatrixMarket matrix coordinate integer symmetric\n2 2 1\n2 1 4\n");
  EXPECT_EQ(read_matrix_market(integer).weights()[0], 4.0);
}

TEST(MatrixMarket, MalformedInputs) {
  for (const char* text : {"", "garbage\n", "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n",
                           "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n",
                           "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n2 1 1.0\n",
                           "%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n2 1 1.0\n",
                           "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 -1.0\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(read_matrix_market(in), ParseError) << text;
  }
}

TEST(JsonGraph, RoundTripAndOrdering) {
  const json j = json::parse(R"({"n": 4, "edges": [[3, 2, 0.5], [0, 1], [1, 3, 2.0]]})");
  const WeightMatrix w = graph_from_json(j);
  EXPECT_EQ(w.matrix()(0, 1), 1.0);
  EXPECT_EQ(w.matrix()(2, 3), 0.5);
  EXPECT_EQ(w.matrix()(3, 1), 2.0);
  const WeightMatrix back = graph_from_json(graph_to_json(w.matrix()));
  EXPECT_EQ((back.weights() - w.weights()).norm(), 0.0);
  EXPECT_THROW(graph_from_json(json::parse(R"({"edges": []})")), ParseError);
  EXPECT_THROW(graph_from_json(json::parse(R"({"n": 2, "edges": [[0, 2]]})")), ParseError);
  EXPECT_THROW(graph_from_json(json::parse(R"({"n": 2, "edges": [[0, 1], [1, 0]]})")), ParseError);
  EXPECT_THROW(graph_from_json(json::parse(R"({"n": 2, "edges": [["a", 1]]})")), ParseError);
}

TEST(Files, ExtensionDispatch) {
  std::mt19937_64 rng(41);
  const WeightMatrix w = random_graph(5, 0.5, rng);
  const auto dir = std::filesystem::temp_directory_path();
  for (const char* name : {"specstab_io_test.mtx", "specstab_io_test.JSON"}) {
    const auto path = dir / name;
    write_graph(path, w.matrix());
    EXPECT_EQ((read_graph(path).weights() - w.weights()).norm(), 0.0);
    std::filesystem::remove(path);
  }
  EXPECT_THROW(read_graph(dir / "x.txt"), ArgumentError);
  EXPECT_THROW(read_graph(dir / "specstab_missing.mtx"), ParseError);
}

TEST(Serialization, FullPrecision) {
  EXPECT_EQ(std::stod(format_double(0.1)), 0.1);
  EXPECT_EQ(format_double(1.0 / 3.0), "0.33333333333333331");
  const json j = to_json(GapReport{1, 0.0, 1.0 / 3.0, 1.0 / 3.0, 0.1});
  EXPECT_EQ(json::parse(j.dump())["lambda_k1"].get<double>(), 1.0 / 3.0);
  EXPECT_TRUE(number_or_null(std::nan("")).is_null());
}

TEST(Serialization, SweepCsvColumns) {
  SweepResult s;
  s.rows = {{5, 1.0, 0.7, 2.0, true, ""}, {6, 2.0, 1.4, std::nullopt, true, "stalled"}};
  fill_argmax(s);
  std::ostringstream out;
  write_sweep_csv(out, "mu1", {2.0}, {&s});
  EXPECT_EQ(out.str(), "mu1,delta_5,delta_6,g_5,g_6,k_opt_delta,k_opt_g\n2,2,,0.69999999999999996,1.3999999999999999,5,6\n");
}
