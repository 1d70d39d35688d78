#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "cvxreg/errors.hpp"
#include "cvxreg/estimators.hpp"
#include "cvxreg/io.hpp"

using namespace cvxreg;

TEST_CASE("csv round trip") {
  Dataset data;
  data.x.resize(3, 2);
  data.x << 0.25, 1.0, 0.5, 2.0, 0.125, 3.5;
  data.y.resize(3);
  data.y << 1.0, 0.3333333333333333, -7.25;
  const std::string text = dataset_to_csv(data);
  CHECK(text.rfind("x1,x2,y\n", 0) == 0);
  const Dataset back = dataset_from_csv(text);
  CHECK(back.x == data.x);
  CHECK(back.y == data.y);
}

TEST_CASE("tagged csv keeps the tag column") {
  const std::string text = "tag,x1,y\nF01:2008,1.5,2.5\nF01:2009,2.5,3.5\n";
  const Dataset data = dataset_from_csv(text);
  REQUIRE(data.tags.size() == 2);
  CHECK(data.tags[0] == "F01:2008");
  CHECK(data.n() == 2);
  CHECK(data.dim() == 1);
  const std::string again = dataset_to_csv(data);
  CHECK(again.rfind("tag,x1,y\n", 0) == 0);
  CHECK(dataset_from_csv(again).tags == data.tags);
}

TEST_CASE("csv errors carry locations") {
  try {
    dataset_from_csv("x1,y\n1.0,oops\n", "bad.csv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad.csv:2") != std::string::npos);
    CHECK(msg.find("oops") != std::string::npos);
  }
  CHECK_THROWS_AS(dataset_from_csv("x1,z\n1,2\n"), ParseError);   // last column not y
  CHECK_THROWS_AS(dataset_from_csv("x1,y\n"), ParseError);        // no rows
  CHECK_THROWS_AS(dataset_from_csv("x1,y\n1.0\n"), ParseError);   // ragged row
}

TEST_CASE("prediction csv schema") {
  Dataset data;
  data.x.resize(3, 2);
  data.x << 0, 0, 1, 0, 0, 1;
  data.y.resize(3);
  data.y << 0, 1, 2;
  const auto model = fit(data, EstimatorConfig::cr());
  const std::string path = "/tmp/cvxreg_pred_test.csv";
  write_predictions_csv(data, model, true, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "x1,x2,y,yhat,beta1,beta2");
  std::string row;
  int rows = 0;
  while (std::getline(in, row))
    if (!row.empty()) ++rows;
  CHECK(rows == 3);
  std::remove(path.c_str());

  Dataset wrong;
  wrong.x.resize(2, 1);
  wrong.x << 0, 1;
  wrong.y.resize(2);
  wrong.y << 0, 1;
  CHECK_THROWS_AS(write_predictions_csv(wrong, model, false, path), DimensionError);
}
