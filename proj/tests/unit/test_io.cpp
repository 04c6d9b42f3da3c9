#include <doctest.h>

#include <filesystem>

#include "cfaudit/checkpoint.hpp"
#include "cfaudit/dataset.hpp"
#include "cfaudit/error.hpp"
#include "cfaudit/scm.hpp"

using namespace cfaudit;

TEST_SUITE("io") {
  TEST_CASE("checkpoint JSON round trip is exact") {
    Checkpoint c;
    Matrix m(2, 3);
    m << 1.0 / 3.0, -2e-300, 5, 6, 7e300, -0.1;
    c["a.weight"] = m;
    c["a.bias"] = Matrix::Constant(1, 1, 0.2);
    const Checkpoint back = checkpoint_from_json(checkpoint_to_json(c));
    REQUIRE(back.size() == 2);
    CHECK(back.at("a.weight") == m);
    CHECK(checkpoint_to_json(back) == checkpoint_to_json(c));
  }

  TEST_CASE("restoring requires every key with a matching shape") {
    Parameter w("w", Matrix::Zero(2, 2));
    std::vector<Parameter*> params{&w};
    Checkpoint c;
    CHECK_THROWS_AS(restore_parameters(c, params), Error);
    c["w"] = Matrix::Ones(3, 3);
    CHECK_THROWS_AS(restore_parameters(c, params), Error);
    c["w"] = Matrix::Ones(2, 2);
    restore_parameters(c, params);
    CHECK(w.value.isOnes());
  }

  TEST_CASE("malformed checkpoint text is rejected") {
    CHECK_THROWS_AS(checkpoint_from_json("{\"w\": {\"shape\": [2, 2], \"values\": [1, 2, 3]}}"), Error);
    CHECK_THROWS_AS(checkpoint_from_json("not json"), Error);
  }

  TEST_CASE("dataset CSV has the documented header and round-trips exactly") {
    const Dataset d = sample(build_intensity_2d_scm(), 50, 3);
    const std::string csv = dataset_to_csv(d);
    CHECK(csv.rfind("t_0,y_0,y_1\n", 0) == 0);
    const Dataset back = dataset_from_csv(csv);
    CHECK(back.t == d.t);
    CHECK(back.y == d.y);
    CHECK(dataset_to_csv(back) == csv);
  }

  TEST_CASE("dataset CSV errors") {
    CHECK_THROWS_AS(dataset_from_csv("a,b\n1,2\n"), Error);
    CHECK_THROWS_AS(dataset_from_csv("t_0,y_0\n1\n"), Error);
    CHECK_THROWS_AS(dataset_from_csv("t_0,y_0\n1,abc\n"), Error);
    CHECK_THROWS_AS(read_dataset(std::filesystem::path("/nonexistent/data.csv")), Error);
  }

  TEST_CASE("split is a disjoint deterministic partition") {
    const Dataset d = sample(build_intensity_scm(), 1000, 4);
    const DatasetSplit a = split_dataset(d, 0.2, 9);
    const DatasetSplit b = split_dataset(d, 0.2, 9);
    CHECK(a.holdout.size() == 200);
    CHECK(a.train.size() == 800);
    CHECK(a.train.t == b.train.t);
    double total = a.train.t.sum() + a.holdout.t.sum();
    CHECK(total == doctest::Approx(d.t.sum()).epsilon(1e-12));
    CHECK_THROWS_AS(split_dataset(d, 1.0, 9), Error);
  }
}
