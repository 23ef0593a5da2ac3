#include <doctest.h>

#include "helpers.hpp"
#include "jobmatch/error.hpp"
#include "jobmatch/io.hpp"

#include <cmath>
#include <sstream>

using namespace jobmatch;

namespace {

DatasetSchema two_by_two(TransferTransform t = TransferTransform::Identity) {
  DatasetSchema s;
  s.worker_columns = {"educ", "exper"};
  s.firm_columns = {"risk", "size"};
  s.transfer_column = "wage";
  s.transform = t;
  return s;
}

}  // namespace

TEST_CASE("csv round trip is exact") {
  const auto sample = testing::random_sample(25, 2, 2, 12, 0.3, 0.3);
  const auto schema = two_by_two();
  std::stringstream buf;
  write_sample(buf, sample, schema);
  const auto back = read_sample(buf, schema);
  CHECK(back.rows == 25);
  CHECK(back.missing == 25 - sample.n_observed());
  CHECK(back.sample.workers() == sample.workers());
  CHECK(back.sample.firms() == sample.firms());
  CHECK(back.sample.transfers() == sample.transfers());

  std::stringstream again;
  write_sample(again, back.sample, schema);
  std::stringstream first;
  write_sample(first, sample, schema);
  CHECK(again.str() == first.str());
}

TEST_CASE("log transform reads wages and writes them back") {
  const std::string csv =
      "risk,educ,wage,size,exper\n"
      "1.5,12,20,3,4\n"
      "0.5,16,35.5,1,2\n"
      "2,10,,2,1\n";
  std::istringstream in(csv);
  const auto r = read_sample(in, two_by_two(TransferTransform::Log));
  CHECK(r.rows == 3);
  CHECK(r.missing == 1);
  CHECK(r.sample.worker(1)[0] == 16.0);
  CHECK(r.sample.firm(0)[1] == 3.0);
  CHECK(*r.sample.transfers()[1] == doctest::Approx(std::log(35.5)).epsilon(1e-15));
  CHECK_FALSE(r.sample.transfers()[2].has_value());

  std::stringstream out;
  write_sample(out, r.sample, two_by_two(TransferTransform::Log));
  const auto back = read_sample(out, two_by_two(TransferTransform::Log));
  CHECK(*back.sample.transfers()[1] == doctest::Approx(std::log(35.5)).epsilon(1e-15));
}

TEST_CASE("missing marker and weights") {
  auto schema = two_by_two();
  schema.missing_marker = "NA";
  schema.weight_column = "w";
  std::istringstream in("\xEF\xBB\xBF" "educ,exper,risk,size,wage,w\n1,2,3,4,NA,1\n2,3,4,5,1.5,3\n");
  const auto r = read_sample(in, schema);
  CHECK(r.missing == 1);
  CHECK(r.sample.weights()(0) == doctest::Approx(0.25));
  CHECK(r.sample.weights()(1) == doctest::Approx(0.75));
}

TEST_CASE("malformed files name the offending line") {
  const auto schema = two_by_two();
  auto line_of = [&](const std::string& csv) -> long {
    std::istringstream in(csv);
    try {
      read_sample(in, schema);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("") == 1);
  CHECK(line_of("educ,exper,risk,wage\n1,2,3,4\n") == 1);
  CHECK(line_of("educ,exper,risk,size,wage\n1,2,3,4,5\n1,2,x,4,5\n") == 3);
  CHECK(line_of("educ,exper,risk,size,wage\n1,2,3,4,5\n1,2,3\n") == 3);
  CHECK(line_of("educ,exper,risk,size,wage\n") > 0);
  std::istringstream neg("educ,exper,risk,size,wage\n1,2,3,4,-5\n");
  CHECK_THROWS_AS(read_sample(neg, two_by_two(TransferTransform::Log)), ParseError);
}

TEST_CASE("schema checks") {
  DatasetSchema s;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  auto dup = two_by_two();
  dup.firm_columns = {"educ"};
  CHECK_THROWS_AS(dup.validate(), ConfigError);
  CHECK(transfer_transform_from_string(to_string(TransferTransform::Log)) == TransferTransform::Log);
}
