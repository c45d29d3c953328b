#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "doctest.h"
#include "greg/data.hpp"
#include "greg/rng.hpp"

using namespace greg;

namespace {

const Matrix kMeans = (Matrix(3, 2) << 1, 0, -1, 2, 0, -3).finished();

std::set<std::vector<double>> row_set(const Matrix& m) {
  std::set<std::vector<double>> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.insert({m(i, 0), m(i, 1)});
  return out;
}

std::vector<unsigned char> idx_bytes(std::initializer_list<std::uint32_t> dims, std::size_t payload) {
  std::vector<unsigned char> b{0, 0, 0x08, static_cast<unsigned char>(dims.size())};
  for (std::uint32_t d : dims) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>(d >> s));
  }
  for (std::size_t i = 0; i < payload; ++i) b.push_back(static_cast<unsigned char>(i * 40));
  return b;
}

}  // namespace

TEST_CASE("gaussian mixture") {
  const LabeledSet tiny = gen_gaussian_mixture(3, 10, kMeans, 1e-300, 1);
  REQUIRE(tiny.size() == 30);
  for (std::size_t i = 0; i < 30; ++i) {
    const int c = tiny.labels[i];
    CHECK(c == static_cast<int>(i / 10));
    CHECK((tiny.inputs.row(static_cast<Eigen::Index>(i)) - kMeans.row(c)).cwiseAbs().maxCoeff() < 1e-200);
  }

  const double sigma = 0.5;
  const std::size_t n = 4000;
  const LabeledSet big = gen_gaussian_mixture(3, n, kMeans, sigma, 2);
  for (int c = 0; c < 3; ++c) {
    const Eigen::RowVectorXd mean = big.inputs.middleRows(c * static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)).colwise().mean();
    CHECK((mean - kMeans.row(c)).cwiseAbs().maxCoeff() < 4 * sigma / std::sqrt(static_cast<double>(n)));
  }

  const LabeledSet again = gen_gaussian_mixture(3, n, kMeans, sigma, 2);
  CHECK(again.inputs == big.inputs);
  CHECK(again.labels == big.labels);
  CHECK_FALSE(gen_gaussian_mixture(3, n, kMeans, sigma, 3).inputs == big.inputs);

  CHECK_THROWS_AS(gen_gaussian_mixture(4, 10, kMeans, sigma, 1), InvalidArgument);
  CHECK_THROWS_AS(gen_gaussian_mixture(3, 10, kMeans, 0.0, 1), InvalidArgument);
  CHECK_THROWS_AS(gen_gaussian_mixture(1, 10, kMeans.topRows(1), sigma, 1), InvalidArgument);
}

TEST_CASE("ring") {
  const LabeledSet ring = gen_ring(8000, 2.0, 3.0, 4);
  CHECK(ring.labels.empty());
  CHECK(ring.role == SetRole::Aux);
  std::vector<int> sectors(8, 0);
  for (Eigen::Index i = 0; i < ring.inputs.rows(); ++i) {
    const double r = ring.inputs.row(i).norm();
    CHECK((r >= 2.0 - 1e-12 && r <= 3.0 + 1e-12));
    const double a = std::atan2(ring.inputs(i, 1), ring.inputs(i, 0)) + std::numbers::pi;
    ++sectors[std::min(7, static_cast<int>(a / (std::numbers::pi / 4)))];
  }
  const double sd = std::sqrt(8000 * 0.125 * 0.875);
  for (int s : sectors) CHECK(std::abs(s - 1000.0) <= 4 * sd);

  const LabeledSet flat = gen_ring(50, 1.5, 1.5, 5, SetRole::OodTest);
  CHECK(flat.role == SetRole::OodTest);
  for (Eigen::Index i = 0; i < flat.inputs.rows(); ++i) CHECK(flat.inputs.row(i).norm() == doctest::Approx(1.5).epsilon(1e-15));

  CHECK(gen_ring(10, 1, 2, 6).inputs == gen_ring(10, 1, 2, 6).inputs);
  CHECK_THROWS_AS(gen_ring(10, 3.0, 2.0, 1), InvalidArgument);
  CHECK_THROWS_AS(gen_ring(10, -1.0, 2.0, 1), InvalidArgument);
}

TEST_CASE("default scenario separates ID from OOD by radius") {
  const ScenarioConfig cfg;
  const Scenario s = make_scenario(cfg, 7);
  CHECK(s.id_train.size() == 1600);
  CHECK(s.id_test.size() == 400);
  CHECK(s.aux.size() == 4000);
  CHECK(s.ood_test.size() == 1000);
  CHECK(s.aux.labels.empty());
  CHECK(s.ood_test.role == SetRole::OodTest);
  double max_mean = 0.0;
  for (Eigen::Index c = 0; c < cfg.means.rows(); ++c) max_mean = std::max(max_mean, cfg.means.row(c).norm());
  REQUIRE(cfg.ood_r_min > max_mean + 6 * cfg.sigma);
  double id_max = 0.0;
  for (const LabeledSet* set : {&s.id_train, &s.id_test}) {
    for (Eigen::Index i = 0; i < set->inputs.rows(); ++i) id_max = std::max(id_max, set->inputs.row(i).norm());
  }
  double ood_min = INFINITY;
  for (Eigen::Index i = 0; i < s.ood_test.inputs.rows(); ++i) ood_min = std::min(ood_min, s.ood_test.inputs.row(i).norm());
  CHECK(id_max < ood_min);

  const Scenario t = make_scenario(cfg, 7);
  CHECK(t.id_train.inputs == s.id_train.inputs);
  CHECK(t.aux.inputs == s.aux.inputs);
}

TEST_CASE("split") {
  LabeledSet ten;
  ten.role = SetRole::Aux;
  ten.inputs.resize(10, 2);
  for (int i = 0; i < 10; ++i) ten.inputs.row(i) << i, -i;

  const std::vector<double> whole{1.0};
  const auto same = split(ten, whole, 3);
  REQUIRE(same.size() == 1);
  CHECK(row_set(same[0].inputs) == row_set(ten.inputs));

  const std::vector<double> halves{0.5, 0.5};
  const auto parts = split(ten, halves, 3);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].size() == 5);
  CHECK(parts[1].size() == 5);
  auto a = row_set(parts[0].inputs);
  const auto b = row_set(parts[1].inputs);
  for (const auto& r : b) CHECK(a.count(r) == 0);
  a.insert(b.begin(), b.end());
  CHECK(a == row_set(ten.inputs));
  CHECK(parts[0].role == SetRole::Aux);

  const LabeledSet three = gen_gaussian_mixture(3, 100, kMeans, 0.3, 8);
  const auto strat = split(three, halves, 9);
  for (const auto& part : strat) {
    std::vector<int> count(3, 0);
    for (int l : part.labels) ++count[static_cast<std::size_t>(l)];
    CHECK(count == std::vector<int>{50, 50, 50});
  }
  CHECK(split(three, halves, 9)[0].inputs == strat[0].inputs);

  const std::vector<double> bad{0.5, 0.4};
  CHECK_THROWS_AS(split(ten, bad, 1), InvalidArgument);
  const std::vector<double> negative{1.5, -0.5};
  CHECK_THROWS_AS(split(ten, negative, 1), InvalidArgument);
}

TEST_CASE("idx parsing") {
  const auto bytes = idx_bytes({2, 3}, 6);
  const Tensor t = parse_idx(bytes);
  CHECK(t.shape() == std::vector<std::size_t>{2, 3});
  CHECK(t.values()[1] == 40.0 / 255.0);

  try {
    parse_idx(idx_bytes({2, 3}, 4));
    FAIL("expected truncation error");
  } catch (const IdxError& e) {
    CHECK(e.kind() == IdxError::Kind::Truncated);
    CHECK(e.expected_bytes() == 6);
    CHECK(e.actual_bytes() == 4);
    CHECK(std::string(e.what()).find('6') != std::string::npos);
  }

  auto bad = bytes;
  bad[2] = 0x0D;
  try {
    parse_idx(bad);
    FAIL("expected magic error");
  } catch (const IdxError& e) {
    CHECK(e.kind() == IdxError::Kind::BadMagic);
  }
  CHECK_THROWS_AS(parse_idx(std::vector<unsigned char>{0, 0}), FormatError);
  CHECK_THROWS_AS(load_idx("/nonexistent/file.idx"), IoError);
}

TEST_CASE("idx round trip") {
  Rng rng(10);
  std::vector<double> values(4 * 5 * 3);
  for (double& v : values) v = static_cast<double>(rng.index(256)) / 255.0;
  const Tensor t(Shape{4, 5, 3}, values);
  const auto path = std::filesystem::temp_directory_path() / "greg_roundtrip.idx";
  write_idx(t, path);
  const Tensor back = load_idx(path);
  CHECK(back.shape() == t.shape());
  CHECK(std::vector<double>(back.values().begin(), back.values().end()) == values);
  CHECK(encode_idx(t) == encode_idx(back));
  std::filesystem::remove(path);
  const std::vector<double> over{1.5};
  CHECK_THROWS_AS(encode_idx(Tensor(Shape{1}, over)), InvalidArgument);
}

TEST_CASE("csv round trip") {
  const LabeledSet id = gen_gaussian_mixture(3, 7, kMeans, 0.3, 11, SetRole::IdTest);
  const auto path = std::filesystem::temp_directory_path() / "greg_roundtrip.csv";
  write_csv(id, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "x0,x1,label");
  in.close();
  const LabeledSet back = read_csv(path, SetRole::IdTest);
  CHECK(back.inputs == id.inputs);
  CHECK(back.labels == id.labels);

  const LabeledSet ring = gen_ring(5, 1, 2, 12);
  write_csv(ring, path);
  const LabeledSet ring_back = read_csv(path, SetRole::Aux);
  CHECK(ring_back.inputs == ring.inputs);
  CHECK(ring_back.labels.empty());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_csv("/nonexistent.csv", SetRole::Aux), IoError);
}
