#include <doctest.h>

#include <cmath>

#include "doppler/analysis.hpp"
#include "doppler/oracle.hpp"
#include "doppler/rng.hpp"
#include "support.hpp"

using namespace doppler;
using doctest::Approx;

TEST_CASE("stacked design matrix") {
  SUBCASE("triangle") {
    const auto x = fixtures::triangle();
    const auto s = oracle::build_system(x.topology, x.measurements);
    REQUIRE(s.row_order == std::vector<Edge>{{1, 2}, {1, 3}, {2, 3}});
    Eigen::MatrixXd full(3, 3);
    full << s.a1, s.A;
    Eigen::MatrixXd expect(3, 3);
    expect << 1, 1, 0, 1, 0, 1, 0, 1, 1;
    CHECK(full == expect);
    CHECK(s.r == Eigen::Vector3d(300, 400, 500));
  }
  SUBCASE("single edge") {
    const auto t = fixtures::graph(2, {{1, 2}});
    const auto s = oracle::build_system(t, fixtures::exact(t, fixtures::truth({1, 2})));
    CHECK(s.a1 == Eigen::VectorXd::Ones(1));
    CHECK(s.A == Eigen::MatrixXd::Ones(1, 1));
  }
  SUBCASE("path") {
    const auto x = fixtures::path3();
    const auto s = oracle::build_system(x.topology, x.measurements);
    Eigen::MatrixXd expect(2, 2);
    expect << 1, 0, 1, 1;
    CHECK(s.A == expect);
    CHECK(s.a1 == Eigen::Vector2d(1, 0));
  }
  SUBCASE("every row has two ones") {
    const auto x = fixtures::random_connected(20, 0.3, 4);
    const auto s = oracle::build_system(x.topology, x.measurements);
    for (Eigen::Index i = 0; i < s.A.rows(); ++i) {
      CHECK(s.a1(i) + s.A.row(i).sum() == 2.0);
      CHECK(s.noise_variance(i) > 0.0);
    }
  }
}

TEST_CASE("ML estimate and CRLB on small fixtures") {
  SUBCASE("triangle") {
    const auto x = fixtures::triangle();
    const auto r = oracle::solve(x.topology, x.measurements, 100.0);
    CHECK(r.estimates.at(2) == Approx(200.0).epsilon(1e-12));
    CHECK(r.estimates.at(3) == Approx(300.0).epsilon(1e-12));
    CHECK(r.crlb.at(2) == Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.crlb.at(3) == Approx(2.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("single edge") {
    const auto t = fixtures::graph(2, {{1, 2}}, 4.0);
    const auto m = fixtures::exact(t, fixtures::truth({7, 11}));
    const auto r = oracle::solve(t, m, 7.0);
    CHECK(r.estimates.at(2) == Approx(11.0));
    CHECK(r.crlb.at(2) == Approx(4.0));
  }
  SUBCASE("path") {
    const auto x = fixtures::path3();
    const auto r = oracle::solve(x.topology, x.measurements, 1.0);
    CHECK(r.estimates.at(2) == Approx(2.0).epsilon(1e-12));
    CHECK(r.estimates.at(3) == Approx(3.0).epsilon(1e-12));
    CHECK(r.crlb.at(2) == Approx(1.0).epsilon(1e-12));
    CHECK(r.crlb.at(3) == Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("ML is exact on noiseless measurements") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto x = fixtures::random_connected(25, 0.2, s);
    x.measurements = fixtures::exact(x.topology, x.truth);
    const auto r = oracle::solve(x.topology, x.measurements, x.truth.anchor_value);
    for (const auto& [n, f] : r.estimates) CHECK(std::abs(f - x.truth.offsets.at(n)) < 1e-10);
  }
}

TEST_CASE("unreachable nodes are excluded, not singular") {
  auto t = fixtures::graph(5, {{1, 2}, {2, 3}, {4, 5}});
  const auto g = fixtures::truth({0, 1, 2, 3, 4});
  const auto r = oracle::solve(t, fixtures::exact(t, g), 0.0);
  CHECK(r.excluded == std::vector<NodeId>{4, 5});
  CHECK(r.estimates.count(4) == 0);
  CHECK(r.estimates.size() == 2);
}

TEST_CASE("CRLB scales linearly with the noise") {
  const auto x = fixtures::random_connected(15, 0.3, 2);
  const auto base = oracle::solve(x.topology, x.measurements, 0.0);
  scenario::Topology scaled(1);
  for (NodeId n : x.topology.nodes()) if (n != 1) scaled.add_node(n);
  for (const auto& [e, p] : x.topology.edges()) {
    scaled.add_edge(e.lo, e.hi, {p.noise_variance * 3.5, p.reliability});
  }
  const auto s = oracle::solve(scaled, x.measurements, 0.0);
  for (const auto& [n, v] : base.crlb) CHECK(s.crlb.at(n) == Approx(3.5 * v).epsilon(1e-12));
}

TEST_CASE("ML is unbiased and efficient over redraws") {
  const auto x = fixtures::random_connected(6, 0.4, 21);
  const auto sys = oracle::build_system(x.topology, x.measurements);
  const oracle::MlSolver solver(sys);
  const int trials = 10000;
  std::map<NodeId, double> bias;
  std::map<NodeId, double> sq;
  double avg_mse = 0.0;
  for (int k = 0; k < trials; ++k) {
    const auto m = scenario::sample_measurements(x.topology, x.truth,
                                                 derive_seed(5, {static_cast<std::uint64_t>(k)}));
    const auto est = oracle::ml_estimate(oracle::build_system(x.topology, m), 0.0);
    for (const auto& [n, f] : est) {
      const double err = f - x.truth.offsets.at(n);
      bias[n] += err;
      sq[n] += err * err;
    }
    avg_mse += analysis::average_mse(est, x.truth);
  }
  const auto bound = solver.crlb();
  for (std::size_t c = 0; c < sys.columns.size(); ++c) {
    const NodeId n = sys.columns[c];
    CHECK(std::abs(bias[n] / trials) < 3.0 * std::sqrt(bound(c) / trials));
    CHECK(sq[n] / trials == Approx(bound(c)).epsilon(0.1));
  }
  CHECK(avg_mse / trials == Approx(bound.mean()).epsilon(0.1));
}

TEST_CASE("triangle Monte-Carlo MSE matches 2/3") {
  const auto x = fixtures::triangle();
  double total = 0.0;
  const int trials = 10000;
  for (int k = 0; k < trials; ++k) {
    const auto m = scenario::sample_measurements(x.topology, x.truth,
                                                 derive_seed(8, {static_cast<std::uint64_t>(k)}));
    total += analysis::average_mse(oracle::solve(x.topology, m, 100.0).estimates, x.truth);
  }
  CHECK(total / trials == Approx(2.0 / 3.0).epsilon(0.1));
}
