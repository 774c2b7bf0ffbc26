#include <doctest.h>

#include <cmath>

#include "doppler/analysis.hpp"
#include "doppler/lsbp.hpp"
#include "doppler/oracle.hpp"
#include "doppler/rng.hpp"
#include "support.hpp"

using namespace doppler;
using doctest::Approx;

namespace {

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

void run_full(lsbp::Engine& e, int steps) {
  const auto all = netsim::DeliveryReport::uniform(e.problem(), netsim::Outcome::now());
  for (int k = 0; k < steps; ++k) e.step(all);
}

double max_gap_to_ml(const lsbp::Engine& e, const fixtures::Instance& x) {
  const auto ml = oracle::solve(x.topology, x.measurements, x.truth.anchor_value);
  double gap = 0.0;
  for (const auto& [n, f] : ml.estimates) gap = std::max(gap, std::abs(e.belief(n).mean - f));
  return gap;
}

scenario::MeasurementSet zeros(const scenario::Topology& t) {
  scenario::MeasurementSet m;
  for (const auto& [e, p] : t.edges()) m.values[e] = 0.0;
  return m;
}

}  // namespace

TEST_CASE("initial state") {
  const auto x = fixtures::triangle();
  SUBCASE("uniform variance 100") {
    const lsbp::Engine e(x.problem(), lsbp::Init{{100.0, 0.0}, {}});
    CHECK(e.stored(2, 3) == BroadcastBelief{0.0, 100.0, 0});
    CHECK(e.stored(3, 2) == BroadcastBelief{0.0, 100.0, 0});
    CHECK(e.stored(2, 1) == BroadcastBelief{100.0, 0.0, 0});
    CHECK(e.belief(1) == Belief{100.0, 0.0});
    CHECK(e.broadcasts().size() == 3);
  }
  SUBCASE("uninformative start is feasible") {
    const lsbp::Engine e(x.problem(), lsbp::Init::uninformative());
    CHECK(e.initial_feasibility() == lsbp::Feasibility::increasing);
    CHECK_FALSE(e.belief(2).informative());
  }
  SUBCASE("arbitrary means are accepted") {
    lsbp::Init init{{1.0, -12345.0}, {{3, {1.0, 9e5}}}};
    const lsbp::Engine e(x.problem(), init);
    CHECK(e.belief(3).mean == 9e5);
  }
  SUBCASE("bad initial variance") {
    CHECK_THROWS_AS(lsbp::Engine(x.problem(), lsbp::Init{{0.0, 0.0}, {}}), EngineError);
    CHECK_THROWS_AS(lsbp::Engine(x.problem(), lsbp::Init{{-1.0, 0.0}, {}}), EngineError);
  }
}

TEST_CASE("belief from neighbor beliefs") {
  SUBCASE("single anchor neighbor") {
    const auto t = fixtures::graph(2, {{1, 2}});
    scenario::MeasurementSet m;
    m.values[{1, 2}] = 300.0;
    const Problem p(t, m, 100.0);
    const std::vector<double> var = {0.0};
    const std::vector<double> mean = {100.0};
    const auto b = lsbp::incorporate(p, p.index_of(2), var, mean);
    CHECK(b.mean == Approx(200.0));
    CHECK(b.variance == Approx(1.0));
  }
  SUBCASE("two identical neighbors") {
    const auto t = fixtures::graph(3, {{1, 2}, {2, 3}});
    scenario::MeasurementSet m;
    m.values[{1, 2}] = 10.0;
    m.values[{2, 3}] = 10.0;
    const Problem p(t, m, 0.0);
    const std::vector<double> var = {1.0, 1.0};
    const std::vector<double> mean = {5.0, 5.0};
    const auto b = lsbp::incorporate(p, p.index_of(2), var, mean);
    CHECK(b.mean == Approx(5.0));
    CHECK(b.variance == Approx(1.0));
  }
  SUBCASE("uninformative neighbors only") {
    const auto x = fixtures::path3();
    const auto p = x.problem();
    const std::vector<double> var = {kInfinity};
    CHECK_FALSE(lsbp::incorporate(p, p.index_of(3), var, std::vector<double>{0.0}).informative());
  }
}

TEST_CASE("small fixtures converge to the centralized estimate") {
  SUBCASE("triangle") {
    const auto x = fixtures::triangle();
    lsbp::Engine e(x.problem(), lsbp::Init{{100.0, 0.0}, {}});
    run_full(e, 200);
    CHECK(e.belief(2).mean == Approx(200.0).epsilon(1e-12));
    CHECK(e.belief(3).mean == Approx(300.0).epsilon(1e-12));
  }
  SUBCASE("path") {
    const auto x = fixtures::path3();
    lsbp::Engine e(x.problem(), lsbp::Init::uninformative());
    run_full(e, 200);
    CHECK(std::abs(e.belief(2).mean - 2.0) < 1e-9);
    CHECK(std::abs(e.belief(3).mean - 3.0) < 1e-9);
  }
  SUBCASE("trees") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto x = fixtures::tree9(s);
      lsbp::Engine e(x.problem(), lsbp::Init{{10.0, 0.0}, {}});
      run_full(e, 400);
      CHECK(max_gap_to_ml(e, x) < 1e-9);
    }
  }
}

TEST_CASE("one broadcast per node per iteration") {
  const auto x = fixtures::random_connected(17, 0.3, 2);
  lsbp::Engine e(x.problem(), lsbp::Init{});
  CHECK(e.messages_per_iteration() == 17);
  CHECK(lsbp::message_count_per_iteration(x.problem()) == 17);
  const auto b = e.broadcasts();
  CHECK(b.size() == 17);
  for (const auto& m : b) CHECK(m.stamp == 1);
  CHECK(e.emit().size() == x.problem().slot_count());
  const auto k = scenario::generate_complete(100, 3);
  CHECK(lsbp::message_count_per_iteration(Problem(k, zeros(k), 0.0)) == 100);
}

TEST_CASE("zero delivery keeps stored beliefs") {
  const auto x = fixtures::random_connected(10, 0.4, 5);
  lsbp::Engine e(x.problem(), lsbp::Init{{3.0, 1.0}, {}});
  run_full(e, 3);
  std::vector<BroadcastBelief> before;
  for (const auto& [edge, p] : x.topology.edges()) before.push_back(e.stored(edge.lo, edge.hi));
  e.step(netsim::DeliveryReport{});
  std::size_t k = 0;
  for (const auto& [edge, p] : x.topology.edges()) CHECK(e.stored(edge.lo, edge.hi) == before[k++]);
}

TEST_CASE("late broadcasts never overwrite newer ones") {
  const auto x = fixtures::triangle();
  lsbp::Engine e(x.problem(), lsbp::Init{});
  CHECK(e.absorb({3, 2}, {1.0, 2.0, 5}));
  CHECK_FALSE(e.absorb({3, 2}, {9.0, 9.0, 4}));
  CHECK(e.stored(2, 3).mean == 1.0);
}

TEST_CASE("feasibility classes") {
  const auto x = fixtures::triangle();
  const auto p = x.problem();
  CHECK(lsbp::check_feasible_init(p, std::vector<double>{0.0, 0.0}) ==
        lsbp::Feasibility::increasing);
  CHECK(lsbp::check_feasible_init(p, std::vector<double>{1e6, 1e6}) ==
        lsbp::Feasibility::decreasing);
  const double star = 1.0 / kGolden;
  CHECK(lsbp::check_feasible_init(p, std::vector<double>{star * 1.5, star * 0.5}) ==
        lsbp::Feasibility::infeasible);
  CHECK_THROWS(lsbp::check_feasible_init(p, std::vector<double>{-1.0, 1.0}));
}

TEST_CASE("variance fixed point") {
  SUBCASE("single edge") {
    const auto t = fixtures::graph(2, {{1, 2}}, 4.0);
    const Problem p(t, zeros(t), 0.0);
    const auto r = lsbp::variance_fixed_point(p, std::vector<double>{0.0}, 1e-14, 100);
    CHECK(1.0 / r.precision[0] == Approx(4.0));
  }
  SUBCASE("triangle closed form from every start") {
    const auto p = fixtures::triangle().problem();
    for (double v : {100.0, 10.0, 1.0, 0.1, 0.01, kInfinity}) {
      const double p0 = std::isinf(v) ? 0.0 : 1.0 / v;
      const auto r = lsbp::variance_fixed_point(p, std::vector<double>{p0, p0}, 1e-15, 1000);
      CHECK(std::abs(1.0 / r.precision[0] - kGolden) < 1e-10);
      CHECK(std::abs(1.0 / r.precision[1] - kGolden) < 1e-10);
    }
  }
  SUBCASE("monotone from feasible starts") {
    const auto x = fixtures::random_connected(30, 0.2, 8);
    const auto p = x.problem();
    const std::size_t n = p.size() - 1;
    const auto up = lsbp::variance_fixed_point(p, std::vector<double>(n, 0.0), 1e-14, 10000, true);
    const auto down =
        lsbp::variance_fixed_point(p, std::vector<double>(n, 1e6), 1e-14, 10000, true);
    for (std::size_t l = 1; l < up.history.size(); ++l) {
      for (std::size_t i = 0; i < n; ++i) CHECK(up.history[l][i] >= up.history[l - 1][i] * (1 - 1e-15));
    }
    for (std::size_t l = 1; l < down.history.size(); ++l) {
      for (std::size_t i = 0; i < n; ++i) CHECK(down.history[l][i] <= down.history[l - 1][i] * (1 + 1e-15));
    }
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(up.precision[i] - down.precision[i]) < 1e-8);
  }
  SUBCASE("iteration cap") {
    const auto p = fixtures::triangle().problem();
    CHECK_THROWS_AS(lsbp::variance_fixed_point(p, std::vector<double>{0.0, 0.0}, 0.0, 5),
                    EngineError);
  }
}

TEST_CASE("engine variances follow the fixed-point recursion") {
  const auto x = fixtures::random_connected(20, 0.3, 14);
  const auto p = x.problem();
  lsbp::Engine e(p, lsbp::Init{{10.0, 0.0}, {}});
  std::vector<double> prec(p.size() - 1, 0.1);
  const auto all = netsim::DeliveryReport::uniform(p, netsim::Outcome::now());
  for (int l = 0; l < 30; ++l) {
    e.step(all);
    prec = lsbp::variance_map(p, prec);
    std::size_t k = 0;
    for (std::size_t u = 0; u < p.size(); ++u) {
      if (p.is_anchor(u)) continue;
      CHECK(1.0 / e.beliefs()[u].variance == Approx(prec[k++]).epsilon(1e-12));
    }
  }
}

TEST_CASE("K matrix") {
  SUBCASE("triangle") {
    const auto p = fixtures::triangle().problem();
    const double star = 1.0 / kGolden;
    const auto k = lsbp::build_k_matrix(p, std::vector<double>{star, star});
    const double expect = (1.0 / (1.0 + kGolden)) / (1.0 + 1.0 / (1.0 + kGolden));
    CHECK(k.at(0, 1) == Approx(expect).epsilon(1e-12));
    CHECK(k.at(1, 0) == Approx(expect).epsilon(1e-12));
    CHECK(k.at(0, 0) == 0.0);
    CHECK(analysis::spectral_radius(k).value == Approx(0.381966).epsilon(1e-5));
  }
  SUBCASE("star around the anchor") {
    const auto t = fixtures::graph(6, {{1, 2}, {1, 3}, {1, 4}, {1, 5}, {1, 6}});
    const auto k = lsbp::build_k_matrix(Problem(t, zeros(t), 0.0), std::vector<double>(5, 1.0));
    for (double v : k.entries) CHECK(v == 0.0);
    CHECK(analysis::spectral_radius(k).value == 0.0);
  }
  SUBCASE("path row sums") {
    const auto p = fixtures::path3().problem();
    const auto fp = lsbp::variance_fixed_point(p, std::vector<double>{0.0, 0.0}, 1e-14, 1000);
    const auto k = lsbp::build_k_matrix(p, fp.precision);
    CHECK(k.row_sum(0) < 1.0);
    CHECK(k.row_sum(1) <= 1.0);
  }
  SUBCASE("isolated node is rejected") {
    const auto t = fixtures::graph(3, {{1, 2}});
    CHECK_THROWS_AS(lsbp::build_k_matrix(Problem(t, zeros(t), 0.0), std::vector<double>{1.0, 1.0}),
                    EngineError);
  }
}

TEST_CASE("mean iteration reaches the linear-solve fixed point") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto x = fixtures::random_connected(25, 0.25, 40 + s);
    const auto p = x.problem();
    const auto fp = lsbp::variance_fixed_point(p, std::vector<double>(24, 0.0), 1e-14, 10000);
    const auto k = lsbp::build_k_matrix(p, fp.precision);
    const auto direct = lsbp::solve_mean_fixed_point(k);
    SplitMix64 rng(s);
    std::vector<double> init(24);
    for (auto& v : init) v = -1000 + 2000 * rng.uniform();
    const auto iterated = lsbp::iterate_means(k, init, 1e-11, 100000);
    for (std::size_t i = 0; i < 24; ++i) CHECK(std::abs(iterated[i] - direct[i]) < 1e-9);

    // The engine's converged means are the same fixed point.
    lsbp::Engine e(p, lsbp::Init{{1.0, 0.0}, {}});
    run_full(e, 3000);
    std::size_t c = 0;
    for (std::size_t u = 0; u < p.size(); ++u) {
      if (!p.is_anchor(u)) CHECK(std::abs(e.beliefs()[u].mean - direct[c++]) < 1e-8);
    }
  }
}

TEST_CASE("rebind keeps surviving slots") {
  const auto x = fixtures::random_connected(8, 0.4, 3);
  lsbp::Engine e(x.problem(), lsbp::Init{{5.0, 0.0}, {}});
  run_full(e, 4);
  const auto [t, g] = scenario::apply_event(x.topology, x.truth, {5, scenario::Leave{8}});
  scenario::MeasurementSet m = x.measurements;
  std::erase_if(m.values, [](const auto& kv) { return kv.first.joins(8); });
  std::vector<std::pair<Edge, BroadcastBelief>> before;
  for (const auto& [edge, p] : t.edges()) before.push_back({edge, e.stored(edge.lo, edge.hi)});
  e.rebind(Problem(t, m, x.truth.anchor_value));
  CHECK(e.problem().size() == 7);
  for (const auto& [edge, b] : before) CHECK(e.stored(edge.lo, edge.hi) == b);
}
