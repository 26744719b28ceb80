#include "z2lgt/forms.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <functional>
#include <cmath>
#include <random>
#include <utility>

using namespace z2lgt;

namespace {

GaugeField gradient(const CellComplex& cx, std::uint64_t lambda) {
  GaugeField g(cx.num_edges());
  for (std::size_t e = 0; e < cx.num_edges(); ++e) {
    const auto [t, h] = cx.edge_endpoints(e);
    g.bits.set(e, ((lambda >> t) ^ (lambda >> h)) & 1u);
  }
  return g;
}

GaugeField add(const GaugeField& a, const GaugeField& b) { return GaugeField(a.bits ^ b.bits); }

// Every current q <= n, visited by odometer.
bool brute_subcurrent(const CellComplex& cx, const Current& n, const Loop& gamma) {
  Current q(n.size());
  while (true) {
    if (is_source(cx, q, gamma)) return true;
    std::size_t p = 0;
    while (p < n.size() && q.values[p] == n.values[p]) q.values[p++] = 0;
    if (p == n.size()) return false;
    ++q.values[p];
  }
}

std::size_t brute_area(const CellComplex& cx, const Loop& gamma) {
  std::size_t best = ~std::size_t{0};
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << cx.num_plaquettes()); ++s) {
    const TwoFormZ2 P(BitVector::from_word(cx.num_plaquettes(), s));
    if (edge_parity(cx, P) == gamma.support()) best = std::min(best, P.bits.popcount());
  }
  return best;
}

}  // namespace

TEST_CASE("holonomy") {
  auto cube = build_complex(3, {2, 2, 2});
  const auto zero = GaugeField::zero(cube);
  for (std::size_t p = 0; p < cube.num_plaquettes(); ++p) CHECK(holonomy(cube, zero, p) == 1);

  for (std::size_t e = 0; e < cube.num_edges(); ++e) {
    GaugeField s = zero;
    s.bits.flip(e);
    std::vector<int> expected(cube.num_plaquettes(), 1);
    for (const auto& inc : cube.edge_coboundary(e)) expected[inc.index] = -1;
    for (std::size_t p = 0; p < cube.num_plaquettes(); ++p) CHECK(holonomy(cube, s, p) == expected[p]);
  }
  for (std::uint64_t lambda = 0; lambda < 256; ++lambda) {
    const auto g = gradient(cube, lambda);
    for (std::size_t p = 0; p < cube.num_plaquettes(); ++p) CHECK(holonomy(cube, g, p) == 1);
  }
  CHECK_THROWS_AS(holonomy(cube, zero, 6), InvalidArgument);
}

TEST_CASE("action") {
  auto cube = build_complex(3, {2, 2, 2});
  CHECK(action(cube, GaugeField::zero(cube)) == -12.0);
  auto sheet = build_complex(3, {2, 2, 1});
  GaugeField s = GaugeField::zero(sheet);
  s.bits.flip(2);
  CHECK(action(sheet, s) == 2.0);

  std::mt19937_64 rng(1);
  auto box = build_complex(3, {3, 3, 2});
  const double np = static_cast<double>(box.num_plaquettes());
  for (int i = 0; i < 50; ++i) {
    GaugeField r(box.num_edges());
    for (std::size_t e = 0; e < box.num_edges(); ++e) r.bits.set(e, rng() & 1u);
    const double a = action(box, r);
    CHECK(a >= -2 * np);
    CHECK(a <= 2 * np);
    CHECK(static_cast<long>(a - 2 * np) % 4 == 0);
  }
}

TEST_CASE("Wilson loops are gauge invariant") {
  auto cube = build_complex(3, {2, 2, 2});
  const auto gamma = Loop::plaquette_boundary(cube, 0);
  CHECK(wilson(cube, GaugeField::zero(cube), gamma) == 1);
  CHECK(wilson(cube, GaugeField::zero(cube), Loop::empty(cube)) == 1);
  std::vector<GaugeField> grads;
  for (std::uint64_t lambda = 0; lambda < 256; ++lambda) grads.push_back(gradient(cube, lambda));
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << cube.num_edges()); ++s) {
    const GaugeField sigma(BitVector::from_word(cube.num_edges(), s));
    CHECK(wilson(cube, sigma, Loop::empty(cube)) == 1);
    const int w = wilson(cube, sigma, gamma);
    for (std::size_t l = 0; l < grads.size(); l += 37) REQUIRE(wilson(cube, add(sigma, grads[l]), gamma) == w);
  }
  auto other = build_complex(3, {2, 2, 1});
  CHECK_THROWS_AS(wilson(other, GaugeField::zero(other), gamma), InvalidArgument);
}

TEST_CASE("current weights") {
  const auto half = CouplingParams::uniform(0.5, 3);
  CHECK(current_weight(Current(3), half) == 1.0);
  Current two(std::vector<std::uint32_t>{2, 0, 0});
  CHECK(current_weight_exact(two, Rational(1, 2)) == Rational(1, 2));
  CHECK(current_weight(two, half) == Catch::Approx(0.5));
  CHECK(current_weight_exact(Current(3), Rational(1, 3)) == 1);
  CHECK(current_weight(two, CouplingParams::uniform(0.0, 3)) == 0.0);

  std::mt19937_64 rng(2);
  const Rational beta(3, 7);
  for (int i = 0; i < 50; ++i) {
    Current a(4), b(4);
    for (std::size_t p = 0; p < 4; ++p) {
      a.values[p] = static_cast<std::uint32_t>(rng() % 5);
      b.values[p] = static_cast<std::uint32_t>(rng() % 5);
    }
    BigInt binom = 1;
    for (std::size_t p = 0; p < 4; ++p) {
      BigInt c = 1;
      for (std::uint32_t k = 1; k <= a.values[p]; ++k) c = c * (b.values[p] + k) / k;
      binom *= c;
    }
    CHECK(Rational(binom) * current_weight_exact(a + b, beta) ==
          current_weight_exact(a, beta) * current_weight_exact(b, beta));
    CHECK(std::log(current_weight(a, CouplingParams::uniform(3.0 / 7, 4))) ==
          Catch::Approx(log_current_weight(a, CouplingParams::uniform(3.0 / 7, 4))));
  }
}

TEST_CASE("coupling parameters") {
  const auto c = CouplingParams::uniform(0.3, 6);
  CHECK(c.prob_hat(0) == Catch::Approx(1 - 1 / std::cosh(0.6)));
  CHECK(c.prob_ht(0) == Catch::Approx(std::tanh(0.6)));
  CHECK(c.prob_boost(0) == Catch::Approx(1 - std::exp(-0.6)));
  CHECK(c.prob_cluster(0) == Catch::Approx(1 - std::exp(-1.2)));
  for (double b : {0.01, 0.1, 0.5, 1.0, 3.0}) {
    const auto q = CouplingParams::uniform(b, 1);
    CHECK(q.prob_hat(0) < q.prob_ht(0));
    CHECK(q.prob_ht(0) < q.prob_cluster(0));
    CHECK(q.prob_cluster(0) < 1.0);
  }
  CHECK_THROWS_AS(CouplingParams::uniform(-0.1, 2), InvalidArgument);
  CHECK_THROWS_AS(CouplingParams::uniform(100.0, 2), InvalidArgument);
  const auto per = CouplingParams::per_plaquette({0.1, 0.2});
  CHECK_FALSE(per.is_uniform());
  CHECK(per.beta(1) == 0.2);
  CHECK_THROWS_AS(per.beta(), InvalidArgument);
  CHECK_THROWS_AS(per.check_size(3), InvalidArgument);
}

TEST_CASE("source condition") {
  auto cube = build_complex(3, {2, 2, 2});
  const auto empty = Loop::empty(cube);
  CHECK(is_source(cube, Current(6), empty));
  for (std::size_t p = 0; p < 6; ++p) {
    Current n(6);
    n.values[p] = 1;
    for (std::size_t q = 0; q < 6; ++q) CHECK(is_source(cube, n, Loop::plaquette_boundary(cube, q)) == (p == q));
    CHECK_FALSE(is_source(cube, n, empty));
    n.values[p] = 2;
    CHECK(is_source(cube, n, empty));
  }
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    Current n(6), parity(6);
    for (std::size_t p = 0; p < 6; ++p) {
      n.values[p] = static_cast<std::uint32_t>(rng() % 6);
      parity.values[p] = n.values[p] & 1u;
    }
    const auto g = Loop::plaquette_boundary(cube, rng() % 6);
    CHECK(is_source(cube, n, g) == is_source(cube, parity, g));
    CHECK(is_source(cube, n, empty) == is_source(cube, parity, empty));
  }
}

TEST_CASE("subcurrent existence") {
  auto box = build_complex(3, {3, 2, 2});
  const auto empty = Loop::empty(box);
  CHECK(has_subcurrent(box, Current(box.num_plaquettes()), empty));
  Current one(box.num_plaquettes());
  one.values[0] = 1;
  CHECK(has_subcurrent(box, one, Loop::plaquette_boundary(box, 0)));
  // A plaquette sharing no edge with plaquette 0.
  std::size_t far = 0;
  for (std::size_t q = 1; q < box.num_plaquettes(); ++q) {
    const auto a = Loop::plaquette_boundary(box, 0).support(), b = Loop::plaquette_boundary(box, q).support();
    if (!(a & b).any()) {
      far = q;
      break;
    }
  }
  REQUIRE(far != 0);
  CHECK_FALSE(has_subcurrent(box, one, Loop::plaquette_boundary(box, far)));
  CHECK_FALSE(brute_subcurrent(box, one, Loop::plaquette_boundary(box, far)));

  auto cube = build_complex(3, {2, 2, 2});
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    Current n(6);
    for (std::size_t p = 0; p < 6; ++p) n.values[p] = static_cast<std::uint32_t>(rng() % 3);
    Loop g = Loop::empty(cube);
    if (rng() & 1u) g = Loop::plaquette_boundary(cube, rng() % 6);
    if (rng() & 1u) g = set_boundary(cube, TwoFormZ2(BitVector::from_word(6, rng() & 63u)));
    CHECK(has_subcurrent(cube, n, g) == brute_subcurrent(cube, n, g));
  }
}

TEST_CASE("area") {
  auto cube = build_complex(3, {2, 2, 2});
  CHECK(area(cube, Loop::empty(cube)) == 0);
  for (std::size_t p = 0; p < 6; ++p) CHECK(area(cube, Loop::plaquette_boundary(cube, p)) == 1);

  for (auto [R, T] : {std::pair{1, 1}, {1, 2}, {2, 1}, {2, 2}, {1, 3}, {3, 2}}) {
    auto cx = build_complex(3, {R + 1, T + 1, 2});
    const std::vector<int> corner{0, 0, 0};
    const auto rect = Loop::rectangle(cx, corner, 0, 1, R, T);
    CHECK(rect.length() == static_cast<std::size_t>(2 * (R + T)));
    CHECK(area(cx, rect) == rectangle_area(R, T));
  }

  std::mt19937_64 rng(6);
  for (auto ext : {std::vector<int>{2, 2, 2}, {3, 3, 1}, {3, 2, 2}}) {
    auto cx = build_complex(3, ext);
    REQUIRE(cx.num_plaquettes() <= 12);
    for (int i = 0; i < 30; ++i) {
      const TwoFormZ2 P(BitVector::from_word(cx.num_plaquettes(), rng() & ((1u << cx.num_plaquettes()) - 1)));
      const auto g = set_boundary(cx, P);
      CHECK(area(cx, g) == brute_area(cx, g));
    }
  }
  auto big = build_complex(3, {4, 4, 4});
  CHECK_THROWS_AS(area(big, Loop::plaquette_boundary(big, 0), 10), SizeRefusal);
}

TEST_CASE("set boundaries") {
  auto cube = build_complex(3, {2, 2, 2});
  CHECK(set_boundary(cube, TwoFormZ2::empty(cube)).is_empty());
  for (std::size_t p = 0; p < 6; ++p) {
    TwoFormZ2 P = TwoFormZ2::empty(cube);
    P.bits.set(p);
    CHECK(set_boundary(cube, P).support() == Loop::plaquette_boundary(cube, p).support());
  }
  CHECK(set_boundary(cube, TwoFormZ2(BitVector::from_word(6, 63))).is_empty());
}

TEST_CASE("loops") {
  auto cx = build_complex(3, {3, 3, 2});
  const std::vector<int> corner{0, 0, 0};
  const auto rect = Loop::rectangle(cx, corner, 0, 1, 2, 2);
  const auto g = Loop::plaquette_boundary(cx, 0);
  CHECK((g + g).is_empty());
  CHECK((g + (-g)).is_empty());
  CHECK((rect + Loop::empty(cx)) == rect);
  for (auto c : rect.coefficients()) CHECK((c >= -1 && c <= 1));

  std::vector<std::int8_t> bad(cx.num_edges(), 0);
  bad[0] = 1;
  CHECK_THROWS_AS(Loop::from_coefficients(cx, bad), InvalidArgument);
  bad[0] = 2;
  CHECK_THROWS_AS(Loop::from_coefficients(cx, bad), InvalidArgument);
  CHECK_THROWS_AS(Loop::from_support(cx, BitVector::from_word(cx.num_edges(), 1)), InvalidArgument);
  CHECK_THROWS_AS(Loop::rectangle(cx, corner, 0, 1, 3, 1), InvalidArgument);
  CHECK_THROWS_AS(Loop::rectangle(cx, corner, 0, 0, 1, 1), InvalidArgument);
  const std::vector<int> coeffs(rect.coefficients().begin(), rect.coefficients().end());
  std::vector<std::int8_t> copy(coeffs.begin(), coeffs.end());
  CHECK(Loop::from_coefficients(cx, copy) == rect);
}

TEST_CASE("coupling step names") {
  for (auto s : {CouplingStep::parity, CouplingStep::lift, CouplingStep::hat_from_ht, CouplingStep::cluster_from_ht,
                 CouplingStep::cluster_from_hat, CouplingStep::subsurface, CouplingStep::gauge_to_cluster,
                 CouplingStep::cluster_to_gauge})
    CHECK(parse_coupling_step(to_string(s)) == s);
  CHECK(parse_coupling_step("d") == CouplingStep::subsurface);
  CHECK_THROWS_AS(parse_coupling_step("e"), InvalidArgument);
}
