#include "z2lgt/gf2.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

using namespace z2lgt;

namespace {

std::set<std::uint64_t> brute_solutions(const BitMatrix& a, const BitVector& b) {
  std::set<std::uint64_t> out;
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << a.cols()); ++x)
    if (a.multiply(BitVector::from_word(a.cols(), x)) == b) out.insert(x);
  return out;
}

std::uint64_t brute_flat_count(const CellComplex& cx, const BitVector& P) {
  std::uint64_t n = 0;
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << cx.num_edges()); ++s) {
    bool ok = true;
    for (auto p : P.indices()) {
      bool odd = false;
      for (const auto& inc : cx.plaquette_boundary(p)) odd ^= (s >> inc.index) & 1u;
      if (odd) {
        ok = false;
        break;
      }
    }
    n += ok;
  }
  return n;
}

}  // namespace

TEST_CASE("small affine systems") {
  auto id = BitMatrix::identity(2);
  auto s = solve_affine(id, BitVector::from_word(2, 0b01));
  REQUIRE(s.feasible);
  CHECK(s.particular == BitVector::from_word(2, 0b01));
  CHECK(s.kernel_dim() == 0);

  BitMatrix row(1, 2);
  row.set(0, 0);
  row.set(0, 1);
  auto t = solve_affine(row, BitVector::from_word(1, 1));
  REQUIRE(t.feasible);
  CHECK(t.particular == BitVector::from_word(2, 0b01));
  REQUIRE(t.kernel_dim() == 1);
  CHECK(t.kernel[0] == BitVector::from_word(2, 0b11));

  CHECK_THROWS_AS(solve_affine(row, BitVector(2)), InvalidArgument);
}

TEST_CASE("closed cube surfaces") {
  auto cube = build_complex(3, {2, 2, 2});
  auto s = solve_affine(boundary_matrix(cube), BitVector(cube.num_edges()));
  REQUIRE(s.feasible);
  CHECK(s.kernel_dim() == 1);
  std::set<std::uint64_t> found;
  s.for_each([&](const BitVector& x) { found.insert(x.to_word()); });
  CHECK(found == brute_solutions(boundary_matrix(cube), BitVector(cube.num_edges())));
  CHECK(found == std::set<std::uint64_t>{0, 0b111111});
}

TEST_CASE("solution sets agree with brute force on random systems") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng() % 12, cols = 1 + rng() % 20;
    BitMatrix a(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        if (rng() % 3 == 0) a.set(r, c);
    // Half the right-hand sides are images, so most systems are feasible.
    BitVector b = trial % 2 ? a.multiply(BitVector::from_word(cols, rng() & ((std::uint64_t{1} << cols) - 1)))
                            : BitVector::from_word(rows, rng() & ((std::uint64_t{1} << rows) - 1));
    const auto brute = brute_solutions(a, b);
    const auto s = solve_affine(a, b);
    CHECK(s.feasible == !brute.empty());
    if (!s.feasible) continue;
    std::set<std::uint64_t> found;
    s.for_each([&](const BitVector& x) { found.insert(x.to_word()); });
    CHECK(found == brute);
    CHECK(found.size() == (std::size_t{1} << s.kernel_dim()));
    for (const auto& k : s.kernel) CHECK(a.multiply(k).none());
    CHECK(rank(BitMatrix::from_rows(cols, s.kernel)) == s.kernel_dim());
  }
}

TEST_CASE("reduction is idempotent") {
  std::mt19937_64 rng(3);
  BitMatrix a(8, 13);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 13; ++c)
      if (rng() & 1u) a.set(r, c);
  reduce_to_rref(a);
  BitMatrix again = a;
  reduce_to_rref(again);
  CHECK(again == a);
}

TEST_CASE("uniform solutions") {
  std::mt19937_64 rng(5);
  auto id = BitMatrix::identity(3);
  auto unique = solve_affine(id, BitVector::from_word(3, 0b101));
  for (int i = 0; i < 10; ++i) CHECK(uniform_solution(unique, rng) == BitVector::from_word(3, 0b101));

  auto cube = build_complex(3, {2, 2, 2});
  const auto a = boundary_matrix(cube);
  auto s = solve_affine(a, BitVector(cube.num_edges()));
  const int draws = 10000;
  int full = 0;
  for (int i = 0; i < draws; ++i) {
    const auto x = uniform_solution(s, rng);
    REQUIRE(a.multiply(x).none());
    full += x.any();
  }
  // Binomial(10^4, 1/2): sigma = 50.
  CHECK(std::abs(full - draws / 2) <= 150);

  BitMatrix zero(1, 1);
  auto bad = solve_affine(zero, BitVector::from_word(1, 1));
  CHECK_FALSE(bad.feasible);
  CHECK_THROWS_AS(uniform_solution(bad, rng), Infeasible);
}

TEST_CASE("first Betti number of plaquette sets") {
  auto cube = build_complex(3, {2, 2, 2});
  const std::size_t np = cube.num_plaquettes();
  CHECK(betti_b1(cube, BitVector(np)) == 12);
  CHECK(betti_b1(cube, BitVector::from_word(np, 0b111111)) == 7);
  CHECK(betti_b1(cube, BitVector::from_word(np, 0b000001)) == 11);
  CHECK(brute_flat_count(cube, BitVector::from_word(np, 0b111111)) == 128);

  for (std::uint64_t s = 0; s < 64; ++s) {
    const auto P = BitVector::from_word(np, s);
    CHECK((std::uint64_t{1} << betti_b1(cube, P)) == brute_flat_count(cube, P));
  }
  auto sheet = build_complex(3, {3, 2, 1});
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto P = BitVector::from_word(sheet.num_plaquettes(), s);
    CHECK((std::uint64_t{1} << betti_b1(sheet, P)) == brute_flat_count(sheet, P));
  }
  CHECK_THROWS_AS(betti_b1(cube, BitVector(5)), InvalidArgument);
}

TEST_CASE("Betti number does not increase along nested sets") {
  std::mt19937_64 rng(9);
  auto cx = build_complex(3, {3, 3, 2});
  for (int chain = 0; chain < 10; ++chain) {
    std::vector<std::size_t> order(cx.num_plaquettes());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    BitVector P(cx.num_plaquettes());
    std::size_t prev = betti_b1(cx, P);
    for (auto p : order) {
      P.set(p);
      const auto b = betti_b1(cx, P);
      CHECK(b <= prev);
      CHECK(prev - b <= 1);
      prev = b;
    }
  }
}
