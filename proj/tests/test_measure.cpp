#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mmot/error.hpp"
#include "mmot/measure.hpp"

using namespace mmot;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::InvalidConfig;
}

DiscreteMeasure read_text(const std::string& text) {
  std::istringstream in(text);
  return read_measure(in);
}

// Squared distance from the origin to the closed cell box.
double box_min_sq(const CellIndex& c, const GridSpec& g) {
  double s = 0.0;
  for (auto a : c.coords) {
    const double lo = cell_lower(a, g), hi = cell_upper(a, g);
    const double gap = lo > 0 ? lo : (hi < 0 ? -hi : 0.0);
    s += gap * gap;
  }
  return s;
}

}  // namespace

TEST_CASE("atomic placement is exact") {
  const GridSpec g(2, 4.0, 3);
  const FiniteAtomic atoms{{{0, 0, 0}, {2, 0, 0}}, {0.5, 0.5}};
  const auto m = discretize(atoms, g);
  CHECK(m.size() == 2);
  for (const auto& [cell, w] : m.atoms()) CHECK(w == 0.5);
  CHECK(m.site(CellIndex{9, 1, 1}) == Point{2, 0, 0});
  CHECK(support_cardinality(m) == 2);
}

TEST_CASE("single atom and refinement preserve atom count") {
  const FiniteAtomic atoms{{{0.3, -0.2}, {-0.6, 0.7}, {0.9, 0.9}}, {0.2, 0.3, 0.5}};
  std::size_t prev = 0;
  for (int level = 1; level <= 6; ++level) {
    const auto m = discretize(atoms, GridSpec(level, 1.0, 2));
    CHECK(m.size() == 3);
    double total = 0;
    for (const auto& [c, w] : m.atoms()) total += w;
    CHECK(std::abs(total - 1.0) <= 1e-12);
    prev = m.size();
  }
  CHECK(prev == 3);
  const FiniteAtomic one{{{0.1, 0.1}}, {1.0}};
  CHECK(support_cardinality(discretize(one, GridSpec(2, 1.0, 2))) == 1);
}

TEST_CASE("uniform ball covering the window has equal interior weights") {
  const GridSpec g(3, 1.0, 2);
  const auto m = discretize(UniformBall{{0, 0}, 1.0}, g);
  double interior = -1;
  for (const auto& [cell, w] : m.atoms()) {
    // Cells whose far corner is well inside the ball are fully covered.
    double far = 0;
    for (auto a : cell.coords) {
      const double x = std::max(std::abs(cell_lower(a, g)), std::abs(cell_upper(a, g)));
      far += x * x;
    }
    if (far < 1.0) {
      if (interior < 0) interior = w;
      CHECK(w == interior);
    }
  }
  CHECK(interior > 0);
}

TEST_CASE("ball support at level 2 matches the geometric count") {
  for (int d = 1; d <= 3; ++d) {
    const GridSpec g(2, 1.0, d);
    const auto m = discretize(UniformBall{Point(d, 0.0), 1.0}, g);
    std::size_t count = 0;
    for (const auto& c : all_cells(g)) {
      if (box_min_sq(c, g) < 1.0) ++count;
    }
    CHECK(support_cardinality(m) == count);
  }
}

TEST_CASE("truncated gaussian matches a Monte Carlo integral") {
  const GridSpec g(3, 1.0, 3);
  const auto m = discretize(TruncatedGaussian{{0, 0, 0}, 0.5}, g, 4);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal(0.0, 0.5);
  std::map<CellIndex, double> hist;
  const int samples = 1000000;
  int accepted = 0;
  while (accepted < samples) {
    std::vector<double> p{normal(rng), normal(rng), normal(rng)};
    if (std::abs(p[0]) > 1 || std::abs(p[1]) > 1 || std::abs(p[2]) > 1) continue;
    hist[cell_of(p, g)] += 1.0;
    ++accepted;
  }
  CHECK(m.size() == all_cells(g).size());
  double worst = 0;
  for (const auto& [cell, w] : m.atoms()) {
    const auto it = hist.find(cell);
    const double mc = it == hist.end() ? 0.0 : it->second / samples;
    worst = std::max(worst, std::abs(mc - w));
  }
  CHECK(worst < 2e-3);
}

TEST_CASE("smooth presets reject support outside the window") {
  const GridSpec g(2, 1.0, 2);
  CHECK(kind_of([&] { discretize(UniformBall{{0.5, 0}, 1.0}, g); }) ==
        ErrorKind::SupportOutsideWindow);
  CHECK(kind_of([&] { discretize(FiniteAtomic{{{2, 0}}, {1.0}}, g); }) ==
        ErrorKind::SupportOutsideWindow);
  CHECK(kind_of([&] { discretize(FiniteAtomic{{{0, 0}}, {0.0}}, g); }) == ErrorKind::ZeroMass);
}

TEST_CASE("measure file parsing") {
  const auto m = read_text("mmot-measure v1 level=1 halfwidth=1 dim=3\n1 1 1 0.5\n# c\n2 1 1 0.5\n");
  CHECK(m.size() == 2);
  CHECK(m.grid().level() == 1);

  const auto near = read_text("mmot-measure v1 level=1 halfwidth=1 dim=1\n1 0.5\n2 0.5000000001\n");
  double total = 0;
  for (const auto& [c, w] : near.atoms()) total += w;
  CHECK(std::abs(total - 1.0) <= 1e-12);

  CHECK(kind_of([] { read_text("mmot-measure v1 level=1 halfwidth=1 dim=1\n1 1.1\n2 -0.1\n"); }) ==
        ErrorKind::NegativeWeight);
  CHECK(kind_of([] { read_text("mmot-measure v1 level=1 halfwidth=1 dim=1\n1 0.5\n2 0.6\n"); }) ==
        ErrorKind::NormalizationError);
  CHECK(kind_of([] { read_text("mmot-measure v2 level=1\n"); }) == ErrorKind::ParseError);
  CHECK(kind_of([] { read_text("mmot-measure v1 level=1 halfwidth=1 dim=1\n1 x\n"); }) ==
        ErrorKind::ParseError);
  CHECK(kind_of([] { read_text("mmot-measure v1 level=1 halfwidth=1 dim=1\n5 1\n"); }) ==
        ErrorKind::SupportOutsideWindow);
}

TEST_CASE("atomic serialization round-trips bit-exactly") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.01, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    FiniteAtomic atoms;
    for (int i = 0; i < 7; ++i) {
      atoms.points.push_back({u(rng), u(rng)});
      atoms.weights.push_back(w(rng));
    }
    const auto m = discretize(atoms, GridSpec(4, 1.0, 2));
    std::stringstream buf;
    write_measure(buf, m);
    const auto back = read_measure(buf);
    CHECK(back == m);
  }
}

TEST_CASE("renormalization is idempotent") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> w(0.001, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<CellIndex, double> weights;
    for (int i = 0; i < 1 + trial % 17; ++i) weights[CellIndex{i, -i}] = w(rng);
    renormalize(weights);
    const auto once = weights;
    CHECK(std::abs(total_mass(once) - 1.0) <= 1e-12);
    renormalize(weights);
    CHECK(weights == once);
  }
}
