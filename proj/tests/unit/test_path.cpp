#include <doctest.h>

#include <vector>

#include "mkv/errors.hpp"
#include "mkv/path.hpp"

using namespace mkv;

TEST_CASE("time grid points and index lookup") {
  const TimeGrid g(1.0, 4);
  CHECK(g.dt() == 0.25);
  CHECK(g.points() == 5);
  CHECK(g.time(3) == 0.75);
  CHECK(g.index_of(0.5) == 2);
  CHECK(g.index_of(1.0) == 4);
  CHECK_THROWS_AS(g.index_of(0.3), GridMismatch);
  CHECK_THROWS_AS(g.index_of(1.5), GridMismatch);
  CHECK_THROWS(TimeGrid(0.0, 4));
  CHECK_THROWS(TimeGrid(1.0, 0));
}

TEST_CASE("cloud storage is time-major and paths read through a stride") {
  const TimeGrid g(1.0, 2);
  Cloud c(g, 3, 2);
  for (std::size_t t = 0; t < 3; ++t) {
    auto row = c.marginal(t);
    for (std::size_t i = 0; i < 3; ++i) {
      row[i * 2] = 10.0 * static_cast<double>(t) + static_cast<double>(i);
      row[i * 2 + 1] = -row[i * 2];
    }
  }
  const PathView p = c.path(1);
  CHECK(p.length() == 3);
  CHECK(p.value(2, 0) == 21.0);
  CHECK(p.value(2, 1) == -21.0);
  CHECK(c.coordinate(1, 0) == std::vector<double>{10.0, 11.0, 12.0});
  CHECK(c.prefix(2, 1).length() == 2);

  const Path copy = c.copy_path(2);
  CHECK(copy.state(1)[0] == 12.0);
  Cloud d(g, 3, 2);
  d.set_path(0, copy.view());
  CHECK(d.path(0).value(2, 0) == 22.0);
}

TEST_CASE("stopped cloud freezes states after the stopping index") {
  const TimeGrid g(1.0, 3);
  Cloud c(g, 2, 1);
  for (std::size_t t = 0; t < 4; ++t) {
    c.marginal(t)[0] = static_cast<double>(t);
    c.marginal(t)[1] = -static_cast<double>(t);
  }
  const Cloud s = c.stopped(1);
  CHECK(s.path(0).value(3) == 1.0);
  CHECK(s.path(1).value(2) == -1.0);
  CHECK(s.path(0).value(1) == 1.0);
}

TEST_CASE("empty clouds are rejected") {
  CHECK_THROWS_AS(Cloud(TimeGrid(1.0, 2), 0, 1), EmptyInput);
}
