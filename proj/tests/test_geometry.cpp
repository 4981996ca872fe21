#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "simbeam/geometry.hpp"
#include "test_support.hpp"

using namespace simbeam;

namespace {

SimLayout layout_with(int ny, int nz, double spacing, double thickness, int layers) {
  SimLayout sim;
  sim.atoms_y = ny;
  sim.atoms_z = nz;
  sim.layers = layers;
  sim.atom_spacing = spacing;
  sim.thickness = thickness;
  sim.atom_area = spacing * spacing;
  return sim;
}

}  // namespace

TEST_CASE("near-square split") {
  CHECK(near_square_split(40) == std::pair<int, int>{8, 5});
  CHECK(near_square_split(16) == std::pair<int, int>{4, 4});
  CHECK(near_square_split(7) == std::pair<int, int>{7, 1});
  CHECK(near_square_split(1) == std::pair<int, int>{1, 1});
}

TEST_CASE("meta-atom positions") {
  SimLayout sim = layout_with(10, 4, 0.015, 0.15, 4);

  SUBCASE("reference element sits at the origin offset") {
    CHECK(meta_atom_position(0, sim) == Eigen::Vector3d(0, 0, 0));
  }
  SUBCASE("first element of the second row steps in z") {
    const auto p = meta_atom_position(sim.atoms_y, sim);
    CHECK(p.x() == 0.0);
    CHECK(p.y() == doctest::Approx(0.0));
    CHECK(p.z() == doctest::Approx(0.015));
  }
  SUBCASE("second element steps in y") {
    const auto p = meta_atom_position(1, sim);
    CHECK(p.y() == doctest::Approx(0.015));
    CHECK(p.z() == doctest::Approx(0.0));
  }
  SUBCASE("x coordinate is exactly zero everywhere") {
    for (int n = 0; n < sim.atom_count(); ++n) CHECK(meta_atom_position(n, sim).x() == 0.0);
  }
  SUBCASE("grid coverage is bijective") {
    std::set<std::pair<double, double>> seen;
    for (int n = 0; n < sim.atom_count(); ++n) {
      const auto p = meta_atom_position(n, sim);
      seen.emplace(p.y(), p.z());
    }
    CHECK(static_cast<int>(seen.size()) == sim.atom_count());
  }
  SUBCASE("out of range throws") {
    CHECK_THROWS_AS(meta_atom_position(-1, sim), std::out_of_range);
    CHECK_THROWS_AS(meta_atom_position(sim.atom_count(), sim), std::out_of_range);
  }
}

TEST_CASE("user antenna positions") {
  UserLayout users;
  users.antennas = 2;
  users.antenna_spacing = 0.015;
  users.users = {{3.0, 0.0}, {3.0, kPi / 2.0}, {2.0, kPi / 4.0}};

  CHECK(user_antenna_position(0, 0, users).isApprox(Eigen::Vector3d(3, 0, 0)));
  CHECK(user_antenna_position(1, 0, users).isApprox(Eigen::Vector3d(0, 3, 0), 1e-12));

  const auto p = user_antenna_position(2, 1, users);
  CHECK(p.x() == doctest::Approx(2.0 * std::cos(kPi / 4.0)).epsilon(1e-12));
  CHECK(p.y() == doctest::Approx(2.0 * std::sin(kPi / 4.0) + 0.015).epsilon(1e-12));
  CHECK(p.z() == 0.0);

  CHECK_THROWS_AS(user_antenna_position(3, 0, users), std::out_of_range);
  CHECK_THROWS_AS(user_antenna_position(0, 2, users), std::out_of_range);
}

TEST_CASE("element-user distances") {
  SimLayout sim = layout_with(4, 4, 0.015, 0.15, 4);
  UserLayout users;
  users.antennas = 2;
  users.antenna_spacing = 0.015;
  users.users = {{3.0, 0.3}, {2.5, -0.7}};

  SUBCASE("3-4-5 triangle") {
    UserLayout simple;
    simple.antennas = 1;
    simple.antenna_spacing = 0.015;
    simple.users = {{5.0, std::atan2(4.0, 3.0)}};
    CHECK(element_user_distance(0, 0, 0, simple, sim) == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("matches direct norm of the positions") {
    std::mt19937_64 rng(7);
    for (int it = 0; it < 200; ++it) {
      const int k = static_cast<int>(rng() % 2);
      const int m = static_cast<int>(rng() % 2);
      const int n = static_cast<int>(rng() % static_cast<std::uint64_t>(sim.atom_count()));
      const auto u = user_antenna_position(k, m, users);
      const auto s = meta_atom_position(n, sim);
      const double dx = u.x() - s.x(), dy = u.y() - s.y(), dz = u.z() - s.z();
      const double expect = std::sqrt(dx * dx + dy * dy + dz * dz);
      CHECK(element_user_distance(k, m, n, users, sim) ==
            doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("intra-layer offsets") {
  SimLayout sim = layout_with(10, 3, 0.015, 0.15, 4);

  CHECK(intra_layer_offset(5, 5, sim) == 0.0);
  CHECK(intra_layer_offset(4, 5, sim) == doctest::Approx(0.015).epsilon(1e-12));
  CHECK(intra_layer_offset(0, 10, sim) == doctest::Approx(0.015).epsilon(1e-12));
  CHECK(intra_layer_offset(0, 11, sim) ==
        doctest::Approx(0.015 * std::sqrt(2.0)).epsilon(1e-12));

  SUBCASE("symmetric in the pair") {
    std::mt19937_64 rng(3);
    for (int it = 0; it < 100; ++it) {
      const int a = static_cast<int>(rng() % 30);
      const int b = static_cast<int>(rng() % 30);
      CHECK(intra_layer_offset(a, b, sim) == intra_layer_offset(b, a, sim));
    }
  }
}

TEST_CASE("inter-layer hops") {
  SimLayout sim = layout_with(10, 4, 0.015, 0.15, 4);
  const double gap = sim.layer_gap();
  CHECK(gap == doctest::Approx(0.0375));

  SUBCASE("facing elements") {
    const auto hop = inter_layer_hop(17, 17, sim);
    CHECK(hop.distance == gap);
    CHECK(hop.obliquity == 1.0);
  }
  SUBCASE("neighbor offset by one cell") {
    const auto hop = inter_layer_hop(0, 1, sim);
    CHECK(hop.distance == doctest::Approx(std::sqrt(0.0375 * 0.0375 + 0.015 * 0.015))
                              .epsilon(1e-12));
    CHECK(hop.obliquity == doctest::Approx(0.0375 / hop.distance).epsilon(1e-15));
  }
  SUBCASE("defining identity and bounds") {
    std::mt19937_64 rng(11);
    for (int it = 0; it < 200; ++it) {
      const int a = static_cast<int>(rng() % 40);
      const int b = static_cast<int>(rng() % 40);
      const auto hop = inter_layer_hop(a, b, sim);
      const double off = intra_layer_offset(a, b, sim);
      CHECK(hop.distance * hop.distance - off * off == doctest::Approx(gap * gap).epsilon(1e-12));
      CHECK(hop.distance >= gap);
      CHECK(hop.obliquity > 0.0);
      CHECK(hop.obliquity <= 1.0);
      CHECK(hop.obliquity == doctest::Approx(gap / hop.distance).epsilon(1e-15));
      if (a == b) CHECK(hop.obliquity == 1.0);
    }
  }
}

TEST_CASE("BS feed distances") {
  SUBCASE("center antenna facing center element") {
    SimLayout sim = layout_with(3, 3, 0.015, 0.12, 4);
    BsLayout bs{3};
    CHECK(bs_feed_distance(4, 1, sim, bs) == doctest::Approx(sim.layer_gap()).epsilon(1e-15));
  }
  SUBCASE("independent closed-form evaluation") {
    SimLayout sim = layout_with(5, 4, 0.015, 0.12, 4);
    BsLayout bs{4};
    const double gap = sim.layer_gap();
    for (int atom = 0; atom < sim.atom_count(); ++atom) {
      for (int ant = 0; ant < bs.antenna_count; ++ant) {
        // 1-based closed form with half-wavelength spacing.
        const int n1 = atom + 1, m1 = ant + 1;
        const double ey = (std::fmod(n1 - 1, 5) - (5 - 1) / 2.0) * 0.015;
        const double ay = (m1 - (4 + 1) / 2.0) * 0.015;
        const double ez = (std::ceil(static_cast<double>(n1) / 5.0) - (4 + 1) / 2.0) * 0.015;
        const double expect = std::sqrt(gap * gap + (ey - ay) * (ey - ay) + ez * ez);
        CHECK(bs_feed_distance(atom, ant, sim, bs) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(bs_feed_distance(atom, ant, sim, bs) >= gap);
      }
    }
  }
  SUBCASE("mirror symmetry") {
    SimLayout sim = layout_with(6, 3, 0.015, 0.12, 4);
    BsLayout bs{4};
    for (int atom = 0; atom < sim.atom_count(); ++atom) {
      const int col = atom % sim.atoms_y;
      const int mirrored = atom - col + (sim.atoms_y - 1 - col);
      for (int ant = 0; ant < bs.antenna_count; ++ant) {
        const int mirrored_ant = bs.antenna_count - 1 - ant;
        CHECK(bs_feed_distance(atom, ant, sim, bs) ==
              doctest::Approx(bs_feed_distance(mirrored, mirrored_ant, sim, bs)).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("rayleigh distance") {
  SUBCASE("square aperture hand value") {
    // 0.3 m diagonal at lambda = 0.06 gives 2 * 0.09 / 0.06 = 3 m.
    SimLayout sim = layout_with(11, 11, 0.3 / std::sqrt(200.0), 0.3, 1);
    CHECK(rayleigh_distance(sim, 0.06) == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("degenerate single element") {
    SimLayout sim = layout_with(1, 1, 0.015, 0.15, 1);
    CHECK(rayleigh_distance(sim, 0.03) == 0.0);
  }
  SUBCASE("reference layout value is positive and finite") {
    const Carrier c = Carrier::from_frequency(10e9);
    const SimLayout sim = SimLayout::for_carrier(c, 40, 4);
    const double rd = rayleigh_distance(sim, c.wavelength);
    CHECK(rd > 0.0);
    CHECK(std::isfinite(rd));
  }
}

TEST_CASE("layout factory centers the aperture") {
  const Carrier c = Carrier::from_wavelength(0.03);
  const SimLayout sim = SimLayout::for_carrier(c, 40, 4);
  CHECK(sim.atoms_y == 8);
  CHECK(sim.atoms_z == 5);
  CHECK(sim.atom_spacing == doctest::Approx(0.015));
  CHECK(sim.thickness == doctest::Approx(0.15));
  CHECK(sim.layer_gap() == doctest::Approx(0.0375));
  // Centroid of the aperture sits on the x-axis.
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (int n = 0; n < sim.atom_count(); ++n) sum += meta_atom_position(n, sim);
  CHECK(std::abs(sum.y()) < 1e-12);
  CHECK(std::abs(sum.z()) < 1e-12);
}

TEST_CASE("layout validation") {
  SimLayout bad = layout_with(4, 4, 0.015, 0.15, 4);
  bad.atom_spacing = 0.0;
  CHECK_THROWS_AS(bad.validate(), config_error);

  UserLayout users;
  users.antennas = 1;
  users.antenna_spacing = 0.015;
  users.users = {{0.0, 0.0}};
  CHECK_THROWS_AS(users.validate(), config_error);
}
