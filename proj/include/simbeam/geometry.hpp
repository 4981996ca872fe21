#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "simbeam/common.hpp"

namespace simbeam {

/// The stacked metasurface: L layers, each a uniform planar array of
/// atoms_y x atoms_z elements in the YZ-plane. Element indices run row-major
/// with y fastest: element n sits at column mod(n, atoms_y), row n / atoms_y.
struct SimLayout {
  int atoms_y = 8;
  int atoms_z = 5;
  int layers = 4;
  double atom_spacing = 0.0;  // d_S (m), half-wavelength grid
  double thickness = 0.0;     // T_SIM (m), full stack depth
  double atom_area = 0.0;     // A_t (m^2)
  double ref_y = 0.0;         // y of element 0
  double ref_z = 0.0;         // z of element 0

  int atom_count() const { return atoms_y * atoms_z; }
  double layer_gap() const { return thickness / layers; }  // d_SIM

  void validate() const;

  /// Half-wavelength grid of square atoms, stack thickness_wavelengths deep,
  /// aperture centered on the x-axis.
  static SimLayout for_carrier(const Carrier& carrier, int atoms, int layers,
                               double thickness_wavelengths = 5.0);
};

struct UserPlacement {
  double distance = 0.0;  // radial distance from the array center (m)
  double angle = 0.0;     // azimuth in the XY-plane (rad)
};

/// Users carry a small ULA parallel to the y-axis, confined to the XY-plane.
struct UserLayout {
  std::vector<UserPlacement> users;
  int antennas = 2;              // M, per user
  double antenna_spacing = 0.0;  // d_m (m)

  int user_count() const { return static_cast<int>(users.size()); }
  void validate() const;
};

/// BS feed: a ULA of antenna_count elements parallel to the y-axis, one
/// layer gap behind the first metasurface, centered on the aperture.
struct BsLayout {
  int antenna_count = 8;
};

/// Splits an element budget into the most square atoms_y x atoms_z grid,
/// wider than tall (e.g. 40 -> 8 x 5).
std::pair<int, int> near_square_split(int atoms);

Eigen::Vector3d meta_atom_position(int atom, const SimLayout& sim);
Eigen::Vector3d user_antenna_position(int user, int antenna, const UserLayout& users);
double element_user_distance(int user, int antenna, int atom, const UserLayout& users,
                             const SimLayout& sim);

/// Transverse grid offset between two elements of one layer.
double intra_layer_offset(int atom_a, int atom_b, const SimLayout& sim);

struct LayerHop {
  double distance = 0.0;   // d^l (m)
  double obliquity = 0.0;  // cos x = layer_gap / distance
};

/// Distance and obliquity of the hop from element atom_b of one layer to
/// element atom_a of the next.
LayerHop inter_layer_hop(int atom_a, int atom_b, const SimLayout& sim);

/// Distance from BS antenna `antenna` to element `atom` of the first layer.
double bs_feed_distance(int atom, int antenna, const SimLayout& sim, const BsLayout& bs);

/// Fraunhofer limit 2 D^2 / lambda with D the aperture diagonal.
double rayleigh_distance(const SimLayout& sim, double wavelength);

}  // namespace simbeam
