#include "simbeam/geometry.hpp"

#include <cmath>
#include <string>

namespace simbeam {

void SimLayout::validate() const {
  if (atoms_y < 1 || atoms_z < 1) throw config_error("SimLayout: element counts must be >= 1");
  if (layers < 1) throw config_error("SimLayout: layer count must be >= 1");
  if (atom_spacing <= 0.0) throw config_error("SimLayout: atom spacing must be positive");
  if (thickness <= 0.0) throw config_error("SimLayout: thickness must be positive");
  if (atom_area <= 0.0) throw config_error("SimLayout: atom area must be positive");
}

SimLayout SimLayout::for_carrier(const Carrier& carrier, int atoms, int layers,
                                 double thickness_wavelengths) {
  if (atoms < 1) throw config_error("SimLayout: element count must be >= 1");
  const auto [ny, nz] = near_square_split(atoms);
  SimLayout sim;
  sim.atoms_y = ny;
  sim.atoms_z = nz;
  sim.layers = layers;
  sim.atom_spacing = carrier.wavelength / 2.0;
  sim.thickness = thickness_wavelengths * carrier.wavelength;
  sim.atom_area = sim.atom_spacing * sim.atom_spacing;
  sim.ref_y = -0.5 * (ny - 1) * sim.atom_spacing;
  sim.ref_z = -0.5 * (nz - 1) * sim.atom_spacing;
  sim.validate();
  return sim;
}

void UserLayout::validate() const {
  if (users.empty()) throw config_error("UserLayout: need at least one user");
  if (antennas < 1) throw config_error("UserLayout: antennas per user must be >= 1");
  if (antenna_spacing <= 0.0) throw config_error("UserLayout: antenna spacing must be positive");
  for (const auto& u : users)
    if (u.distance <= 0.0) throw config_error("UserLayout: user distance must be positive");
}

std::pair<int, int> near_square_split(int atoms) {
  if (atoms < 1) throw config_error("near_square_split: element count must be >= 1");
  int best = 1;
  for (int d = 1; d * d <= atoms; ++d)
    if (atoms % d == 0) best = d;
  return {atoms / best, best};  // wider than tall
}

namespace {

void check_atom_index(int atom, const SimLayout& sim) {
  if (atom < 0 || atom >= sim.atom_count())
    throw std::out_of_range("meta-atom index " + std::to_string(atom) + " outside [0, " +
                            std::to_string(sim.atom_count()) + ")");
}

}  // namespace

Eigen::Vector3d meta_atom_position(int atom, const SimLayout& sim) {
  check_atom_index(atom, sim);
  const int cy = atom % sim.atoms_y;
  const int cz = atom / sim.atoms_y;
  return {0.0, cy * sim.atom_spacing + sim.ref_y, cz * sim.atom_spacing + sim.ref_z};
}

Eigen::Vector3d user_antenna_position(int user, int antenna, const UserLayout& users) {
  if (user < 0 || user >= users.user_count())
    throw std::out_of_range("user index " + std::to_string(user) + " outside [0, " +
                            std::to_string(users.user_count()) + ")");
  if (antenna < 0 || antenna >= users.antennas)
    throw std::out_of_range("antenna index " + std::to_string(antenna) + " outside [0, " +
                            std::to_string(users.antennas) + ")");
  const auto& u = users.users[static_cast<size_t>(user)];
  const double x = u.distance * std::cos(u.angle);
  const double y = u.distance * std::sin(u.angle);
  return {x, antenna * users.antenna_spacing + y, 0.0};
}

double element_user_distance(int user, int antenna, int atom, const UserLayout& users,
                             const SimLayout& sim) {
  const Eigen::Vector3d d =
      user_antenna_position(user, antenna, users) - meta_atom_position(atom, sim);
  const double r = d.norm();
  if (r <= 0.0) throw geometry_error("coincident antenna and meta-atom");
  return r;
}

double intra_layer_offset(int atom_a, int atom_b, const SimLayout& sim) {
  check_atom_index(atom_a, sim);
  check_atom_index(atom_b, sim);
  const int diff = std::abs(atom_a - atom_b);
  const double rows = diff / sim.atoms_y;
  const double cols = diff % sim.atoms_y;
  return sim.atom_spacing * std::sqrt(rows * rows + cols * cols);
}

LayerHop inter_layer_hop(int atom_a, int atom_b, const SimLayout& sim) {
  const double gap = sim.layer_gap();
  if (gap <= 0.0) throw config_error("inter_layer_hop: layer gap must be positive");
  const double offset = intra_layer_offset(atom_a, atom_b, sim);
  const double dist = std::sqrt(gap * gap + offset * offset);
  return {dist, gap / dist};
}

double bs_feed_distance(int atom, int antenna, const SimLayout& sim, const BsLayout& bs) {
  check_atom_index(atom, sim);
  if (antenna < 0 || antenna >= bs.antenna_count)
    throw std::out_of_range("BS antenna index " + std::to_string(antenna) + " outside [0, " +
                            std::to_string(bs.antenna_count) + ")");
  const double gap = sim.layer_gap();
  const double s = sim.atom_spacing;
  const int cy = atom % sim.atoms_y;
  const int cz = atom / sim.atoms_y;
  // Element and antenna y-offsets from the common centerline, antenna line at
  // the vertical center of the aperture.
  const double ey = (cy - 0.5 * (sim.atoms_y - 1)) * s;
  const double ay = (antenna - 0.5 * (bs.antenna_count - 1)) * s;
  const double ez = (cz - 0.5 * (sim.atoms_z - 1)) * s;
  return std::sqrt(gap * gap + (ey - ay) * (ey - ay) + ez * ez);
}

double rayleigh_distance(const SimLayout& sim, double wavelength) {
  if (wavelength <= 0.0) throw config_error("rayleigh_distance: wavelength must be positive");
  const double dy = (sim.atoms_y - 1) * sim.atom_spacing;
  const double dz = (sim.atoms_z - 1) * sim.atom_spacing;
  const double diag2 = dy * dy + dz * dz;
  return 2.0 * diag2 / wavelength;
}

}  // namespace simbeam
