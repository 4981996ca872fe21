#include "simbeam/channel.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace simbeam {

Complex rs_coefficient(double distance, double obliquity, double atom_area, double wavelength) {
  if (distance <= 0.0) throw geometry_error("rs_coefficient: distance must be positive");
  if (obliquity <= 0.0 || obliquity > 1.0)
    throw geometry_error("rs_coefficient: obliquity outside (0, 1]");
  const double amplitude = atom_area * obliquity / distance;
  const Complex decay(1.0 / (kTwoPi * distance), -1.0 / wavelength);
  return amplitude * decay * std::polar(1.0, kTwoPi * distance / wavelength);
}

CMat build_inter_layer_matrix(const SimLayout& sim, const Carrier& carrier) {
  const int n = sim.atom_count();
  CMat w(n, n);
  for (int col = 0; col < n; ++col) {
    for (int row = col; row < n; ++row) {
      const LayerHop hop = inter_layer_hop(row, col, sim);
      const Complex v = rs_coefficient(hop.distance, hop.obliquity, sim.atom_area,
                                       carrier.wavelength);
      w(row, col) = v;
      w(col, row) = v;  // reciprocal geometry
    }
  }
  return w;
}

CMat build_feed_matrix(const SimLayout& sim, const BsLayout& bs, const Carrier& carrier) {
  const int n = sim.atom_count();
  CMat w(n, bs.antenna_count);
  const double gap = sim.layer_gap();
  for (int m = 0; m < bs.antenna_count; ++m) {
    for (int atom = 0; atom < n; ++atom) {
      const double dist = bs_feed_distance(atom, m, sim, bs);
      w(atom, m) = rs_coefficient(dist, gap / dist, sim.atom_area, carrier.wavelength);
    }
  }
  return w;
}

CMat build_near_field_channel(int user, const UserLayout& users, const SimLayout& sim,
                              const Carrier& carrier) {
  const int n = sim.atom_count();
  CMat h(users.antennas, n);
  for (int atom = 0; atom < n; ++atom) {
    for (int m = 0; m < users.antennas; ++m) {
      const double r = element_user_distance(user, m, atom, users, sim);
      const double gain = carrier.wavelength / (4.0 * kPi * r);
      h(m, atom) = std::polar(gain, -kTwoPi * r / carrier.wavelength);
    }
  }
  return h;
}

PathLossModel PathLossModel::friis(const Carrier& carrier, double reference_distance,
                                   double exponent) {
  if (reference_distance <= 0.0) throw config_error("path loss reference distance must be > 0");
  const double amp = carrier.wavelength / (4.0 * kPi * reference_distance);
  return PathLossModel{amp * amp, reference_distance, exponent};
}

double path_loss(double distance, const PathLossModel& model) {
  if (distance <= 0.0) throw config_error("path_loss: distance must be positive");
  return model.reference_loss * std::pow(distance / model.reference_distance, -model.exponent);
}

CMat build_far_field_channel(int user, const UserLayout& users, const SimLayout& sim,
                             const Carrier& carrier, FarFieldGain gain,
                             const PathLossModel& model) {
  if (user < 0 || user >= users.user_count())
    throw std::out_of_range("far-field channel: user index out of range");
  const auto& placement = users.users[static_cast<size_t>(user)];
  const double kappa = carrier.wavenumber();
  const int n = sim.atom_count();
  const int m = users.antennas;

  // Departure direction from the array center toward the user reference
  // antenna; users live in the XY-plane, so the elevation is broadside.
  const double azimuth = placement.angle;
  const double sin_elevation = 1.0;
  const double cos_elevation = 0.0;

  // Arrival angle at the user ULA, measured against its axis (+y).
  const double cos_arrival = std::sin(placement.angle);

  CVec user_steer(m);
  for (int a = 0; a < m; ++a)
    user_steer(a) = std::polar(1.0, kappa * a * users.antenna_spacing * cos_arrival);

  const double y_phase = kappa * sim.atom_spacing * std::sin(azimuth) * sin_elevation;
  const double z_phase = kappa * sim.atom_spacing * cos_elevation;
  CVec array_steer(n);
  for (int atom = 0; atom < n; ++atom) {
    const int cy = atom % sim.atoms_y;
    const int cz = atom / sim.atoms_y;
    array_steer(atom) = std::polar(1.0, cy * y_phase + cz * z_phase);
  }

  double beta = 0.0;
  switch (gain) {
    case FarFieldGain::freespace_match: {
      // Far-distance limit of the spherical-wavefront model: every entry has
      // the free-space magnitude at the user's radial distance.
      const double amp = carrier.wavelength / (4.0 * kPi * placement.distance);
      beta = amp * amp / (m * n);
      break;
    }
    case FarFieldGain::exponent_model:
      beta = path_loss(placement.distance, model);
      break;
  }
  return std::sqrt(beta * m * n) * user_steer * array_steer.adjoint();
}

void write_matrix_csv(std::ostream& out, std::string_view matrix_id, const CMat& m) {
  char buf[96];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), ",%lld,%lld,%.15g,%.15g", static_cast<long long>(r),
                    static_cast<long long>(c), m(r, c).real(), m(r, c).imag());
      out << matrix_id << buf << '\n';
    }
  }
}

}  // namespace simbeam
