#pragma once

#include <iosfwd>
#include <string_view>
#include <vector>

#include "simbeam/common.hpp"
#include "simbeam/geometry.hpp"

namespace simbeam {

/// Rayleigh-Sommerfeld transmission coefficient between two elements at the
/// given distance and obliquity (cosine of the incidence angle).
Complex rs_coefficient(double distance, double obliquity, double atom_area, double wavelength);

/// N x N coefficient matrix for the hop between consecutive layers. The hop
/// geometry is the same for every layer pair, so one matrix serves all of them.
CMat build_inter_layer_matrix(const SimLayout& sim, const Carrier& carrier);

/// N x M_BS coefficient matrix from the BS feed to the first layer. Columns
/// (k-1)M .. kM-1 form the per-user block W^1_k.
CMat build_feed_matrix(const SimLayout& sim, const BsLayout& bs, const Carrier& carrier);

/// M x N spherical-wavefront channel from the outer layer to one user:
/// entries (lambda / 4 pi r) e^{-j 2 pi r / lambda} with r the exact
/// element-to-antenna distance.
CMat build_near_field_channel(int user, const UserLayout& users, const SimLayout& sim,
                              const Carrier& carrier);

struct PathLossModel {
  double reference_loss = 0.0;      // C_0, linear gain at the reference distance
  double reference_distance = 1.0;  // m
  double exponent = 2.5;

  /// Friis free-space loss (lambda / 4 pi d_ref)^2 at the reference distance.
  static PathLossModel friis(const Carrier& carrier, double reference_distance = 1.0,
                             double exponent = 2.5);
};

double path_loss(double distance, const PathLossModel& model);

/// Gain convention for the planar-wavefront baseline. freespace_match uses the
/// free-space per-entry power at the user's radial distance so near and far
/// runs are directly comparable; exponent_model uses the path-loss model.
enum class FarFieldGain { freespace_match, exponent_model };

/// Rank-one planar-wavefront channel sqrt(beta M N) e_user e_array^H with
/// steering angles taken from the exact user position.
CMat build_far_field_channel(int user, const UserLayout& users, const SimLayout& sim,
                             const Carrier& carrier, FarFieldGain gain,
                             const PathLossModel& model);

/// Every propagation matrix one scenario needs.
struct ChannelSet {
  CMat inter_layer;         // W^l for l >= 2 (empty when layers == 1)
  CMat feed;                // W^1, N x M_BS
  std::vector<CMat> users;  // H_k, M x N each
};

/// One row per entry: matrix_id,row,col,re,im. Indices are 0-based.
void write_matrix_csv(std::ostream& out, std::string_view matrix_id, const CMat& m);

}  // namespace simbeam
