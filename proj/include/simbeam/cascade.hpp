#pragma once

#include <iosfwd>
#include <random>

#include "simbeam/common.hpp"

namespace simbeam {

/// Per-layer phase shifts of the metasurface stack. Angles are kept in
/// [0, 2 pi); the optimization variable is the unit-modulus vector e^{j theta}
/// per layer. Single writer; share read-only snapshots freely.
class PhaseState {
 public:
  PhaseState() = default;
  PhaseState(int layers, int atoms);  // all-zero phases

  static PhaseState random(int layers, int atoms, std::mt19937_64& rng);

  int layers() const { return static_cast<int>(theta_.rows()); }
  int atoms() const { return static_cast<int>(theta_.cols()); }

  double angle(int layer, int atom) const { return theta_(layer, atom); }
  void set_angle(int layer, int atom, double theta);

  CVec phase_vector(int layer) const;
  void set_phase_vector(int layer, const CVec& phases);

  const Eigen::ArrayXXd& angles() const { return theta_; }

 private:
  Eigen::ArrayXXd theta_;  // layers x atoms
};

/// Radial projection onto the unit circle, entrywise. Zero entries take the
/// corresponding fallback value (normally the previous iterate).
CVec project_unit_modulus(const CVec& v, const CVec& fallback);

/// Full wave-domain cascade G = Phi^L W Phi^{L-1} W ... W Phi^1 (N x N).
/// For a single layer G = diag(phi_1).
CMat assemble_cascade(const PhaseState& phases, const CMat& inter_layer);

/// G * rhs without forming G; costs O(L N^2 c) for an N x c rhs.
CMat apply_cascade(const PhaseState& phases, const CMat& inter_layer, const CMat& rhs);

/// Factors around one layer: G = left * diag(phi_layer) * right.
/// left is identity for the outermost layer, right for the innermost.
struct CascadePartials {
  CMat left;   // R_l
  CMat right;  // J_l
};

CascadePartials partial_products(const PhaseState& phases, const CMat& inter_layer, int layer);

/// One row per angle: layer,index,theta. Indices are 0-based, theta in rad.
void write_phase_csv(std::ostream& out, const PhaseState& phases);

}  // namespace simbeam
