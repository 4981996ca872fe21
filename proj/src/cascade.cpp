#include "simbeam/cascade.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace simbeam {

namespace {

double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  return t;
}

void check_layer_shapes(const PhaseState& phases, const CMat& inter_layer) {
  if (phases.layers() < 1) throw config_error("cascade: need at least one layer of phases");
  if (phases.layers() > 1) {
    if (inter_layer.rows() != phases.atoms() || inter_layer.cols() != phases.atoms())
      throw config_error("cascade: inter-layer matrix must be " + std::to_string(phases.atoms()) +
                         "x" + std::to_string(phases.atoms()));
  }
}

}  // namespace

PhaseState::PhaseState(int layers, int atoms) {
  if (layers < 1 || atoms < 1) throw config_error("PhaseState: layers and atoms must be >= 1");
  theta_ = Eigen::ArrayXXd::Zero(layers, atoms);
}

PhaseState PhaseState::random(int layers, int atoms, std::mt19937_64& rng) {
  PhaseState s(layers, atoms);
  for (int l = 0; l < layers; ++l)
    for (int n = 0; n < atoms; ++n) s.theta_(l, n) = kTwoPi * random_unit_interval(rng);
  return s;
}

void PhaseState::set_angle(int layer, int atom, double theta) {
  theta_(layer, atom) = wrap_angle(theta);
}

CVec PhaseState::phase_vector(int layer) const {
  const int n = atoms();
  CVec phi(n);
  for (int i = 0; i < n; ++i) phi(i) = std::polar(1.0, theta_(layer, i));
  return phi;
}

void PhaseState::set_phase_vector(int layer, const CVec& phases) {
  if (phases.size() != atoms()) throw config_error("PhaseState: phase vector size mismatch");
  for (int i = 0; i < atoms(); ++i)
    theta_(layer, i) = wrap_angle(std::arg(phases(i)));
}

CVec project_unit_modulus(const CVec& v, const CVec& fallback) {
  if (fallback.size() != v.size())
    throw config_error("project_unit_modulus: fallback size mismatch");
  CVec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v(i));
    out(i) = mag > 0.0 ? v(i) / mag : fallback(i);
  }
  return out;
}

CMat apply_cascade(const PhaseState& phases, const CMat& inter_layer, const CMat& rhs) {
  check_layer_shapes(phases, inter_layer);
  if (rhs.rows() != phases.atoms()) throw config_error("apply_cascade: rhs row count mismatch");
  CMat y = phases.phase_vector(0).asDiagonal() * rhs;
  for (int l = 1; l < phases.layers(); ++l) {
    y = inter_layer * y;
    y = phases.phase_vector(l).asDiagonal() * y;
  }
  return y;
}

CMat assemble_cascade(const PhaseState& phases, const CMat& inter_layer) {
  check_layer_shapes(phases, inter_layer);
  return apply_cascade(phases, inter_layer, CMat::Identity(phases.atoms(), phases.atoms()));
}

CascadePartials partial_products(const PhaseState& phases, const CMat& inter_layer, int layer) {
  check_layer_shapes(phases, inter_layer);
  if (layer < 0 || layer >= phases.layers())
    throw std::out_of_range("partial_products: layer index out of range");
  const int n = phases.atoms();
  CascadePartials parts{CMat::Identity(n, n), CMat::Identity(n, n)};
  for (int l = 0; l < layer; ++l) {
    parts.right = phases.phase_vector(l).asDiagonal() * parts.right;
    parts.right = inter_layer * parts.right;
  }
  for (int l = phases.layers() - 1; l > layer; --l) {
    parts.left = parts.left * phases.phase_vector(l).asDiagonal();
    parts.left = parts.left * inter_layer;
  }
  return parts;
}

void write_phase_csv(std::ostream& out, const PhaseState& phases) {
  out << "layer,index,theta\n";
  char buf[64];
  for (int l = 0; l < phases.layers(); ++l) {
    for (int n = 0; n < phases.atoms(); ++n) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.15g\n", l, n, phases.angle(l, n));
      out << buf;
    }
  }
}

}  // namespace simbeam
