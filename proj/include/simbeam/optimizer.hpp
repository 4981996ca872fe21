#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "simbeam/cascade.hpp"
#include "simbeam/channel.hpp"
#include "simbeam/common.hpp"
#include "simbeam/rate.hpp"

namespace simbeam {

struct BcdConfig {
  double epsilon = 1e-4;          // relative objective-increase threshold
  int max_outer = 200;
  double step_init = 1.0;         // Armijo initial step
  double step_ratio = 0.5;        // Armijo backtracking ratio, in (0,1)
  int max_backtracks = 30;
  int phase_steps_per_layer = 1;  // gradient steps per layer within one sweep
  int phase_sweeps = 300;         // cap on layer sweeps per outer iteration
  double phase_sweep_tolerance = 1e-8;  // relative decrease that ends the sweeps
  double power_tolerance = 1e-9;  // relative tolerance of the power bisection

  void validate() const;
};

struct BcdTraceEntry {
  int iteration = 0;          // 1-based outer iteration
  double objective_bits = 0;  // surrogate objective, measured after the U/Z block
  double sum_rate_bits = 0;   // weighted sum rate at the same point
  int phase_backtracks = 0;   // Armijo backtracks summed over layers
  int stalled_layers = 0;     // layers whose line search was exhausted
  double power_multiplier = 0;
  double wall_ms = 0;
};

struct BcdTrace {
  std::vector<BcdTraceEntry> entries;
  bool converged = false;
  int disabled_streams = 0;  // streams dropped by the power solver

  int iterations() const { return static_cast<int>(entries.size()); }
};

/// One row per iteration: iteration,objective,wsr,mu,backtracks,millis.
void write_trace_csv(std::ostream& out, const BcdTrace& trace);

/// MMSE combiners U_k = (Q_k + T_k P_k^2 T_k^H)^{-1} T_k P_k.
std::vector<CMat> update_combiners(const EffectiveChannels& eff, const PowerAllocation& power,
                                   double noise_power);

/// Auxiliary weights Z_k = E_k^{-1} at the given combiners.
std::vector<CMat> update_aux(const EffectiveChannels& eff, const std::vector<CMat>& combiners,
                             const PowerAllocation& power, double noise_power);

/// Separable quadratic model of the power subproblem: stream (k, m) contributes
/// quadratic(k,m) p^2 - 2 linear(k,m) p to the weighted MSE.
struct PowerCoefficients {
  Eigen::ArrayXXd quadratic;  // users x streams, >= 0
  Eigen::ArrayXXd linear;     // users x streams
};

PowerCoefficients power_coefficients(const EffectiveChannels& eff,
                                     const std::vector<CMat>& combiners,
                                     const std::vector<CMat>& aux, const RVec& priorities);

struct PowerSolution {
  PowerAllocation allocation;
  double multiplier = 0.0;   // dual variable of the power constraint
  int disabled_streams = 0;  // streams with vanishing curvature but positive gain
};

/// Exact solution of the power subproblem by dual bisection:
/// p(mu) = max(linear, 0) / (quadratic + mu), with mu = 0 when the
/// unconstrained solution fits the budget and otherwise chosen so the budget
/// is met within the relative tolerance.
PowerSolution solve_power(const PowerCoefficients& coefficients, double budget,
                          double tolerance);

/// Fixed data of the phase subproblem at one BCD iteration: low-rank factors
/// of the quadratic sandwich tr(G^H C G D) and the linear term -2 Re tr(E G).
/// Self-contained; build once per iteration from the current U, Z, P.
struct PhaseContext {
  CMat inter_layer;   // copy of W (empty when layers == 1)
  CMat quad_out;      // F_C, N x KM: C = F_C F_C^H
  CMat quad_in;       // F_D, N x M_BS: D = F_D F_D^H
  CMat linear_left;   // F_E, N x KM: E_bar = F_E H_stack
  CMat linear_right;  // H_stack, KM x N
};

PhaseContext make_phase_context(const ChannelSet& channels, const std::vector<CMat>& combiners,
                                const std::vector<CMat>& aux, const PowerAllocation& power,
                                const RVec& priorities);

/// Weighted-MSE objective F(Phi) = tr(G^H C G D) - 2 Re tr(E G); equal to the
/// weighted trace sum_k eta_k tr(Z_k E_k) minus a phase-independent constant.
double phase_objective(const PhaseContext& ctx, const PhaseState& phases);

/// The quadratic sandwich alone.
double phase_objective_quadratic(const PhaseContext& ctx, const PhaseState& phases);

/// Wirtinger gradient of phase_objective with respect to conj(phi_layer).
CVec phase_gradient(const PhaseContext& ctx, const PhaseState& phases, int layer);

/// Gradient of the quadratic term alone.
CVec phase_gradient_quadratic(const PhaseContext& ctx, const PhaseState& phases, int layer);

struct PhaseSweepStats {
  int backtracks = 0;
  int stalled_layers = 0;
};

/// One projected-gradient sweep over the layers with Armijo backtracking.
/// A step is accepted only under the sufficient-decrease condition
/// F(new) <= F(old) - ||new - old||^2 / (2 mu); an exhausted line search
/// keeps the layer unchanged and is counted as stalled. step_hints, when
/// given, carries the per-layer line-search scale across sweeps: the search
/// starts from the hint and the accepted step (grown by 1/step_ratio when it
/// held at the first try) is written back.
PhaseState update_phases(const PhaseContext& ctx, PhaseState phases, const BcdConfig& config,
                         PhaseSweepStats* stats = nullptr, bool reverse_order = false,
                         RVec* step_hints = nullptr, double* objective_out = nullptr);

struct BcdProblem {
  const ChannelSet* channels = nullptr;
  RVec priorities;
  double noise_power = 0.0;
  double power_budget = 0.0;  // watts
  int layers = 0;
  // Optional warm start; both must be set together and fit the problem shape.
  // The power allocation must be feasible under power_budget.
  const PhaseState* initial_phases = nullptr;
  const PowerAllocation* initial_power = nullptr;
};

struct BcdResult {
  PhaseState phases;
  PowerAllocation power;
  BcdTrace trace;
};

/// Block-coordinate ascent over (U, Z, P, Phi) from a seeded random phase
/// start and equal power split. The recorded objective is measured after the
/// exact U/Z block, where it coincides with the weighted sum rate.
BcdResult run_bcd(const BcdProblem& problem, const BcdConfig& config, std::uint64_t seed);

}  // namespace simbeam
