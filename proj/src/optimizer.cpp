#include "simbeam/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>

namespace simbeam {

namespace {

CMat hermitianized(const CMat& m) { return 0.5 * (m + m.adjoint()); }

/// Z = S S^H. Cholesky when Z is cleanly PD, eigenvalue clamping otherwise.
CMat psd_factor(const CMat& z) {
  Eigen::LLT<CMat> llt(hermitianized(z));
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<CMat> eig(hermitianized(z));
  if (eig.info() != Eigen::Success) throw numerical_error("psd_factor: eigensolver failed");
  return eig.eigenvectors() *
         eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

void check_problem_sizes(const EffectiveChannels& eff, const std::vector<CMat>& combiners,
                         const std::vector<CMat>& aux, const RVec& priorities) {
  const int users = eff.users();
  if (static_cast<int>(combiners.size()) != users || static_cast<int>(aux.size()) != users)
    throw config_error("combiner/aux count must match the user count");
  if (priorities.size() != users) throw config_error("priority count must match the user count");
  if ((priorities.array() < 0.0).any()) throw config_error("priorities must be nonnegative");
}

}  // namespace

void BcdConfig::validate() const {
  if (epsilon <= 0.0) throw config_error("BcdConfig: epsilon must be positive");
  if (max_outer < 1) throw config_error("BcdConfig: max_outer must be >= 1");
  if (step_init <= 0.0) throw config_error("BcdConfig: step_init must be positive");
  if (step_ratio <= 0.0 || step_ratio >= 1.0)
    throw config_error("BcdConfig: step_ratio must lie in (0, 1)");
  if (max_backtracks < 1) throw config_error("BcdConfig: max_backtracks must be >= 1");
  if (phase_steps_per_layer < 1)
    throw config_error("BcdConfig: phase_steps_per_layer must be >= 1");
  if (phase_sweeps < 1) throw config_error("BcdConfig: phase_sweeps must be >= 1");
  if (phase_sweep_tolerance < 0.0)
    throw config_error("BcdConfig: phase_sweep_tolerance must be >= 0");
  if (power_tolerance <= 0.0) throw config_error("BcdConfig: power_tolerance must be positive");
}

std::vector<CMat> update_combiners(const EffectiveChannels& eff, const PowerAllocation& power,
                                   double noise_power) {
  std::vector<CMat> combiners;
  combiners.reserve(static_cast<size_t>(eff.users()));
  for (int k = 0; k < eff.users(); ++k) {
    const CMat q = interference_covariance(eff, k, power, noise_power);
    const CMat direct = eff.block(k, k) * power.user_amplitudes(k).asDiagonal();
    Eigen::LLT<CMat> llt(hermitianized(q + direct * direct.adjoint()));
    if (llt.info() != Eigen::Success)
      throw numerical_error("update_combiners: receive covariance is not positive definite");
    combiners.emplace_back(llt.solve(direct));
  }
  return combiners;
}

std::vector<CMat> update_aux(const EffectiveChannels& eff, const std::vector<CMat>& combiners,
                             const PowerAllocation& power, double noise_power) {
  if (static_cast<int>(combiners.size()) != eff.users())
    throw config_error("update_aux: combiner count mismatch");
  const int m = eff.streams;
  std::vector<CMat> aux;
  aux.reserve(combiners.size());
  for (int k = 0; k < eff.users(); ++k) {
    CMat e = mse_matrix(eff, k, combiners[static_cast<size_t>(k)], power, noise_power);
    Eigen::LLT<CMat> llt(e);
    if (llt.info() != Eigen::Success) {
      // Degenerate corner (e.g. zero power and zero combiner on a subspace).
      e += 1e-12 * CMat::Identity(m, m);
      llt.compute(e);
      if (llt.info() != Eigen::Success)
        throw numerical_error("update_aux: MSE matrix is not positive definite");
    }
    aux.emplace_back(hermitianized(llt.solve(CMat::Identity(m, m))));
  }
  return aux;
}

PowerCoefficients power_coefficients(const EffectiveChannels& eff,
                                     const std::vector<CMat>& combiners,
                                     const std::vector<CMat>& aux, const RVec& priorities) {
  check_problem_sizes(eff, combiners, aux, priorities);
  const int users = eff.users();
  const int streams = eff.streams;
  PowerCoefficients c;
  c.quadratic = Eigen::ArrayXXd::Zero(users, streams);
  c.linear = Eigen::ArrayXXd::Zero(users, streams);
  for (int k = 0; k < users; ++k) {
    if (priorities(k) == 0.0) continue;
    const CMat& u = combiners[static_cast<size_t>(k)];
    const CMat& z = aux[static_cast<size_t>(k)];
    for (int i = 0; i < users; ++i) {
      const CMat through = u.adjoint() * eff.block(k, i);
      c.quadratic.row(i) +=
          priorities(k) * (through.adjoint() * z * through).diagonal().real().array().transpose();
    }
    c.linear.row(k) +=
        priorities(k) * (z * u.adjoint() * eff.block(k, k)).diagonal().real().array().transpose();
  }
  return c;
}

PowerSolution solve_power(const PowerCoefficients& coefficients, double budget,
                          double tolerance) {
  const auto& quad = coefficients.quadratic;
  if (quad.rows() != coefficients.linear.rows() || quad.cols() != coefficients.linear.cols())
    throw config_error("solve_power: coefficient shape mismatch");
  if (tolerance <= 0.0) throw config_error("solve_power: tolerance must be positive");
  if ((quad < 0.0).any()) throw config_error("solve_power: negative quadratic coefficient");

  const int users = static_cast<int>(quad.rows());
  const int streams = static_cast<int>(quad.cols());
  PowerSolution sol;
  sol.allocation = PowerAllocation::zero(users, streams, std::max(budget, 0.0));

  Eigen::ArrayXXd gain = coefficients.linear.max(0.0);
  for (int k = 0; k < users; ++k) {
    for (int m = 0; m < streams; ++m) {
      if (quad(k, m) <= 1e-15 && gain(k, m) > 0.0) {
        gain(k, m) = 0.0;  // vanishing curvature, cannot price this stream
        ++sol.disabled_streams;
      }
    }
  }
  if (budget <= 0.0) return sol;

  auto fill = [&](double mu) {
    double total = 0.0;
    for (int k = 0; k < users; ++k) {
      for (int m = 0; m < streams; ++m) {
        const double p = gain(k, m) > 0.0 ? gain(k, m) / (quad(k, m) + mu) : 0.0;
        sol.allocation.amplitude(k, m) = p;
        total += p * p;
      }
    }
    return total;
  };

  if (fill(0.0) <= budget) return sol;  // interior solution, multiplier stays 0

  double hi = 1.0;
  while (fill(hi) > budget) {
    hi *= 2.0;
    if (hi > 1e300) throw numerical_error("solve_power: failed to bracket the multiplier");
  }
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double total = fill(mid);
    if (std::abs(total - budget) <= tolerance * budget) {
      sol.multiplier = mid;
      return sol;
    }
    (total > budget ? lo : hi) = mid;
    if (hi - lo <= 1e-16 * hi) break;
  }
  sol.multiplier = hi;
  fill(hi);  // the feasible endpoint
  return sol;
}

PhaseContext make_phase_context(const ChannelSet& channels, const std::vector<CMat>& combiners,
                                const std::vector<CMat>& aux, const PowerAllocation& power,
                                const RVec& priorities) {
  if (channels.users.empty()) throw config_error("make_phase_context: no user channels");
  const int users = static_cast<int>(channels.users.size());
  const int streams = static_cast<int>(channels.users.front().rows());
  const int atoms = static_cast<int>(channels.feed.rows());
  if (static_cast<int>(combiners.size()) != users || static_cast<int>(aux.size()) != users)
    throw config_error("make_phase_context: combiner/aux count mismatch");
  if (priorities.size() != users) throw config_error("make_phase_context: priority count mismatch");
  if ((priorities.array() < 0.0).any())
    throw config_error("make_phase_context: priorities must be nonnegative");
  if (channels.feed.cols() != static_cast<Eigen::Index>(users) * streams)
    throw config_error("make_phase_context: feed columns must equal users x streams");

  PhaseContext ctx;
  ctx.inter_layer = channels.inter_layer;
  ctx.quad_out = CMat::Zero(atoms, users * streams);
  ctx.quad_in = CMat::Zero(atoms, users * streams);
  ctx.linear_left = CMat::Zero(atoms, users * streams);
  ctx.linear_right = CMat::Zero(users * streams, atoms);

  for (int k = 0; k < users; ++k) {
    const CMat& h = channels.users[static_cast<size_t>(k)];
    const CMat& u = combiners[static_cast<size_t>(k)];
    const CMat& z = aux[static_cast<size_t>(k)];
    const auto feed_block = channels.feed.middleCols(k * streams, streams);
    const RVec amp = power.user_amplitudes(k);
    const double eta = priorities(k);
    ctx.quad_out.middleCols(k * streams, streams) = std::sqrt(eta) * h.adjoint() * u * psd_factor(z);
    ctx.quad_in.middleCols(k * streams, streams) = feed_block * amp.asDiagonal();
    ctx.linear_left.middleCols(k * streams, streams) =
        eta * feed_block * amp.asDiagonal() * z * u.adjoint();
    ctx.linear_right.middleRows(k * streams, streams) = h;
  }
  return ctx;
}

namespace {

Complex linear_trace(const CMat& rows, const CMat& cols) {
  // tr(rows * cols) without forming the product.
  return rows.cwiseProduct(cols.transpose()).sum();
}

struct LayerWork {
  // Passive-side folds around one layer: G = left * diag(phi) * right.
  CMat quad_left;     // F_C^H R_l, KM x N
  CMat quad_right;    // J_l F_D,   N x M_BS
  CMat linear_left;   // J_l F_E,   N x KM
  CMat linear_right;  // H_stack R_l, KM x N
};

CVec gradient_from_work(const LayerWork& w, const CVec& phi, bool quadratic_only) {
  const CMat mid = w.quad_left * phi.asDiagonal() * w.quad_right;
  const CMat lifted = w.quad_right * mid.adjoint();
  CVec g = lifted.cwiseProduct(w.quad_left.transpose()).rowwise().sum();
  if (!quadratic_only)
    g -= w.linear_left.cwiseProduct(w.linear_right.transpose()).rowwise().sum();
  return g.conjugate();
}

double objective_from_work(const LayerWork& w, const CVec& phi, const CVec& linear_diag) {
  const CMat mid = w.quad_left * phi.asDiagonal() * w.quad_right;
  const Complex lin = (linear_diag.array() * phi.array()).sum();
  return mid.squaredNorm() - 2.0 * lin.real();
}

}  // namespace

double phase_objective(const PhaseContext& ctx, const PhaseState& phases) {
  const CMat through = apply_cascade(phases, ctx.inter_layer, ctx.quad_in);
  const double quad = (ctx.quad_out.adjoint() * through).squaredNorm();
  const CMat lifted = apply_cascade(phases, ctx.inter_layer, ctx.linear_left);
  return quad - 2.0 * linear_trace(ctx.linear_right, lifted).real();
}

double phase_objective_quadratic(const PhaseContext& ctx, const PhaseState& phases) {
  const CMat through = apply_cascade(phases, ctx.inter_layer, ctx.quad_in);
  return (ctx.quad_out.adjoint() * through).squaredNorm();
}

namespace {

LayerWork fold_layer(const PhaseContext& ctx, const PhaseState& phases, int layer) {
  LayerWork w;
  w.quad_left = ctx.quad_out.adjoint();
  w.linear_right = ctx.linear_right;
  for (int l = phases.layers() - 1; l > layer; --l) {
    const CVec phi = phases.phase_vector(l);
    w.quad_left = (w.quad_left * phi.asDiagonal()) * ctx.inter_layer;
    w.linear_right = (w.linear_right * phi.asDiagonal()) * ctx.inter_layer;
  }
  w.quad_right = ctx.quad_in;
  w.linear_left = ctx.linear_left;
  for (int l = 0; l < layer; ++l) {
    const CVec phi = phases.phase_vector(l);
    w.quad_right = ctx.inter_layer * (phi.asDiagonal() * w.quad_right);
    w.linear_left = ctx.inter_layer * (phi.asDiagonal() * w.linear_left);
  }
  return w;
}

}  // namespace

CVec phase_gradient(const PhaseContext& ctx, const PhaseState& phases, int layer) {
  if (layer < 0 || layer >= phases.layers())
    throw std::out_of_range("phase_gradient: layer index out of range");
  return gradient_from_work(fold_layer(ctx, phases, layer), phases.phase_vector(layer), false);
}

CVec phase_gradient_quadratic(const PhaseContext& ctx, const PhaseState& phases, int layer) {
  if (layer < 0 || layer >= phases.layers())
    throw std::out_of_range("phase_gradient_quadratic: layer index out of range");
  return gradient_from_work(fold_layer(ctx, phases, layer), phases.phase_vector(layer), true);
}

namespace {

/// Projected-gradient steps on one layer. Returns false when the line search
/// stalled without an accepted step. step_scale carries the search start
/// across calls; an acceptance at the first try grows it for the next step.
bool descend_layer(const LayerWork& w, PhaseState& phases, int layer, const BcdConfig& config,
                   int* backtracks, double& step_scale, double* objective_out) {
  const CVec linear_diag =
      w.linear_left.cwiseProduct(w.linear_right.transpose()).rowwise().sum();
  bool advanced = false;
  bool stalled = false;
  for (int step = 0; step < config.phase_steps_per_layer && !stalled; ++step) {
    const CVec phi = phases.phase_vector(layer);
    const CVec grad = gradient_from_work(w, phi, false);
    const double f_cur = objective_from_work(w, phi, linear_diag);
    if (objective_out) *objective_out = f_cur;
    if (grad.squaredNorm() == 0.0) return true;  // exact stationary point
    const double slack = 1e-14 * (1.0 + std::abs(f_cur));
    double mu = step_scale;
    bool accepted = false;
    for (int bt = 0; bt < config.max_backtracks; ++bt) {
      const CVec candidate = project_unit_modulus(phi - mu * grad, phi);
      const double f_new = objective_from_work(w, candidate, linear_diag);
      const double moved = (candidate - phi).squaredNorm();
      if (f_new <= f_cur - 0.5 * moved / mu + slack) {
        phases.set_phase_vector(layer, candidate);
        accepted = true;
        step_scale = bt == 0 ? mu / config.step_ratio : mu;
        if (objective_out) *objective_out = f_new;
        break;
      }
      mu *= config.step_ratio;
      if (backtracks) ++*backtracks;
    }
    if (!accepted) {
      step_scale = std::max(mu, 1e-300);
      stalled = true;
    } else {
      advanced = true;
    }
  }
  return advanced;
}

}  // namespace

PhaseState update_phases(const PhaseContext& ctx, PhaseState phases, const BcdConfig& config,
                         PhaseSweepStats* stats, bool reverse_order, RVec* step_hints,
                         double* objective_out) {
  config.validate();
  const int layers = phases.layers();
  if (layers > 1 && (ctx.inter_layer.rows() != phases.atoms() ||
                     ctx.inter_layer.cols() != phases.atoms()))
    throw config_error("update_phases: inter-layer matrix size mismatch");
  if (step_hints && step_hints->size() != layers)
    throw config_error("update_phases: step hint count must match the layer count");
  PhaseSweepStats local;
  PhaseSweepStats* out = stats ? stats : &local;
  RVec scratch;
  if (!step_hints) {
    scratch = RVec::Constant(layers, config.step_init);
    step_hints = &scratch;
  }

  if (!reverse_order) {
    // Left folds use the layers above, untouched while sweeping upward.
    std::vector<CMat> quad_lefts(static_cast<size_t>(layers));
    std::vector<CMat> linear_rights(static_cast<size_t>(layers));
    quad_lefts[static_cast<size_t>(layers - 1)] = ctx.quad_out.adjoint();
    linear_rights[static_cast<size_t>(layers - 1)] = ctx.linear_right;
    for (int l = layers - 1; l > 0; --l) {
      const CVec phi = phases.phase_vector(l);
      quad_lefts[static_cast<size_t>(l - 1)] =
          (quad_lefts[static_cast<size_t>(l)] * phi.asDiagonal()) * ctx.inter_layer;
      linear_rights[static_cast<size_t>(l - 1)] =
          (linear_rights[static_cast<size_t>(l)] * phi.asDiagonal()) * ctx.inter_layer;
    }
    CMat quad_right = ctx.quad_in;
    CMat linear_left = ctx.linear_left;
    for (int l = 0; l < layers; ++l) {
      LayerWork w{std::move(quad_lefts[static_cast<size_t>(l)]), quad_right, linear_left,
                  std::move(linear_rights[static_cast<size_t>(l)])};
      if (!descend_layer(w, phases, l, config, &out->backtracks, (*step_hints)(l),
                         objective_out))
        ++out->stalled_layers;
      if (l + 1 < layers) {
        const CVec phi = phases.phase_vector(l);
        quad_right = ctx.inter_layer * (phi.asDiagonal() * w.quad_right);
        linear_left = ctx.inter_layer * (phi.asDiagonal() * w.linear_left);
      }
    }
  } else {
    // Right folds use the layers below, untouched while sweeping downward.
    std::vector<CMat> quad_rights(static_cast<size_t>(layers));
    std::vector<CMat> linear_lefts(static_cast<size_t>(layers));
    quad_rights[0] = ctx.quad_in;
    linear_lefts[0] = ctx.linear_left;
    for (int l = 0; l + 1 < layers; ++l) {
      const CVec phi = phases.phase_vector(l);
      quad_rights[static_cast<size_t>(l + 1)] =
          ctx.inter_layer * (phi.asDiagonal() * quad_rights[static_cast<size_t>(l)]);
      linear_lefts[static_cast<size_t>(l + 1)] =
          ctx.inter_layer * (phi.asDiagonal() * linear_lefts[static_cast<size_t>(l)]);
    }
    CMat quad_left = ctx.quad_out.adjoint();
    CMat linear_right = ctx.linear_right;
    for (int l = layers - 1; l >= 0; --l) {
      LayerWork w{quad_left, std::move(quad_rights[static_cast<size_t>(l)]),
                  std::move(linear_lefts[static_cast<size_t>(l)]), linear_right};
      if (!descend_layer(w, phases, l, config, &out->backtracks, (*step_hints)(l),
                         objective_out))
        ++out->stalled_layers;
      if (l > 0) {
        const CVec phi = phases.phase_vector(l);
        quad_left = (w.quad_left * phi.asDiagonal()) * ctx.inter_layer;
        linear_right = (w.linear_right * phi.asDiagonal()) * ctx.inter_layer;
      }
    }
  }
  return phases;
}

void write_trace_csv(std::ostream& out, const BcdTrace& trace) {
  out << "iteration,objective,wsr,mu,backtracks,millis\n";
  char buf[160];
  for (const auto& e : trace.entries) {
    std::snprintf(buf, sizeof(buf), "%d,%.15g,%.15g,%.15g,%d,%.15g\n", e.iteration,
                  e.objective_bits, e.sum_rate_bits, e.power_multiplier, e.phase_backtracks,
                  e.wall_ms);
    out << buf;
  }
}

BcdResult run_bcd(const BcdProblem& problem, const BcdConfig& config, std::uint64_t seed) {
  config.validate();
  if (!problem.channels) throw config_error("run_bcd: missing channel set");
  const ChannelSet& channels = *problem.channels;
  if (channels.users.empty()) throw config_error("run_bcd: no user channels");
  const int users = static_cast<int>(channels.users.size());
  const int streams = static_cast<int>(channels.users.front().rows());
  const int atoms = static_cast<int>(channels.feed.rows());
  if (problem.layers < 1) throw config_error("run_bcd: layer count must be >= 1");
  if (problem.noise_power <= 0.0) throw config_error("run_bcd: noise power must be positive");
  if (problem.power_budget < 0.0) throw config_error("run_bcd: power budget must be >= 0");
  if (problem.priorities.size() != users)
    throw config_error("run_bcd: priority count must match the user count");

  std::mt19937_64 rng(seed);
  PhaseState phases;
  PowerAllocation power;
  if (problem.initial_phases || problem.initial_power) {
    if (!problem.initial_phases || !problem.initial_power)
      throw config_error("run_bcd: warm starts need both phases and power");
    if (problem.initial_phases->layers() != problem.layers ||
        problem.initial_phases->atoms() != atoms)
      throw config_error("run_bcd: warm-start phase shape mismatch");
    if (problem.initial_power->users() != users || problem.initial_power->streams() != streams)
      throw config_error("run_bcd: warm-start power shape mismatch");
    phases = *problem.initial_phases;
    power = *problem.initial_power;
    power.budget = problem.power_budget;
    power.validate();
  } else {
    phases = PhaseState::random(problem.layers, atoms, rng);
    power = PowerAllocation::uniform(users, streams, problem.power_budget);
  }

  BcdResult result{phases, power, {}};
  double previous = 0.0;
  bool have_previous = false;
  RVec step_hints = RVec::Constant(problem.layers, config.step_init);

  for (int iter = 1; iter <= config.max_outer; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed_ms = [&t0] {
      return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();
    };

    const EffectiveChannels eff = effective_channels(channels, phases);
    const auto combiners = update_combiners(eff, power, problem.noise_power);
    const auto aux = update_aux(eff, combiners, power, problem.noise_power);
    const double objective =
        wmmse_objective(eff, combiners, aux, power, problem.noise_power, problem.priorities);
    const double wsr =
        weighted_sum_rate(eff, power, problem.noise_power, problem.priorities);
    if (!std::isfinite(objective) || !std::isfinite(wsr))
      throw numerical_error("run_bcd: objective is not finite at iteration " +
                            std::to_string(iter) + " (objective=" + std::to_string(objective) +
                            ", sum rate=" + std::to_string(wsr) +
                            ", total power=" + std::to_string(power.total_power()) + ")");

    BcdTraceEntry entry;
    entry.iteration = iter;
    entry.objective_bits = objective;
    entry.sum_rate_bits = wsr;

    if (have_previous &&
        objective - previous < config.epsilon * std::max(std::abs(previous), 1e-12)) {
      entry.wall_ms = elapsed_ms();
      result.trace.entries.push_back(entry);
      result.trace.converged = true;
      break;
    }
    previous = objective;
    have_previous = true;

    PowerSolution power_step = solve_power(
        power_coefficients(eff, combiners, aux, problem.priorities), problem.power_budget,
        config.power_tolerance);
    result.trace.disabled_streams += power_step.disabled_streams;

    const PhaseContext ctx =
        make_phase_context(channels, combiners, aux, power_step.allocation, problem.priorities);
    PhaseSweepStats sweep;
    PhaseState new_phases = phases;
    double phase_before = phase_objective(ctx, new_phases);
    for (int s = 0; s < config.phase_sweeps; ++s) {
      double phase_after = phase_before;
      new_phases =
          update_phases(ctx, std::move(new_phases), config, &sweep, false, &step_hints,
                        &phase_after);
      const double drop = phase_before - phase_after;
      phase_before = phase_after;
      if (drop <= config.phase_sweep_tolerance * std::abs(phase_before)) break;
    }

    // A first cycle that moves nothing is an exact fixed point (e.g. a zero
    // power budget); there is nothing left to iterate on.
    const bool fixed_point =
        iter == 1 && (power_step.allocation.amplitude == power.amplitude).all() &&
        (new_phases.angles() == phases.angles()).all();

    power = std::move(power_step.allocation);
    phases = std::move(new_phases);

    entry.power_multiplier = power_step.multiplier;
    entry.phase_backtracks = sweep.backtracks;
    entry.stalled_layers = sweep.stalled_layers;
    entry.wall_ms = elapsed_ms();
    result.trace.entries.push_back(entry);

    if (fixed_point) {
      result.trace.converged = true;
      break;
    }
  }

  result.phases = std::move(phases);
  result.power = std::move(power);
  return result;
}

}  // namespace simbeam
