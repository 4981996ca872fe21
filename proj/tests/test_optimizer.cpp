#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "simbeam/optimizer.hpp"
#include "test_support.hpp"

using namespace simbeam;
using simbeam::test::random_matrix;

namespace {

struct Instance {
  ChannelSet channels;
  PhaseState phases;
  PowerAllocation power;
  std::vector<CMat> combiners;
  std::vector<CMat> aux;
  RVec priorities;
  double noise = 0.2;
  int layers = 1;
};

Instance random_instance(int users, int streams, int atoms, int layers, std::mt19937_64& rng,
                         bool zero_power = false) {
  Instance inst;
  inst.layers = layers;
  if (layers > 1) inst.channels.inter_layer = random_matrix(atoms, atoms, rng);
  inst.channels.feed = random_matrix(atoms, users * streams, rng);
  for (int k = 0; k < users; ++k)
    inst.channels.users.push_back(random_matrix(streams, atoms, rng));
  inst.phases = PhaseState::random(layers, atoms, rng);

  inst.power = PowerAllocation::zero(users, streams, 4.0);
  if (!zero_power) {
    for (int k = 0; k < users; ++k)
      for (int m = 0; m < streams; ++m)
        inst.power.amplitude(k, m) = 0.2 + random_unit_interval(rng);
    inst.power.budget = 2.0 * inst.power.total_power();
  }
  for (int k = 0; k < users; ++k) {
    inst.combiners.push_back(random_matrix(streams, streams, rng));
    const CMat a = random_matrix(streams, streams, rng);
    inst.aux.push_back(a * a.adjoint() + 0.5 * CMat::Identity(streams, streams));
  }
  inst.priorities = RVec::Ones(users);
  for (int k = 0; k < users; ++k) inst.priorities(k) = 0.5 + random_unit_interval(rng);
  return inst;
}

double directional_derivative(const CVec& grad, const CVec& phi, int atom) {
  // d/d theta of the objective along the unit-circle parameterization.
  return -2.0 * std::imag(std::conj(grad(atom)) * phi(atom));
}

double fd_derivative(const PhaseContext& ctx, const PhaseState& phases, int layer, int atom,
                     bool quadratic_only, double h = 1e-6) {
  PhaseState plus = phases;
  plus.set_angle(layer, atom, phases.angle(layer, atom) + h);
  PhaseState minus = phases;
  minus.set_angle(layer, atom, phases.angle(layer, atom) - h);
  const double fp =
      quadratic_only ? phase_objective_quadratic(ctx, plus) : phase_objective(ctx, plus);
  const double fm =
      quadratic_only ? phase_objective_quadratic(ctx, minus) : phase_objective(ctx, minus);
  return (fp - fm) / (2.0 * h);
}

}  // namespace

TEST_CASE("combiner update") {
  std::mt19937_64 rng(71);

  SUBCASE("scalar Wiener filter") {
    EffectiveChannels eff;
    eff.streams = 1;
    const Complex t(0.8, -0.3);
    eff.links = {CMat::Constant(1, 1, t)};
    PowerAllocation p = PowerAllocation::zero(1, 1, 9.0);
    p.amplitude(0, 0) = 1.2;
    const double noise = 0.07;
    const auto u = update_combiners(eff, p, noise);
    const Complex expect = t * 1.2 / (noise + 1.2 * 1.2 * std::norm(t));
    CHECK(std::abs(u[0](0, 0) - expect) < 1e-12 * std::abs(expect));
  }
  SUBCASE("zero power yields zero combiners") {
    Instance inst = random_instance(2, 2, 6, 2, rng, true);
    const EffectiveChannels eff = effective_channels(inst.channels, inst.phases);
    const auto u = update_combiners(eff, inst.power, inst.noise);
    for (const auto& m : u) CHECK(m.norm() == 0.0);
  }
  SUBCASE("minimizes the error trace against perturbations") {
    Instance inst = random_instance(2, 2, 6, 2, rng);
    const EffectiveChannels eff = effective_channels(inst.channels, inst.phases);
    const auto u = update_combiners(eff, inst.power, inst.noise);
    for (int k = 0; k < 2; ++k) {
      const double base = mse_matrix(eff, k, u[static_cast<size_t>(k)], inst.power, inst.noise)
                              .trace()
                              .real();
      for (int it = 0; it < 100; ++it) {
        const CMat perturbed =
            u[static_cast<size_t>(k)] + 1e-3 * random_matrix(2, 2, rng);
        const double moved =
            mse_matrix(eff, k, perturbed, inst.power, inst.noise).trace().real();
        CHECK(moved >= base - 1e-12);
      }
    }
  }
}

TEST_CASE("auxiliary weight update") {
  std::mt19937_64 rng(73);

  SUBCASE("identity MSE inverts to identity") {
    Instance inst = random_instance(2, 2, 5, 1, rng, true);
    const EffectiveChannels eff = effective_channels(inst.channels, inst.phases);
    const std::vector<CMat> zero(2, CMat::Zero(2, 2));
    const auto z = update_aux(eff, zero, inst.power, inst.noise);
    for (const auto& m : z) CHECK((m - CMat::Identity(2, 2)).norm() < 1e-12);
  }
  SUBCASE("inverse oracle on random instances") {
    for (int trial = 0; trial < 20; ++trial) {
      Instance inst = random_instance(2, 2, 6, 2, rng);
      const EffectiveChannels eff = effective_channels(inst.channels, inst.phases);
      const auto u = update_combiners(eff, inst.power, inst.noise);
      const auto z = update_aux(eff, u, inst.power, inst.noise);
      for (int k = 0; k < 2; ++k) {
        const CMat e = mse_matrix(eff, k, u[static_cast<size_t>(k)], inst.power, inst.noise);
        CHECK((z[static_cast<size_t>(k)] * e - CMat::Identity(2, 2)).norm() <= 1e-10);
        CHECK((z[static_cast<size_t>(k)] - z[static_cast<size_t>(k)].adjoint()).norm() < 1e-12);
      }
    }
  }
}

TEST_CASE("power solver") {
  SUBCASE("no positive gains means no power") {
    PowerCoefficients c;
    c.quadratic = Eigen::ArrayXXd::Constant(2, 2, 1.0);
    c.linear = Eigen::ArrayXXd::Constant(2, 2, -0.5);
    const auto sol = solve_power(c, 3.0, 1e-9);
    CHECK(sol.allocation.total_power() == 0.0);
    CHECK(sol.multiplier == 0.0);
  }
  SUBCASE("interior single stream") {
    PowerCoefficients c;
    c.quadratic = Eigen::ArrayXXd::Constant(1, 1, 1.0);
    c.linear = Eigen::ArrayXXd::Constant(1, 1, 1.0);
    const auto sol = solve_power(c, 4.0, 1e-9);
    CHECK(sol.multiplier == 0.0);
    CHECK(sol.allocation.amplitude(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("active constraint with a hand-solved multiplier") {
    PowerCoefficients c;
    c.quadratic = Eigen::ArrayXXd::Constant(1, 2, 1.0);
    c.linear = Eigen::ArrayXXd::Constant(1, 2, 2.0);
    const auto sol = solve_power(c, 2.0, 1e-12);
    CHECK(sol.multiplier == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sol.allocation.amplitude(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sol.allocation.amplitude(0, 1) == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("vanishing curvature with positive gain disables the stream") {
    PowerCoefficients c;
    c.quadratic = Eigen::ArrayXXd::Zero(1, 2);
    c.quadratic(0, 0) = 1.0;
    c.linear = Eigen::ArrayXXd::Constant(1, 2, 1.0);
    const auto sol = solve_power(c, 100.0, 1e-9);
    CHECK(sol.disabled_streams == 1);
    CHECK(sol.allocation.amplitude(0, 1) == 0.0);
    CHECK(sol.allocation.amplitude(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("fine grid oracle on two streams") {
    std::mt19937_64 rng(79);
    for (int trial = 0; trial < 20; ++trial) {
      PowerCoefficients c;
      c.quadratic = Eigen::ArrayXXd(1, 2);
      c.linear = Eigen::ArrayXXd(1, 2);
      for (int m = 0; m < 2; ++m) {
        c.quadratic(0, m) = 0.2 + 2.0 * random_unit_interval(rng);
        c.linear(0, m) = 3.0 * random_unit_interval(rng) - 1.0;
      }
      const double budget = 0.5 + 2.0 * random_unit_interval(rng);
      const auto sol = solve_power(c, budget, 1e-9);

      auto objective = [&](double p0, double p1) {
        return c.quadratic(0, 0) * p0 * p0 - 2.0 * c.linear(0, 0) * p0 +
               c.quadratic(0, 1) * p1 * p1 - 2.0 * c.linear(0, 1) * p1;
      };
      const double rmax = std::sqrt(budget);
      double best = 0.0;
      const int grid = 400;
      for (int i = 0; i <= grid; ++i) {
        const double p0 = rmax * i / grid;
        const double cap = std::sqrt(std::max(0.0, budget - p0 * p0));
        for (int j = 0; j <= grid; ++j) {
          const double p1 = cap * j / grid;
          best = std::min(best, objective(p0, p1));
        }
      }
      const double got = objective(sol.allocation.amplitude(0, 0), sol.allocation.amplitude(0, 1));
      CHECK(got <= best + 1e-4 * std::abs(best));
      const double total = sol.allocation.total_power();
      CHECK(total <= budget * (1.0 + 1e-9));
      CHECK(std::abs(sol.multiplier * (total - budget)) <=
            1e-6 * budget * std::max(sol.multiplier, 1.0));
    }
  }
}

TEST_CASE("phase objective and its oracle identity") {
  std::mt19937_64 rng(83);

  SUBCASE("zero power or zero combiners zero the objective") {
    Instance inst = random_instance(2, 2, 6, 3, rng, true);
    const auto ctx = make_phase_context(inst.channels, inst.combiners, inst.aux, inst.power,
                                        inst.priorities);
    CHECK(phase_objective(ctx, inst.phases) == 0.0);
    CHECK(phase_gradient(ctx, inst.phases, 1).norm() == 0.0);

    Instance live = random_instance(2, 2, 6, 3, rng);
    const std::vector<CMat> zero(2, CMat::Zero(2, 2));
    const auto ctx0 =
        make_phase_context(live.channels, zero, live.aux, live.power, live.priorities);
    CHECK(phase_objective(ctx0, live.phases) == 0.0);
  }

  SUBCASE("matches the weighted MSE trace up to a phase-independent constant") {
    for (int trial = 0; trial < 5; ++trial) {
      Instance inst = random_instance(2, 2, 6, 3, rng);
      const auto ctx = make_phase_context(inst.channels, inst.combiners, inst.aux, inst.power,
                                          inst.priorities);
      // The constant collects every term that does not touch the cascade.
      double constant = 0.0;
      for (int k = 0; k < 2; ++k) {
        const CMat& z = inst.aux[static_cast<size_t>(k)];
        const CMat& u = inst.combiners[static_cast<size_t>(k)];
        constant += inst.priorities(k) *
                    (z.trace().real() + inst.noise * (z * u.adjoint() * u).trace().real());
      }
      for (int draw = 0; draw < 10; ++draw) {
        const PhaseState state = PhaseState::random(3, 6, rng);
        const EffectiveChannels eff = effective_channels(inst.channels, state);
        double weighted = 0.0;
        for (int k = 0; k < 2; ++k) {
          const CMat e =
              mse_matrix(eff, k, inst.combiners[static_cast<size_t>(k)], inst.power, inst.noise);
          weighted +=
              inst.priorities(k) * (inst.aux[static_cast<size_t>(k)] * e).trace().real();
        }
        const double f = phase_objective(ctx, state);
        CHECK(f + constant == doctest::Approx(weighted).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("phase gradient matches finite differences") {
  std::mt19937_64 rng(89);
  int checked = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const int users = 1 + static_cast<int>(rng() % 3);
    const int streams = 1 + static_cast<int>(rng() % 2);
    const int atoms = 3 + static_cast<int>(rng() % 6);
    const int layers = 1 + static_cast<int>(rng() % 4);
    Instance inst = random_instance(users, streams, atoms, layers, rng);
    const auto ctx = make_phase_context(inst.channels, inst.combiners, inst.aux, inst.power,
                                        inst.priorities);
    for (int layer = 0; layer < layers; ++layer) {
      const CVec phi = inst.phases.phase_vector(layer);
      const CVec full = phase_gradient(ctx, inst.phases, layer);
      const CVec quad = phase_gradient_quadratic(ctx, inst.phases, layer);
      RVec analytic(atoms), numeric(atoms), analytic_quad(atoms), numeric_quad(atoms);
      for (int n = 0; n < atoms; ++n) {
        analytic(n) = directional_derivative(full, phi, n);
        numeric(n) = fd_derivative(ctx, inst.phases, layer, n, false);
        analytic_quad(n) = directional_derivative(quad, phi, n);
        numeric_quad(n) = fd_derivative(ctx, inst.phases, layer, n, true);
      }
      CHECK((analytic - numeric).norm() <= 1e-5 * std::max(numeric.norm(), 1e-9));
      CHECK((analytic_quad - numeric_quad).norm() <=
            1e-5 * std::max(numeric_quad.norm(), 1e-9));
      ++checked;
    }
  }
  CHECK(checked >= 12);
}

TEST_CASE("projected gradient sweep") {
  std::mt19937_64 rng(97);
  BcdConfig config;

  SUBCASE("zero gradient leaves the iterate untouched") {
    Instance inst = random_instance(2, 2, 6, 2, rng, true);
    const auto ctx = make_phase_context(inst.channels, inst.combiners, inst.aux, inst.power,
                                        inst.priorities);
    const PhaseState out = update_phases(ctx, inst.phases, config);
    CHECK((out.angles() == inst.phases.angles()).all());
  }
  SUBCASE("one sweep never increases the objective") {
    for (int trial = 0; trial < 20; ++trial) {
      const int layers = 1 + static_cast<int>(rng() % 4);
      Instance inst = random_instance(2, 2, 8, layers, rng);
      const auto ctx = make_phase_context(inst.channels, inst.combiners, inst.aux, inst.power,
                                          inst.priorities);
      const double before = phase_objective(ctx, inst.phases);
      PhaseSweepStats stats;
      const PhaseState out = update_phases(ctx, inst.phases, config, &stats);
      const double after = phase_objective(ctx, out);
      CHECK(after <= before + 1e-10 * (1.0 + std::abs(before)));
    }
  }
  SUBCASE("reverse sweep order also never increases the objective") {
    for (int trial = 0; trial < 20; ++trial) {
      const int layers = 2 + static_cast<int>(rng() % 3);
      Instance inst = random_instance(2, 2, 8, layers, rng);
      const auto ctx = make_phase_context(inst.channels, inst.combiners, inst.aux, inst.power,
                                          inst.priorities);
      const double before = phase_objective(ctx, inst.phases);
      const PhaseState out = update_phases(ctx, inst.phases, config, nullptr, true);
      CHECK(phase_objective(ctx, out) <= before + 1e-10 * (1.0 + std::abs(before)));
    }
  }
  SUBCASE("a quadratic-only objective strictly decreases off stationary points") {
    for (int trial = 0; trial < 10; ++trial) {
      Instance inst = random_instance(2, 2, 6, 2, rng);
      auto ctx = make_phase_context(inst.channels, inst.combiners, inst.aux, inst.power,
                                    inst.priorities);
      ctx.linear_left.setZero();  // keep only tr(G^H C G D)
      const double before = phase_objective(ctx, inst.phases);
      if (phase_gradient(ctx, inst.phases, 0).norm() == 0.0) continue;
      const PhaseState out = update_phases(ctx, inst.phases, config);
      CHECK(phase_objective(ctx, out) < before);
    }
  }
}

TEST_CASE("full block-coordinate run") {
  std::mt19937_64 rng(101);

  SUBCASE("zero budget terminates in one iteration at zero objective") {
    Instance inst = random_instance(2, 2, 6, 2, rng);
    BcdProblem problem{&inst.channels, RVec::Ones(2), 0.1, 0.0, 2};
    const BcdResult result = run_bcd(problem, BcdConfig{}, 7);
    CHECK(result.trace.converged);
    CHECK(result.trace.iterations() == 1);
    CHECK(result.trace.entries[0].objective_bits == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(result.trace.entries[0].sum_rate_bits == 0.0);
    CHECK(result.power.total_power() == 0.0);
  }
  SUBCASE("single-everything instance improves over the start") {
    Instance inst = random_instance(1, 1, 4, 1, rng);
    BcdProblem problem{&inst.channels, RVec::Ones(1), 0.05, 1.0, 1};
    const BcdResult result = run_bcd(problem, BcdConfig{}, 11);
    REQUIRE(result.trace.iterations() >= 1);
    CHECK(result.trace.entries.back().sum_rate_bits >=
          result.trace.entries.front().sum_rate_bits - 1e-9);
  }
  SUBCASE("objective trace is monotone and consistent with the rate") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      const int users = 1 + static_cast<int>(rng() % 3);
      const int streams = 1 + static_cast<int>(rng() % 2);
      Instance inst = random_instance(users, streams, 8, 2, rng);
      BcdProblem problem{&inst.channels, RVec::Ones(users), 0.1, 2.0, 2};
      const BcdResult result = run_bcd(problem, BcdConfig{}, seed);
      const auto& entries = result.trace.entries;
      for (size_t i = 0; i < entries.size(); ++i) {
        CHECK(std::abs(entries[i].objective_bits - entries[i].sum_rate_bits) <=
              1e-6 * (1.0 + std::abs(entries[i].sum_rate_bits)));
        if (i > 0)
          CHECK(entries[i].objective_bits >=
                entries[i - 1].objective_bits -
                    1e-6 * std::abs(entries[i - 1].objective_bits));
      }
      result.power.validate();
      CHECK(result.power.total_power() <= problem.power_budget * (1.0 + 1e-9));
    }
  }
  SUBCASE("beats a random search over phases and equal power") {
    Instance inst = random_instance(2, 2, 16, 2, rng);
    const double budget = 2.0;
    const double noise = 0.1;
    BcdProblem problem{&inst.channels, RVec::Ones(2), noise, budget, 2};
    BcdConfig config;
    const BcdResult result = run_bcd(problem, config, 13);
    const double optimized = result.trace.entries.back().sum_rate_bits;

    const PowerAllocation equal = PowerAllocation::uniform(2, 2, budget);
    double best = 0.0;
    std::mt19937_64 search(1234);
    for (int draw = 0; draw < 200; ++draw) {
      const PhaseState state = PhaseState::random(2, 16, search);
      const EffectiveChannels eff = effective_channels(inst.channels, state);
      best = std::max(best, weighted_sum_rate(eff, equal, noise, RVec::Ones(2)));
    }
    CHECK(optimized >= best);
  }
  SUBCASE("identical seeds give identical traces") {
    Instance inst = random_instance(2, 2, 8, 2, rng);
    BcdProblem problem{&inst.channels, RVec::Ones(2), 0.1, 1.0, 2};
    const BcdResult a = run_bcd(problem, BcdConfig{}, 42);
    const BcdResult b = run_bcd(problem, BcdConfig{}, 42);
    REQUIRE(a.trace.iterations() == b.trace.iterations());
    for (int i = 0; i < a.trace.iterations(); ++i) {
      CHECK(a.trace.entries[static_cast<size_t>(i)].objective_bits ==
            b.trace.entries[static_cast<size_t>(i)].objective_bits);
      CHECK(a.trace.entries[static_cast<size_t>(i)].sum_rate_bits ==
            b.trace.entries[static_cast<size_t>(i)].sum_rate_bits);
    }
    CHECK((a.phases.angles() == b.phases.angles()).all());
    CHECK((a.power.amplitude == b.power.amplitude).all());
  }
}
