#include "simbeam/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

namespace simbeam {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t trial_seed(std::uint64_t base_seed, int trial) {
  return base_seed ^ splitmix64(static_cast<std::uint64_t>(trial));
}

ScenarioSpec ScenarioSpec::from_config(const SystemConfig& cfg, Placement placement,
                                       ChannelMode mode) {
  ScenarioSpec spec;
  spec.placement = placement;
  spec.mode = mode;
  spec.radius_min = cfg.radius_min;
  spec.radius_max = cfg.radius_max;
  spec.users = cfg.users;
  spec.streams = cfg.streams;
  spec.atoms = cfg.atoms;
  spec.layers = cfg.layers;
  spec.seed = cfg.seed;
  spec.carrier_hz = cfg.carrier_hz;
  spec.thickness_wavelengths = cfg.thickness_wavelengths;
  spec.far_field_gain = cfg.far_field_gain;
  spec.pathloss_exponent = cfg.pathloss_exponent;
  spec.pathloss_ref_distance = cfg.pathloss_ref_distance;
  return spec;
}

void ScenarioSpec::validate() const {
  if (radius_min <= 0.0) throw config_error("ScenarioSpec: radius_min must be positive");
  if (radius_max < radius_min) throw config_error("ScenarioSpec: radius_max < radius_min");
  if (users < 1 || streams < 1 || atoms < 1 || layers < 1)
    throw config_error("ScenarioSpec: counts must be >= 1");
  if (carrier_hz <= 0.0) throw config_error("ScenarioSpec: carrier_hz must be positive");
  if (thickness_wavelengths <= 0.0)
    throw config_error("ScenarioSpec: thickness_wavelengths must be positive");
}

Scenario generate_scenario(const ScenarioSpec& spec, int trial) {
  spec.validate();
  if (trial < 0) throw config_error("generate_scenario: trial must be >= 0");

  Scenario scenario;
  scenario.trial_seed = trial_seed(spec.seed, trial);
  std::mt19937_64 rng(scenario.trial_seed);

  auto draw_distance = [&] {
    return spec.radius_min + (spec.radius_max - spec.radius_min) * random_unit_interval(rng);
  };
  auto draw_angle = [&] { return kPi * (random_unit_interval(rng) - 0.5); };

  scenario.carrier = Carrier::from_frequency(spec.carrier_hz);
  scenario.users.antennas = spec.streams;
  scenario.users.antenna_spacing = scenario.carrier.wavelength / 2.0;
  scenario.users.users.resize(static_cast<size_t>(spec.users));
  if (spec.placement == Placement::random) {
    for (auto& u : scenario.users.users) {
      u.distance = draw_distance();
      u.angle = draw_angle();
    }
  } else {
    const double shared_angle = draw_angle();
    for (int k = 0; k < spec.users; ++k) {
      double d = draw_distance();
      // Exact distance ties would collapse two users onto one point.
      int attempts = 0;
      while (std::any_of(scenario.users.users.begin(), scenario.users.users.begin() + k,
                         [&](const UserPlacement& u) { return u.distance == d; })) {
        if (++attempts > 1000)
          throw config_error("inline placement cannot draw distinct user distances; "
                             "widen [radius_min, radius_max]");
        d = draw_distance();
      }
      scenario.users.users[static_cast<size_t>(k)] = {d, shared_angle};
    }
  }

  scenario.sim = SimLayout::for_carrier(scenario.carrier, spec.atoms, spec.layers,
                                        spec.thickness_wavelengths);
  scenario.bs = BsLayout{spec.bs_antennas()};

  if (spec.layers > 1)
    scenario.channels.inter_layer = build_inter_layer_matrix(scenario.sim, scenario.carrier);
  scenario.channels.feed = build_feed_matrix(scenario.sim, scenario.bs, scenario.carrier);
  scenario.channels.users.reserve(static_cast<size_t>(spec.users));
  const PathLossModel pl =
      PathLossModel::friis(scenario.carrier, spec.pathloss_ref_distance, spec.pathloss_exponent);
  for (int k = 0; k < spec.users; ++k) {
    if (spec.mode == ChannelMode::near)
      scenario.channels.users.push_back(
          build_near_field_channel(k, scenario.users, scenario.sim, scenario.carrier));
    else
      scenario.channels.users.push_back(build_far_field_channel(
          k, scenario.users, scenario.sim, scenario.carrier, spec.far_field_gain, pl));
  }
  return scenario;
}

std::vector<double> default_sweep_values(SweepSpec::Variable variable) {
  switch (variable) {
    case SweepSpec::Variable::atoms:
      return {16, 25, 36, 49, 64};
    case SweepSpec::Variable::power:
      return {0, 5, 10, 15, 20};
    case SweepSpec::Variable::layers:
      return {1, 2, 4, 6};
    case SweepSpec::Variable::single:
      return {};
  }
  return {};
}

const char* to_string(SweepSpec::Variable variable) {
  switch (variable) {
    case SweepSpec::Variable::atoms:
      return "n";
    case SweepSpec::Variable::power:
      return "power";
    case SweepSpec::Variable::layers:
      return "layers";
    case SweepSpec::Variable::single:
      return "single";
  }
  return "?";
}

namespace {

SystemConfig config_at(const SystemConfig& base, SweepSpec::Variable variable, double value) {
  SystemConfig cfg = base;
  switch (variable) {
    case SweepSpec::Variable::atoms:
      cfg.atoms = static_cast<int>(value);
      break;
    case SweepSpec::Variable::power:
      cfg.p_budget_dbm = value;
      break;
    case SweepSpec::Variable::layers:
      cfg.layers = static_cast<int>(value);
      break;
    case SweepSpec::Variable::single:
      break;
  }
  return cfg;
}

int mode_rank(ChannelMode m) { return m == ChannelMode::near ? 0 : 1; }

}  // namespace

std::vector<SweepRecord> run_sweep(const SystemConfig& cfg, const SweepSpec& sweep,
                                   SweepArtifacts* artifacts, std::ostream* progress) {
  cfg.validate();
  if (sweep.trials < 1) throw config_error("run_sweep: trials must be >= 1");
  std::vector<double> values = sweep.values;
  if (values.empty()) values = default_sweep_values(sweep.variable);
  if (values.empty()) values = {static_cast<double>(cfg.atoms)};  // single-point run

  std::vector<ChannelMode> modes{ChannelMode::near};
  if (sweep.compare_far) modes.push_back(ChannelMode::far);

  // Power sweeps keep the geometry fixed, so each trial walks the budgets in
  // ascending order and warm-starts from the previous solution; the previous
  // point stays feasible and the final rate cannot drop along the chain.
  const bool chained = sweep.variable == SweepSpec::Variable::power;
  std::vector<double> order = values;
  if (chained) std::sort(order.begin(), order.end());

  std::vector<SweepRecord> records;
  records.reserve(order.size() * static_cast<size_t>(sweep.trials) * modes.size());
  const double first_value = order.front();

  for (int trial = 0; trial < sweep.trials; ++trial) {
    for (const ChannelMode mode : modes) {
      std::optional<BcdResult> previous;
      std::optional<Scenario> chained_scenario;
      for (const double value : order) {
        const SystemConfig point = config_at(cfg, sweep.variable, value);
        point.validate();

        SweepRecord rec;
        rec.sweep_var = to_string(sweep.variable);
        rec.value = value;
        rec.trial = trial;
        rec.placement = sweep.placement;
        rec.mode = mode;
        rec.layers = point.layers;
        rec.atoms = point.atoms;
        rec.p_dbm = point.p_budget_dbm;
        rec.seed = trial_seed(point.seed, trial);

        const auto t0 = std::chrono::steady_clock::now();
        try {
          if (!chained || !chained_scenario) {
            const ScenarioSpec spec = ScenarioSpec::from_config(point, sweep.placement, mode);
            Scenario generated = generate_scenario(spec, trial);
            if (chained)
              chained_scenario = std::move(generated);
            else
              chained_scenario.emplace(std::move(generated));
          }
          const Scenario& scenario = *chained_scenario;
          BcdProblem problem;
          problem.channels = &scenario.channels;
          problem.priorities = RVec::Ones(point.users);
          problem.noise_power = point.noise_power_watts();
          problem.power_budget = point.power_budget_watts();
          problem.layers = point.layers;
          if (chained && previous) {
            problem.initial_phases = &previous->phases;
            problem.initial_power = &previous->power;
          }
          // Phase initialization is independent of the channel mode so near
          // and far runs start from the same point.
          const std::uint64_t run_seed = splitmix64(scenario.trial_seed ^ 0x5DEECE66Dull);
          BcdResult result = run_bcd(problem, point.bcd, run_seed);
          rec.wsr_bits = result.trace.entries.back().sum_rate_bits;
          rec.iterations = result.trace.iterations();
          if (artifacts && value == first_value && trial == 0) {
            if (mode == ChannelMode::near) {
              artifacts->near_scenario = scenario;
              artifacts->final_phases = result.phases;
              artifacts->first_trace = result.trace;
            } else {
              artifacts->far_scenario = scenario;
            }
          }
          if (progress && result.trace.disabled_streams > 0)
            *progress << "[sweep] value=" << value << " trial=" << trial
                      << ": power solver disabled " << result.trace.disabled_streams
                      << " degenerate stream(s)\n";
          if (chained) previous = std::move(result);
        } catch (const std::exception& e) {
          rec.failed = true;
          rec.wsr_bits = std::numeric_limits<double>::quiet_NaN();
          rec.iterations = 0;
          previous.reset();
          if (progress)
            *progress << "[sweep] value=" << value << " trial=" << trial << " mode="
                      << to_string(mode) << " FAILED: " << e.what() << "\n";
        }
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                t0)
                          .count();
        if (progress && !rec.failed)
          *progress << "[sweep] " << rec.sweep_var << "=" << value << " trial=" << trial
                    << " mode=" << to_string(mode) << " wsr=" << rec.wsr_bits
                    << " iters=" << rec.iterations << "\n";
        records.push_back(std::move(rec));
        if (!chained) chained_scenario.reset();
      }
    }
  }

  std::sort(records.begin(), records.end(), [](const SweepRecord& a, const SweepRecord& b) {
    if (a.value != b.value) return a.value < b.value;
    if (a.trial != b.trial) return a.trial < b.trial;
    return mode_rank(a.mode) < mode_rank(b.mode);
  });
  return records;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  return buf;
}

}  // namespace

void emit_csv(const std::vector<SweepRecord>& records, std::ostream& out) {
  out << "sweep_var,value,trial,placement,mode,L,N,P_dBm,wsr_bits,iters,millis,seed\n";
  for (const auto& r : records) {
    out << r.sweep_var << ',' << format_double(r.value) << ',' << r.trial << ','
        << to_string(r.placement) << ',' << to_string(r.mode) << ',' << r.layers << ','
        << r.atoms << ',' << format_double(r.p_dbm) << ',' << format_double(r.wsr_bits) << ','
        << r.iterations << ',' << format_double(r.wall_ms) << ',' << r.seed << '\n';
  }
}

void emit_csv_file(const std::vector<SweepRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open output file '" + path + "'");
  emit_csv(records, out);
  out.flush();
  if (!out) throw config_error("write failed for output file '" + path + "'");
}

namespace {

void dump_artifacts(const SweepArtifacts& artifacts, const std::string& out_path) {
  const std::filesystem::path base(out_path);
  const std::filesystem::path dir = base.parent_path();
  const std::string stem = base.stem().string();
  auto sibling = [&](const std::string& suffix) {
    return (dir / (stem + suffix)).string();
  };

  if (artifacts.near_scenario) {
    std::ofstream m(sibling("_matrices.csv"), std::ios::binary);
    if (!m) throw config_error("cannot open matrix dump next to '" + out_path + "'");
    m << "matrix_id,row,col,re,im\n";
    const ChannelSet& ch = artifacts.near_scenario->channels;
    if (ch.inter_layer.size() > 0) write_matrix_csv(m, "W", ch.inter_layer);
    write_matrix_csv(m, "W1", ch.feed);
    for (size_t k = 0; k < ch.users.size(); ++k)
      write_matrix_csv(m, "H" + std::to_string(k + 1), ch.users[k]);
    if (artifacts.far_scenario) {
      const ChannelSet& far = artifacts.far_scenario->channels;
      for (size_t k = 0; k < far.users.size(); ++k)
        write_matrix_csv(m, "H" + std::to_string(k + 1) + "_far", far.users[k]);
    }
  }
  if (artifacts.final_phases) {
    std::ofstream p(sibling("_phases.csv"), std::ios::binary);
    if (!p) throw config_error("cannot open phase dump next to '" + out_path + "'");
    write_phase_csv(p, *artifacts.final_phases);
  }
  if (artifacts.first_trace) {
    std::ofstream t(sibling("_trace.csv"), std::ios::binary);
    if (!t) throw config_error("cannot open trace dump next to '" + out_path + "'");
    write_trace_csv(t, *artifacts.first_trace);
  }
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  return cli_main(argc, argv, std::cout, std::cerr);
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wave-domain beamforming simulator for stacked-metasurface MIMO downlinks"};
  app.footer("Config file keys (key = value per line, '#' comments):\n" +
             config_key_reference());

  std::string config_path;
  std::string sweep_name;
  std::string scenario_name = "random";
  std::string out_path = "sweep.csv";
  bool compare_far = false;
  bool dump_matrices = false;
  bool quiet = false;
  bool stable_timing = false;
  int trials = -1;
  std::int64_t seed = -1;

  app.add_option("--config", config_path, "configuration file path");
  app.add_option("--sweep", sweep_name, "swept variable: n | power | layers")
      ->check(CLI::IsMember({"n", "power", "layers"}));
  app.add_option("--scenario", scenario_name, "user placement: random | inline")
      ->check(CLI::IsMember({"random", "inline"}));
  app.add_flag("--compare-far", compare_far, "also run the far-field baseline per trial");
  app.add_option("--trials", trials, "Monte Carlo trials per sweep point");
  app.add_option("--seed", seed, "base RNG seed");
  app.add_option("--out", out_path, "output CSV path");
  app.add_flag("--dump-matrices", dump_matrices,
               "dump first-scenario matrices and final phases next to the output");
  app.add_flag("--quiet", quiet, "suppress progress output");
  app.add_flag("--stable-timing", stable_timing,
               "zero the millis column so repeated runs are byte-identical");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    SystemConfig cfg;
    if (!config_path.empty()) cfg = load_config_file(config_path);
    if (trials > 0) cfg.trials = trials;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.validate();

    SweepSpec sweep;
    sweep.variable = SweepSpec::Variable::single;
    if (sweep_name == "n") sweep.variable = SweepSpec::Variable::atoms;
    else if (sweep_name == "power") sweep.variable = SweepSpec::Variable::power;
    else if (sweep_name == "layers") sweep.variable = SweepSpec::Variable::layers;
    sweep.values = cfg.sweep_values;
    sweep.trials = cfg.trials;
    sweep.placement =
        scenario_name == "inline" ? Placement::inline_users : Placement::random;
    sweep.compare_far = compare_far;

    if (!quiet) {
      const SimLayout sim =
          SimLayout::for_carrier(cfg.carrier(), cfg.atoms, cfg.layers, cfg.thickness_wavelengths);
      err << "[info] aperture " << sim.atoms_y << "x" << sim.atoms_z << ", rayleigh distance "
          << rayleigh_distance(sim, cfg.carrier().wavelength) << " m, users at ["
          << cfg.radius_min << ", " << cfg.radius_max << "] m\n";
    }

    SweepArtifacts artifacts;
    std::vector<SweepRecord> records =
        run_sweep(cfg, sweep, dump_matrices ? &artifacts : nullptr, quiet ? nullptr : &err);

    if (stable_timing)
      for (auto& r : records) r.wall_ms = 0.0;

    emit_csv_file(records, out_path);
    if (dump_matrices) dump_artifacts(artifacts, out_path);

    const auto failures =
        std::count_if(records.begin(), records.end(), [](const auto& r) { return r.failed; });
    if (!quiet)
      err << "[info] wrote " << records.size() << " records to " << out_path << " ("
          << failures << " failed)\n";
    if (failures == static_cast<long>(records.size())) {
      err << "error: every trial aborted numerically\n";
      return 2;
    }
    return 0;
  } catch (const config_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const numerical_error& e) {
    err << "numerical abort: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace simbeam
