#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "simbeam/config.hpp"
#include "simbeam/geometry.hpp"
#include "simbeam/optimizer.hpp"

namespace simbeam {

/// splitmix64 finalizing mixer; the documented trial-index hash.
std::uint64_t splitmix64(std::uint64_t x);

/// Per-trial seed: base_seed XOR splitmix64(trial).
std::uint64_t trial_seed(std::uint64_t base_seed, int trial);

/// Everything one scenario draw needs, independent of the sweep machinery.
struct ScenarioSpec {
  Placement placement = Placement::random;
  ChannelMode mode = ChannelMode::near;
  double radius_min = 2.0;
  double radius_max = 4.0;
  int users = 4;
  int streams = 2;
  int atoms = 40;
  int layers = 4;
  std::uint64_t seed = 1;
  double carrier_hz = 10e9;
  double thickness_wavelengths = 5.0;
  FarFieldGain far_field_gain = FarFieldGain::freespace_match;
  double pathloss_exponent = 2.5;
  double pathloss_ref_distance = 1.0;

  int bs_antennas() const { return users * streams; }
  static ScenarioSpec from_config(const SystemConfig& cfg, Placement placement,
                                  ChannelMode mode);
  void validate() const;
};

struct Scenario {
  Carrier carrier;
  SimLayout sim;
  UserLayout users;
  BsLayout bs;
  ChannelSet channels;
  std::uint64_t trial_seed = 0;
};

/// Deterministic draw: the same (spec.seed, trial) always yields the same
/// scenario, and near/far modes share identical user positions.
Scenario generate_scenario(const ScenarioSpec& spec, int trial);

struct SweepSpec {
  enum class Variable { atoms, power, layers, single };
  Variable variable = Variable::single;
  std::vector<double> values;  // empty -> default grid for the variable
  int trials = 1;
  Placement placement = Placement::random;
  bool compare_far = false;
};

std::vector<double> default_sweep_values(SweepSpec::Variable variable);
const char* to_string(SweepSpec::Variable variable);

struct SweepRecord {
  std::string sweep_var;
  double value = 0.0;
  int trial = 0;
  Placement placement = Placement::random;
  ChannelMode mode = ChannelMode::near;
  int layers = 0;
  int atoms = 0;
  double p_dbm = 0.0;
  double wsr_bits = 0.0;  // NaN on failure
  int iterations = 0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
};

/// First-scenario matrices and first-run phases, for the --dump-matrices flag.
struct SweepArtifacts {
  std::optional<Scenario> near_scenario;
  std::optional<Scenario> far_scenario;
  std::optional<PhaseState> final_phases;
  std::optional<BcdTrace> first_trace;
};

/// Runs every (value, trial, mode) point; failed trials are recorded and the
/// sweep continues. Records come back sorted by (value, trial, mode).
std::vector<SweepRecord> run_sweep(const SystemConfig& cfg, const SweepSpec& sweep,
                                   SweepArtifacts* artifacts = nullptr,
                                   std::ostream* progress = nullptr);

/// Header plus one row per record: sweep_var,value,trial,placement,mode,L,N,
/// P_dBm,wsr_bits,iters,millis,seed. Floats carry 15 significant digits.
void emit_csv(const std::vector<SweepRecord>& records, std::ostream& out);
void emit_csv_file(const std::vector<SweepRecord>& records, const std::string& path);

/// The command-line entry point; streams are injectable for tests.
int cli_main(int argc, const char* const* argv);
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace simbeam
