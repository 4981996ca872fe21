#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "simbeam/channel.hpp"
#include "simbeam/common.hpp"
#include "simbeam/optimizer.hpp"

namespace simbeam {

enum class Placement { random, inline_users };
enum class ChannelMode { near, far };

const char* to_string(Placement p);
const char* to_string(ChannelMode m);

/// Every physical and algorithmic knob of a run. Defaults are the reference
/// setup: 10 GHz carrier, 40 atoms over 4 layers, 4 users x 2 streams.
struct SystemConfig {
  double carrier_hz = 10e9;
  double bandwidth_hz = 20e6;
  int users = 4;    // K
  int streams = 2;  // M per user; the BS feed has users*streams antennas
  int atoms = 40;   // N per layer
  int layers = 4;   // L
  double thickness_wavelengths = 5.0;
  double radius_min = 2.0;
  double radius_max = 4.0;
  double p_budget_dbm = 20.0;
  double noise_dbm = 0.0;  // 0 means "thermal floor over the bandwidth"
  bool noise_overridden = false;
  double pathloss_exponent = 2.5;
  double pathloss_ref_distance = 1.0;
  FarFieldGain far_field_gain = FarFieldGain::freespace_match;
  BcdConfig bcd;
  std::uint64_t seed = 1;
  int trials = 1;
  std::vector<double> sweep_values;  // overrides the per-variable defaults

  int bs_antennas() const { return users * streams; }
  Carrier carrier() const { return Carrier::from_frequency(carrier_hz); }
  double noise_power_watts() const;
  double power_budget_watts() const { return dbm_to_watts(p_budget_dbm); }

  void validate() const;
};

/// Parses `key = value` lines with '#' comments. Unknown keys are an error
/// that names the key. Later assignments win.
SystemConfig parse_config(std::istream& in, SystemConfig base = {});
SystemConfig load_config_file(const std::string& path, SystemConfig base = {});

/// The key/default/description table behind --help and the README.
std::string config_key_reference();

}  // namespace simbeam
