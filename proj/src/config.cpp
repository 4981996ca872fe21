#include "simbeam/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace simbeam {

const char* to_string(Placement p) {
  return p == Placement::random ? "random" : "inline";
}

const char* to_string(ChannelMode m) { return m == ChannelMode::near ? "near" : "far"; }

double SystemConfig::noise_power_watts() const {
  const double dbm =
      noise_overridden ? noise_dbm : -174.0 + 10.0 * std::log10(bandwidth_hz);
  return dbm_to_watts(dbm);
}

void SystemConfig::validate() const {
  if (carrier_hz <= 0.0) throw config_error("carrier_hz must be positive");
  if (bandwidth_hz <= 0.0) throw config_error("bandwidth_hz must be positive");
  if (users < 1) throw config_error("users must be >= 1");
  if (streams < 1) throw config_error("streams must be >= 1");
  if (atoms < 1) throw config_error("atoms must be >= 1");
  if (layers < 1) throw config_error("layers must be >= 1");
  if (thickness_wavelengths <= 0.0) throw config_error("thickness_wavelengths must be positive");
  if (radius_min <= 0.0) throw config_error("radius_min must be positive");
  if (radius_max < radius_min) throw config_error("radius_max must be >= radius_min");
  if (pathloss_exponent < 2.0) throw config_error("pathloss_exponent must be >= 2");
  if (pathloss_ref_distance <= 0.0) throw config_error("pathloss_ref_distance must be positive");
  if (trials < 1) throw config_error("trials must be >= 1");
  if (noise_power_watts() <= 0.0) throw config_error("noise power must be positive");
  bcd.validate();
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_number(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw config_error("config key '" + key + "': cannot parse number '" + value + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  const double v = parse_number(key, value);
  if (v != std::floor(v)) throw config_error("config key '" + key + "' must be an integer");
  return static_cast<int>(v);
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw config_error("config key '" + key + "': empty list entry");
    out.push_back(parse_number(key, item));
  }
  if (out.empty()) throw config_error("config key '" + key + "': empty list");
  return out;
}

void apply_key(SystemConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "carrier_hz") cfg.carrier_hz = parse_number(key, value);
  else if (key == "bandwidth_hz") cfg.bandwidth_hz = parse_number(key, value);
  else if (key == "users") cfg.users = parse_int(key, value);
  else if (key == "streams") cfg.streams = parse_int(key, value);
  else if (key == "atoms") cfg.atoms = parse_int(key, value);
  else if (key == "layers") cfg.layers = parse_int(key, value);
  else if (key == "thickness_wavelengths") cfg.thickness_wavelengths = parse_number(key, value);
  else if (key == "radius_min") cfg.radius_min = parse_number(key, value);
  else if (key == "radius_max") cfg.radius_max = parse_number(key, value);
  else if (key == "p_budget_dbm") cfg.p_budget_dbm = parse_number(key, value);
  else if (key == "noise_dbm") {
    cfg.noise_dbm = parse_number(key, value);
    cfg.noise_overridden = true;
  } else if (key == "pathloss_exponent") cfg.pathloss_exponent = parse_number(key, value);
  else if (key == "pathloss_ref_distance") cfg.pathloss_ref_distance = parse_number(key, value);
  else if (key == "far_field_pathloss") {
    if (value == "freespace_match") cfg.far_field_gain = FarFieldGain::freespace_match;
    else if (value == "exponent_model") cfg.far_field_gain = FarFieldGain::exponent_model;
    else throw config_error("config key 'far_field_pathloss': unknown value '" + value + "'");
  } else if (key == "epsilon") cfg.bcd.epsilon = parse_number(key, value);
  else if (key == "max_outer") cfg.bcd.max_outer = parse_int(key, value);
  else if (key == "armijo_step_init") cfg.bcd.step_init = parse_number(key, value);
  else if (key == "armijo_ratio") cfg.bcd.step_ratio = parse_number(key, value);
  else if (key == "armijo_max_backtracks") cfg.bcd.max_backtracks = parse_int(key, value);
  else if (key == "phase_steps_per_layer") cfg.bcd.phase_steps_per_layer = parse_int(key, value);
  else if (key == "phase_sweeps") cfg.bcd.phase_sweeps = parse_int(key, value);
  else if (key == "phase_sweep_tolerance") cfg.bcd.phase_sweep_tolerance = parse_number(key, value);
  else if (key == "power_tolerance") cfg.bcd.power_tolerance = parse_number(key, value);
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_number(key, value));
  else if (key == "trials") cfg.trials = parse_int(key, value);
  else if (key == "sweep_values") cfg.sweep_values = parse_list(key, value);
  else throw config_error("unknown config key '" + key + "'");
}

}  // namespace

SystemConfig parse_config(std::istream& in, SystemConfig base) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw config_error("config line " + std::to_string(line_no) + ": empty key");
    apply_key(base, key, value);
  }
  return base;
}

SystemConfig load_config_file(const std::string& path, SystemConfig base) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  return parse_config(in, std::move(base));
}

std::string config_key_reference() {
  return
      "  carrier_hz              carrier frequency in Hz            (default 1e10)\n"
      "  bandwidth_hz            system bandwidth in Hz             (default 2e7)\n"
      "  users                   number of users K                  (default 4)\n"
      "  streams                 antennas/streams per user M        (default 2)\n"
      "  atoms                   meta-atoms per layer N             (default 40)\n"
      "  layers                  metasurface layers L               (default 4)\n"
      "  thickness_wavelengths   stack depth in wavelengths         (default 5)\n"
      "  radius_min              closest user distance in m         (default 2)\n"
      "  radius_max              farthest user distance in m        (default 4)\n"
      "  p_budget_dbm            transmit power budget in dBm       (default 20)\n"
      "  noise_dbm               noise power override in dBm        (default: -174 + 10 log10(bandwidth))\n"
      "  pathloss_exponent       far-field path-loss exponent       (default 2.5)\n"
      "  pathloss_ref_distance   path-loss reference distance in m  (default 1)\n"
      "  far_field_pathloss      freespace_match | exponent_model   (default freespace_match)\n"
      "  epsilon                 BCD convergence threshold          (default 1e-4)\n"
      "  max_outer               BCD iteration cap                  (default 200)\n"
      "  armijo_step_init        initial line-search step           (default 1)\n"
      "  armijo_ratio            backtracking ratio in (0,1)        (default 0.5)\n"
      "  armijo_max_backtracks   line-search cap                    (default 30)\n"
      "  phase_steps_per_layer   gradient steps per layer per pass  (default 1)\n"
      "  phase_sweeps            layer-sweep cap per BCD iteration  (default 300)\n"
      "  phase_sweep_tolerance   relative stop for the sweep loop   (default 1e-8)\n"
      "  power_tolerance         power bisection tolerance          (default 1e-9)\n"
      "  seed                    base RNG seed                      (default 1)\n"
      "  trials                  Monte Carlo trials per point       (default 1)\n"
      "  sweep_values            comma list overriding the sweep grid\n";
}

}  // namespace simbeam
