#pragma once

#include <vector>

#include "simbeam/cascade.hpp"
#include "simbeam/channel.hpp"
#include "simbeam/common.hpp"

namespace simbeam {

/// Per-stream transmit amplitudes (square roots of the stream powers).
struct PowerAllocation {
  Eigen::ArrayXXd amplitude;  // users x streams, entries >= 0
  double budget = 0.0;        // watts

  static PowerAllocation uniform(int users, int streams, double budget);
  static PowerAllocation zero(int users, int streams, double budget);

  int users() const { return static_cast<int>(amplitude.rows()); }
  int streams() const { return static_cast<int>(amplitude.cols()); }
  double total_power() const { return (amplitude * amplitude).sum(); }
  RVec user_amplitudes(int user) const { return amplitude.row(user).matrix().transpose(); }

  void validate() const;
};

/// Effective stream channels seen through the cascade: one M x M_BS matrix
/// H_k G W^1 per user. block(k, i) is the M x M piece of user k's link that
/// user i's streams are fed through.
struct EffectiveChannels {
  std::vector<CMat> links;
  int streams = 0;  // columns per user block

  int users() const { return static_cast<int>(links.size()); }
  CMat block(int user, int source) const {
    return links[static_cast<size_t>(user)].middleCols(source * streams, streams);
  }
};

EffectiveChannels effective_channels(const ChannelSet& channels, const PhaseState& phases);

/// T_k = H_k G W^1_k, the direct stream channel of one user.
CMat effective_direct(const EffectiveChannels& eff, int user);

/// Q_k: interference from all other users' streams plus noise.
CMat interference_covariance(const EffectiveChannels& eff, int user,
                             const PowerAllocation& power, double noise_power);

/// Achievable rate of one user in bits/s/Hz.
double user_rate(const EffectiveChannels& eff, int user, const PowerAllocation& power,
                 double noise_power);

double weighted_sum_rate(const EffectiveChannels& eff, const PowerAllocation& power,
                         double noise_power, const RVec& priorities);

/// Error covariance of user k's estimate under the given combiner.
CMat mse_matrix(const EffectiveChannels& eff, int user, const CMat& combiner,
                const PowerAllocation& power, double noise_power);

/// Surrogate objective sum_i eta_i (log|Z_i| - tr(Z_i E_i) + M), reported in
/// bits so it is directly comparable with weighted_sum_rate.
double wmmse_objective(const EffectiveChannels& eff, const std::vector<CMat>& combiners,
                       const std::vector<CMat>& aux, const PowerAllocation& power,
                       double noise_power, const RVec& priorities);

/// log det of a Hermitian positive-definite matrix via Cholesky, natural log.
/// Throws numerical_error instead of propagating NaN when the factorization
/// fails.
double logdet_hermitian(const CMat& m);

}  // namespace simbeam
