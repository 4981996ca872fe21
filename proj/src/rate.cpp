#include "simbeam/rate.hpp"

#include <cmath>
#include <string>

namespace simbeam {

namespace {

constexpr double kLn2 = 0.6931471805599453;

void check_user(const EffectiveChannels& eff, int user) {
  if (user < 0 || user >= eff.users())
    throw std::out_of_range("user index " + std::to_string(user) + " outside [0, " +
                            std::to_string(eff.users()) + ")");
}

CMat hermitianized(const CMat& m) { return 0.5 * (m + m.adjoint()); }

}  // namespace

PowerAllocation PowerAllocation::uniform(int users, int streams, double budget) {
  if (users < 1 || streams < 1) throw config_error("PowerAllocation: counts must be >= 1");
  if (budget < 0.0) throw config_error("PowerAllocation: budget must be >= 0");
  PowerAllocation p;
  p.amplitude = Eigen::ArrayXXd::Constant(users, streams,
                                          std::sqrt(budget / (users * streams)));
  p.budget = budget;
  return p;
}

PowerAllocation PowerAllocation::zero(int users, int streams, double budget) {
  PowerAllocation p;
  p.amplitude = Eigen::ArrayXXd::Zero(users, streams);
  p.budget = budget;
  return p;
}

void PowerAllocation::validate() const {
  if ((amplitude < 0.0).any()) throw config_error("PowerAllocation: negative amplitude");
  if (total_power() > budget * (1.0 + 1e-9))
    throw config_error("PowerAllocation: total power exceeds the budget");
}

EffectiveChannels effective_channels(const ChannelSet& channels, const PhaseState& phases) {
  if (channels.users.empty()) throw config_error("effective_channels: no user channels");
  EffectiveChannels eff;
  const CMat cascaded_feed = apply_cascade(phases, channels.inter_layer, channels.feed);
  eff.links.reserve(channels.users.size());
  for (const CMat& h : channels.users) {
    if (h.cols() != cascaded_feed.rows())
      throw config_error("effective_channels: channel/feed dimension mismatch");
    eff.links.emplace_back(h * cascaded_feed);
  }
  eff.streams = static_cast<int>(eff.links.front().rows());
  const Eigen::Index expected = static_cast<Eigen::Index>(eff.streams) * eff.users();
  if (channels.feed.cols() != expected)
    throw config_error("effective_channels: feed columns must equal users x streams");
  return eff;
}

CMat effective_direct(const EffectiveChannels& eff, int user) {
  check_user(eff, user);
  return eff.block(user, user);
}

CMat interference_covariance(const EffectiveChannels& eff, int user,
                             const PowerAllocation& power, double noise_power) {
  check_user(eff, user);
  if (noise_power <= 0.0) throw config_error("interference_covariance: noise power must be > 0");
  const int m = eff.streams;
  CMat q = noise_power * CMat::Identity(m, m);
  for (int i = 0; i < eff.users(); ++i) {
    if (i == user) continue;
    const CMat scaled = eff.block(user, i) * power.user_amplitudes(i).asDiagonal();
    q += scaled * scaled.adjoint();
  }
  return hermitianized(q);
}

double logdet_hermitian(const CMat& m) {
  Eigen::LLT<CMat> llt(hermitianized(m));
  if (llt.info() != Eigen::Success)
    throw numerical_error("logdet: matrix is not positive definite");
  double logdet = 0.0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += std::log(l(i, i).real());
  return 2.0 * logdet;
}

double user_rate(const EffectiveChannels& eff, int user, const PowerAllocation& power,
                 double noise_power) {
  const CMat q = interference_covariance(eff, user, power, noise_power);
  const CMat direct = effective_direct(eff, user) * power.user_amplitudes(user).asDiagonal();
  const CMat total = q + direct * direct.adjoint();
  return (logdet_hermitian(total) - logdet_hermitian(q)) / kLn2;
}

double weighted_sum_rate(const EffectiveChannels& eff, const PowerAllocation& power,
                         double noise_power, const RVec& priorities) {
  if (priorities.size() != eff.users())
    throw config_error("weighted_sum_rate: priority count mismatch");
  double wsr = 0.0;
  for (int k = 0; k < eff.users(); ++k) {
    if (priorities(k) == 0.0) continue;
    wsr += priorities(k) * user_rate(eff, k, power, noise_power);
  }
  return wsr;
}

CMat mse_matrix(const EffectiveChannels& eff, int user, const CMat& combiner,
                const PowerAllocation& power, double noise_power) {
  check_user(eff, user);
  const int m = eff.streams;
  if (combiner.rows() != m || combiner.cols() != m)
    throw config_error("mse_matrix: combiner must be streams x streams");
  const CMat direct =
      combiner.adjoint() * eff.block(user, user) * power.user_amplitudes(user).asDiagonal() -
      CMat::Identity(m, m);
  CMat e = direct * direct.adjoint() + noise_power * combiner.adjoint() * combiner;
  for (int i = 0; i < eff.users(); ++i) {
    if (i == user) continue;
    const CMat cross =
        combiner.adjoint() * eff.block(user, i) * power.user_amplitudes(i).asDiagonal();
    e += cross * cross.adjoint();
  }
  return hermitianized(e);
}

double wmmse_objective(const EffectiveChannels& eff, const std::vector<CMat>& combiners,
                       const std::vector<CMat>& aux, const PowerAllocation& power,
                       double noise_power, const RVec& priorities) {
  const int users = eff.users();
  if (static_cast<int>(combiners.size()) != users || static_cast<int>(aux.size()) != users)
    throw config_error("wmmse_objective: combiner/aux count mismatch");
  if (priorities.size() != users) throw config_error("wmmse_objective: priority count mismatch");
  double value = 0.0;
  for (int k = 0; k < users; ++k) {
    if (priorities(k) == 0.0) continue;
    const CMat& z = aux[static_cast<size_t>(k)];
    const CMat e = mse_matrix(eff, k, combiners[static_cast<size_t>(k)], power, noise_power);
    const double surplus = (z * e).trace().real();
    value += priorities(k) * (logdet_hermitian(z) - surplus + eff.streams);
  }
  return value / kLn2;
}

}  // namespace simbeam
