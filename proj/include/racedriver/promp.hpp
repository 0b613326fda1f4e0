// Copyright 2026 The racedriver Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/*! \file
 *  \brief Probabilistic movement primitives over track distance.
 *
 *  A trajectory of n variables sampled at N_s equidistant stations is
 *  encoded by n * N_BF Gaussian radial-basis weights. Weight layout is
 *  variable-major: [v0 weights..., v1 weights..., ...].
 */

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "racedriver/core.hpp"

namespace racedriver {

/// Radial basis over [0, track_length] sampled at `n_stations` stations.
struct BasisConfig {
  std::size_t n_bf = 2;
  double width = 1.0;  ///< h, squared length units
  double track_length = 1.0;
  double ridge = 0.0;  ///< absolute ridge factor
  std::size_t n_stations = 2;

  double center_spacing() const { return track_length / static_cast<double>(n_bf - 1); }
  double center(std::size_t j) const { return static_cast<double>(j) * center_spacing(); }
  double station(std::size_t i) const {
    return track_length * static_cast<double>(i) / static_cast<double>(n_stations);
  }

  void validate() const {
    if (n_bf < 2) throw Error(ErrorCode::InvalidArgument, "at least two basis functions required");
    if (!(width > 0.0)) throw Error(ErrorCode::InvalidArgument, "basis width must be positive");
    if (!(track_length > 0.0)) throw Error(ErrorCode::InvalidArgument, "track length must be positive");
    if (!(ridge >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge factor must be non-negative");
    if (n_stations < 2) throw Error(ErrorCode::InvalidArgument, "at least two stations required");
  }

  bool operator==(const BasisConfig&) const = default;
};

inline double eval_basis_function(const BasisConfig& cfg, std::size_t j, double s) {
  const double d = s - cfg.center(j);
  return std::exp(-d * d / (2.0 * cfg.width));
}

/// b_j(s) = exp(-(s - c_j)^2 / (2h)) for all j.
inline Eigen::VectorXd eval_basis(const BasisConfig& cfg, double s) {
  Eigen::VectorXd b(static_cast<Eigen::Index>(cfg.n_bf));
  for (std::size_t j = 0; j < cfg.n_bf; ++j) b(static_cast<Eigen::Index>(j)) = eval_basis_function(cfg, j, s);
  return b;
}

/// Phi_s, N_s x N_BF.
inline Eigen::MatrixXd basis_matrix(const BasisConfig& cfg) {
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(cfg.n_stations), static_cast<Eigen::Index>(cfg.n_bf));
  for (std::size_t i = 0; i < cfg.n_stations; ++i) phi.row(static_cast<Eigen::Index>(i)) = eval_basis(cfg, cfg.station(i)).transpose();
  return phi;
}

/// Ridge factor scaled by trace(Phi^T Phi) / N_BF.
inline double scaled_ridge(const BasisConfig& cfg, double relative) {
  BasisConfig c = cfg;
  c.ridge = 0.0;
  const Eigen::MatrixXd phi = basis_matrix(c);
  return relative * (phi.transpose() * phi).trace() / static_cast<double>(cfg.n_bf);
}

inline constexpr double kDefaultCenterSpacing = 15.0;
inline constexpr double kDefaultRelativeRidge = 1e-6;

/// One center per `center_spacing` metres, h = spacing^2, scaled ridge.
inline BasisConfig basis_for_track(double track_length, std::size_t n_stations,
                                   double center_spacing = kDefaultCenterSpacing,
                                   double relative_ridge = kDefaultRelativeRidge) {
  BasisConfig cfg;
  cfg.track_length = track_length;
  cfg.n_stations = n_stations;
  cfg.n_bf = static_cast<std::size_t>(std::max(2.0, std::round(track_length / center_spacing) + 1.0));
  cfg.width = cfg.center_spacing() * cfg.center_spacing();
  cfg.ridge = scaled_ridge(cfg, relative_ridge);
  cfg.validate();
  return cfg;
}

/// Cached (Phi^T Phi + eps I)^-1 Phi^T for repeated projections.
class RidgeProjector {
 public:
  explicit RidgeProjector(const BasisConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    phi_ = basis_matrix(cfg);
    Eigen::MatrixXd gram = phi_.transpose() * phi_;
    if (cfg.ridge == 0.0) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
      if (qr.rank() < gram.cols()) {
        throw Error(ErrorCode::SingularSystem, "basis Gram matrix is rank-deficient and ridge is zero");
      }
    }
    gram.diagonal().array() += cfg.ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "ridge system factorization failed");
    proj_ = ldlt.solve(phi_.transpose());
  }

  const BasisConfig& config() const { return cfg_; }
  const Eigen::MatrixXd& phi() const { return phi_; }

  /// Weights for an N_s x n trajectory, stacked variable-major.
  Eigen::VectorXd fit(const Eigen::MatrixXd& trajectory) const {
    if (trajectory.rows() != phi_.rows()) {
      throw Error(ErrorCode::InvalidArgument, "trajectory must be sampled at the basis stations");
    }
    const Eigen::MatrixXd w = proj_ * trajectory;  // N_BF x n
    return Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
  }

 private:
  BasisConfig cfg_;
  Eigen::MatrixXd phi_;
  Eigen::MatrixXd proj_;
};

/// w = (Psi^T Psi + eps I)^-1 Psi^T tau.
inline Eigen::VectorXd fit_weights(const Eigen::MatrixXd& trajectory, const BasisConfig& cfg) {
  return RidgeProjector(cfg).fit(trajectory);
}

struct WeightDistribution {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};

/// Sample mean and biased (1/N) covariance of weight vectors.
inline WeightDistribution fit_distribution(const std::vector<Eigen::VectorXd>& weights) {
  if (weights.empty()) throw Error(ErrorCode::EmptyInput, "no weight vectors");
  const Eigen::Index dim = weights.front().size();
  WeightDistribution out;
  out.mu = Eigen::VectorXd::Zero(dim);
  for (const auto& w : weights) {
    if (w.size() != dim) throw Error(ErrorCode::InvalidArgument, "weight vectors differ in length");
    out.mu += w;
  }
  const auto n = static_cast<double>(weights.size());
  out.mu /= n;
  out.sigma = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& w : weights) {
    const Eigen::VectorXd d = w - out.mu;
    out.sigma.noalias() += d * d.transpose();
  }
  out.sigma /= n;
  return out;
}

/// Gaussian distribution over basis weights of one or more variables.
struct ProMP {
  BasisConfig basis;
  std::vector<std::string> variables;
  Eigen::VectorXd mu_w;
  Eigen::MatrixXd sigma_w;
  /// Localized covariance used for conditioning, when computed.
  std::optional<Eigen::MatrixXd> sigma_w_masked;

  std::size_t n_vars() const { return variables.size(); }
  Eigen::Index dim() const { return static_cast<Eigen::Index>(n_vars() * basis.n_bf); }

  std::size_t variable_index(const std::string& name) const {
    for (std::size_t i = 0; i < variables.size(); ++i) {
      if (variables[i] == name) return i;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown variable: " + name);
  }

  Eigen::Index block_start(std::size_t var) const { return static_cast<Eigen::Index>(var * basis.n_bf); }

  void validate() const {
    basis.validate();
    if (variables.empty()) throw Error(ErrorCode::InvalidArgument, "ProMP needs at least one variable");
    if (mu_w.size() != dim() || sigma_w.rows() != dim() || sigma_w.cols() != dim()) {
      throw Error(ErrorCode::InvalidArgument, "ProMP dimensions do not match the basis layout");
    }
  }

  /// Psi^T mu reshaped to N_s x n.
  Eigen::MatrixXd mean_trajectory() const {
    const Eigen::MatrixXd phi = basis_matrix(basis);
    return trajectory_of(phi, mu_w);
  }

  Eigen::MatrixXd trajectory_of(const Eigen::MatrixXd& phi, const Eigen::VectorXd& w) const {
    const auto nbf = static_cast<Eigen::Index>(basis.n_bf);
    Eigen::MatrixXd out(phi.rows(), static_cast<Eigen::Index>(n_vars()));
    for (std::size_t v = 0; v < n_vars(); ++v) {
      out.col(static_cast<Eigen::Index>(v)) = phi * w.segment(block_start(v), nbf);
    }
    return out;
  }

  /// Per-station variance of each variable: diag(Phi Sigma_vv Phi^T).
  Eigen::MatrixXd station_variance() const {
    const Eigen::MatrixXd phi = basis_matrix(basis);
    const auto nbf = static_cast<Eigen::Index>(basis.n_bf);
    Eigen::MatrixXd out(phi.rows(), static_cast<Eigen::Index>(n_vars()));
    for (std::size_t v = 0; v < n_vars(); ++v) {
      const Eigen::MatrixXd block = sigma_w.block(block_start(v), block_start(v), nbf, nbf);
      out.col(static_cast<Eigen::Index>(v)) = ((phi * block).array() * phi.array()).rowwise().sum();
    }
    return out;
  }

  /// Psi_{s'} restricted to the given variables: (n N_BF) x m.
  Eigen::MatrixXd psi_at(double s, const std::vector<std::size_t>& vars) const {
    const Eigen::VectorXd b = eval_basis(basis, s);
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(dim(), static_cast<Eigen::Index>(vars.size()));
    for (std::size_t k = 0; k < vars.size(); ++k) {
      psi.block(block_start(vars[k]), static_cast<Eigen::Index>(k), b.size(), 1) = b;
    }
    return psi;
  }
};

/// Builds a ProMP from demonstration trajectories (each N_s x n).
inline ProMP fit_promp(const std::vector<Eigen::MatrixXd>& trajectories, const BasisConfig& cfg,
                       std::vector<std::string> variables) {
  if (trajectories.empty()) throw Error(ErrorCode::EmptyInput, "no trajectories");
  const RidgeProjector proj(cfg);
  std::vector<Eigen::VectorXd> ws;
  ws.reserve(trajectories.size());
  for (const auto& t : trajectories) {
    if (t.cols() != static_cast<Eigen::Index>(variables.size())) {
      throw Error(ErrorCode::InvalidArgument, "trajectory column count differs from variable count");
    }
    ws.push_back(proj.fit(t));
  }
  auto dist = fit_distribution(ws);
  ProMP p;
  p.basis = cfg;
  p.variables = std::move(variables);
  p.mu_w = std::move(dist.mu);
  p.sigma_w = std::move(dist.sigma);
  return p;
}

/// Draws weight vectors from N(mu, sigma) using a pivoted LDL^T factor.
class GaussianSampler {
 public:
  GaussianSampler(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) : mu_(mu) {
    const double scale = std::max(1.0, sigma.diagonal().cwiseAbs().maxCoeff());
    for (double jitter : {0.0, 1e-12, 1e-10, 1e-8}) {
      Eigen::MatrixXd a = sigma;
      a.diagonal().array() += jitter;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
      if (ldlt.info() != Eigen::Success) continue;
      Eigen::VectorXd d = ldlt.vectorD();
      if (d.size() > 0 && d.minCoeff() < -1e-10 * scale) continue;
      d = d.cwiseMax(0.0).cwiseSqrt();
      factor_ = ldlt.transpositionsP().transpose() * (Eigen::MatrixXd(ldlt.matrixL()) * d.asDiagonal());
      return;
    }
    throw Error(ErrorCode::NotPSD, "covariance is not positive semi-definite");
  }

  Eigen::VectorXd draw(std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(mu_.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    return mu_ + factor_ * z;
  }

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd factor_;
};

/// Draws `count` trajectories (each N_s x n); deterministic given the seed.
inline std::vector<Eigen::MatrixXd> sample(const ProMP& promp, std::size_t count, std::uint64_t seed) {
  promp.validate();
  const GaussianSampler sampler(promp.mu_w, promp.sigma_w);
  const Eigen::MatrixXd phi = basis_matrix(promp.basis);
  std::mt19937_64 rng(seed);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(promp.trajectory_of(phi, sampler.draw(rng)));
  return out;
}

inline Eigen::MatrixXd sample(const ProMP& promp, std::uint64_t seed) { return sample(promp, 1, seed).front(); }

/// Target y* with confidence Sigma_y* for a subset of variables at s'.
struct Observation {
  double s_prime{};
  std::vector<std::size_t> variables;  ///< observed variable indices
  Eigen::VectorXd y_star;
  Eigen::MatrixXd sigma_y;

  void validate(const ProMP& p) const {
    const auto m = static_cast<Eigen::Index>(variables.size());
    if (m == 0 || y_star.size() != m || sigma_y.rows() != m || sigma_y.cols() != m) {
      throw Error(ErrorCode::InvalidArgument, "observation dimensions are inconsistent");
    }
    for (auto v : variables) {
      if (v >= p.n_vars()) throw Error(ErrorCode::InvalidArgument, "observation references an unknown variable");
    }
    if (!(s_prime >= 0.0 && s_prime < p.basis.track_length)) {
      throw Error(ErrorCode::InvalidArgument, "observation station outside [0, track_length)");
    }
    if ((sigma_y - sigma_y.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + sigma_y.cwiseAbs().maxCoeff())) {
      throw Error(ErrorCode::InvalidArgument, "observation covariance is not symmetric");
    }
  }
};

/// Clips negative eigenvalues to zero. Returns true when a repair happened.
inline bool repair_psd(Eigen::MatrixXd& sigma, double floor = 1e-10) {
  sigma = 0.5 * (sigma + sigma.transpose());
  if (sigma.size() == 0) return false;
  const double scale = std::max(1.0, sigma.diagonal().cwiseAbs().maxCoeff());
  Eigen::MatrixXd probe = sigma;
  probe.diagonal().array() += floor * scale;
  Eigen::LLT<Eigen::MatrixXd> llt(probe);
  if (llt.info() == Eigen::Success) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  const Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
  sigma = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
  sigma = 0.5 * (sigma + sigma.transpose());
  return true;
}

struct ConditionReport {
  bool psd_repaired = false;
};

/// Gaussian conditioning on an observation:
///   L = S Psi (Sigma_y + Psi^T S Psi)^-1,  mu' = mu + L (y - Psi^T mu),
///   Sigma' = S - L Psi^T S,
/// with S the masked covariance when `use_masked` is set.
inline ProMP condition(const ProMP& prior, const Observation& obs, bool use_masked = false,
                       ConditionReport* report = nullptr) {
  prior.validate();
  obs.validate(prior);
  if (use_masked && !prior.sigma_w_masked) {
    throw Error(ErrorCode::InvalidArgument, "masked conditioning requested but no masked covariance present");
  }
  const Eigen::MatrixXd& sig = use_masked ? *prior.sigma_w_masked : prior.sigma_w;
  const Eigen::MatrixXd psi = prior.psi_at(obs.s_prime, obs.variables);
  const Eigen::MatrixXd sig_psi = sig * psi;
  Eigen::MatrixXd innovation = obs.sigma_y + psi.transpose() * sig_psi;
  innovation = 0.5 * (innovation + innovation.transpose());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(innovation);
  if (!lu.isInvertible() || !std::isfinite(innovation.sum())) {
    throw Error(ErrorCode::SingularInnovation, "innovation covariance is singular");
  }
  // L^T = S^-1 (Psi^T Sigma), S symmetric
  const Eigen::MatrixXd gain = lu.solve(sig_psi.transpose()).transpose();
  ProMP post = prior;
  post.mu_w = prior.mu_w + gain * (obs.y_star - psi.transpose() * prior.mu_w);
  Eigen::MatrixXd sig_new = sig - gain * sig_psi.transpose();
  sig_new = 0.5 * (sig_new + sig_new.transpose());
  if (use_masked) {
    const bool repaired = repair_psd(sig_new);
    if (report) report->psd_repaired = repaired;
    post.sigma_w = sig_new;
    post.sigma_w_masked = sig_new;
  } else {
    post.sigma_w = std::move(sig_new);
    post.sigma_w_masked.reset();
  }
  return post;
}

enum class MaskShape { RaisedCosine, Binary };

/// Index distance between basis centers; on closed tracks the first and the
/// last center coincide, so the period is N_BF - 1.
inline std::size_t basis_index_distance(std::size_t i, std::size_t j, std::size_t n_bf, bool circular) {
  const std::size_t d = i > j ? i - j : j - i;
  if (!circular || n_bf < 3) return d;
  const std::size_t period = n_bf - 1;
  const std::size_t r = d % period;
  return std::min(r, period - r);
}

/// F_k: 1 on the diagonal, fading to 0 at index distance k.
inline Eigen::MatrixXd factor_matrix(std::size_t n_bf, std::size_t bandwidth, MaskShape shape = MaskShape::RaisedCosine,
                                     bool circular = true) {
  if (bandwidth < 1) throw Error(ErrorCode::InvalidArgument, "mask bandwidth must be at least 1");
  const auto n = static_cast<Eigen::Index>(n_bf);
  Eigen::MatrixXd f(n, n);
  const auto k = static_cast<double>(bandwidth);
  for (std::size_t i = 0; i < n_bf; ++i) {
    for (std::size_t j = 0; j < n_bf; ++j) {
      const auto d = static_cast<double>(basis_index_distance(i, j, n_bf, circular));
      double v = 0.0;
      if (d < k) v = shape == MaskShape::Binary ? 1.0 : 0.5 * (1.0 + std::cos(kPi * d / k));
      f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return f;
}

/// Element-wise product of F_k with every N_BF x N_BF block of sigma.
inline Eigen::MatrixXd mask_covariance(const Eigen::MatrixXd& sigma, std::size_t n_vars, std::size_t n_bf,
                                       std::size_t bandwidth, MaskShape shape = MaskShape::RaisedCosine,
                                       bool circular = true) {
  const auto nbf = static_cast<Eigen::Index>(n_bf);
  if (sigma.rows() != static_cast<Eigen::Index>(n_vars) * nbf || sigma.cols() != sigma.rows()) {
    throw Error(ErrorCode::InvalidArgument, "covariance does not match the block layout");
  }
  const Eigen::MatrixXd f = factor_matrix(n_bf, bandwidth, shape, circular);
  Eigen::MatrixXd out(sigma.rows(), sigma.cols());
  for (std::size_t a = 0; a < n_vars; ++a) {
    for (std::size_t b = 0; b < n_vars; ++b) {
      const auto ra = static_cast<Eigen::Index>(a) * nbf;
      const auto rb = static_cast<Eigen::Index>(b) * nbf;
      out.block(ra, rb, nbf, nbf) = sigma.block(ra, rb, nbf, nbf).cwiseProduct(f);
    }
  }
  return 0.5 * (out + out.transpose());
}

/// Copy of `p` carrying the masked covariance for later conditioning.
inline ProMP with_masked_covariance(ProMP p, std::size_t bandwidth, MaskShape shape = MaskShape::RaisedCosine,
                                    bool circular = true) {
  p.sigma_w_masked = mask_covariance(p.sigma_w, p.n_vars(), p.basis.n_bf, bandwidth, shape, circular);
  return p;
}

}  // namespace racedriver
