#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "vafm/dataset.hpp"
#include "vafm/errors.hpp"
#include "vafm/numeric_utils.hpp"
#include "vafm/parallel.hpp"
#include "vafm/random.hpp"

namespace vafm {

// Cause-specific probit means and loadings plus the shared column
// precisions. The probit noise has fixed unit variance and is not stored.
struct FactorParams {
  int C = 0;
  int p = 0;
  int K = 0;
  double a = 0.5;
  Eigen::MatrixXd mu;                  // C×p
  std::vector<Eigen::MatrixXd> lambda; // C entries, each p×K
  Eigen::VectorXd tau;                 // p
  Eigen::VectorXd phi;                 // p
};

inline void validate(const FactorParams &params) {
  if (params.C <= 0 || params.p <= 0 || params.K < 0)
    throw config_error("params: C, p must be positive and K >= 0");
  if (!(params.a > 0.0)) throw config_error("params: a must be positive");
  if (params.mu.rows() != params.C || params.mu.cols() != params.p)
    throw config_error("params: mu must be C×p");
  if (static_cast<int>(params.lambda.size()) != params.C)
    throw config_error("params: lambda must have C matrices");
  for (const auto &l : params.lambda)
    if (l.rows() != params.p || l.cols() != params.K)
      throw config_error("params: each lambda matrix must be p×K");
  if (params.tau.size() != params.p || params.phi.size() != params.p)
    throw config_error("params: tau and phi must have p entries");
  if (params.tau.size() > 0 &&
      (params.tau.minCoeff() <= 0.0 || params.phi.minCoeff() <= 0.0))
    throw config_error("params: precisions must be positive");
}

inline FactorParams init_params(int C, int p, int K, double a) {
  // shape arguments vetted before any allocation sized by them
  if (C <= 0 || p <= 0 || K < 0)
    throw config_error("params: C, p must be positive and K >= 0");
  if (!(a > 0.0)) throw config_error("params: a must be positive");
  FactorParams params;
  params.C = C;
  params.p = p;
  params.K = K;
  params.a = a;
  params.mu = Eigen::MatrixXd::Zero(C, p);
  params.lambda.assign(C, Eigen::MatrixXd::Zero(p, K));
  params.tau = Eigen::VectorXd::Ones(p);
  params.phi = Eigen::VectorXd::Ones(p);
  validate(params);
  return params;
}

// Index structure over the observed cells of one dataset. Latent z values
// are stored flat in row-major cell order; the group arrays regroup the same
// cells by (cause, column) for the mu and lambda updates and exist only when
// the dataset is labeled.
struct ObservedLayout {
  int n = 0;
  int p = 0;
  int C = 0;
  std::vector<int> row_start;  // n+1 prefix into row_cols
  std::vector<int> row_cols;   // column of each flat cell
  std::vector<int> group_start;  // C*p+1 prefix into the two arrays below
  std::vector<int> group_cells;  // flat cell index
  std::vector<int> group_rows;   // row of that cell

  int cells() const { return static_cast<int>(row_cols.size()); }
  int group(int c, int j) const { return (c - 1) * p + j; }  // c is 1-based
  int count(int c, int j) const {
    const int g = group(c, j);
    return group_start[g + 1] - group_start[g];
  }
};

inline ObservedLayout build_layout(const SymptomDataset &d) {
  ObservedLayout layout;
  layout.n = d.n;
  layout.p = d.p;
  layout.C = d.C;
  layout.row_start.assign(d.n + 1, 0);
  for (int i = 0; i < d.n; ++i) {
    layout.row_start[i + 1] = layout.row_start[i];
    for (int j = 0; j < d.p; ++j)
      if (d.observed(i, j)) {
        layout.row_cols.push_back(j);
        ++layout.row_start[i + 1];
      }
  }
  if (d.labeled()) {
    const int groups = d.C * d.p;
    std::vector<int> counts(groups, 0);
    for (int i = 0; i < d.n; ++i)
      for (int k = layout.row_start[i]; k < layout.row_start[i + 1]; ++k)
        ++counts[layout.group(d.y[i], layout.row_cols[k])];
    layout.group_start.assign(groups + 1, 0);
    for (int g = 0; g < groups; ++g)
      layout.group_start[g + 1] = layout.group_start[g] + counts[g];
    layout.group_cells.assign(layout.cells(), 0);
    layout.group_rows.assign(layout.cells(), 0);
    std::vector<int> cursor(layout.group_start.begin(),
                            layout.group_start.end() - 1);
    for (int i = 0; i < d.n; ++i)
      for (int k = layout.row_start[i]; k < layout.row_start[i + 1]; ++k) {
        const int g = layout.group(d.y[i], layout.row_cols[k]);
        layout.group_cells[cursor[g]] = k;
        layout.group_rows[cursor[g]] = i;
        ++cursor[g];
      }
  }
  return layout;
}

// Latent probit scores for observed cells (flat, in layout cell order) and
// per-individual factors. Missing cells have no z entry at all.
struct LatentState {
  std::vector<double> z;
  Eigen::MatrixXd eta;  // n×K
};

// Stream addresses for one Gibbs sweep: each (tag, unit) pair owns an
// independent substream, so a parallel step draws the same numbers no matter
// which thread runs which unit.
class SweepRng {
public:
  SweepRng(std::uint64_t seed, std::uint32_t iteration)
      : seed_(seed), iteration_(iteration) {}

  RandomStream stream(std::uint8_t tag, std::uint64_t unit) const {
    return RandomStream(seed_, make_stream_id(tag, iteration_, unit));
  }

private:
  std::uint64_t seed_;
  std::uint32_t iteration_;
};

namespace detail {

constexpr std::uint8_t kTagStepMu = 1;
constexpr std::uint8_t kTagStepLambda = 2;
constexpr std::uint8_t kTagStepEta = 3;
constexpr std::uint8_t kTagStepTau = 4;
constexpr std::uint8_t kTagStepPhi = 5;
constexpr std::uint8_t kTagStepZ = 6;
constexpr std::uint8_t kTagEtaR = 7;
constexpr std::uint8_t kTagPredict = 8;
constexpr std::uint8_t kTagDirichlet = 9;
constexpr std::uint8_t kTagBaseline = 10;
constexpr std::uint8_t kTagInit = 13;

inline void for_each_index(ThreadPool *pool, std::size_t n,
                           const std::function<void(std::size_t)> &body) {
  if (pool)
    pool->parallel_for(n, body);
  else
    for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace detail

// mu = 0, Lambda = 0, tau = phi = 1, eta from its prior, z from the Step 6
// conditional at those initial means.
inline LatentState init_latent(const FactorParams &params,
                               const SymptomDataset &d,
                               const ObservedLayout &layout,
                               std::uint64_t seed) {
  LatentState latent;
  latent.eta.resize(d.n, params.K);
  latent.z.assign(layout.cells(), 0.0);
  for (int i = 0; i < d.n; ++i) {
    RandomStream rng(seed, make_stream_id(detail::kTagInit, 0, i));
    for (int k = 0; k < params.K; ++k) latent.eta(i, k) = rng.normal();
    for (int k = layout.row_start[i]; k < layout.row_start[i + 1]; ++k) {
      const int j = layout.row_cols[k];
      const auto side = d.x(i, j) == 1 ? TruncationSide::positive
                                       : TruncationSide::negative;
      latent.z[k] = sample_truncated_normal(0.0, side, rng);
    }
  }
  return latent;
}

struct ScalarNormal {
  double mean = 0.0;
  double variance = 1.0;
};

struct MvnConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct GammaConditional {
  double shape = 1.0;
  double rate = 1.0;
};

// Step 1 conditional for one mu_cj: N(v·r, v) with v = 1/(n_cj + tau_j) and
// r the sum of z_ij - lambda_cj'eta_i over observed training cells of cause
// c in column j. With no such cells this is the N(0, 1/tau_j) prior.
inline ScalarNormal mu_conditional(const FactorParams &params,
                                   const LatentState &latent,
                                   const ObservedLayout &layout, int c, int j) {
  const int g = layout.group(c, j);
  double resid = 0.0;
  for (int t = layout.group_start[g]; t < layout.group_start[g + 1]; ++t) {
    const int k = layout.group_cells[t];
    const int i = layout.group_rows[t];
    resid += latent.z[k] - params.lambda[c - 1].row(j).dot(latent.eta.row(i));
  }
  ScalarNormal out;
  out.variance = 1.0 / (layout.count(c, j) + params.tau[j]);
  out.mean = out.variance * resid;
  return out;
}

inline void step_mu(FactorParams &params, const LatentState &latent,
                    const ObservedLayout &layout, const SweepRng &sweep,
                    ThreadPool *pool = nullptr) {
  detail::for_each_index(pool, params.p, [&](std::size_t j) {
    RandomStream rng = sweep.stream(detail::kTagStepMu, j);
    for (int c = 1; c <= params.C; ++c) {
      const ScalarNormal cond =
          mu_conditional(params, latent, layout, c, static_cast<int>(j));
      params.mu(c - 1, j) = cond.mean + std::sqrt(cond.variance) * rng.normal();
    }
  });
}

// Step 2 conditional for the row lambda_cj: N(S·b, S) with
// S = (sum eta_i eta_i' + phi_j I)^{-1} and b = sum eta_i (z_ij - mu_cj).
inline MvnConditional lambda_conditional(const FactorParams &params,
                                         const LatentState &latent,
                                         const ObservedLayout &layout, int c,
                                         int j) {
  const int K = params.K;
  Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(K, K);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
  const int g = layout.group(c, j);
  for (int t = layout.group_start[g]; t < layout.group_start[g + 1]; ++t) {
    const int k = layout.group_cells[t];
    const int i = layout.group_rows[t];
    const Eigen::VectorXd eta_i = latent.eta.row(i).transpose();
    prec.selfadjointView<Eigen::Lower>().rankUpdate(eta_i);
    b += eta_i * (latent.z[k] - params.mu(c - 1, j));
  }
  prec.diagonal().array() += params.phi[j];
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success)
    throw numeric_error("step_lambda: conditional precision not positive definite");
  MvnConditional out;
  out.mean = llt.solve(b);
  out.cov = llt.solve(Eigen::MatrixXd::Identity(K, K));
  return out;
}

inline void step_lambda(FactorParams &params, const LatentState &latent,
                        const ObservedLayout &layout, const SweepRng &sweep,
                        ThreadPool *pool = nullptr) {
  if (params.K == 0) return;
  const int units = params.C * params.p;
  detail::for_each_index(pool, units, [&](std::size_t u) {
    const int c = static_cast<int>(u) / params.p + 1;
    const int j = static_cast<int>(u) % params.p;
    const MvnConditional cond = lambda_conditional(params, latent, layout, c, j);
    RandomStream rng = sweep.stream(detail::kTagStepLambda, u);
    params.lambda[c - 1].row(j) =
        sample_mvn_cov(cond.mean, cond.cov, rng).transpose();
  });
}

// Step 3 conditional for eta_i using only that row's observed columns:
// S = (Lambda'Lambda restricted + I)^{-1}, mean = S Lambda'(z - mu). An
// all-missing row falls back to the N(0, I) prior.
inline MvnConditional eta_conditional(const FactorParams &params,
                                      const LatentState &latent,
                                      const ObservedLayout &layout,
                                      const SymptomDataset &d, int i) {
  const int K = params.K;
  const int c = d.y[i];
  Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(K, K);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
  for (int k = layout.row_start[i]; k < layout.row_start[i + 1]; ++k) {
    const int j = layout.row_cols[k];
    const Eigen::VectorXd lam = params.lambda[c - 1].row(j).transpose();
    prec.selfadjointView<Eigen::Lower>().rankUpdate(lam);
    b += lam * (latent.z[k] - params.mu(c - 1, j));
  }
  prec.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success)
    throw numeric_error("step_eta: conditional precision not positive definite");
  MvnConditional out;
  out.mean = llt.solve(b);
  out.cov = llt.solve(Eigen::MatrixXd::Identity(K, K));
  return out;
}

inline void step_eta(const FactorParams &params, LatentState &latent,
                     const ObservedLayout &layout, const SymptomDataset &d,
                     const SweepRng &sweep, ThreadPool *pool = nullptr) {
  if (params.K == 0) return;
  detail::for_each_index(pool, d.n, [&](std::size_t i) {
    const MvnConditional cond =
        eta_conditional(params, latent, layout, d, static_cast<int>(i));
    RandomStream rng = sweep.stream(detail::kTagStepEta, i);
    latent.eta.row(i) = sample_mvn_cov(cond.mean, cond.cov, rng).transpose();
  });
}

// Step 4: tau_j ~ Ga((C + 2a)/2, (sum_c mu_cj^2 + 2a)/2).
inline GammaConditional tau_conditional(const FactorParams &params, int j) {
  GammaConditional out;
  out.shape = 0.5 * (params.C + 2.0 * params.a);
  out.rate = 0.5 * (params.mu.col(j).squaredNorm() + 2.0 * params.a);
  return out;
}

inline void step_tau(FactorParams &params, const SweepRng &sweep,
                     ThreadPool *pool = nullptr) {
  detail::for_each_index(pool, params.p, [&](std::size_t j) {
    const GammaConditional cond = tau_conditional(params, static_cast<int>(j));
    RandomStream rng = sweep.stream(detail::kTagStepTau, j);
    params.tau[j] = sample_gamma(cond.shape, cond.rate, rng);
  });
}

// Step 5: phi_j ~ Ga((CK + 2a)/2, (sum_{c,k} lambda_cjk^2 + 2a)/2).
inline GammaConditional phi_conditional(const FactorParams &params, int j) {
  double ss = 0.0;
  for (int c = 0; c < params.C; ++c) ss += params.lambda[c].row(j).squaredNorm();
  GammaConditional out;
  out.shape = 0.5 * (params.C * params.K + 2.0 * params.a);
  out.rate = 0.5 * (ss + 2.0 * params.a);
  return out;
}

inline void step_phi(FactorParams &params, const SweepRng &sweep,
                     ThreadPool *pool = nullptr) {
  detail::for_each_index(pool, params.p, [&](std::size_t j) {
    const GammaConditional cond = phi_conditional(params, static_cast<int>(j));
    RandomStream rng = sweep.stream(detail::kTagStepPhi, j);
    params.phi[j] = sample_gamma(cond.shape, cond.rate, rng);
  });
}

inline double z_conditional_mean(const FactorParams &params,
                                 const LatentState &latent, int cause, int i,
                                 int j) {
  return params.mu(cause - 1, j) +
         params.lambda[cause - 1].row(j).dot(latent.eta.row(i));
}

// Step 6: every observed z_ij redrawn from N(mu + lambda'eta, 1) truncated
// to the half-line matching x_ij. Missing cells have no z and are skipped by
// construction.
inline void step_z(const FactorParams &params, LatentState &latent,
                   const ObservedLayout &layout, const SymptomDataset &d,
                   const SweepRng &sweep, ThreadPool *pool = nullptr) {
  detail::for_each_index(pool, d.n, [&](std::size_t i) {
    RandomStream rng = sweep.stream(detail::kTagStepZ, i);
    const int c = d.y[i];
    for (int k = layout.row_start[i]; k < layout.row_start[i + 1]; ++k) {
      const int j = layout.row_cols[k];
      const double mean =
          z_conditional_mean(params, latent, c, static_cast<int>(i), j);
      const auto side = d.x(i, j) == 1 ? TruncationSide::positive
                                       : TruncationSide::negative;
      latent.z[k] = sample_truncated_normal(mean, side, rng);
    }
  });
}

// R draws from the N(0, I_K) factor prior, one row per draw.
inline Eigen::MatrixXd draw_eta_samples(int R, int K, RandomStream &rng) {
  Eigen::MatrixXd eta(R, K);
  for (int r = 0; r < R; ++r)
    for (int k = 0; k < K; ++k) eta(r, k) = rng.normal();
  return eta;
}

// Monte Carlo marginal likelihood of one individual's observed symptoms
// under a cause: log (1/R) sum_r prod_{j observed} Phi(+-(mu + lambda'eta_r)),
// entirely in log domain. With Lambda = 0 every r-term is identical, so the
// result is independent of R and of the eta draws, bit for bit.
inline double log_cause_likelihood(const FactorParams &params,
                                   const SymptomDataset &d, int row, int cause,
                                   const Eigen::MatrixXd &eta_r) {
  const int R = static_cast<int>(eta_r.rows());
  if (R < 1) throw config_error("log_cause_likelihood: R must be at least 1");
  std::vector<double> per_r(R, 0.0);
  const Eigen::MatrixXd &lam = params.lambda[cause - 1];
  for (int j = 0; j < d.p; ++j) {
    if (!d.observed(row, j)) continue;
    const double sign = d.x(row, j) == 1 ? 1.0 : -1.0;
    const double mu = params.mu(cause - 1, j);
    for (int r = 0; r < R; ++r)
      per_r[r] += log_std_normal_cdf(sign * (mu + lam.row(j).dot(eta_r.row(r))));
  }
  return log_mean_exp(per_r);
}

inline double log_cause_likelihood(const FactorParams &params,
                                   const SymptomDataset &d, int row, int cause,
                                   int R, RandomStream &rng) {
  return log_cause_likelihood(params, d, row, cause,
                              draw_eta_samples(R, params.K, rng));
}

// Exact single-coordinate marginal of the generative model:
// P(x_j = 1 | y = c) = Phi(mu_cj / sqrt(1 + sum_k lambda_cjk^2)).
inline double marginal_symptom_prob(const FactorParams &params, int cause,
                                    int j) {
  const double s2 = 1.0 + params.lambda[cause - 1].row(j).squaredNorm();
  return std_normal_cdf(params.mu(cause - 1, j) / std::sqrt(s2));
}

// Marginal covariance of z | y = c once eta is integrated out.
inline Eigen::MatrixXd marginal_cov(const FactorParams &params, int cause) {
  const Eigen::MatrixXd &lam = params.lambda[cause - 1];
  return lam * lam.transpose() +
         Eigen::MatrixXd::Identity(params.p, params.p);
}

}  // namespace vafm
