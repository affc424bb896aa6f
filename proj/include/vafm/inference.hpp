#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vafm/dataset.hpp"
#include "vafm/errors.hpp"
#include "vafm/model.hpp"
#include "vafm/numeric_utils.hpp"
#include "vafm/parallel.hpp"
#include "vafm/random.hpp"

namespace vafm {

struct McmcConfig {
  int iterations = 5000;
  int burn_in = 500;
  int thin = 10;
  int R = 200;
  int K = 5;
  double a = 0.5;
  std::uint64_t seed = 0;
  // Step 7' Dirichlet parameters: counts (1 + n_c) when true, the printed
  // proportions form (1 + n_c/n) when false.
  bool dirichlet_counts = true;
  double delta_missing_threshold = 0.05;
  bool per_cause_delta = false;
  bool save_individual_probs = true;
  bool save_param_draws = false;
  int threads = 1;
};

inline void validate(const McmcConfig &cfg) {
  if (cfg.iterations <= 0) throw config_error("config: iterations must be positive");
  if (cfg.burn_in < 0) throw config_error("config: burn_in must be nonnegative");
  if (cfg.thin < 1) throw config_error("config: thin must be at least 1");
  if (cfg.R < 1) throw config_error("config: R must be at least 1");
  if (cfg.K < 0) throw config_error("config: K must be nonnegative");
  if (!(cfg.a > 0.0)) throw config_error("config: a must be positive");
  if (cfg.threads < 1) throw config_error("config: threads must be at least 1");
  if (!(cfg.delta_missing_threshold >= 0.0 && cfg.delta_missing_threshold <= 1.0))
    throw config_error("config: delta missing threshold must be in [0, 1]");
}

inline int saved_draw_count(const McmcConfig &cfg) {
  return cfg.iterations / cfg.thin;
}

// Saved posterior output. csmf_draws rows are the Step 7 empirical cause
// frequencies; the per-individual probability rows are also kept so either
// that frequency estimator or a Rao-Blackwellized average can be formed later.
struct PosteriorDraws {
  Eigen::MatrixXd csmf_draws;                          // S×C
  std::vector<Eigen::MatrixXd> individual_prob_draws;  // S entries, each n_t×C
  Eigen::MatrixXi sampled_causes;                      // S×n_t, 1-based
  Eigen::MatrixXd delta_draws;                         // S×p
  std::vector<Eigen::MatrixXd> delta_cause_draws;      // S entries, each C×p
  std::vector<FactorParams> param_draws;
  std::vector<std::string> target_ids;
  std::vector<std::string> cause_names;
  std::vector<std::string> predictor_names;
  std::vector<std::string> warnings;
};

// delta^2 of a joint probability table (causes in rows): the normalized
// chi-squared-style divergence of Eq-style association, in [0, 1].
inline double delta_squared(const Eigen::MatrixXd &joint) {
  const int rows = static_cast<int>(joint.rows());
  const int cols = static_cast<int>(joint.cols());
  if (rows < 2 || cols < 2)
    throw std::invalid_argument("delta_squared: table needs at least 2 levels per variable");
  if (joint.minCoeff() < 0.0)
    throw std::invalid_argument("delta_squared: negative table entry");
  if (std::abs(joint.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("delta_squared: table must sum to 1");
  const Eigen::VectorXd py = joint.rowwise().sum();
  const Eigen::VectorXd px = joint.colwise().sum();
  if (py.minCoeff() <= 0.0 || px.minCoeff() <= 0.0)
    throw std::invalid_argument("delta_squared: zero marginal (degenerate variable)");
  double acc = 0.0;
  for (int c = 0; c < rows; ++c)
    for (int d = 0; d < cols; ++d) {
      const double expect = py[c] * px[d];
      const double diff = joint(c, d) - expect;
      acc += diff * diff / expect;
    }
  return acc / (std::min(rows, cols) - 1);
}

inline double delta_from_table(const Eigen::MatrixXd &joint) {
  return std::min(1.0, std::sqrt(std::max(0.0, delta_squared(joint))));
}

// Joint table of (cause, x_j) implied by the model and a cause weight
// vector: entry (c, d) = w_c * P(x_j = d | y = c), columns ordered d = 0, 1.
inline Eigen::MatrixXd model_joint_table(const FactorParams &params,
                                         const Eigen::VectorXd &cause_weights,
                                         int j) {
  if (cause_weights.size() != params.C)
    throw std::invalid_argument("model_joint_table: weight length mismatch");
  Eigen::MatrixXd table(params.C, 2);
  for (int c = 1; c <= params.C; ++c) {
    const double prob = marginal_symptom_prob(params, c, j);
    table(c - 1, 1) = cause_weights[c - 1] * prob;
    table(c - 1, 0) = cause_weights[c - 1] * (1.0 - prob);
  }
  return table;
}

// Collapses a C×2 table to cause-vs-rest: row 0 is cause c, row 1 the sum
// of all other rows. c is 1-based.
inline Eigen::MatrixXd collapse_cause(const Eigen::MatrixXd &table, int c) {
  if (c < 1 || c > table.rows())
    throw std::invalid_argument("collapse_cause: cause out of range");
  Eigen::MatrixXd out(2, table.cols());
  out.row(0) = table.row(c - 1);
  out.row(1) = table.colwise().sum() - table.row(c - 1);
  return out;
}

namespace detail {

inline std::vector<int> cause_counts(const SymptomDataset &d) {
  std::vector<int> counts(d.C, 0);
  for (int i = 0; i < d.n; ++i) ++counts[d.y[i] - 1];
  return counts;
}

// One full parameter sweep, Steps 1 through 6 in a fixed order.
inline void gibbs_sweep(FactorParams &params, LatentState &latent,
                        const ObservedLayout &layout, const SymptomDataset &train,
                        const SweepRng &sweep, ThreadPool *pool) {
  step_mu(params, latent, layout, sweep, pool);
  step_lambda(params, latent, layout, sweep, pool);
  step_eta(params, latent, layout, train, sweep, pool);
  step_tau(params, sweep, pool);
  step_phi(params, sweep, pool);
  step_z(params, latent, layout, train, sweep, pool);
}

// Per-cause log-probability tables for one iteration's shared eta draws:
// entry (j, r) of log_table[c][x] is log P(x_j = x | eta_r, cause c+1).
// Individuals then differ only in which (j, x) cells they sum.
struct CauseTables {
  std::vector<Eigen::MatrixXd> log0;  // C entries, each p×R
  std::vector<Eigen::MatrixXd> log1;
};

inline CauseTables build_cause_tables(const FactorParams &params,
                                      const Eigen::MatrixXd &eta_r,
                                      ThreadPool *pool) {
  const int R = static_cast<int>(eta_r.rows());
  CauseTables tables;
  tables.log0.assign(params.C, Eigen::MatrixXd(params.p, R));
  tables.log1.assign(params.C, Eigen::MatrixXd(params.p, R));
  detail::for_each_index(pool, params.C, [&](std::size_t ci) {
    const Eigen::MatrixXd score =
        (params.lambda[ci] * eta_r.transpose()).colwise() +
        params.mu.row(ci).transpose();
    for (int j = 0; j < params.p; ++j)
      for (int r = 0; r < R; ++r) {
        tables.log1[ci](j, r) = log_std_normal_cdf(score(j, r));
        tables.log0[ci](j, r) = log_std_normal_cdf(-score(j, r));
      }
  });
  return tables;
}

}  // namespace detail

// Full algorithm: Steps 1-6 on the training data each sweep; at saved
// sweeps, Step 7 evaluates every target individual's cause posterior under
// a uniform cause prior with Monte Carlo draws shared across individuals
// and causes, samples causes, and records their empirical frequencies.
inline PosteriorDraws run_gibbs(const SymptomDataset &train,
                                const SymptomDataset &target,
                                const McmcConfig &config) {
  validate(config);
  validate(train);
  validate(target);
  if (!train.labeled()) throw schema_error("run_gibbs: training data must be labeled");
  if (train.p != target.p || train.predictor_names != target.predictor_names)
    throw schema_error("run_gibbs: train and target predictors disagree");

  const int C = train.C;
  const int nt = target.n;
  const int S = saved_draw_count(config);

  PosteriorDraws draws;
  draws.target_ids = target.ids;
  draws.cause_names = train.cause_names;
  draws.predictor_names = train.predictor_names;
  draws.csmf_draws.resize(S, C);
  draws.sampled_causes.resize(S, nt);
  if (config.save_individual_probs)
    draws.individual_prob_draws.assign(S, Eigen::MatrixXd(nt, C));

  const auto counts = detail::cause_counts(train);
  for (int c = 0; c < C; ++c)
    if (counts[c] == 0)
      draws.warnings.push_back("cause " + std::to_string(c + 1) +
                               " has no training individuals; its likelihood is prior-only");

  const ObservedLayout layout = build_layout(train);
  FactorParams params = init_params(C, train.p, config.K, config.a);
  LatentState latent = init_latent(params, train, layout, config.seed);

  std::unique_ptr<ThreadPool> pool_storage;
  ThreadPool *pool = nullptr;
  if (config.threads > 1) {
    pool_storage = std::make_unique<ThreadPool>(config.threads);
    pool = pool_storage.get();
  }

  // Observed (j, x) pairs per target row, hoisted out of the chain loop.
  std::vector<std::vector<std::pair<int, int>>> target_obs(nt);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < target.p; ++j)
      if (target.observed(i, j))
        target_obs[i].emplace_back(j, static_cast<int>(target.x(i, j)));

  const int total = config.burn_in + config.iterations;
  int s = 0;
  for (int t = 1; t <= total; ++t) {
    const SweepRng sweep(config.seed, static_cast<std::uint32_t>(t));
    detail::gibbs_sweep(params, latent, layout, train, sweep, pool);
    if (t <= config.burn_in || (t - config.burn_in) % config.thin != 0) continue;

    RandomStream eta_rng = sweep.stream(detail::kTagEtaR, 0);
    const Eigen::MatrixXd eta_r = draw_eta_samples(config.R, config.K, eta_rng);
    const detail::CauseTables tables = detail::build_cause_tables(params, eta_r, pool);

    Eigen::MatrixXd probs(nt, C);
    std::vector<int> sampled(nt, 0);
    detail::for_each_index(pool, nt, [&](std::size_t i) {
      Eigen::VectorXd log_lik(C);
      Eigen::VectorXd acc(config.R);
      for (int c = 0; c < C; ++c) {
        acc.setZero();
        for (const auto &[j, x] : target_obs[i]) {
          const Eigen::MatrixXd &table = x == 1 ? tables.log1[c] : tables.log0[c];
          acc += table.row(j).transpose();
        }
        log_lik[c] = log_mean_exp(std::span<const double>(acc.data(), acc.size()));
      }
      const double norm = log_sum_exp(std::span<const double>(log_lik.data(), C));
      Eigen::VectorXd row = (log_lik.array() - norm).exp();
      row /= row.sum();
      probs.row(i) = row.transpose();

      RandomStream pick = sweep.stream(detail::kTagPredict, i);
      const double u = pick.uniform();
      double cum = 0.0;
      int c = 0;
      while (c < C - 1 && u > (cum += row[c])) ++c;
      sampled[i] = c + 1;
    });

    for (int i = 0; i < nt; ++i) draws.sampled_causes(s, i) = sampled[i];
    Eigen::VectorXd freq = Eigen::VectorXd::Zero(C);
    for (int i = 0; i < nt; ++i) freq[sampled[i] - 1] += 1.0;
    draws.csmf_draws.row(s) = (freq / nt).transpose();
    if (config.save_individual_probs) draws.individual_prob_draws[s] = probs;
    if (config.save_param_draws) draws.param_draws.push_back(params);
    ++s;
  }
  return draws;
}

// Step 7' mode: Steps 1-6 on all labeled data; at saved sweeps draws cause
// weights from the Dirichlet conditional and evaluates delta for every
// predictor, zeroing those whose missing rate exceeds the threshold.
inline PosteriorDraws run_delta_mode(const SymptomDataset &train,
                                     const McmcConfig &config) {
  validate(config);
  validate(train);
  if (!train.labeled())
    throw schema_error("run_delta_mode: labeled data required");

  const int C = train.C;
  const int p = train.p;
  const int S = saved_draw_count(config);

  PosteriorDraws draws;
  draws.cause_names = train.cause_names;
  draws.predictor_names = train.predictor_names;
  draws.delta_draws.resize(S, p);
  if (config.per_cause_delta)
    draws.delta_cause_draws.assign(S, Eigen::MatrixXd(C, p));

  const auto counts = detail::cause_counts(train);
  Eigen::VectorXd alpha(C);
  for (int c = 0; c < C; ++c) {
    const double add = config.dirichlet_counts
                           ? static_cast<double>(counts[c])
                           : static_cast<double>(counts[c]) / train.n;
    alpha[c] = 1.0 + add;
  }

  const Eigen::VectorXd rates = missing_rate(train);
  std::vector<bool> excluded(p);
  for (int j = 0; j < p; ++j) {
    excluded[j] = rates[j] > config.delta_missing_threshold;
    if (excluded[j]) {
      std::ostringstream w;
      w << "predictor " << train.predictor_names[j] << ": missing rate "
        << std::setprecision(3) << rates[j] << " exceeds the exclusion threshold "
        << config.delta_missing_threshold << "; delta reported as 0";
      draws.warnings.push_back(w.str());
    }
  }

  const ObservedLayout layout = build_layout(train);
  FactorParams params = init_params(C, p, config.K, config.a);
  LatentState latent = init_latent(params, train, layout, config.seed);

  std::unique_ptr<ThreadPool> pool_storage;
  ThreadPool *pool = nullptr;
  if (config.threads > 1) {
    pool_storage = std::make_unique<ThreadPool>(config.threads);
    pool = pool_storage.get();
  }

  const int total = config.burn_in + config.iterations;
  int s = 0;
  for (int t = 1; t <= total; ++t) {
    const SweepRng sweep(config.seed, static_cast<std::uint32_t>(t));
    detail::gibbs_sweep(params, latent, layout, train, sweep, pool);
    if (t <= config.burn_in || (t - config.burn_in) % config.thin != 0) continue;

    RandomStream wrng = sweep.stream(detail::kTagDirichlet, 0);
    const Eigen::VectorXd weights = sample_dirichlet(alpha, wrng);

    for (int j = 0; j < p; ++j) {
      if (excluded[j]) {
        draws.delta_draws(s, j) = 0.0;
        if (config.per_cause_delta)
          for (int c = 0; c < C; ++c) draws.delta_cause_draws[s](c, j) = 0.0;
        continue;
      }
      const Eigen::MatrixXd table = model_joint_table(params, weights, j);
      draws.delta_draws(s, j) = delta_from_table(table);
      if (config.per_cause_delta)
        for (int c = 1; c <= C; ++c)
          draws.delta_cause_draws[s](c - 1, j) =
              delta_from_table(collapse_cause(table, c));
    }
    if (config.save_param_draws) draws.param_draws.push_back(params);
    ++s;
  }
  return draws;
}

}  // namespace vafm
