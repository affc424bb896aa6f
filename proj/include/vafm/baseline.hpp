#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vafm/dataset.hpp"
#include "vafm/errors.hpp"
#include "vafm/inference.hpp"
#include "vafm/random.hpp"

namespace vafm {

// Conditionally independent comparator: per (cause, predictor) a
// beta posterior over P(x = 1 | y), keyed explicitly by outcome so the
// parameter order cannot be confused. alpha1 pairs with x = 1 counts.
struct CiPosterior {
  int C = 0;
  int p = 0;
  Eigen::MatrixXd alpha0;  // C×p, 1 + #{x=0 observed}
  Eigen::MatrixXd alpha1;  // C×p, 1 + #{x=1 observed}
  std::vector<std::string> cause_names;
  std::vector<std::string> predictor_names;
};

inline CiPosterior fit_ci(const SymptomDataset &train) {
  validate(train);
  if (!train.labeled()) throw schema_error("fit_ci: labeled data required");
  CiPosterior post;
  post.C = train.C;
  post.p = train.p;
  post.cause_names = train.cause_names;
  post.predictor_names = train.predictor_names;
  post.alpha0 = Eigen::MatrixXd::Ones(train.C, train.p);
  post.alpha1 = Eigen::MatrixXd::Ones(train.C, train.p);
  for (int i = 0; i < train.n; ++i) {
    const int c = train.y[i] - 1;
    for (int j = 0; j < train.p; ++j) {
      if (!train.observed(i, j)) continue;
      if (train.x(i, j) == 1)
        post.alpha1(c, j) += 1.0;
      else
        post.alpha0(c, j) += 1.0;
    }
  }
  return post;
}

inline double ci_mean_prob(const CiPosterior &post, int cause, int j) {
  return post.alpha1(cause - 1, j) /
         (post.alpha0(cause - 1, j) + post.alpha1(cause - 1, j));
}

enum class CiMode { sampled, mean };

// Prediction mirroring run_gibbs bookkeeping. sampled mode draws the
// success probabilities from their beta posteriors once per saved draw and
// samples causes; mean mode plugs in posterior means, is fully
// deterministic, and reports the single Rao-Blackwellized CSMF row (the
// average of the individual probability rows).
inline PosteriorDraws predict_ci(const CiPosterior &post,
                                 const SymptomDataset &target, CiMode mode,
                                 const McmcConfig &config) {
  validate(config);
  validate(target);
  if (post.p != target.p || post.predictor_names != target.predictor_names)
    throw schema_error("predict_ci: posterior and target predictors disagree");

  const int C = post.C;
  const int p = post.p;
  const int nt = target.n;
  const int S = mode == CiMode::mean ? 1 : saved_draw_count(config);

  PosteriorDraws draws;
  draws.target_ids = target.ids;
  draws.cause_names = post.cause_names;
  draws.predictor_names = post.predictor_names;
  draws.csmf_draws.resize(S, C);
  if (mode == CiMode::sampled) draws.sampled_causes.resize(S, nt);
  if (config.save_individual_probs)
    draws.individual_prob_draws.assign(S, Eigen::MatrixXd(nt, C));

  std::vector<std::vector<std::pair<int, int>>> target_obs(nt);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < p; ++j)
      if (target.observed(i, j))
        target_obs[i].emplace_back(j, static_cast<int>(target.x(i, j)));

  std::unique_ptr<ThreadPool> pool_storage;
  ThreadPool *pool = nullptr;
  if (config.threads > 1) {
    pool_storage = std::make_unique<ThreadPool>(config.threads);
    pool = pool_storage.get();
  }

  for (int s = 0; s < S; ++s) {
    Eigen::MatrixXd log1(C, p), log0(C, p);
    if (mode == CiMode::sampled) {
      RandomStream rng(config.seed,
                       make_stream_id(detail::kTagBaseline, s + 1, 0));
      for (int c = 0; c < C; ++c)
        for (int j = 0; j < p; ++j) {
          const double g1 = sample_gamma(post.alpha1(c, j), 1.0, rng);
          const double g0 = sample_gamma(post.alpha0(c, j), 1.0, rng);
          const double theta = g1 / (g0 + g1);
          log1(c, j) = std::log(theta);
          log0(c, j) = std::log1p(-theta);
        }
    } else {
      for (int c = 0; c < C; ++c)
        for (int j = 0; j < p; ++j) {
          const double theta = ci_mean_prob(post, c + 1, j);
          log1(c, j) = std::log(theta);
          log0(c, j) = std::log1p(-theta);
        }
    }

    Eigen::MatrixXd probs(nt, C);
    std::vector<int> sampled(nt, 0);
    detail::for_each_index(pool, nt, [&](std::size_t i) {
      Eigen::VectorXd log_lik = Eigen::VectorXd::Zero(C);
      for (const auto &[j, x] : target_obs[i])
        log_lik += (x == 1 ? log1.col(j) : log0.col(j));
      const double norm =
          log_sum_exp(std::span<const double>(log_lik.data(), C));
      Eigen::VectorXd row = (log_lik.array() - norm).exp();
      row /= row.sum();
      probs.row(i) = row.transpose();
      if (mode == CiMode::sampled) {
        RandomStream pick(config.seed,
                          make_stream_id(detail::kTagPredict, s + 1, i));
        const double u = pick.uniform();
        double cum = 0.0;
        int c = 0;
        while (c < C - 1 && u > (cum += row[c])) ++c;
        sampled[i] = c + 1;
      }
    });

    if (mode == CiMode::sampled) {
      Eigen::VectorXd freq = Eigen::VectorXd::Zero(C);
      for (int i = 0; i < nt; ++i) {
        draws.sampled_causes(s, i) = sampled[i];
        freq[sampled[i] - 1] += 1.0;
      }
      draws.csmf_draws.row(s) = (freq / nt).transpose();
    } else {
      draws.csmf_draws.row(s) = probs.colwise().mean();
    }
    if (config.save_individual_probs) draws.individual_prob_draws[s] = probs;
  }
  return draws;
}

}  // namespace vafm
