#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "vafm/errors.hpp"
#include "vafm/inference.hpp"
#include "vafm/model.hpp"

namespace vafm {

// Shortest exact decimal representation; round-trips to the same double.
inline std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(const std::string &bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string file_digest(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw schema_error("cannot open " + path + " for digest");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

namespace detail {

inline std::ofstream open_out(const std::string &path) {
  std::ofstream out(path);
  if (!out) throw schema_error("cannot write " + path);
  return out;
}

inline void finish_out(std::ofstream &out, const std::string &path) {
  out.flush();
  if (!out) throw schema_error("failed writing " + path);
}

// Type-7 quantile (linear interpolation) of an unsorted sample.
inline double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * (static_cast<double>(values.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

}  // namespace detail

// draw,<names...>; one row per saved draw, draw index 1-based.
inline void write_draws_csv(const std::string &path, const Eigen::MatrixXd &draws,
                            const std::vector<std::string> &names) {
  if (draws.cols() != static_cast<Eigen::Index>(names.size()))
    throw std::invalid_argument("write_draws_csv: column name count mismatch");
  auto out = detail::open_out(path);
  out << "draw";
  for (const auto &name : names) out << ',' << name;
  out << '\n';
  for (Eigen::Index s = 0; s < draws.rows(); ++s) {
    out << (s + 1);
    for (Eigen::Index c = 0; c < draws.cols(); ++c)
      out << ',' << format_double(draws(s, c));
    out << '\n';
  }
  detail::finish_out(out, path);
}

// draw,id,<cause names...>; blocks of target rows per saved draw.
inline void write_individual_probs_csv(const std::string &path,
                                       const PosteriorDraws &draws) {
  auto out = detail::open_out(path);
  out << "draw,id";
  for (const auto &name : draws.cause_names) out << ',' << name;
  out << '\n';
  for (std::size_t s = 0; s < draws.individual_prob_draws.size(); ++s) {
    const Eigen::MatrixXd &probs = draws.individual_prob_draws[s];
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      out << (s + 1) << ',' << draws.target_ids[i];
      for (Eigen::Index c = 0; c < probs.cols(); ++c)
        out << ',' << format_double(probs(i, c));
      out << '\n';
    }
  }
  detail::finish_out(out, path);
}

// draw,cause,<predictor names...>; C rows per saved draw.
inline void write_delta_cause_csv(const std::string &path,
                                  const PosteriorDraws &draws) {
  auto out = detail::open_out(path);
  out << "draw,cause";
  for (const auto &name : draws.predictor_names) out << ',' << name;
  out << '\n';
  for (std::size_t s = 0; s < draws.delta_cause_draws.size(); ++s) {
    const Eigen::MatrixXd &m = draws.delta_cause_draws[s];
    for (Eigen::Index c = 0; c < m.rows(); ++c) {
      out << (s + 1) << ',' << draws.cause_names[c];
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        out << ',' << format_double(m(c, j));
      out << '\n';
    }
  }
  detail::finish_out(out, path);
}

// <label>,mean,q2.5,q97.5 per column of the draw matrix.
inline void write_summary_csv(const std::string &path,
                              const Eigen::MatrixXd &draws,
                              const std::vector<std::string> &names,
                              const std::string &label_header) {
  auto out = detail::open_out(path);
  out << label_header << ",mean,q2.5,q97.5\n";
  for (Eigen::Index c = 0; c < draws.cols(); ++c) {
    std::vector<double> col(draws.rows());
    for (Eigen::Index s = 0; s < draws.rows(); ++s) col[s] = draws(s, c);
    const double mean =
        std::accumulate(col.begin(), col.end(), 0.0) / col.size();
    out << names[c] << ',' << format_double(mean) << ','
        << format_double(detail::quantile(col, 0.025)) << ','
        << format_double(detail::quantile(col, 0.975)) << '\n';
  }
  detail::finish_out(out, path);
}

// rank,predictor,mean,q2.5,q97.5 sorted by posterior mean descending.
inline void write_ranking_csv(const std::string &path,
                              const Eigen::MatrixXd &delta_draws,
                              const std::vector<std::string> &names) {
  const Eigen::Index p = delta_draws.cols();
  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd means = delta_draws.colwise().mean();
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return means[a] > means[b]; });
  auto out = detail::open_out(path);
  out << "rank,predictor,mean,q2.5,q97.5\n";
  for (Eigen::Index r = 0; r < p; ++r) {
    const int j = order[r];
    std::vector<double> col(delta_draws.rows());
    for (Eigen::Index s = 0; s < delta_draws.rows(); ++s)
      col[s] = delta_draws(s, j);
    out << (r + 1) << ',' << names[j] << ',' << format_double(means[j]) << ','
        << format_double(detail::quantile(col, 0.025)) << ','
        << format_double(detail::quantile(col, 0.975)) << '\n';
  }
  detail::finish_out(out, path);
}

// cause,rank,predictor,mean: per-cause rankings of the collapsed delta.
inline void write_ranking_per_cause_csv(const std::string &path,
                                        const PosteriorDraws &draws) {
  auto out = detail::open_out(path);
  out << "cause,rank,predictor,mean\n";
  const int S = static_cast<int>(draws.delta_cause_draws.size());
  if (S == 0) {
    detail::finish_out(out, path);
    return;
  }
  const int C = static_cast<int>(draws.delta_cause_draws[0].rows());
  const int p = static_cast<int>(draws.delta_cause_draws[0].cols());
  for (int c = 0; c < C; ++c) {
    Eigen::VectorXd means = Eigen::VectorXd::Zero(p);
    for (int s = 0; s < S; ++s)
      means += draws.delta_cause_draws[s].row(c).transpose();
    means /= S;
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return means[a] > means[b]; });
    for (int r = 0; r < p; ++r)
      out << draws.cause_names[c] << ',' << (r + 1) << ','
          << draws.predictor_names[order[r]] << ','
          << format_double(means[order[r]]) << '\n';
  }
  detail::finish_out(out, path);
}

// Flat checkpoint record, field order K, a, mu row-major, lambda row-major
// (cause, then predictor, then factor), tau, phi.
inline nlohmann::ordered_json params_to_json(const FactorParams &params) {
  nlohmann::ordered_json j;
  j["K"] = params.K;
  j["a"] = params.a;
  j["C"] = params.C;
  j["p"] = params.p;
  std::vector<double> mu;
  for (int c = 0; c < params.C; ++c)
    for (int col = 0; col < params.p; ++col) mu.push_back(params.mu(c, col));
  j["mu"] = mu;
  std::vector<double> lambda;
  for (int c = 0; c < params.C; ++c)
    for (int col = 0; col < params.p; ++col)
      for (int k = 0; k < params.K; ++k)
        lambda.push_back(params.lambda[c](col, k));
  j["lambda"] = lambda;
  j["tau"] = std::vector<double>(params.tau.data(),
                                 params.tau.data() + params.tau.size());
  j["phi"] = std::vector<double>(params.phi.data(),
                                 params.phi.data() + params.phi.size());
  return j;
}

inline FactorParams params_from_json(const nlohmann::json &j) {
  FactorParams params;
  try {
    params.K = j.at("K").get<int>();
    params.a = j.at("a").get<double>();
    params.C = j.at("C").get<int>();
    params.p = j.at("p").get<int>();
    const auto mu = j.at("mu").get<std::vector<double>>();
    const auto lambda = j.at("lambda").get<std::vector<double>>();
    const auto tau = j.at("tau").get<std::vector<double>>();
    const auto phi = j.at("phi").get<std::vector<double>>();
    if (static_cast<int>(mu.size()) != params.C * params.p ||
        static_cast<int>(lambda.size()) != params.C * params.p * params.K ||
        static_cast<int>(tau.size()) != params.p ||
        static_cast<int>(phi.size()) != params.p)
      throw schema_error("params checkpoint: array lengths inconsistent");
    params.mu.resize(params.C, params.p);
    params.lambda.assign(params.C, Eigen::MatrixXd(params.p, params.K));
    std::size_t idx = 0;
    for (int c = 0; c < params.C; ++c)
      for (int col = 0; col < params.p; ++col) params.mu(c, col) = mu[idx++];
    idx = 0;
    for (int c = 0; c < params.C; ++c)
      for (int col = 0; col < params.p; ++col)
        for (int k = 0; k < params.K; ++k)
          params.lambda[c](col, k) = lambda[idx++];
    params.tau = Eigen::Map<const Eigen::VectorXd>(tau.data(), tau.size());
    params.phi = Eigen::Map<const Eigen::VectorXd>(phi.data(), phi.size());
  } catch (const nlohmann::json::exception &e) {
    throw schema_error(std::string("params checkpoint: ") + e.what());
  }
  validate(params);
  return params;
}

inline std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm;
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

constexpr const char *kArtifactVersion = "0.1.0";

// Everything needed to rerun the command: name, resolved config, input
// digests, seed, and wall-clock bounds. Timestamps vary between runs; the
// data CSVs are the byte-reproducible artifacts.
class RunManifest {
public:
  RunManifest(const std::string &command, std::uint64_t seed)
      : start_(iso_timestamp()) {
    j_["command"] = command;
    j_["artifact_version"] = kArtifactVersion;
    j_["seed"] = seed;
    j_["config"] = nlohmann::ordered_json::object();
    j_["inputs"] = nlohmann::ordered_json::object();
    j_["outputs"] = nlohmann::ordered_json::array();
  }

  template <typename T>
  void set_config(const std::string &key, const T &value) {
    j_["config"][key] = value;
  }

  void add_input(const std::string &path) {
    j_["inputs"][path] = file_digest(path);
  }

  void add_output(const std::string &path) { j_["outputs"].push_back(path); }

  template <typename T>
  void set_extra(const std::string &key, const T &value) {
    j_[key] = value;
  }

  void write(const std::string &path) const {
    nlohmann::ordered_json j = j_;
    j["start_time"] = start_;
    j["end_time"] = iso_timestamp();
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
    detail::finish_out(out, path);
  }

private:
  nlohmann::ordered_json j_;
  std::string start_;
};

}  // namespace vafm
