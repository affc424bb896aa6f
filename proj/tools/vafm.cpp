// Command-line front end: fit-predict, delta, baseline, simulate, evaluate,
// cv, and sweep subcommands over CSV symptom data.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "vafm/vafm.hpp"

namespace fs = std::filesystem;

namespace {

constexpr std::uint8_t kTagSimulateParams = 14;

struct Options {
  std::string train_path;
  std::string target_path;
  std::string truth_path;
  std::string draws_path;
  std::string out_dir = ".";
  vafm::McmcConfig cfg;
  std::string dirichlet_update = "counts";
  std::string mode = "sampled";
  std::string sweep_param;
  std::string k_grid_text;
  std::string grid_text;
  int folds = 5;

  // simulate
  std::string spec_json_path;
  int sim_n_train = 600;
  int sim_n_target = 400;
  int sim_p = 10;
  int sim_c = 3;
  int sim_k = 2;
  std::string sim_csmf_text;
  double sim_mu_scale = 1.0;
  double sim_lambda_scale = 1.0;
  double sim_missing_prob = 0.0;
};

unsigned default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void add_out_dir_flag(CLI::App *sub, Options &opt) {
  sub->add_option("--out-dir", opt.out_dir, "Output directory")
      ->envname("VAFM_OUT_DIR")
      ->capture_default_str();
}

void add_chain_flags(CLI::App *sub, Options &opt, bool with_factor_flags) {
  sub->add_option("--iters", opt.cfg.iterations, "Post-burn-in MCMC iterations")
      ->capture_default_str();
  sub->add_option("--burn", opt.cfg.burn_in, "Burn-in iterations")
      ->capture_default_str();
  sub->add_option("--thin", opt.cfg.thin, "Keep every thin-th iteration")
      ->capture_default_str();
  sub->add_option("--seed", opt.cfg.seed, "Random seed")->capture_default_str();
  sub->add_option("--threads", opt.cfg.threads, "Worker thread cap")
      ->envname("VAFM_THREADS")
      ->capture_default_str();
  if (with_factor_flags) {
    sub->add_option("--k", opt.cfg.K, "Number of latent factors")
        ->capture_default_str();
    sub->add_option("--r", opt.cfg.R, "Monte Carlo draws per likelihood")
        ->capture_default_str();
    sub->add_option("--a", opt.cfg.a, "Gamma(a, a) precision hyperparameter")
        ->capture_default_str();
  }
}

std::vector<std::string> parse_list(const std::string &text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string &text, const char *what) {
  std::vector<int> out;
  for (const auto &item : parse_list(text)) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception &) {
      throw vafm::config_error(std::string(what) + ": '" + item +
                               "' is not an integer");
    }
  }
  if (out.empty()) throw vafm::config_error(std::string(what) + ": empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string &text, const char *what) {
  std::vector<double> out;
  for (const auto &item : parse_list(text)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception &) {
      throw vafm::config_error(std::string(what) + ": '" + item +
                               "' is not a number");
    }
  }
  if (out.empty()) throw vafm::config_error(std::string(what) + ": empty list");
  return out;
}

std::string out_path(const Options &opt, const std::string &name) {
  return (fs::path(opt.out_dir) / name).string();
}

void prepare_out_dir(const Options &opt) {
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec)
    throw vafm::config_error("cannot create output directory " + opt.out_dir +
                             ": " + ec.message());
}

void record_chain_config(vafm::RunManifest &manifest, const vafm::McmcConfig &cfg) {
  manifest.set_config("iterations", cfg.iterations);
  manifest.set_config("burn_in", cfg.burn_in);
  manifest.set_config("thin", cfg.thin);
  manifest.set_config("R", cfg.R);
  manifest.set_config("K", cfg.K);
  manifest.set_config("a", cfg.a);
  manifest.set_config("threads", cfg.threads);
}

void print_warnings(const vafm::PosteriorDraws &draws) {
  for (const auto &w : draws.warnings) std::cerr << "warning: " << w << "\n";
}

vafm::SymptomDataset load_labeled(const std::string &path) {
  vafm::SymptomDataset d = vafm::load_csv(path);
  if (!d.labeled())
    throw vafm::schema_error(path + ": expected a labeled file (cause column filled)");
  return d;
}

vafm::SymptomDataset load_target(const std::string &path) {
  vafm::SymptomDataset d = vafm::load_csv(path);
  if (d.labeled()) d = vafm::drop_labels(d);
  return d;
}

int cmd_fit_predict(Options &opt) {
  vafm::validate(opt.cfg);
  const auto train = load_labeled(opt.train_path);
  const auto target = load_target(opt.target_path);
  const auto draws = vafm::run_gibbs(train, target, opt.cfg);
  print_warnings(draws);

  prepare_out_dir(opt);
  vafm::RunManifest manifest("fit-predict", opt.cfg.seed);
  manifest.set_extra("model", "factor");
  record_chain_config(manifest, opt.cfg);
  manifest.add_input(opt.train_path);
  manifest.add_input(opt.target_path);

  vafm::write_draws_csv(out_path(opt, "csmf_draws.csv"), draws.csmf_draws,
                        draws.cause_names);
  vafm::write_individual_probs_csv(out_path(opt, "individual_probs.csv"), draws);
  vafm::write_summary_csv(out_path(opt, "summary.csv"), draws.csmf_draws,
                          draws.cause_names, "cause");
  manifest.add_output("csmf_draws.csv");
  manifest.add_output("individual_probs.csv");
  manifest.add_output("summary.csv");
  manifest.write(out_path(opt, "manifest.json"));
  std::cout << "wrote " << draws.csmf_draws.rows() << " draws to " << opt.out_dir
            << "\n";
  return 0;
}

int cmd_delta(Options &opt) {
  opt.cfg.dirichlet_counts = opt.dirichlet_update == "counts";
  vafm::validate(opt.cfg);
  const auto train = load_labeled(opt.train_path);
  const auto draws = vafm::run_delta_mode(train, opt.cfg);
  print_warnings(draws);

  prepare_out_dir(opt);
  vafm::RunManifest manifest("delta", opt.cfg.seed);
  manifest.set_extra("model", "factor");
  record_chain_config(manifest, opt.cfg);
  manifest.set_config("missing_threshold", opt.cfg.delta_missing_threshold);
  manifest.set_config("per_cause", opt.cfg.per_cause_delta);
  manifest.set_config("dirichlet_update", opt.dirichlet_update);
  manifest.add_input(opt.train_path);

  vafm::write_draws_csv(out_path(opt, "delta_draws.csv"), draws.delta_draws,
                        draws.predictor_names);
  vafm::write_ranking_csv(out_path(opt, "ranking.csv"), draws.delta_draws,
                          draws.predictor_names);
  vafm::write_summary_csv(out_path(opt, "summary.csv"), draws.delta_draws,
                          draws.predictor_names, "predictor");
  manifest.add_output("delta_draws.csv");
  manifest.add_output("ranking.csv");
  manifest.add_output("summary.csv");
  if (opt.cfg.per_cause_delta) {
    vafm::write_delta_cause_csv(out_path(opt, "delta_cause_draws.csv"), draws);
    vafm::write_ranking_per_cause_csv(out_path(opt, "ranking_per_cause.csv"),
                                      draws);
    manifest.add_output("delta_cause_draws.csv");
    manifest.add_output("ranking_per_cause.csv");
  }
  manifest.write(out_path(opt, "manifest.json"));
  std::cout << "wrote " << draws.delta_draws.rows() << " delta draws to "
            << opt.out_dir << "\n";
  return 0;
}

int cmd_baseline(Options &opt) {
  vafm::validate(opt.cfg);
  if (opt.mode != "sampled" && opt.mode != "mean")
    throw vafm::config_error("baseline: --mode must be sampled or mean");
  const auto train = load_labeled(opt.train_path);
  const auto target = load_target(opt.target_path);
  const auto posterior = vafm::fit_ci(train);
  const auto mode =
      opt.mode == "mean" ? vafm::CiMode::mean : vafm::CiMode::sampled;
  const auto draws = vafm::predict_ci(posterior, target, mode, opt.cfg);

  prepare_out_dir(opt);
  vafm::RunManifest manifest("baseline", opt.cfg.seed);
  manifest.set_extra("model", "ci");
  manifest.set_config("iterations", opt.cfg.iterations);
  manifest.set_config("thin", opt.cfg.thin);
  manifest.set_config("mode", opt.mode);
  manifest.set_config("threads", opt.cfg.threads);
  manifest.add_input(opt.train_path);
  manifest.add_input(opt.target_path);

  vafm::write_draws_csv(out_path(opt, "csmf_draws.csv"), draws.csmf_draws,
                        draws.cause_names);
  vafm::write_individual_probs_csv(out_path(opt, "individual_probs.csv"), draws);
  vafm::write_summary_csv(out_path(opt, "summary.csv"), draws.csmf_draws,
                          draws.cause_names, "cause");
  manifest.add_output("csmf_draws.csv");
  manifest.add_output("individual_probs.csv");
  manifest.add_output("summary.csv");
  manifest.write(out_path(opt, "manifest.json"));
  std::cout << "wrote " << draws.csmf_draws.rows() << " draws to " << opt.out_dir
            << "\n";
  return 0;
}

vafm::SyntheticSpec spec_from_flags(const Options &opt) {
  vafm::SyntheticSpec spec;
  spec.n = opt.sim_n_train + opt.sim_n_target;
  spec.p = opt.sim_p;
  spec.C = opt.sim_c;
  spec.K = opt.sim_k;
  spec.missing_prob = opt.sim_missing_prob;
  spec.seed = opt.cfg.seed;
  if (opt.sim_csmf_text.empty()) {
    spec.csmf_true =
        Eigen::VectorXd::Constant(spec.C, 1.0 / static_cast<double>(spec.C));
  } else {
    const auto values = parse_double_list(opt.sim_csmf_text, "--csmf");
    spec.csmf_true = Eigen::Map<const Eigen::VectorXd>(
        values.data(), static_cast<Eigen::Index>(values.size()));
  }
  vafm::RandomStream rng(opt.cfg.seed,
                         vafm::make_stream_id(kTagSimulateParams, 0, 0));
  spec.mu_true.resize(spec.C, spec.p);
  for (int c = 0; c < spec.C; ++c)
    for (int j = 0; j < spec.p; ++j)
      spec.mu_true(c, j) = opt.sim_mu_scale * rng.normal();
  spec.lambda_true.assign(spec.C, Eigen::MatrixXd(spec.p, spec.K));
  for (int c = 0; c < spec.C; ++c)
    for (int j = 0; j < spec.p; ++j)
      for (int k = 0; k < spec.K; ++k)
        spec.lambda_true[c](j, k) = opt.sim_lambda_scale * rng.normal();
  return spec;
}

vafm::SyntheticSpec spec_from_json(const std::string &path, int &n_train,
                                   int &n_target, std::uint64_t default_seed) {
  std::ifstream in(path);
  if (!in) throw vafm::schema_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw vafm::schema_error(path + ": " + e.what());
  }
  vafm::SyntheticSpec spec;
  try {
    n_train = j.at("n_train").get<int>();
    n_target = j.at("n_target").get<int>();
    spec.n = n_train + n_target;
    spec.p = j.at("p").get<int>();
    spec.C = j.at("C").get<int>();
    spec.K = j.at("K").get<int>();
    spec.missing_prob = j.value("missing_prob", 0.0);
    spec.seed = j.value("seed", default_seed);
    const auto csmf = j.at("csmf_true").get<std::vector<double>>();
    spec.csmf_true = Eigen::Map<const Eigen::VectorXd>(
        csmf.data(), static_cast<Eigen::Index>(csmf.size()));
    spec.mu_true.resize(spec.C, spec.p);
    const auto mu = j.at("mu_true").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(mu.size()) != spec.C)
      throw vafm::config_error(path + ": mu_true must have C rows");
    for (int c = 0; c < spec.C; ++c) {
      if (static_cast<int>(mu[c].size()) != spec.p)
        throw vafm::config_error(path + ": mu_true rows must have p entries");
      for (int col = 0; col < spec.p; ++col) spec.mu_true(c, col) = mu[c][col];
    }
    spec.lambda_true.assign(spec.C, Eigen::MatrixXd::Zero(spec.p, spec.K));
    if (j.contains("lambda_true")) {
      const auto lambda =
          j.at("lambda_true").get<std::vector<std::vector<std::vector<double>>>>();
      if (static_cast<int>(lambda.size()) != spec.C)
        throw vafm::config_error(path + ": lambda_true must have C blocks");
      for (int c = 0; c < spec.C; ++c) {
        if (static_cast<int>(lambda[c].size()) != spec.p)
          throw vafm::config_error(path + ": lambda_true blocks must be p×K");
        for (int col = 0; col < spec.p; ++col) {
          if (static_cast<int>(lambda[c][col].size()) != spec.K)
            throw vafm::config_error(path + ": lambda_true blocks must be p×K");
          for (int k = 0; k < spec.K; ++k)
            spec.lambda_true[c](col, k) = lambda[c][col][k];
        }
      }
    }
  } catch (const nlohmann::json::exception &e) {
    throw vafm::schema_error(path + ": " + e.what());
  }
  return spec;
}

int cmd_simulate(Options &opt) {
  int n_train = opt.sim_n_train;
  int n_target = opt.sim_n_target;
  const vafm::SyntheticSpec spec =
      opt.spec_json_path.empty()
          ? spec_from_flags(opt)
          : spec_from_json(opt.spec_json_path, n_train, n_target, opt.cfg.seed);
  if (n_train <= 0 || n_target <= 0)
    throw vafm::config_error("simulate: n_train and n_target must be positive");
  const vafm::SymptomDataset all = vafm::generate_synthetic(spec);

  std::vector<int> train_rows(n_train), target_rows(n_target);
  for (int i = 0; i < n_train; ++i) train_rows[i] = i;
  for (int i = 0; i < n_target; ++i) target_rows[i] = n_train + i;
  const vafm::SymptomDataset train = vafm::subset_rows(all, train_rows);
  const vafm::SymptomDataset truth = vafm::subset_rows(all, target_rows);

  prepare_out_dir(opt);
  vafm::RunManifest manifest("simulate", spec.seed);
  manifest.set_config("n_train", n_train);
  manifest.set_config("n_target", n_target);
  manifest.set_config("p", spec.p);
  manifest.set_config("C", spec.C);
  manifest.set_config("K", spec.K);
  manifest.set_config("missing_prob", spec.missing_prob);
  if (!opt.spec_json_path.empty()) manifest.add_input(opt.spec_json_path);

  vafm::write_csv(train, out_path(opt, "train.csv"));
  vafm::write_csv(vafm::drop_labels(truth), out_path(opt, "target.csv"));
  vafm::write_csv(truth, out_path(opt, "truth.csv"));
  {
    auto out = std::ofstream(out_path(opt, "csmf_true.csv"));
    if (!out) throw vafm::schema_error("cannot write csmf_true.csv");
    out << "cause,probability\n";
    for (int c = 0; c < spec.C; ++c)
      out << all.cause_names[c] << ',' << vafm::format_double(spec.csmf_true[c])
          << '\n';
  }
  manifest.add_output("train.csv");
  manifest.add_output("target.csv");
  manifest.add_output("truth.csv");
  manifest.add_output("csmf_true.csv");
  manifest.write(out_path(opt, "manifest.json"));
  std::cout << "wrote " << n_train << " train and " << n_target
            << " target rows to " << opt.out_dir << "\n";
  return 0;
}

Eigen::MatrixXd load_csmf_draws(const std::string &path,
                                std::vector<std::string> &cause_names) {
  std::ifstream in(path);
  if (!in) throw vafm::schema_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw vafm::schema_error(path + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 3 || header[0] != "draw")
    throw vafm::schema_error(path + ": expected header draw,<cause columns>");
  cause_names.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        first = false;
        continue;
      }
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception &) {
        throw vafm::schema_error(path + ": row " + std::to_string(row) +
                                 ": '" + cell + "' is not a number");
      }
    }
    if (values.size() != cause_names.size())
      throw vafm::schema_error(path + ": row " + std::to_string(row) +
                               " has wrong column count");
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw vafm::schema_error(path + ": no draws");
  Eigen::MatrixXd draws(rows.size(), cause_names.size());
  for (std::size_t s = 0; s < rows.size(); ++s)
    for (std::size_t c = 0; c < cause_names.size(); ++c)
      draws(s, c) = rows[s][c];
  return draws;
}

int cmd_evaluate(Options &opt) {
  const auto truth_data = load_labeled(opt.truth_path);
  std::vector<std::string> cause_names;
  const Eigen::MatrixXd draws = load_csmf_draws(opt.draws_path, cause_names);
  const int C = static_cast<int>(cause_names.size());
  if (truth_data.C > C)
    throw vafm::schema_error("evaluate: truth has cause labels up to " +
                             std::to_string(truth_data.C) + " but " +
                             opt.draws_path + " has only " + std::to_string(C) +
                             " cause columns");
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(C);
  truth.head(truth_data.C) = vafm::empirical_csmf(truth_data.y, truth_data.C);
  Eigen::VectorXd actual_counts = truth * truth_data.n;

  prepare_out_dir(opt);
  std::vector<double> accs;
  std::vector<double> corrs;
  {
    auto out = std::ofstream(out_path(opt, "accuracy.csv"));
    if (!out) throw vafm::schema_error("cannot write accuracy.csv");
    out << "draw,csmf_accuracy,cause_count_correlation\n";
    for (Eigen::Index s = 0; s < draws.rows(); ++s) {
      const Eigen::VectorXd est = draws.row(s).transpose();
      const double acc = vafm::csmf_accuracy(truth, est);
      accs.push_back(acc);
      out << (s + 1) << ',' << vafm::format_double(acc) << ',';
      try {
        const double corr =
            vafm::cause_count_correlation(actual_counts, est * truth_data.n);
        corrs.push_back(corr);
        out << vafm::format_double(corr);
      } catch (const std::invalid_argument &) {
        out << "NA";
      }
      out << '\n';
    }
  }
  {
    auto out = std::ofstream(out_path(opt, "accuracy_summary.csv"));
    if (!out) throw vafm::schema_error("cannot write accuracy_summary.csv");
    out << "metric,mean,q2.5,q97.5\n";
    auto row = [&](const char *name, const std::vector<double> &v) {
      if (v.empty()) {
        out << name << ",NA,NA,NA\n";
        return;
      }
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      std::vector<double> copy = v;
      out << name << ',' << vafm::format_double(mean) << ','
          << vafm::format_double(vafm::detail::quantile(copy, 0.025)) << ','
          << vafm::format_double(vafm::detail::quantile(copy, 0.975)) << '\n';
    };
    row("csmf_accuracy", accs);
    row("cause_count_correlation", corrs);
  }
  vafm::RunManifest manifest("evaluate", 0);
  manifest.add_input(opt.truth_path);
  manifest.add_input(opt.draws_path);
  manifest.add_output("accuracy.csv");
  manifest.add_output("accuracy_summary.csv");
  manifest.write(out_path(opt, "manifest.json"));
  std::cout << "wrote accuracy for " << draws.rows() << " draws to "
            << opt.out_dir << "\n";
  return 0;
}

void write_sweep_csv(const std::string &path, const vafm::SweepResult &result,
                     const std::string &index_label) {
  std::ofstream out(path);
  if (!out) throw vafm::schema_error("cannot write " + path);
  out << "setting," << index_label << ",accuracy\n";
  for (const auto &entry : result.entries)
    for (std::size_t i = 0; i < entry.accuracies.size(); ++i)
      out << vafm::format_double(entry.setting) << ',' << (i + 1) << ','
          << vafm::format_double(entry.accuracies[i]) << '\n';
  for (const auto &entry : result.entries)
    out << vafm::format_double(entry.setting) << ",mean,"
        << vafm::format_double(entry.mean_accuracy) << '\n';
  out << vafm::format_double(result.best_setting) << ",best,"
      << vafm::format_double(result.entries[result.best_index].mean_accuracy)
      << '\n';
  if (!out) throw vafm::schema_error("failed writing " + path);
}

int cmd_cv(Options &opt) {
  vafm::validate(opt.cfg);
  const auto k_grid = parse_int_list(opt.k_grid_text, "--k-grid");
  const auto train = load_labeled(opt.train_path);
  const auto result = vafm::cross_validate_k(train, k_grid, opt.folds, opt.cfg);

  prepare_out_dir(opt);
  write_sweep_csv(out_path(opt, "cv_results.csv"), result, "fold");
  vafm::RunManifest manifest("cv", opt.cfg.seed);
  record_chain_config(manifest, opt.cfg);
  manifest.set_config("k_grid", opt.k_grid_text);
  manifest.set_config("folds", opt.folds);
  manifest.set_extra("best_k", static_cast<int>(result.best_setting));
  manifest.add_input(opt.train_path);
  manifest.add_output("cv_results.csv");
  manifest.write(out_path(opt, "manifest.json"));
  std::cout << "selected K = " << static_cast<int>(result.best_setting) << "\n";
  return 0;
}

int cmd_sweep(Options &opt) {
  vafm::validate(opt.cfg);
  const auto train = load_labeled(opt.train_path);
  const auto target = load_labeled(opt.target_path);
  vafm::SweepResult result;
  if (opt.sweep_param == "a") {
    result = vafm::sensitivity_sweep_a(
        train, target, parse_double_list(opt.grid_text, "--grid"), opt.cfg);
  } else if (opt.sweep_param == "r") {
    result = vafm::sensitivity_sweep_r(
        train, target, parse_int_list(opt.grid_text, "--grid"), opt.cfg);
  } else {
    throw vafm::config_error("sweep: --param must be a or r");
  }

  prepare_out_dir(opt);
  write_sweep_csv(out_path(opt, "sweep_results.csv"), result, "draw");
  vafm::RunManifest manifest("sweep", opt.cfg.seed);
  record_chain_config(manifest, opt.cfg);
  manifest.set_config("param", opt.sweep_param);
  manifest.set_config("grid", opt.grid_text);
  manifest.add_input(opt.train_path);
  manifest.add_input(opt.target_path);
  manifest.add_output("sweep_results.csv");
  manifest.write(out_path(opt, "manifest.json"));
  std::cout << "best " << opt.sweep_param << " = " << result.best_setting << "\n";
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Population cause-of-death estimation from binary verbal autopsy "
               "symptom data via a Bayesian probit factor model"};
  app.require_subcommand(1);

  Options opt;
  opt.cfg.threads = static_cast<int>(default_threads());
  std::map<std::string, std::function<int(Options &)>> runners;

  auto *fit = app.add_subcommand(
      "fit-predict", "Fit on labeled training data and predict target causes");
  fit->add_option("train", opt.train_path, "Labeled training CSV")->required();
  fit->add_option("target", opt.target_path, "Target CSV")->required();
  add_chain_flags(fit, opt, true);
  add_out_dir_flag(fit, opt);
  runners["fit-predict"] = cmd_fit_predict;

  auto *delta = app.add_subcommand(
      "delta", "Posterior symptom-cause association for every predictor");
  delta->add_option("train", opt.train_path, "Labeled training CSV")->required();
  add_chain_flags(delta, opt, true);
  add_out_dir_flag(delta, opt);
  delta
      ->add_option("--missing-threshold", opt.cfg.delta_missing_threshold,
                   "Exclude predictors whose missing rate exceeds this")
      ->capture_default_str();
  delta->add_flag("--per-cause", opt.cfg.per_cause_delta,
                  "Also write cause-vs-rest delta draws");
  delta
      ->add_option("--dirichlet-update", opt.dirichlet_update,
                   "Cause weight update: counts or proportions")
      ->check(CLI::IsMember({"counts", "proportions"}))
      ->capture_default_str();
  runners["delta"] = cmd_delta;

  auto *baseline = app.add_subcommand(
      "baseline", "Conditionally independent beta-Bernoulli comparator");
  baseline->add_option("train", opt.train_path, "Labeled training CSV")
      ->required();
  baseline->add_option("target", opt.target_path, "Target CSV")->required();
  add_chain_flags(baseline, opt, false);
  add_out_dir_flag(baseline, opt);
  baseline
      ->add_option("--mode", opt.mode,
                   "sampled: draw success probabilities; mean: plug in "
                   "posterior means deterministically")
      ->check(CLI::IsMember({"sampled", "mean"}))
      ->capture_default_str();
  runners["baseline"] = cmd_baseline;

  auto *simulate =
      app.add_subcommand("simulate", "Generate synthetic train/target data");
  simulate->add_option("--spec-json", opt.spec_json_path,
                       "JSON file with full generative settings");
  simulate->add_option("--n-train", opt.sim_n_train, "Training rows")
      ->capture_default_str();
  simulate->add_option("--n-target", opt.sim_n_target, "Target rows")
      ->capture_default_str();
  simulate->add_option("--p", opt.sim_p, "Predictors")->capture_default_str();
  simulate->add_option("--causes", opt.sim_c, "Causes")->capture_default_str();
  simulate->add_option("--k", opt.sim_k, "True factor count")
      ->capture_default_str();
  simulate->add_option("--csmf", opt.sim_csmf_text,
                       "True CSMF, comma-separated (default uniform)");
  simulate->add_option("--mu-scale", opt.sim_mu_scale, "Std dev of true means")
      ->capture_default_str();
  simulate
      ->add_option("--lambda-scale", opt.sim_lambda_scale,
                   "Std dev of true loadings")
      ->capture_default_str();
  simulate
      ->add_option("--missing-prob", opt.sim_missing_prob,
                   "Per-cell missing probability")
      ->capture_default_str();
  simulate->add_option("--seed", opt.cfg.seed, "Random seed")
      ->capture_default_str();
  add_out_dir_flag(simulate, opt);
  runners["simulate"] = cmd_simulate;

  auto *evaluate = app.add_subcommand(
      "evaluate", "Score CSMF draws against a labeled truth file");
  evaluate->add_option("truth", opt.truth_path, "Labeled target CSV")
      ->required();
  evaluate->add_option("csmf_draws", opt.draws_path, "csmf_draws.csv to score")
      ->required();
  add_out_dir_flag(evaluate, opt);
  runners["evaluate"] = cmd_evaluate;

  auto *cv = app.add_subcommand(
      "cv", "Cross-validate the number of latent factors");
  cv->add_option("train", opt.train_path, "Labeled training CSV")->required();
  add_chain_flags(cv, opt, true);
  add_out_dir_flag(cv, opt);
  cv->add_option("--k-grid", opt.k_grid_text, "Candidate K values, comma-separated")
      ->required();
  cv->add_option("--folds", opt.folds, "Fold count")->capture_default_str();
  cv->get_option("--iters")->default_str("1000");
  cv->get_option("--burn")->default_str("100");
  runners["cv"] = cmd_cv;

  auto *sweep = app.add_subcommand(
      "sweep", "Sensitivity sweep over the a prior or the Monte Carlo size R");
  sweep->add_option("train", opt.train_path, "Labeled training CSV")->required();
  sweep->add_option("target", opt.target_path, "Labeled target CSV for scoring")
      ->required();
  add_chain_flags(sweep, opt, true);
  add_out_dir_flag(sweep, opt);
  sweep->add_option("--param", opt.sweep_param, "a or r")->required();
  sweep->add_option("--grid", opt.grid_text, "Grid values, comma-separated")
      ->required();
  runners["sweep"] = cmd_sweep;

  // Config files are processed by the root parser only, so the option lives
  // here; keys go under a [subcommand] section. Fallthrough lets --config be
  // written after the subcommand name.
  app.set_config("--config", "",
                 "Key-value configuration file with a [subcommand] section");
  for (auto *sub : app.get_subcommands([](const CLI::App *) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 4;
  }

  // CV defaults to a shortened chain unless flags or a config file said
  // otherwise; the manifest records whatever was used.
  if (app.got_subcommand(cv)) {
    if (cv->count("--iters") == 0) opt.cfg.iterations = 1000;
    if (cv->count("--burn") == 0) opt.cfg.burn_in = 100;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return runners.at(name)(opt);
  } catch (const vafm::schema_error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const vafm::numeric_error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const vafm::config_error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
