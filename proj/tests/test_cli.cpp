#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "proc.hpp"
#include "vafm/dataset.hpp"

namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using testproc::run_cli;
using testproc::slurp;
using testproc::spit;

namespace {

nlohmann::json read_json(const fs::path &path) {
  return nlohmann::json::parse(slurp(path));
}

// data rows of a CSV, header dropped
std::vector<std::vector<std::string>> csv_rows(const fs::path &path) {
  std::vector<std::vector<std::string>> rows;
  const std::string text = slurp(path);
  std::size_t start = 0;
  bool header = true;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::size_t c = 0;
    while (true) {
      const std::size_t comma = line.find(',', c);
      cells.push_back(line.substr(c, comma - c));
      if (comma == std::string::npos) break;
      c = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string first_line(const fs::path &path) {
  const std::string text = slurp(path);
  return text.substr(0, text.find('\n'));
}

// one simulated data directory shared by the whole suite
const fs::path &sim_dir() {
  static fs::path dir = [] {
    const fs::path d = testproc::fresh_dir("simshared");
    const auto r = run_cli(
        "simulate --n-train 60 --n-target 40 --p 4 --causes 2 --k 1 "
        "--missing-prob 0.2 --seed 5 --out-dir sim",
        d);
    REQUIRE(r.code == 0);
    return d / "sim";
  }();
  return dir;
}

}  // namespace

TEST_CASE("simulate writes a coherent file set", "[cli]") {
  REQUIRE_FALSE(testproc::cli_path().empty());
  const fs::path dir = testproc::fresh_dir("sim");
  const auto r = run_cli(
      "simulate --n-train 60 --n-target 40 --p 4 --causes 2 --k 1 "
      "--missing-prob 0.2 --seed 5 --out-dir sim",
      dir);
  REQUIRE(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("wrote 60 train and 40 target rows"));

  const auto train = vafm::load_csv((dir / "sim/train.csv").string());
  CHECK(train.n == 60);
  CHECK(train.p == 4);
  CHECK(train.labeled());
  const auto target = vafm::load_csv((dir / "sim/target.csv").string());
  CHECK(target.n == 40);
  CHECK_FALSE(target.labeled());
  const auto truth = vafm::load_csv((dir / "sim/truth.csv").string());
  CHECK(truth.labeled());
  CHECK(truth.ids == target.ids);
  CHECK_THAT(slurp(dir / "sim/train.csv"), ContainsSubstring("NA"));

  CHECK(first_line(dir / "sim/csmf_true.csv") == "cause,probability");
  const auto csmf = csv_rows(dir / "sim/csmf_true.csv");
  REQUIRE(csmf.size() == 2);
  CHECK(csmf[0][0] == "cause_1");
  CHECK(csmf[0][1] == "0.5");

  const auto manifest = read_json(dir / "sim/manifest.json");
  CHECK(manifest.at("command") == "simulate");
  CHECK(manifest.at("config").at("n_train") == 60);

  SECTION("same seed same bytes, new seed new data") {
    const auto again = run_cli(
        "simulate --n-train 60 --n-target 40 --p 4 --causes 2 --k 1 "
        "--missing-prob 0.2 --seed 5 --out-dir sim2",
        dir);
    REQUIRE(again.code == 0);
    CHECK(slurp(dir / "sim2/train.csv") == slurp(dir / "sim/train.csv"));

    const auto moved = run_cli(
        "simulate --n-train 60 --n-target 40 --p 4 --causes 2 --k 1 "
        "--missing-prob 0.2 --seed 6 --out-dir sim3",
        dir);
    REQUIRE(moved.code == 0);
    CHECK(slurp(dir / "sim3/train.csv") != slurp(dir / "sim/train.csv"));
  }

  SECTION("full generative spec from json") {
    spit(dir / "spec.json", R"({
      "n_train": 8, "n_target": 4, "p": 2, "C": 2, "K": 0,
      "csmf_true": [0.6, 0.4],
      "mu_true": [[0.5, -0.5], [-0.5, 0.5]]
    })");
    const auto r2 = run_cli("simulate --spec-json spec.json --out-dir js", dir);
    REQUIRE(r2.code == 0);
    const auto t = vafm::load_csv((dir / "js/train.csv").string());
    CHECK(t.n == 8);
    CHECK(t.p == 2);
    const auto m = read_json(dir / "js/manifest.json");
    REQUIRE(m.at("inputs").contains("spec.json"));
    CHECK(m.at("inputs").at("spec.json").get<std::string>().size() == 16);
  }

  SECTION("spec shape errors are config errors") {
    spit(dir / "bad.json", R"({
      "n_train": 8, "n_target": 4, "p": 2, "C": 2, "K": 0,
      "csmf_true": [0.6, 0.4], "mu_true": [[0.5, -0.5]]
    })");
    CHECK(run_cli("simulate --spec-json bad.json --out-dir b1", dir).code == 4);

    spit(dir / "short.json", R"({"n_target": 4, "p": 2})");
    CHECK(run_cli("simulate --spec-json short.json --out-dir b2", dir).code == 2);
  }
}

TEST_CASE("fit-predict end to end", "[cli]") {
  const fs::path dir = sim_dir();
  const std::string chain =
      "--iters 20 --burn 5 --thin 5 --k 1 --r 10 --seed 7";
  const auto r = run_cli(
      "fit-predict train.csv target.csv " + chain + " --out-dir fit", dir);
  REQUIRE(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("wrote 4 draws"));

  CHECK(first_line(dir / "fit/csmf_draws.csv") == "draw,cause_1,cause_2");
  const auto rows = csv_rows(dir / "fit/csmf_draws.csv");
  REQUIRE(rows.size() == 4);
  for (const auto &row : rows) {
    REQUIRE(row.size() == 3);
    CHECK_THAT(std::stod(row[1]) + std::stod(row[2]), WithinAbs(1.0, 1e-12));
  }
  CHECK(first_line(dir / "fit/individual_probs.csv") ==
        "draw,id,cause_1,cause_2");
  CHECK(csv_rows(dir / "fit/individual_probs.csv").size() == 4 * 40);
  CHECK(first_line(dir / "fit/summary.csv") == "cause,mean,q2.5,q97.5");
  CHECK(csv_rows(dir / "fit/summary.csv").size() == 2);

  const auto manifest = read_json(dir / "fit/manifest.json");
  CHECK(manifest.at("command") == "fit-predict");
  CHECK(manifest.at("seed") == 7);
  CHECK(manifest.at("model") == "factor");
  CHECK(manifest.at("config").at("iterations") == 20);
  CHECK(manifest.at("config").at("K") == 1);
  CHECK(manifest.at("config").at("R") == 10);
  REQUIRE(manifest.at("inputs").size() == 2);
  for (const auto &[path, digest] : manifest.at("inputs").items())
    CHECK(digest.get<std::string>().size() == 16);
  CHECK(manifest.at("outputs").size() == 3);
  CHECK(manifest.contains("start_time"));
  CHECK(manifest.contains("end_time"));

  SECTION("byte identical across reruns and thread counts") {
    const auto rerun = run_cli(
        "fit-predict train.csv target.csv " + chain + " --out-dir fit2", dir);
    REQUIRE(rerun.code == 0);
    CHECK(slurp(dir / "fit2/csmf_draws.csv") == slurp(dir / "fit/csmf_draws.csv"));
    CHECK(slurp(dir / "fit2/individual_probs.csv") ==
          slurp(dir / "fit/individual_probs.csv"));

    const auto pooled = run_cli(
        "fit-predict train.csv target.csv " + chain + " --threads 2 --out-dir fit3",
        dir);
    REQUIRE(pooled.code == 0);
    CHECK(slurp(dir / "fit3/csmf_draws.csv") == slurp(dir / "fit/csmf_draws.csv"));
    CHECK(read_json(dir / "fit3/manifest.json").at("config").at("threads") == 2);
  }

  SECTION("factor-free model runs") {
    const auto flat = run_cli(
        "fit-predict train.csv target.csv --iters 10 --burn 5 --thin 5 --k 0 "
        "--r 1 --seed 7 --out-dir fit0",
        dir);
    CHECK(flat.code == 0);
  }

  SECTION("config file fills gaps, flags win") {
    spit(dir / "chain.ini",
         "[fit-predict]\niters=30\nburn=5\nthin=5\nk=0\nr=5\nseed=9\n");
    const auto cfg = run_cli(
        "fit-predict train.csv target.csv --config chain.ini --seed 11 "
        "--out-dir fitc",
        dir);
    REQUIRE(cfg.code == 0);
    const auto m = read_json(dir / "fitc/manifest.json");
    CHECK(m.at("config").at("iterations") == 30);
    CHECK(m.at("config").at("K") == 0);
    CHECK(m.at("seed") == 11);

    CHECK(run_cli("fit-predict train.csv target.csv --config nosuch.ini", dir)
              .code == 4);
  }

  SECTION("environment variables are honored") {
    const auto enved = run_cli(
        "fit-predict train.csv target.csv --iters 10 --burn 5 --thin 5 --k 0 "
        "--r 1 --seed 7",
        dir, "VAFM_OUT_DIR=envout VAFM_THREADS=2");
    REQUIRE(enved.code == 0);
    CHECK(fs::exists(dir / "envout/csmf_draws.csv"));
    CHECK(read_json(dir / "envout/manifest.json").at("config").at("threads") == 2);
  }

  SECTION("failure modes exit distinctly") {
    CHECK(run_cli("fit-predict target.csv target.csv " + chain, dir).code == 2);
    CHECK_THAT(run_cli("fit-predict target.csv target.csv " + chain, dir).err,
               ContainsSubstring("expected a labeled file"));
    CHECK(run_cli("fit-predict absent.csv target.csv " + chain, dir).code == 2);
    CHECK(run_cli("fit-predict train.csv target.csv --iters 0", dir).code == 4);
    CHECK(run_cli("fit-predict train.csv target.csv --bogus 1", dir).code == 4);
    CHECK(run_cli("", dir).code == 4);
    CHECK(run_cli("--help", dir).code == 0);
  }
}

TEST_CASE("delta subcommand", "[cli]") {
  const fs::path dir = sim_dir();
  const auto r = run_cli(
      "delta train.csv --iters 20 --burn 5 --thin 5 --k 0 --seed 3 --out-dir del",
      dir);
  REQUIRE(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("wrote 4 delta draws"));
  CHECK(first_line(dir / "del/delta_draws.csv") == "draw,s1,s2,s3,s4");
  CHECK(csv_rows(dir / "del/delta_draws.csv").size() == 4);
  CHECK(first_line(dir / "del/ranking.csv") == "rank,predictor,mean,q2.5,q97.5");
  CHECK(csv_rows(dir / "del/ranking.csv").size() == 4);
  CHECK(first_line(dir / "del/summary.csv") == "predictor,mean,q2.5,q97.5");

  const auto manifest = read_json(dir / "del/manifest.json");
  CHECK(manifest.at("command") == "delta");
  CHECK(manifest.at("config").at("per_cause") == false);
  CHECK(manifest.at("config").at("dirichlet_update") == "counts");
  CHECK_THAT(manifest.at("config").at("missing_threshold").get<double>(),
             WithinAbs(0.05, 1e-12));

  SECTION("per cause tables and the proportion update") {
    const auto pc = run_cli(
        "delta train.csv --iters 20 --burn 5 --thin 5 --k 0 --seed 3 "
        "--per-cause --dirichlet-update proportions --missing-threshold 0.5 "
        "--out-dir delpc",
        dir);
    REQUIRE(pc.code == 0);
    CHECK(first_line(dir / "delpc/delta_cause_draws.csv") ==
          "draw,cause,s1,s2,s3,s4");
    CHECK(csv_rows(dir / "delpc/delta_cause_draws.csv").size() == 4 * 2);
    CHECK(first_line(dir / "delpc/ranking_per_cause.csv") ==
          "cause,rank,predictor,mean");
    const auto m = read_json(dir / "delpc/manifest.json");
    CHECK(m.at("config").at("dirichlet_update") == "proportions");
    CHECK(m.at("outputs").size() == 5);
  }

  SECTION("rejections") {
    CHECK(run_cli("delta train.csv --dirichlet-update bogus", dir).code == 4);
    CHECK(run_cli("delta target.csv --iters 5 --burn 1", dir).code == 2);
  }
}

TEST_CASE("baseline subcommand", "[cli]") {
  const fs::path dir = sim_dir();
  const auto r = run_cli(
      "baseline train.csv target.csv --iters 20 --thin 5 --seed 5 --out-dir base",
      dir);
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(dir / "base/csmf_draws.csv");
  REQUIRE(rows.size() == 4);
  for (const auto &row : rows)
    CHECK_THAT(std::stod(row[1]) + std::stod(row[2]), WithinAbs(1.0, 1e-12));
  const auto manifest = read_json(dir / "base/manifest.json");
  CHECK(manifest.at("model") == "ci");
  CHECK(manifest.at("config").at("mode") == "sampled");

  SECTION("mean mode ignores the seed entirely") {
    const auto m1 = run_cli(
        "baseline train.csv target.csv --mode mean --seed 1 --out-dir bm1", dir);
    const auto m2 = run_cli(
        "baseline train.csv target.csv --mode mean --seed 99 --out-dir bm2", dir);
    REQUIRE(m1.code == 0);
    REQUIRE(m2.code == 0);
    CHECK_THAT(m1.out, ContainsSubstring("wrote 1 draws"));
    CHECK(slurp(dir / "bm1/csmf_draws.csv") == slurp(dir / "bm2/csmf_draws.csv"));
    CHECK(slurp(dir / "bm1/individual_probs.csv") ==
          slurp(dir / "bm2/individual_probs.csv"));
  }

  SECTION("rejections") {
    CHECK(run_cli("baseline train.csv target.csv --mode bogus", dir).code == 4);
    // factor flags belong to the factor model only
    CHECK(run_cli("baseline train.csv target.csv --k 1", dir).code == 4);
  }
}

TEST_CASE("evaluate subcommand", "[cli]") {
  const fs::path dir = sim_dir();
  REQUIRE(fs::exists(dir / "fit/csmf_draws.csv"));
  const auto r = run_cli("evaluate truth.csv fit/csmf_draws.csv --out-dir eval", dir);
  REQUIRE(r.code == 0);
  CHECK(first_line(dir / "eval/accuracy.csv") ==
        "draw,csmf_accuracy,cause_count_correlation");
  const auto rows = csv_rows(dir / "eval/accuracy.csv");
  REQUIRE(rows.size() == 4);
  for (const auto &row : rows) {
    const double acc = std::stod(row[1]);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
  const auto summary = csv_rows(dir / "eval/accuracy_summary.csv");
  REQUIRE(summary.size() == 2);
  CHECK(summary[0][0] == "csmf_accuracy");
  CHECK(summary[1][0] == "cause_count_correlation");

  SECTION("degenerate count correlation becomes NA") {
    std::string truth = "id,cause,s1\n";
    for (int i = 0; i < 10; ++i)
      truth += "a" + std::to_string(i) + "," + (i < 5 ? "1" : "2") + ",0\n";
    spit(dir / "balanced.csv", truth);
    spit(dir / "two.csv", "draw,cause_1,cause_2\n1,1,0\n2,0.5,0.5\n");
    const auto na = run_cli("evaluate balanced.csv two.csv --out-dir evna", dir);
    REQUIRE(na.code == 0);
    const auto out = csv_rows(dir / "evna/accuracy.csv");
    REQUIRE(out.size() == 2);
    CHECK(out[0][2] == "NA");
    CHECK(out[1][2] == "NA");
    const auto s = csv_rows(dir / "evna/accuracy_summary.csv");
    CHECK(s[1][1] == "NA");
  }

  SECTION("truth with fewer causes than the draws is padded") {
    spit(dir / "mono.csv", "id,cause,s1\na,1,0\nb,1,1\nc,1,0\n");
    spit(dir / "two2.csv", "draw,cause_1,cause_2\n1,1,0\n2,0.5,0.5\n");
    const auto pad = run_cli("evaluate mono.csv two2.csv --out-dir evpad", dir);
    REQUIRE(pad.code == 0);
    const auto out = csv_rows(dir / "evpad/accuracy.csv");
    CHECK_THAT(std::stod(out[0][1]), WithinAbs(1.0, 1e-12));
    CHECK_THAT(std::stod(out[1][1]), WithinAbs(0.5, 1e-12));
    CHECK(out[0][2] == "1");
  }

  SECTION("rejections") {
    spit(dir / "three.csv", "id,cause,s1\na,1,0\nb,2,1\nc,3,0\n");
    const auto wide = run_cli("evaluate three.csv fit/csmf_draws.csv", dir);
    CHECK(wide.code == 2);
    CHECK_THAT(wide.err, ContainsSubstring("has only 2 cause columns"));
    spit(dir / "badhdr.csv", "x,cause_1\n1,0.5\n");
    CHECK(run_cli("evaluate truth.csv badhdr.csv", dir).code == 2);
    spit(dir / "empty_draws.csv", "draw,cause_1,cause_2\n");
    CHECK(run_cli("evaluate truth.csv empty_draws.csv", dir).code == 2);
  }
}

TEST_CASE("cv subcommand", "[cli]") {
  const fs::path dir = testproc::fresh_dir("cv");
  REQUIRE(run_cli("simulate --n-train 60 --n-target 10 --p 3 --causes 2 --k 0 "
                  "--seed 21 --out-dir data",
                  dir).code == 0);
  const auto r = run_cli(
      "cv data/train.csv --k-grid 0,1 --folds 2 --iters 10 --burn 5 --thin 5 "
      "--r 5 --seed 13 --out-dir cv1",
      dir);
  REQUIRE(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("selected K = "));
  const int best = std::stoi(r.out.substr(r.out.find("= ") + 2));
  CHECK((best == 0 || best == 1));
  const auto manifest = read_json(dir / "cv1/manifest.json");
  CHECK(manifest.at("best_k") == best);
  CHECK(manifest.at("config").at("k_grid") == "0,1");
  CHECK(manifest.at("config").at("folds") == 2);
  const std::string results = slurp(dir / "cv1/cv_results.csv");
  CHECK_THAT(results, ContainsSubstring(",best,"));
  CHECK_THAT(results, ContainsSubstring(",mean,"));
  CHECK(first_line(dir / "cv1/cv_results.csv") == "setting,fold,accuracy");

  SECTION("byte identical rerun") {
    const auto again = run_cli(
        "cv data/train.csv --k-grid 0,1 --folds 2 --iters 10 --burn 5 --thin 5 "
        "--r 5 --seed 13 --out-dir cv2",
        dir);
    REQUIRE(again.code == 0);
    CHECK(slurp(dir / "cv2/cv_results.csv") == slurp(dir / "cv1/cv_results.csv"));
    CHECK(again.out == r.out);
  }

  SECTION("defaults to the shortened chain") {
    const auto quick = run_cli(
        "cv data/train.csv --k-grid 0 --folds 2 --thin 100 --r 1 --seed 13 "
        "--out-dir cv3",
        dir);
    REQUIRE(quick.code == 0);
    const auto m = read_json(dir / "cv3/manifest.json");
    CHECK(m.at("config").at("iterations") == 1000);
    CHECK(m.at("config").at("burn_in") == 100);
  }

  SECTION("a cause too rare to stratify fails loudly") {
    spit(dir / "rare.csv",
         "id,cause,s1,s2\na,1,0,1\nb,1,1,1\nc,1,0,0\nd,1,1,0\ne,1,0,1\nf,2,1,0\n");
    const auto rare = run_cli(
        "cv rare.csv --k-grid 0 --folds 3 --iters 5 --burn 1 --thin 1 --r 1", dir);
    CHECK(rare.code == 2);
    CHECK_THAT(rare.err, ContainsSubstring("stratified"));
  }

  SECTION("grid parse failure") {
    CHECK(run_cli("cv data/train.csv --k-grid 1,x --folds 2", dir).code == 4);
  }
}

TEST_CASE("sweep subcommand", "[cli]") {
  const fs::path dir = testproc::fresh_dir("sweep");
  REQUIRE(run_cli("simulate --n-train 50 --n-target 30 --p 3 --causes 2 --k 0 "
                  "--seed 23 --out-dir data",
                  dir).code == 0);
  const std::string chain = "--iters 10 --burn 5 --thin 5 --seed 17";

  const auto ra = run_cli("sweep data/train.csv data/truth.csv --param a "
                          "--grid 0.5,2 --k 1 --r 5 " + chain + " --out-dir swa",
                          dir);
  REQUIRE(ra.code == 0);
  CHECK_THAT(ra.out, ContainsSubstring("best a = "));
  CHECK(first_line(dir / "swa/sweep_results.csv") == "setting,draw,accuracy");
  CHECK_THAT(slurp(dir / "swa/sweep_results.csv"), ContainsSubstring(",best,"));
  const auto manifest = read_json(dir / "swa/manifest.json");
  CHECK(manifest.at("config").at("param") == "a");
  CHECK(manifest.at("config").at("grid") == "0.5,2");

  SECTION("replicate grid ties resolve to the cheaper setting") {
    // K = 0 makes R inert, so both points score identically
    const auto rr = run_cli("sweep data/train.csv data/truth.csv --param r "
                            "--grid 200,50 --k 0 " + chain + " --out-dir swr",
                            dir);
    REQUIRE(rr.code == 0);
    CHECK_THAT(rr.out, ContainsSubstring("best r = 50"));
  }

  SECTION("rejections") {
    CHECK(run_cli("sweep data/train.csv data/truth.csv --param x --grid 1", dir)
              .code == 4);
    CHECK(run_cli("sweep data/train.csv data/target.csv --param a --grid 0.5 " +
                  chain, dir).code == 2);
  }
}
