#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "vafm/errors.hpp"
#include "vafm/random.hpp"

namespace vafm {

// Binary symptom matrix with a missingness mask. x_ij is meaningful only
// where m_ij = 0; masked cells are stored as -1 so accidental reads are
// conspicuous. y holds 1-based cause labels and is empty for target data.
struct SymptomDataset {
  int n = 0;
  int p = 0;
  int C = 0;
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> x;
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> m;
  std::vector<int> y;
  std::vector<std::string> ids;
  std::vector<std::string> predictor_names;
  std::vector<std::string> cause_names;

  bool labeled() const { return !y.empty(); }
  bool observed(int i, int j) const { return m(i, j) == 0; }
};

inline void validate(const SymptomDataset &d) {
  if (d.n <= 0) throw schema_error("dataset: n must be positive");
  if (d.p <= 0) throw schema_error("dataset: p must be positive");
  if (d.x.rows() != d.n || d.x.cols() != d.p || d.m.rows() != d.n ||
      d.m.cols() != d.p)
    throw schema_error("dataset: matrix dimensions disagree with (n, p)");
  if (static_cast<int>(d.ids.size()) != d.n)
    throw schema_error("dataset: id count disagrees with n");
  if (static_cast<int>(d.predictor_names.size()) != d.p)
    throw schema_error("dataset: predictor name count disagrees with p");
  for (int i = 0; i < d.n; ++i)
    for (int j = 0; j < d.p; ++j) {
      const int mij = d.m(i, j);
      const int xij = d.x(i, j);
      if (mij != 0 && mij != 1)
        throw schema_error("dataset: mask entries must be 0 or 1");
      if (mij == 1 ? xij != -1 : (xij != 0 && xij != 1))
        throw schema_error("dataset: x/mask inconsistency at row " +
                           std::to_string(i + 1) + ", column " +
                           d.predictor_names[j]);
    }
  if (d.labeled()) {
    if (static_cast<int>(d.y.size()) != d.n)
      throw schema_error("dataset: label count disagrees with n");
    if (d.C <= 0) throw schema_error("dataset: labeled data needs C > 0");
    for (int i = 0; i < d.n; ++i)
      if (d.y[i] < 1 || d.y[i] > d.C)
        throw schema_error("dataset: cause label " + std::to_string(d.y[i]) +
                           " out of range 1.." + std::to_string(d.C) +
                           " at row " + std::to_string(i + 1));
  }
}

// Column layout of the CSV on disk. An empty cause_col means the file
// carries no cause column at all; otherwise the column must exist and must
// be either filled on every row (labeled) or empty on every row (target).
struct CsvSchema {
  std::string id_col = "id";
  std::string cause_col = "cause";
  std::vector<std::string> symptom_cols;  // empty: every remaining column
  int num_causes = 0;                     // 0: infer as the max label seen
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  if (line.empty()) out.emplace_back();
  return out;
}

inline std::string strip(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool is_missing_token(const std::string &cell) {
  return cell.empty() || cell == "NA" || cell == ".";
}

}  // namespace detail

inline SymptomDataset load_csv(const std::string &path,
                               const CsvSchema &schema = CsvSchema{}) {
  std::ifstream in(path);
  if (!in) throw schema_error("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw schema_error(path + ": empty file");
  const auto header = detail::split_csv_line(line);

  int id_idx = -1, cause_idx = -1;
  std::vector<int> symptom_idx;
  std::vector<std::string> names;
  for (int k = 0; k < static_cast<int>(header.size()); ++k) {
    const std::string name = detail::strip(header[k]);
    if (name == schema.id_col) {
      if (id_idx >= 0) throw schema_error(path + ": duplicate id column");
      id_idx = k;
    } else if (!schema.cause_col.empty() && name == schema.cause_col) {
      if (cause_idx >= 0) throw schema_error(path + ": duplicate cause column");
      cause_idx = k;
    } else if (schema.symptom_cols.empty() ||
               std::find(schema.symptom_cols.begin(), schema.symptom_cols.end(),
                         name) != schema.symptom_cols.end()) {
      symptom_idx.push_back(k);
      names.push_back(name);
    }
  }
  if (id_idx < 0)
    throw schema_error(path + ": missing required column '" + schema.id_col + "'");
  if (!schema.cause_col.empty() && cause_idx < 0)
    throw schema_error(path + ": missing required column '" + schema.cause_col + "'");
  if (symptom_idx.empty())
    throw schema_error(path + ": p must be positive (no symptom columns)");

  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<std::vector<std::int8_t>> xs, ms;
  std::unordered_set<std::string> seen_ids;
  int labeled_rows = 0;
  const int p = static_cast<int>(symptom_idx.size());

  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (detail::strip(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw schema_error(path + ": row " + std::to_string(row) + " has " +
                         std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(header.size()));
    const std::string id = detail::strip(cells[id_idx]);
    if (id.empty())
      throw schema_error(path + ": row " + std::to_string(row) + " has an empty id");
    if (!seen_ids.insert(id).second)
      throw schema_error(path + ": duplicated id '" + id + "' at row " +
                         std::to_string(row));
    ids.push_back(id);

    if (cause_idx >= 0) {
      const std::string cell = detail::strip(cells[cause_idx]);
      if (cell.empty()) {
        labels.push_back(0);
      } else {
        int value = 0;
        try {
          std::size_t pos = 0;
          value = std::stoi(cell, &pos);
          if (pos != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception &) {
          throw schema_error(path + ": row " + std::to_string(row) +
                             ": cause '" + cell + "' is not an integer");
        }
        if (value < 1)
          throw schema_error(path + ": row " + std::to_string(row) +
                             ": cause label must be >= 1");
        labels.push_back(value);
        ++labeled_rows;
      }
    }

    std::vector<std::int8_t> xrow(p), mrow(p);
    for (int j = 0; j < p; ++j) {
      const std::string cell = detail::strip(cells[symptom_idx[j]]);
      if (detail::is_missing_token(cell)) {
        xrow[j] = -1;
        mrow[j] = 1;
      } else if (cell == "0" || cell == "1") {
        xrow[j] = static_cast<std::int8_t>(cell == "1");
        mrow[j] = 0;
      } else {
        throw schema_error(path + ": row " + std::to_string(row) +
                           ", column '" + names[j] + "': value '" + cell +
                           "' is not 0, 1, or a missing token");
      }
    }
    xs.push_back(std::move(xrow));
    ms.push_back(std::move(mrow));
  }

  const int n = static_cast<int>(ids.size());
  if (n == 0) throw schema_error(path + ": no data rows");
  if (cause_idx >= 0 && labeled_rows != 0 && labeled_rows != n)
    throw schema_error(path + ": mixed labeled and unlabeled rows (" +
                       std::to_string(labeled_rows) + " of " +
                       std::to_string(n) + " have a cause)");

  SymptomDataset d;
  d.n = n;
  d.p = p;
  d.ids = std::move(ids);
  d.predictor_names = std::move(names);
  d.x.resize(n, p);
  d.m.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) {
      d.x(i, j) = xs[i][j];
      d.m(i, j) = ms[i][j];
    }
  if (cause_idx >= 0 && labeled_rows == n) {
    d.y = std::move(labels);
    d.C = schema.num_causes > 0 ? schema.num_causes
                                : *std::max_element(d.y.begin(), d.y.end());
    d.cause_names.reserve(d.C);
    for (int c = 1; c <= d.C; ++c)
      d.cause_names.push_back("cause_" + std::to_string(c));
  } else {
    d.C = schema.num_causes;
  }
  validate(d);
  return d;
}

// Inverse of load_csv on (ids, x, m, y): always writes a cause column,
// empty for unlabeled rows, and "NA" for masked cells.
inline void write_csv(const SymptomDataset &d, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw schema_error("cannot write " + path);
  out << "id,cause";
  for (const auto &name : d.predictor_names) out << ',' << name;
  out << '\n';
  for (int i = 0; i < d.n; ++i) {
    out << d.ids[i] << ',';
    if (d.labeled()) out << d.y[i];
    for (int j = 0; j < d.p; ++j) {
      out << ',';
      if (d.m(i, j) == 1)
        out << "NA";
      else
        out << static_cast<int>(d.x(i, j));
    }
    out << '\n';
  }
  if (!out) throw schema_error("failed writing " + path);
}

inline Eigen::VectorXd missing_rate(const SymptomDataset &d) {
  Eigen::VectorXd rate(d.p);
  for (int j = 0; j < d.p; ++j) {
    int count = 0;
    for (int i = 0; i < d.n; ++i) count += d.m(i, j);
    rate[j] = static_cast<double>(count) / d.n;
  }
  return rate;
}

struct FoldAssignment {
  std::vector<int> fold_index;  // values in 1..F
};

namespace detail {

constexpr std::uint8_t kTagFolds = 11;
constexpr std::uint8_t kTagSynthetic = 12;

inline void shuffle_in_place(std::vector<int> &v, RandomStream &rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.uniform_below(i)]);
}

}  // namespace detail

// Balanced random F-way partition, a pure function of (seed, n, F).
inline FoldAssignment make_folds(int n, int F, std::uint64_t seed) {
  if (F < 2) throw config_error("make_folds: F must be at least 2");
  if (n < F) throw config_error("make_folds: n must be at least F");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  RandomStream rng(seed, make_stream_id(detail::kTagFolds, 0, 0));
  detail::shuffle_in_place(order, rng);
  FoldAssignment a;
  a.fold_index.assign(n, 0);
  for (int i = 0; i < n; ++i) a.fold_index[order[i]] = i % F + 1;
  return a;
}

// Stratified variant: within each cause the rows are shuffled and dealt
// round-robin, with the dealing cursor carried across causes so overall
// fold sizes stay within one of each other as well.
inline FoldAssignment make_stratified_folds(const std::vector<int> &y, int F,
                                            std::uint64_t seed) {
  const int n = static_cast<int>(y.size());
  if (F < 2) throw config_error("make_folds: F must be at least 2");
  if (n < F) throw config_error("make_folds: n must be at least F");
  const int C = *std::max_element(y.begin(), y.end());
  FoldAssignment a;
  a.fold_index.assign(n, 0);
  int cursor = 0;
  for (int c = 1; c <= C; ++c) {
    std::vector<int> rows;
    for (int i = 0; i < n; ++i)
      if (y[i] == c) rows.push_back(i);
    RandomStream rng(seed, make_stream_id(detail::kTagFolds, 1, c));
    detail::shuffle_in_place(rows, rng);
    for (int i : rows) a.fold_index[i] = cursor++ % F + 1;
  }
  return a;
}

// Ground-truth generative settings for synthetic data: the factor model's
// own data-generating process plus MCAR masking.
struct SyntheticSpec {
  int n = 0;
  int p = 0;
  int C = 0;
  int K = 0;
  Eigen::VectorXd csmf_true;             // C
  Eigen::MatrixXd mu_true;               // C×p
  std::vector<Eigen::MatrixXd> lambda_true;  // C entries, each p×K
  double missing_prob = 0.0;
  std::uint64_t seed = 0;
};

inline void validate(const SyntheticSpec &s) {
  if (s.n <= 0 || s.p <= 0 || s.C <= 0 || s.K < 0)
    throw config_error("synthetic spec: n, p, C must be positive and K >= 0");
  if (s.csmf_true.size() != s.C)
    throw config_error("synthetic spec: csmf_true must have C entries");
  if (s.csmf_true.minCoeff() < 0.0 ||
      std::abs(s.csmf_true.sum() - 1.0) > 1e-9)
    throw config_error("synthetic spec: csmf_true must be a probability vector");
  if (s.mu_true.rows() != s.C || s.mu_true.cols() != s.p)
    throw config_error("synthetic spec: mu_true must be C×p");
  if (static_cast<int>(s.lambda_true.size()) != s.C)
    throw config_error("synthetic spec: lambda_true must have C matrices");
  for (const auto &l : s.lambda_true)
    if (l.rows() != s.p || l.cols() != s.K)
      throw config_error("synthetic spec: each lambda_true matrix must be p×K");
  if (!(s.missing_prob >= 0.0 && s.missing_prob < 1.0))
    throw config_error("synthetic spec: missing_prob must be in [0, 1)");
}

// Draws a labeled dataset from the model: y ~ Cat(csmf), eta ~ N(0, I_K),
// z = mu_y + Lambda_y eta + eps, x = 1(z > 0), then MCAR masking. One
// stream per row keeps the output independent of evaluation order.
inline SymptomDataset generate_synthetic(const SyntheticSpec &s) {
  validate(s);
  SymptomDataset d;
  d.n = s.n;
  d.p = s.p;
  d.C = s.C;
  d.x.resize(s.n, s.p);
  d.m.resize(s.n, s.p);
  d.y.resize(s.n);
  d.ids.reserve(s.n);
  for (int i = 0; i < s.n; ++i) d.ids.push_back(std::to_string(i + 1));
  d.predictor_names.reserve(s.p);
  for (int j = 0; j < s.p; ++j)
    d.predictor_names.push_back("s" + std::to_string(j + 1));
  d.cause_names.reserve(s.C);
  for (int c = 1; c <= s.C; ++c)
    d.cause_names.push_back("cause_" + std::to_string(c));

  Eigen::VectorXd cum(s.C);
  double acc = 0.0;
  for (int c = 0; c < s.C; ++c) {
    acc += s.csmf_true[c];
    cum[c] = acc;
  }

  for (int i = 0; i < s.n; ++i) {
    RandomStream rng(s.seed, make_stream_id(detail::kTagSynthetic, 0, i));
    const double u = rng.uniform();
    int c = 0;
    while (c + 1 < s.C && u > cum[c]) ++c;
    d.y[i] = c + 1;

    Eigen::VectorXd eta(s.K);
    for (int k = 0; k < s.K; ++k) eta[k] = rng.normal();
    const Eigen::VectorXd shift = s.lambda_true[c] * eta;
    for (int j = 0; j < s.p; ++j) {
      const double z = s.mu_true(c, j) + shift[j] + rng.normal();
      d.x(i, j) = static_cast<std::int8_t>(z > 0.0);
      d.m(i, j) = 0;
    }
    for (int j = 0; j < s.p; ++j)
      if (rng.uniform() < s.missing_prob) {
        d.x(i, j) = -1;
        d.m(i, j) = 1;
      }
  }
  validate(d);
  return d;
}

// Strips labels, turning a labeled dataset into prediction input.
inline SymptomDataset drop_labels(const SymptomDataset &d) {
  SymptomDataset out = d;
  out.y.clear();
  return out;
}

// Row subset preserving order; the basis for CV fold splits.
inline SymptomDataset subset_rows(const SymptomDataset &d,
                                  const std::vector<int> &rows) {
  if (rows.empty()) throw config_error("subset_rows: empty selection");
  SymptomDataset out;
  out.n = static_cast<int>(rows.size());
  out.p = d.p;
  out.C = d.C;
  out.predictor_names = d.predictor_names;
  out.cause_names = d.cause_names;
  out.x.resize(out.n, d.p);
  out.m.resize(out.n, d.p);
  out.ids.reserve(rows.size());
  if (d.labeled()) out.y.reserve(rows.size());
  for (int r = 0; r < out.n; ++r) {
    const int i = rows[r];
    if (i < 0 || i >= d.n) throw config_error("subset_rows: index out of range");
    out.x.row(r) = d.x.row(i);
    out.m.row(r) = d.m.row(i);
    out.ids.push_back(d.ids[i]);
    if (d.labeled()) out.y.push_back(d.y[i]);
  }
  return out;
}

}  // namespace vafm
