#include "confattr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "confattr/error.hpp"

namespace confattr {

std::string_view to_string(CovariateRole role) {
  switch (role) {
    case CovariateRole::Instrument: return "instrument";
    case CovariateRole::Confounder: return "confounder";
    case CovariateRole::EffectModifier: return "effect_modifier";
    case CovariateRole::OutcomeOnly: return "outcome_only";
    case CovariateRole::Noise: return "noise";
    case CovariateRole::Unknown: return "unknown";
  }
  return "unknown";
}

CovariateRole role_from_string(std::string_view name) {
  for (auto r : {CovariateRole::Instrument, CovariateRole::Confounder, CovariateRole::EffectModifier,
                 CovariateRole::OutcomeOnly, CovariateRole::Noise, CovariateRole::Unknown}) {
    if (to_string(r) == name) return r;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown covariate role '" + std::string(name) + "'");
}

Dataset::Dataset(Eigen::MatrixXd x, Eigen::VectorXd a, Eigen::VectorXd y, std::vector<std::string> names,
                 std::optional<std::vector<CovariateRole>> roles, std::optional<GroundTruth> truth)
    : x_(std::move(x)),
      a_(std::move(a)),
      y_(std::move(y)),
      names_(std::move(names)),
      roles_(std::move(roles)),
      truth_(std::move(truth)) {
  const auto n = x_.rows();
  if (n < 2) throw Error(ErrorCode::InvalidDataset, "need at least 2 rows");
  if (x_.cols() < 1) throw Error(ErrorCode::InvalidDataset, "need at least 1 covariate");
  if (a_.size() != n || y_.size() != n) {
    throw Error(ErrorCode::LengthMismatch, "treatment/outcome length differs from covariate rows");
  }
  if (names_.size() != static_cast<std::size_t>(x_.cols())) {
    throw Error(ErrorCode::LengthMismatch, "names length differs from covariate count");
  }
  std::set<std::string> seen(names_.begin(), names_.end());
  if (seen.size() != names_.size()) throw Error(ErrorCode::InvalidDataset, "covariate names must be unique");
  if (roles_ && roles_->size() != names_.size()) {
    throw Error(ErrorCode::LengthMismatch, "roles length differs from covariate count");
  }
  if (!x_.allFinite() || !y_.allFinite()) throw Error(ErrorCode::InvalidDataset, "non-finite covariate or outcome");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a_[i] != 0.0 && a_[i] != 1.0) {
      throw Error(ErrorCode::NonBinaryTreatment, "treatment value at row " + std::to_string(i) + " is not 0/1");
    }
    if (a_[i] == 1.0) ++n_treated_;
  }
  if (n_treated_ == 0 || n_treated_ == static_cast<std::size_t>(n)) {
    throw Error(ErrorCode::EmptyArm, "both treatment arms must be non-empty");
  }
  if (truth_) {
    const auto& t = *truth_;
    if (t.tau.size() != n || t.propensity.size() != n || t.mu0.size() != n || t.mu1.size() != n) {
      throw Error(ErrorCode::LengthMismatch, "ground truth length differs from rows");
    }
  }
}

std::vector<std::size_t> Dataset::arm_rows(int arm) const {
  std::vector<std::size_t> rows;
  rows.reserve(arm == 1 ? n_treated_ : n() - n_treated_);
  for (std::size_t i = 0; i < n(); ++i) {
    if (treated(i) == (arm == 1)) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> Dataset::indices_with_role(CovariateRole role) const {
  std::vector<std::size_t> out;
  if (!roles_) return out;
  for (std::size_t j = 0; j < roles_->size(); ++j) {
    if ((*roles_)[j] == role) out.push_back(j);
  }
  return out;
}

Dataset Dataset::with_roles(std::vector<CovariateRole> roles) const {
  return Dataset(x_, a_, y_, names_, std::move(roles), truth_);
}

Dataset Dataset::select_covariates(const std::vector<std::size_t>& keep) const {
  Eigen::MatrixXd x(x_.rows(), static_cast<Eigen::Index>(keep.size()));
  std::vector<std::string> names;
  std::optional<std::vector<CovariateRole>> roles;
  if (roles_) roles.emplace();
  for (std::size_t c = 0; c < keep.size(); ++c) {
    if (keep[c] >= p()) throw Error(ErrorCode::WidthMismatch, "covariate index out of range");
    x.col(static_cast<Eigen::Index>(c)) = x_.col(static_cast<Eigen::Index>(keep[c]));
    names.push_back(names_[keep[c]]);
    if (roles) roles->push_back((*roles_)[keep[c]]);
  }
  return Dataset(std::move(x), a_, y_, std::move(names), std::move(roles), truth_);
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(m, x_.cols());
  Eigen::VectorXd a(m), y(m);
  std::optional<GroundTruth> truth;
  if (truth_) {
    truth.emplace();
    truth->tau.resize(m);
    truth->propensity.resize(m);
    truth->mu0.resize(m);
    truth->mu1.resize(m);
  }
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
    if (i >= x_.rows()) throw Error(ErrorCode::LengthMismatch, "row index out of range");
    x.row(r) = x_.row(i);
    a[r] = a_[i];
    y[r] = y_[i];
    if (truth) {
      truth->tau[r] = truth_->tau[i];
      truth->propensity[r] = truth_->propensity[i];
      truth->mu0[r] = truth_->mu0[i];
      truth->mu1[r] = truth_->mu1[i];
    }
  }
  return Dataset(std::move(x), std::move(a), std::move(y), names_, roles_, std::move(truth));
}

Eigen::MatrixXd subset_columns(const Eigen::MatrixXd& x, const CoalitionMask& mask) {
  if (mask.width() != static_cast<std::size_t>(x.cols())) {
    throw Error(ErrorCode::WidthMismatch, "mask width " + std::to_string(mask.width()) + " != p " +
                                              std::to_string(x.cols()));
  }
  const auto members = mask.indices();
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(members.size()));
  for (std::size_t c = 0; c < members.size(); ++c) {
    out.col(static_cast<Eigen::Index>(c)) = x.col(static_cast<Eigen::Index>(members[c]));
  }
  return out;
}

Eigen::MatrixXd subset_columns(const Dataset& ds, const CoalitionMask& mask) { return subset_columns(ds.x(), mask); }

Dataset standardize(const Dataset& ds, const std::vector<std::size_t>& columns) {
  std::vector<std::size_t> cols = columns;
  if (cols.empty()) {
    cols.resize(ds.p());
    for (std::size_t j = 0; j < ds.p(); ++j) cols[j] = j;
  }
  Eigen::MatrixXd x = ds.x();
  const double n = static_cast<double>(ds.n());
  for (std::size_t j : cols) {
    if (j >= ds.p()) throw Error(ErrorCode::WidthMismatch, "standardize column out of range");
    auto col = x.col(static_cast<Eigen::Index>(j));
    const double mean = col.sum() / n;
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / n);
    if (sd > 0.0) col /= sd;
  }
  return Dataset(std::move(x), ds.a(), ds.y(), ds.names(), ds.roles(), ds.truth());
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan";
}

std::optional<double> parse_number(const std::string& cell) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::size_t column_index(const std::vector<std::string>& header, std::string_view name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::MissingColumn, "column '" + std::string(name) + "' not found");
  return static_cast<std::size_t>(it - header.begin());
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace

CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (!have_header) {
      if (!cells.empty() && cells[0].size() >= 3 && cells[0].compare(0, 3, "\xEF\xBB\xBF") == 0) {
        cells[0] = cells[0].substr(3);
      }
      for (auto& c : cells) c = unquote(c);
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw Error(ErrorCode::NonNumericCell, "row " + std::to_string(table.rows.size() + 1) + " has " +
                                                 std::to_string(cells.size()) + " cells, header has " +
                                                 std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (!have_header) throw Error(ErrorCode::Io, "'" + path.string() + "' has no header row");
  return table;
}

Dataset load_csv(const std::filesystem::path& path, std::string_view treatment_col, std::string_view outcome_col,
                 Imputation impute) {
  if (treatment_col == outcome_col) {
    throw Error(ErrorCode::InvalidConfig, "treatment and outcome columns must differ");
  }
  const CsvTable table = read_csv_table(path);
  const std::size_t a_col = column_index(table.header, treatment_col);
  const std::size_t y_col = column_index(table.header, outcome_col);
  std::vector<std::size_t> x_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == a_col || c == y_col) continue;
    x_cols.push_back(c);
    names.push_back(table.header[c]);
  }
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto p = static_cast<Eigen::Index>(x_cols.size());
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd a(n), y(n);
  std::vector<std::vector<Eigen::Index>> missing(x_cols.size());

  auto cell_value = [&](Eigen::Index r, std::size_t c) -> std::optional<double> {
    const auto& cell = table.rows[static_cast<std::size_t>(r)][c];
    if (is_missing(cell)) return std::nullopt;
    auto v = parse_number(cell);
    if (!v) {
      throw Error(ErrorCode::NonNumericCell, "row " + std::to_string(r + 1) + ", column '" + table.header[c] +
                                                 "': '" + cell + "'");
    }
    return v;
  };
  auto missing_error = [&](Eigen::Index r, std::size_t c) {
    return Error(ErrorCode::NonNumericCell,
                 "row " + std::to_string(r + 1) + ", column '" + table.header[c] + "': missing value");
  };

  for (Eigen::Index r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      auto v = cell_value(r, x_cols[k]);
      if (!v) {
        if (impute == Imputation::None) throw missing_error(r, x_cols[k]);
        missing[k].push_back(r);
        x(r, static_cast<Eigen::Index>(k)) = 0.0;
      } else {
        x(r, static_cast<Eigen::Index>(k)) = *v;
      }
    }
    auto av = cell_value(r, a_col);
    if (!av) throw missing_error(r, a_col);
    if (*av != 0.0 && *av != 1.0) {
      throw Error(ErrorCode::NonBinaryTreatment,
                  "row " + std::to_string(r + 1) + ": treatment value '" + table.rows[static_cast<std::size_t>(r)][a_col] + "'");
    }
    a[r] = *av;
    auto yv = cell_value(r, y_col);
    if (!yv) throw missing_error(r, y_col);
    y[r] = *yv;
  }

  for (std::size_t k = 0; k < missing.size(); ++k) {
    if (missing[k].empty()) continue;
    std::vector<double> observed;
    std::size_t mi = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (mi < missing[k].size() && missing[k][mi] == r) {
        ++mi;
        continue;
      }
      observed.push_back(x(r, static_cast<Eigen::Index>(k)));
    }
    if (observed.empty()) throw Error(ErrorCode::NonNumericCell, "column '" + names[k] + "' has no observed values");
    const double med = median_of(std::move(observed));
    for (auto r : missing[k]) x(r, static_cast<Eigen::Index>(k)) = med;
  }

  return Dataset(std::move(x), std::move(a), std::move(y), std::move(names));
}

std::vector<CovariateRole> load_roles(const std::filesystem::path& path, const std::vector<std::string>& names) {
  const CsvTable table = read_csv_table(path);
  const std::size_t name_col = column_index(table.header, "name");
  const std::size_t role_col = column_index(table.header, "role");
  std::vector<CovariateRole> roles(names.size(), CovariateRole::Unknown);
  for (const auto& row : table.rows) {
    auto it = std::find(names.begin(), names.end(), row[name_col]);
    if (it == names.end()) throw Error(ErrorCode::MissingColumn, "role file names unknown covariate '" + row[name_col] + "'");
    roles[static_cast<std::size_t>(it - names.begin())] = role_from_string(row[role_col]);
  }
  return roles;
}

std::string format_double(double v) {
  if (v == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path, std::string_view treatment_col,
               std::string_view outcome_col) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  for (const auto& name : ds.names()) out << name << ',';
  out << treatment_col << ',' << outcome_col << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < ds.p(); ++j) out << format_double(ds.x()(r, static_cast<Eigen::Index>(j))) << ',';
    out << (ds.treated(i) ? 1 : 0) << ',' << format_double(ds.y()[r]) << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

void write_roles(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << "name,role\n";
  for (std::size_t j = 0; j < ds.p(); ++j) {
    out << ds.names()[j] << ',' << to_string(ds.roles() ? (*ds.roles())[j] : CovariateRole::Unknown) << '\n';
  }
}

void write_truth(const Dataset& ds, const std::filesystem::path& path) {
  if (!ds.truth()) throw Error(ErrorCode::NoGroundTruth, "dataset carries no ground truth");
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  const auto& t = *ds.truth();
  out << "tau,propensity,mu0,mu1\n";
  for (Eigen::Index i = 0; i < t.tau.size(); ++i) {
    out << format_double(t.tau[i]) << ',' << format_double(t.propensity[i]) << ',' << format_double(t.mu0[i]) << ','
        << format_double(t.mu1[i]) << '\n';
  }
}

GroundTruth load_truth(const std::filesystem::path& path) {
  const CsvTable table = read_csv_table(path);
  const std::size_t cols[4] = {column_index(table.header, "tau"), column_index(table.header, "propensity"),
                               column_index(table.header, "mu0"), column_index(table.header, "mu1")};
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  GroundTruth t{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  Eigen::VectorXd* dst[4] = {&t.tau, &t.propensity, &t.mu0, &t.mu1};
  for (Eigen::Index r = 0; r < n; ++r) {
    for (int k = 0; k < 4; ++k) {
      const auto& cell = table.rows[static_cast<std::size_t>(r)][cols[k]];
      auto v = parse_number(cell);
      if (!v) throw Error(ErrorCode::NonNumericCell, "truth row " + std::to_string(r + 1) + ": '" + cell + "'");
      (*dst[k])[r] = *v;
    }
  }
  return t;
}

}  // namespace confattr
