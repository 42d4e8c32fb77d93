#include "mqiv/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mqiv/error.hpp"

namespace mqiv {

Dataset::Dataset(std::vector<double> y, std::vector<std::uint8_t> a,
                 std::vector<std::uint8_t> z, RowMatrix x,
                 std::vector<std::string> covariate_names)
    : y_(std::move(y)), a_(std::move(a)), z_(std::move(z)), x_(std::move(x)),
      names_(std::move(covariate_names)) {
  const auto n = y_.size();
  if (n == 0) throw DataError("dataset must contain at least one observation");
  if (a_.size() != n || z_.size() != n || static_cast<std::size_t>(x_.rows()) != n)
    throw DataError("columns have different lengths");
  for (std::size_t i = 0; i < n; ++i) {
    if (a_[i] > 1) throw DataError("treatment must be 0 or 1", i + 1, "a");
    if (z_[i] > 1) throw DataError("instrument must be 0 or 1", i + 1, "z");
    if (!std::isfinite(y_[i])) throw DataError("non-finite outcome", i + 1, "y");
    for (Eigen::Index j = 0; j < x_.cols(); ++j)
      if (!std::isfinite(x_(static_cast<Eigen::Index>(i), j)))
        throw DataError("non-finite covariate", i + 1,
                        names_.empty() ? "x" + std::to_string(j + 1) : names_[j]);
  }
  if (names_.empty()) {
    for (Eigen::Index j = 0; j < x_.cols(); ++j) names_.push_back("x" + std::to_string(j + 1));
  } else if (names_.size() != d()) {
    throw DataError("covariate name count does not match covariate columns");
  }
}

std::size_t Dataset::n_treated() const noexcept {
  return static_cast<std::size_t>(std::count(a_.begin(), a_.end(), std::uint8_t{1}));
}

double Dataset::treated_fraction() const noexcept {
  return static_cast<double>(n_treated()) / static_cast<double>(n());
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  std::vector<double> y;
  std::vector<std::uint8_t> a, z;
  RowMatrix x(static_cast<Eigen::Index>(idx.size()), x_.cols());
  y.reserve(idx.size());
  a.reserve(idx.size());
  z.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto i = idx[r];
    y.push_back(y_[i]);
    a.push_back(a_[i]);
    z.push_back(z_[i]);
    x.row(static_cast<Eigen::Index>(r)) = x_.row(static_cast<Eigen::Index>(i));
  }
  return Dataset(std::move(y), std::move(a), std::move(z), std::move(x), names_);
}

void ColumnMapping::check() const {
  if (covariate_columns.empty()) throw ArgumentError("at least one covariate column is required");
  std::set<std::string> seen;
  auto add = [&](const std::string& name) {
    if (name.empty()) throw ArgumentError("column names must be non-empty");
    if (!seen.insert(name).second) throw ArgumentError("column '" + name + "' mapped twice");
  };
  add(outcome_column);
  add(treatment_column);
  add(instrument_column);
  for (const auto& c : covariate_columns) add(c);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view tok, double& out) {
  if (tok.empty()) return false;
  if (tok.front() == '+') tok.remove_prefix(1);
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const ColumnMapping& mapping) {
  mapping.check();
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("missing header row in '" + path.string() + "'");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::unordered_map<std::string, std::size_t> col_index;
  const auto header = split_commas(line);
  for (std::size_t j = 0; j < header.size(); ++j) col_index.emplace(std::string(header[j]), j);

  auto locate = [&](const std::string& name) {
    auto it = col_index.find(name);
    if (it == col_index.end())
      throw DataError("missing column '" + name + "'", std::nullopt, name);
    return it->second;
  };
  const auto iy = locate(mapping.outcome_column);
  const auto ia = locate(mapping.treatment_column);
  const auto iz = locate(mapping.instrument_column);
  std::vector<std::size_t> ix;
  for (const auto& c : mapping.covariate_columns) ix.push_back(locate(c));
  const std::size_t needed =
      1 + std::max({iy, ia, iz, *std::max_element(ix.begin(), ix.end())});

  std::vector<double> y;
  std::vector<std::uint8_t> a, z;
  std::vector<double> xs;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_commas(line);
    if (cells.size() < needed) throw DataError("too few fields", row);

    double v = 0.0;
    auto real = [&](std::size_t j, const std::string& name) {
      if (!parse_double(cells[j], v) || !std::isfinite(v))
        throw DataError("non-finite or unparsable value '" + std::string(cells[j]) +
                            "' in column '" + name + "' at row " + std::to_string(row),
                        row, name);
      return v;
    };
    auto binary = [&](std::size_t j, const std::string& name) -> std::uint8_t {
      if (!parse_double(cells[j], v) || (v != 0.0 && v != 1.0))
        throw DataError("non-binary value '" + std::string(cells[j]) + "' in column '" +
                            name + "' at row " + std::to_string(row),
                        row, name);
      return v == 1.0 ? 1 : 0;
    };

    y.push_back(real(iy, mapping.outcome_column));
    a.push_back(binary(ia, mapping.treatment_column));
    z.push_back(binary(iz, mapping.instrument_column));
    for (std::size_t c = 0; c < ix.size(); ++c)
      xs.push_back(real(ix[c], mapping.covariate_columns[c]));
  }
  if (y.empty()) throw DataError("no data rows in '" + path.string() + "'");

  RowMatrix x = Eigen::Map<RowMatrix>(xs.data(), static_cast<Eigen::Index>(y.size()),
                                      static_cast<Eigen::Index>(ix.size()));
  return Dataset(std::move(y), std::move(a), std::move(z), std::move(x),
                 mapping.covariate_columns);
}

void write_csv(std::ostream& os, const Dataset& ds, std::span<const ExtraColumn> extras) {
  for (const auto& e : extras)
    if (e.values.size() != ds.n()) throw ArgumentError("extra column '" + e.name + "' has wrong length");

  os << "y,a,z";
  for (const auto& name : ds.covariate_names()) os << ',' << name;
  for (const auto& e : extras) os << ',' << e.name;
  os << '\n';

  char buf[64];
  auto put = [&](double v) {
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    os.write(buf, len);
  };
  for (std::size_t i = 0; i < ds.n(); ++i) {
    put(ds.y()[i]);
    os << ',' << int(ds.a()[i]) << ',' << int(ds.z()[i]);
    for (double v : ds.row(i)) {
      os << ',';
      put(v);
    }
    for (const auto& e : extras) {
      os << ',';
      put(e.values[i]);
    }
    os << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const Dataset& ds,
              std::span<const ExtraColumn> extras) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(out, ds, extras);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

ValidationReport validate(const Dataset& ds) {
  ValidationReport r;
  r.n_total = ds.n();
  for (std::size_t i = 0; i < ds.n(); ++i) ++r.n_by_cell[ds.a()[i]][ds.z()[i]];
  r.n_treated = r.n_by_cell[1][0] + r.n_by_cell[1][1];

  const auto nz0 = r.n_by_cell[0][0] + r.n_by_cell[1][0];
  const auto nz1 = r.n_by_cell[0][1] + r.n_by_cell[1][1];
  if (nz0 > 0 && nz1 > 0) {
    const double m1 = static_cast<double>(r.n_by_cell[1][1]) / static_cast<double>(nz1);
    const double m0 = static_cast<double>(r.n_by_cell[1][0]) / static_cast<double>(nz0);
    r.marginal_relevance = std::abs(m1 - m0);
  }

  if (r.n_treated == 0 || r.n_treated == r.n_total)
    r.warnings.push_back("degenerate treatment: mean(A) is " +
                         std::string(r.n_treated == 0 ? "0" : "1"));
  if (nz0 == 0 || nz1 == 0) r.warnings.push_back("degenerate instrument: Z takes one value");
  for (int a = 0; a < 2; ++a)
    for (int z = 0; z < 2; ++z)
      if (r.n_by_cell[a][z] == 0)
        r.warnings.push_back("empty cell (A=" + std::to_string(a) + ",Z=" + std::to_string(z) + ")");
  if (r.marginal_relevance < kWeakRelevanceThreshold) {
    std::ostringstream msg;
    msg << "weak relevance: |mean(A|Z=1) - mean(A|Z=0)| = " << r.marginal_relevance;
    r.warnings.push_back(msg.str());
  }
  return r;
}

std::vector<std::size_t> FoldAssignment::members(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldAssignment::complement(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) out.push_back(i);
  return out;
}

FoldAssignment split_folds(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > n)
    throw ArgumentError("fold count must satisfy 2 <= k <= n (k=" + std::to_string(k) +
                        ", n=" + std::to_string(n) + ")");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(perm[i], perm[pick(rng)]);
  }
  FoldAssignment f;
  f.k = k;
  f.fold_of.assign(n, 0);
  for (std::size_t r = 0; r < n; ++r) f.fold_of[perm[r]] = static_cast<int>(r % k);
  return f;
}

}  // namespace mqiv
