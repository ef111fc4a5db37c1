#pragma once

#include <acde/csv.hpp>
#include <acde/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace acde {

// Read-only view of one row of a Dataset.
struct Observation {
  std::int64_t id;
  double y;
  double z;
  std::span<const double> x;
};

// N observations of (outcome, exposure, covariates), stored column-wise for y
// and z and row-major for the N x d covariate block. Immutable once built.
class Dataset {
 public:
  Dataset(std::vector<double> y, std::vector<double> z, std::vector<double> x,
          std::size_t d, std::vector<std::int64_t> ids = {})
      : y_(std::move(y)), z_(std::move(z)), x_(std::move(x)), ids_(std::move(ids)), d_(d) {
    const std::size_t n = y_.size();
    if (d_ < 1) throw DomainError("dataset needs at least one covariate");
    if (z_.size() != n || x_.size() != n * d_)
      throw DomainError("dataset columns have inconsistent lengths");
    if (n < 2)
      throw DatasetTooSmallError("dataset has " + std::to_string(n) +
                                 " observations; at least 2 are required");
    if (ids_.empty()) {
      ids_.resize(n);
      std::iota(ids_.begin(), ids_.end(), std::int64_t{0});
    } else if (ids_.size() != n) {
      throw DomainError("id column length differs from the data");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(y_[i]) || !std::isfinite(z_[i]))
        throw DomainError("non-finite outcome or exposure at row " + std::to_string(i));
      for (std::size_t j = 0; j < d_; ++j)
        if (!std::isfinite(x_[i * d_ + j]))
          throw DomainError("non-finite covariate x" + std::to_string(j + 1) + " at row " +
                            std::to_string(i));
    }
    compute_scale();
  }

  std::size_t size() const noexcept { return y_.size(); }
  std::size_t dim() const noexcept { return d_; }

  double y(std::size_t i) const { return y_[i]; }
  double z(std::size_t i) const { return z_[i]; }
  std::span<const double> x(std::size_t i) const { return {x_.data() + i * d_, d_}; }
  std::int64_t id(std::size_t i) const { return ids_[i]; }
  Observation operator[](std::size_t i) const { return {ids_[i], y_[i], z_[i], x(i)}; }

  const std::vector<double>& outcomes() const noexcept { return y_; }
  const std::vector<double>& exposures() const noexcept { return z_; }
  const std::vector<double>& covariates() const noexcept { return x_; }
  const std::vector<std::int64_t>& ids() const noexcept { return ids_; }

  // Per-dimension sample standard deviation (N-1 denominator); zero-variance
  // columns are reported as 1 and listed in warnings().
  const std::vector<double>& covariate_scale() const noexcept { return scale_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  void compute_scale() {
    const std::size_t n = size();
    scale_.assign(d_, 0.0);
    for (std::size_t j = 0; j < d_; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += x_[i * d_ + j];
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dev = x_[i * d_ + j] - mean;
        ss += dev * dev;
      }
      const double sd = std::sqrt(ss / static_cast<double>(n - 1));
      if (sd > 0.0) {
        scale_[j] = sd;
      } else {
        scale_[j] = 1.0;
        warnings_.push_back("covariate x" + std::to_string(j + 1) +
                            " has zero variance; its scale is set to 1");
      }
    }
  }

  std::vector<double> y_, z_, x_;
  std::vector<std::int64_t> ids_;
  std::size_t d_;
  std::vector<double> scale_;
  std::vector<std::string> warnings_;
};

// Parses the `y,z,x1..xd[,id]` format (any column order, header required).
inline Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "", "input is empty; a header row is required");

  std::vector<std::string> header;
  for (auto cell : csv::split(line)) header.emplace_back(csv::trim(cell));
  int y_col = -1, z_col = -1, id_col = -1;
  std::map<std::size_t, int> x_cols;  // covariate number (1-based) -> column
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    const int col = static_cast<int>(c);
    auto claim = [&](int& slot) {
      if (slot >= 0) throw ParseError(0, name, "duplicate column '" + name + "'");
      slot = col;
    };
    if (name == "y") {
      claim(y_col);
    } else if (name == "z") {
      claim(z_col);
    } else if (name == "id") {
      claim(id_col);
    } else if (name.size() > 1 && name[0] == 'x' &&
               std::all_of(name.begin() + 1, name.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
      const std::size_t k = std::stoul(name.substr(1));
      if (k == 0 || !x_cols.emplace(k, col).second)
        throw ParseError(0, name, "invalid or duplicate covariate column '" + name + "'");
    } else {
      throw ParseError(0, name, "unexpected column '" + name + "'");
    }
  }
  if (y_col < 0) throw ParseError(0, "y", "missing column 'y'");
  if (z_col < 0) throw ParseError(0, "z", "missing column 'z'");
  if (x_cols.empty()) throw ParseError(0, "x1", "no covariate columns (x1..xd)");
  const std::size_t d = x_cols.size();
  if (x_cols.rbegin()->first != d)
    throw ParseError(0, "x" + std::to_string(d), "covariate columns must be numbered x1..xd without gaps");

  std::vector<double> y, z, x;
  std::vector<std::int64_t> ids;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    ++row;
    const auto cells = csv::split(line);
    if (cells.size() != header.size())
      throw ParseError(row, "", "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                    " cells, expected " + std::to_string(header.size()));
    auto number = [&](int col) {
      const std::string& name = header[col];
      const auto v = csv::parse_double(cells[col]);
      if (!v || !std::isfinite(*v))
        throw ParseError(row, name, "row " + std::to_string(row) + ", column " + name +
                                        ": not a finite number ('" + std::string(csv::trim(cells[col])) + "')");
      return *v;
    };
    y.push_back(number(y_col));
    z.push_back(number(z_col));
    for (const auto& [k, col] : x_cols) x.push_back(number(col));
    if (id_col >= 0) {
      const double v = number(id_col);
      if (v != std::floor(v))
        throw ParseError(row, "id", "row " + std::to_string(row) + ", column id: not an integer");
      ids.push_back(static_cast<std::int64_t>(v));
    }
  }
  if (row < 2)
    throw DatasetTooSmallError("dataset has " + std::to_string(row) +
                               " observations; at least 2 are required");
  return Dataset(std::move(y), std::move(z), std::move(x), d, std::move(ids));
}

inline Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "", "cannot open '" + path.string() + "'");
  return read_csv(in);
}

// Writes `id,y,z,x1..xd` with shortest round-trip formatting, so reloading
// reproduces every value bit for bit.
inline void write_csv(const Dataset& ds, std::ostream& out) {
  out << "id,y,z";
  for (std::size_t j = 0; j < ds.dim(); ++j) out << ",x" << j + 1;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.id(i) << ',' << csv::format_double(ds.y(i)) << ',' << csv::format_double(ds.z(i));
    for (double v : ds.x(i)) out << ',' << csv::format_double(v);
    out << '\n';
  }
}

enum class BlockScheme { equal_count, equal_width };

// K exposure blocks described by K+1 strictly increasing cut points. Block k
// holds exposures in (b[k], b[k+1]], except block 0 which also holds b[0]:
// a value sitting exactly on a cut belongs to the lower block.
struct BlockPartition {
  std::size_t K = 0;
  std::vector<double> boundaries;
  BlockScheme scheme = BlockScheme::equal_count;

  std::size_t block_of(double z) const {
    const auto it = std::lower_bound(boundaries.begin() + 1, boundaries.end() - 1, z);
    return static_cast<std::size_t>(it - (boundaries.begin() + 1));
  }

  // Index lists per block, each in ascending order.
  std::vector<std::vector<std::size_t>> members(const Dataset& ds) const {
    std::vector<std::vector<std::size_t>> out(K);
    for (std::size_t i = 0; i < ds.size(); ++i) out[block_of(ds.z(i))].push_back(i);
    return out;
  }
};

// Equal-count cuts sit at the j/K empirical quantiles; the cut is placed at
// the midpoint between the last distinct value of the lower block and the next
// distinct value, so tied exposures always share a block.
inline BlockPartition block_partition(const Dataset& ds, std::size_t K, BlockScheme scheme) {
  const std::size_t n = ds.size();
  if (K < 2 || K > n)
    throw DomainError("block count must satisfy 2 <= K <= N (K=" + std::to_string(K) +
                      ", N=" + std::to_string(n) + ")");
  std::vector<double> sorted = ds.exposures();
  std::sort(sorted.begin(), sorted.end());

  BlockPartition bp;
  bp.K = K;
  bp.scheme = scheme;
  bp.boundaries.resize(K + 1);
  bp.boundaries.front() = sorted.front();
  bp.boundaries.back() = sorted.back();

  if (scheme == BlockScheme::equal_width) {
    if (!(sorted.back() > sorted.front()))
      throw InfeasibleError("equal-width blocks need a non-degenerate exposure range");
    const double lo = sorted.front();
    const double width = (sorted.back() - lo) / static_cast<double>(K);
    for (std::size_t j = 1; j < K; ++j) bp.boundaries[j] = lo + width * static_cast<double>(j);
    return bp;
  }

  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const std::size_t m = distinct.size();
  if (K > m)
    throw InfeasibleError("equal-count partition infeasible: K=" + std::to_string(K) +
                          " exceeds the " + std::to_string(m) + " distinct exposure values");

  // last[j]: index into `distinct` of the largest value in block j-1.
  std::ptrdiff_t prev = -1;
  for (std::size_t j = 1; j < K; ++j) {
    const std::size_t pos = (j * n + K - 1) / K - 1;  // ceil(jN/K) - 1
    const auto q = static_cast<std::ptrdiff_t>(
        std::lower_bound(distinct.begin(), distinct.end(), sorted[pos]) - distinct.begin());
    const auto upper = static_cast<std::ptrdiff_t>(m - 1 - (K - j));
    const std::ptrdiff_t idx = std::min(std::max(q, prev + 1), upper);
    bp.boundaries[j] = 0.5 * (distinct[idx] + distinct[idx + 1]);
    prev = idx;
  }
  return bp;
}

}  // namespace acde
