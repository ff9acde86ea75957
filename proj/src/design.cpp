#include "minimax/design.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "minimax/errors.hpp"
#include "minimax/parallel.hpp"
#include "minimax/rng.hpp"

namespace minimax {

namespace {

constexpr char kMagic[8] = {'M', 'M', 'X', 'D', 'S', 'G', 'N', '1'};

// Uniformly random s-subset of {0..d-1} by a partial Fisher-Yates shuffle.
std::vector<int> random_subset(const rng::CounterStream& stream, std::uint64_t index, int d, int s) {
  std::vector<double> u(static_cast<std::size_t>(s));
  stream.uniforms(index, u);
  std::vector<int> perm(static_cast<std::size_t>(d));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = 0; i < s; ++i) {
    const int j = i + std::min(d - i - 1, static_cast<int>(u[static_cast<std::size_t>(i)] * (d - i)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  perm.resize(static_cast<std::size_t>(s));
  std::sort(perm.begin(), perm.end());
  return perm;
}

// C(d, s) if it does not exceed cap, otherwise cap + 1.
long long binomial_capped(int d, int s, long long cap) {
  s = std::min(s, d - s);
  long double c = 1.0L;
  for (int i = 1; i <= s; ++i) {
    c = c * (d - s + i) / i;
    if (c > static_cast<long double>(cap)) return cap + 1;
  }
  return std::llround(c);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(std::string s, double& out) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t start = s.find_first_not_of(" \t");
  if (start == std::string::npos) return false;
  s = s.substr(start);
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::vector<std::vector<double>> read_csv_rows(const std::string& path, bool& had_header) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  had_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    std::vector<double> row(cells.size());
    bool ok = true;
    for (std::size_t k = 0; k < cells.size() && ok; ++k) ok = parse_double(cells[k], row[k]);
    if (!ok) {
      if (rows.empty() && !had_header) {
        had_header = true;
        continue;
      }
      throw InputError(path + ":" + std::to_string(lineno) + ": non-numeric entry");
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw InputError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(rows.front().size()) +
                       " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError(path + ": no data rows");
  return rows;
}

}  // namespace

double TargetSpec::norm() const {
  switch (kind) {
    case Kind::kSparse: return s * std::abs(amplitude);
    case Kind::kDense:
    case Kind::kSpike: return l1_norm;
    case Kind::kZero: return 0.0;
  }
  return 0.0;
}

void TargetSpec::validate(int d) const {
  if (kind == Kind::kSparse) {
    if (s < 1 || s > d) throw InputError("target: sparsity must be in [1, d]");
    if (!std::isfinite(amplitude)) throw InputError("target: amplitude must be finite");
  }
  if ((kind == Kind::kDense || kind == Kind::kSpike) && (!std::isfinite(l1_norm) || l1_norm < 0.0))
    throw InputError("target: l1_norm must be nonnegative");
}

void ProblemConfig::validate() const {
  if (N < 1 || d < 1) throw InputError("problem: N and d must be positive");
  if (!std::isfinite(sigma) || sigma < 0.0) throw InputError("problem: sigma must be nonnegative");
  target.validate(d);
  if (design_kind == DesignKind::kFixed) {
    if (!fixed_design && design_path.empty()) throw InputError("problem: fixed design needs a matrix or a path");
    if (fixed_design && (fixed_design->rows() != N || fixed_design->cols() != d))
      throw InputError("problem: fixed design shape does not match N x d");
  }
}

Matrix gen_design(const ProblemConfig& cfg, int threads) {
  cfg.validate();
  if (cfg.design_kind == DesignKind::kFixed) {
    Matrix m = cfg.fixed_design ? *cfg.fixed_design : load_matrix(cfg.design_path);
    if (m.rows() != cfg.N || m.cols() != cfg.d)
      throw InputError("fixed design is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                       ", config says " + std::to_string(cfg.N) + "x" + std::to_string(cfg.d));
    if (!m.allFinite()) throw InputError("fixed design has non-finite entries");
    return m;
  }
  Matrix x(cfg.N, cfg.d);
  const rng::CounterStream stream(cfg.seed, rng::Stream::kDesign);
  parallel_for(static_cast<std::size_t>(cfg.d), threads, [&](std::size_t j) {
    stream.normals(j, std::span<double>(x.col(static_cast<Eigen::Index>(j)).data(), static_cast<std::size_t>(cfg.N)));
  });
  return x;
}

Vector gen_target(const TargetSpec& spec, int d, std::uint64_t seed) {
  if (d < 1) throw InputError("target: d must be positive");
  spec.validate(d);
  Vector t = Vector::Zero(d);
  const rng::CounterStream stream(seed, rng::Stream::kTarget);
  switch (spec.kind) {
    case TargetSpec::Kind::kZero: break;
    case TargetSpec::Kind::kSpike: t[0] = spec.l1_norm; break;
    case TargetSpec::Kind::kSparse: {
      const auto support = random_subset(stream, 0, d, spec.s);
      std::vector<double> u(static_cast<std::size_t>(spec.s));
      stream.uniforms(1, u);
      for (int k = 0; k < spec.s; ++k)
        t[support[static_cast<std::size_t>(k)]] = (u[static_cast<std::size_t>(k)] < 0.5 ? -1.0 : 1.0) * std::abs(spec.amplitude);
      break;
    }
    case TargetSpec::Kind::kDense: {
      if (spec.l1_norm == 0.0) break;
      stream.normals(2, std::span<double>(t.data(), static_cast<std::size_t>(d)));
      t *= spec.l1_norm / t.lpNorm<1>();
      break;
    }
  }
  return t;
}

Vector gen_response(const Matrix& design, const Vector& t_star, double sigma, std::uint64_t seed) {
  if (t_star.size() != design.cols()) throw InputError("response: t_star has wrong length");
  if (!std::isfinite(sigma) || sigma < 0.0) throw InputError("response: sigma must be nonnegative");
  Vector y = design * t_star;
  if (sigma > 0.0) {
    Vector xi(design.rows());
    rng::CounterStream(seed, rng::Stream::kNoise).normals(0, std::span<double>(xi.data(), static_cast<std::size_t>(xi.size())));
    y += sigma * xi;
  }
  return y;
}

Dataset gen_dataset(const ProblemConfig& cfg, int threads) {
  Dataset ds;
  ds.design = gen_design(cfg, threads);
  ds.t_star = gen_target(cfg.target, cfg.d, cfg.seed);
  ds.responses = gen_response(ds.design, *ds.t_star, cfg.sigma, cfg.seed);
  ds.sigma_known = cfg.sigma;
  return ds;
}

ColumnScaling normalize_columns(const Matrix& design) {
  ColumnScaling out;
  out.design = design;
  out.scale.assign(static_cast<std::size_t>(design.cols()), 1.0);
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    const double n = design.col(j).norm();
    if (!(n > 0.0)) throw InputError("normalize_columns: column " + std::to_string(j) + " is zero");
    if (n > 1.0) {
      out.design.col(j) /= n;
      out.scale[static_cast<std::size_t>(j)] = 1.0 / n;
      ++out.rescaled;
    }
  }
  return out;
}

int rip_sparsity(int N, int d) {
  if (N < 1 || d < 1) throw InputError("rip: N and d must be positive");
  if (N >= d) return d;
  return static_cast<int>(std::floor(N / std::log(std::exp(1.0) * d / N)));
}

RipReport rip_check(const Matrix& design, long long budget, std::uint64_t seed, int threads) {
  if (budget < 1) throw InputError("rip: budget must be positive");
  const int n = static_cast<int>(design.rows()), d = static_cast<int>(design.cols());
  RipReport rep;
  rep.s = rip_sparsity(n, d);
  if (rep.s < 1) throw DomainError("rip: N / log(e d / N) < 1, ultra-high dimensional regime");

  const long long total = binomial_capped(d, rep.s, budget);
  rep.exhaustive = total <= budget;
  std::vector<std::vector<int>> supports;
  if (rep.exhaustive) {
    std::vector<int> c(static_cast<std::size_t>(rep.s));
    std::iota(c.begin(), c.end(), 0);
    while (true) {
      supports.push_back(c);
      int i = rep.s - 1;
      while (i >= 0 && c[static_cast<std::size_t>(i)] == d - rep.s + i) --i;
      if (i < 0) break;
      ++c[static_cast<std::size_t>(i)];
      for (int k = i + 1; k < rep.s; ++k) c[static_cast<std::size_t>(k)] = c[static_cast<std::size_t>(k - 1)] + 1;
    }
  } else {
    const rng::CounterStream stream(seed, rng::Stream::kSupport);
    for (long long k = 0; k < budget; ++k) supports.push_back(random_subset(stream, static_cast<std::uint64_t>(k), d, rep.s));
  }
  rep.supports_checked = static_cast<long long>(supports.size());

  std::vector<double> lo(supports.size()), hi(supports.size());
  parallel_for(supports.size(), threads, [&](std::size_t k) {
    const auto& sup = supports[k];
    Matrix sub(n, static_cast<Eigen::Index>(sup.size()));
    for (std::size_t j = 0; j < sup.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = design.col(sup[j]);
    const Matrix gram = sub.transpose() * sub / static_cast<double>(n);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    lo[k] = std::sqrt(std::max(eig.eigenvalues().minCoeff(), 0.0));
    hi[k] = std::sqrt(std::max(eig.eigenvalues().maxCoeff(), 0.0));
  });
  rep.min_ratio = *std::min_element(lo.begin(), lo.end());
  rep.max_ratio = *std::max_element(hi.begin(), hi.end());
  rep.pass = rep.min_ratio >= 0.5 && rep.max_ratio <= 1.5;
  return rep;
}

Matrix load_matrix_csv(const std::string& path) {
  bool header = false;
  const auto rows = read_csv_rows(path, header);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

Matrix load_matrix_binary(const std::string& path) {
  static_assert(std::endian::native == std::endian::little, "binary design format assumes a little-endian host");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  char magic[8];
  std::uint32_t dims[2];
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw InputError(path + ": not a binary design file");
  if (dims[0] == 0 || dims[1] == 0) throw InputError(path + ": empty matrix");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(dims[0], dims[1]);
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!in) throw InputError(path + ": truncated data");
  if (in.peek() != std::char_traits<char>::eof()) throw InputError(path + ": trailing bytes after data");
  return rm;
}

void save_matrix_binary(const Matrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!out) throw InputError("write failed: " + path);
}

Matrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  char magic[8] = {};
  in.read(magic, 8);
  if (in.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0) return load_matrix_binary(path);
  return load_matrix_csv(path);
}

Dataset load_dataset_csv(const std::string& path) {
  bool header = false;
  const auto rows = read_csv_rows(path, header);
  if (!header) throw InputError(path + ": dataset CSV needs a header row");
  if (rows.front().size() < 2) throw InputError(path + ": need y plus at least one feature column");
  Dataset ds;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size() - 1);
  ds.design.resize(n, d);
  ds.responses.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    ds.responses[i] = r[0];
    for (Eigen::Index j = 0; j < d; ++j) ds.design(i, j) = r[static_cast<std::size_t>(j + 1)];
  }
  ds.validate();
  return ds;
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "y";
  for (int j = 1; j <= data.d(); ++j) out << ",x" << j;
  out << '\n';
  out.precision(17);
  for (int i = 0; i < data.N(); ++i) {
    out << data.responses[i];
    for (int j = 0; j < data.d(); ++j) out << ',' << data.design(i, j);
    out << '\n';
  }
}

}  // namespace minimax
