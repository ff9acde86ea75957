#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "minimax/solvers.hpp"
#include "minimax/types.hpp"

namespace minimax {

struct TargetSpec {
  enum class Kind { kSparse, kDense, kSpike, kZero };
  Kind kind = Kind::kZero;
  int s = 1;               ///< support size (sparse)
  double amplitude = 1.0;  ///< entry magnitude (sparse)
  double l1_norm = 0.0;    ///< dense / spike

  /// l1 norm of the generated target.
  double norm() const;
  void validate(int d) const;
};

enum class DesignKind { kGaussianRandom, kFixed };

struct ProblemConfig {
  int N = 1;
  int d = 1;
  double sigma = 0.0;
  DesignKind design_kind = DesignKind::kGaussianRandom;
  std::string design_path;                    ///< FIXED: file to load when no matrix is attached
  std::shared_ptr<const Matrix> fixed_design;  ///< FIXED: matrix supplied in memory
  TargetSpec target;
  std::uint64_t seed = 0;

  void validate() const;
};

Matrix gen_design(const ProblemConfig& cfg, int threads = 1);

/// t* from the target stream: sparse has s entries of magnitude `amplitude`
/// with random signs on a uniformly random support; dense is a Gaussian
/// direction rescaled to the requested l1 norm; spike is l1_norm * e_1.
Vector gen_target(const TargetSpec& spec, int d, std::uint64_t seed);

/// Y = X t* + sigma * xi, xi from the noise stream.
Vector gen_response(const Matrix& design, const Vector& t_star, double sigma, std::uint64_t seed);

/// Design, target and response for one trial; sigma_known and t_star are set.
Dataset gen_dataset(const ProblemConfig& cfg, int threads = 1);

struct ColumnScaling {
  Matrix design;
  std::vector<double> scale;  ///< factor applied to each column (1 when untouched)
  int rescaled = 0;
};

/// Columns with l2 norm above 1 are scaled onto the unit sphere; the others are kept.
ColumnScaling normalize_columns(const Matrix& design);

struct RipReport {
  int s = 0;
  long long supports_checked = 0;
  bool exhaustive = false;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  bool pass = false;
};

/// Sparsity level used by the RIP check: d when N >= d, else floor(N / log(e d / N)).
int rip_sparsity(int N, int d);

/// Extreme singular values of X_S / sqrt(N) over all supports of size s, or
/// over `budget` random supports when there are more than `budget` of them.
RipReport rip_check(const Matrix& design, long long budget, std::uint64_t seed, int threads = 1);

/// Numeric CSV, rows = observations. A non-numeric first row is taken as a header.
Matrix load_matrix_csv(const std::string& path);
/// 8-byte magic, uint32 N, uint32 d, then N*d little-endian doubles row-major.
Matrix load_matrix_binary(const std::string& path);
void save_matrix_binary(const Matrix& m, const std::string& path);
/// Picks the loader from the file contents (binary magic) or falls back to CSV.
Matrix load_matrix(const std::string& path);

/// Dataset CSV: header row, column 1 = y, columns 2..d+1 = features.
Dataset load_dataset_csv(const std::string& path);
void save_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace minimax
