#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <future>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "specreg/cube.hpp"
#include "specreg/error.hpp"
#include "specreg/io.hpp"

namespace specreg {

// Coefficients representing `target_band` by the remaining bands. values[i]
// belongs to source band source_band(target_band, i), i.e. ascending band
// order with the target skipped, the same order as remaining_bands().
struct CoefficientVector {
  std::size_t target_band = 0;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  bool operator==(const CoefficientVector&) const = default;
};

enum class FitMethod { ClosedForm, GradientDescent };

inline const char* to_string(FitMethod m) {
  return m == FitMethod::ClosedForm ? "closed_form" : "gradient_descent";
}

struct RegressionFit {
  CoefficientVector coefficients;
  // Frobenius norm of Y_b - sum_i Y_i beta_i (unregularized).
  double residual_fro = 0.0;
  FitMethod method = FitMethod::ClosedForm;
  std::size_t iterations = 0;
  double ridge_lambda = 0.0;
};

inline constexpr double kOracleRidge = 1e-8;

// ---------------------------------------------------------------------------
// Normal equations

// Symmetric B x B matrix of band inner products <Y_i, Y_j>, row-major.
inline std::vector<double> band_gram(const BandStack& cube) {
  const std::size_t nb = cube.bands();
  std::vector<double> g(nb * nb);
  for (std::size_t i = 0; i < nb; ++i) {
    auto yi = cube.band(i);
    for (std::size_t j = i; j < nb; ++j) {
      auto yj = cube.band(j);
      double s = 0.0;
      for (std::size_t p = 0; p < yi.size(); ++p) s += yi[p] * yj[p];
      g[i * nb + j] = s;
      g[j * nb + i] = s;
    }
  }
  return g;
}

// Normal system for target b: G = X^T X + lambda I, c = X^T y, yy = y^T y,
// where X holds the remaining bands as columns.
struct NormalSystem {
  std::size_t n = 0;
  std::vector<double> gram;
  std::vector<double> rhs;
  double yy = 0.0;
};

inline NormalSystem normal_system(const std::vector<double>& band_gram, std::size_t bands,
                                  std::size_t b, double ridge_lambda) {
  NormalSystem s;
  s.n = bands - 1;
  s.gram.resize(s.n * s.n);
  s.rhs.resize(s.n);
  for (std::size_t i = 0; i < s.n; ++i) {
    const std::size_t si = source_band(b, i);
    s.rhs[i] = band_gram[si * bands + b];
    for (std::size_t j = 0; j < s.n; ++j) {
      s.gram[i * s.n + j] = band_gram[si * bands + source_band(b, j)];
    }
    s.gram[i * s.n + i] += ridge_lambda;
  }
  s.yy = band_gram[b * bands + b];
  return s;
}

// In-place Cholesky G = L L^T (lower triangle). Returns false when a pivot is
// not above `rel_tol` times the largest diagonal entry (or not positive, for
// rel_tol = 0).
inline bool cholesky_factor(std::vector<double>& a, std::size_t n, double rel_tol) {
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a[i * n + i]));
  const double tol = rel_tol * max_diag;
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > tol)) return false;
    const double ljj = std::sqrt(d);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / ljj;
    }
  }
  return true;
}

inline std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t n,
                                          std::vector<double> x) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * x[k];
    x[i] = s / l[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l[k * n + i] * x[k];
    x[i] = s / l[i * n + i];
  }
  return x;
}

inline std::vector<double> solve_normal_system(const NormalSystem& s, double ridge_lambda) {
  // Without a ridge, pivots at rounding level mean the bands are dependent.
  // With one, the matrix is positive definite and any positive pivot is valid.
  const double rel_tol = ridge_lambda == 0.0 ? static_cast<double>(s.n) * 1e-13 : 0.0;
  auto l = s.gram;
  if (!cholesky_factor(l, s.n, rel_tol)) {
    if (ridge_lambda == 0.0) {
      fail(ErrorKind::RankDeficient,
           "normal matrix is singular (remaining bands are linearly dependent); "
           "set ridge_lambda > 0");
    }
    fail(ErrorKind::RankDeficient, "regularized normal matrix is not positive definite; "
                                   "increase ridge_lambda");
  }
  return cholesky_solve(l, s.n, s.rhs);
}

// ---------------------------------------------------------------------------
// Reconstruction and residuals

inline BandImage reconstruct_band(const BandStack& remaining, const CoefficientVector& coeffs) {
  if (remaining.bands() != coeffs.size()) {
    fail(ErrorKind::Validation, "coefficient length " + std::to_string(coeffs.size()) +
                                    " does not match " + std::to_string(remaining.bands()) +
                                    " remaining bands");
  }
  BandImage out{remaining.height(), remaining.width(),
                std::vector<double>(remaining.pixels(), 0.0)};
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const double beta = coeffs.values[i];
    auto plane = remaining.band(i);
    for (std::size_t p = 0; p < plane.size(); ++p) out.data[p] += plane[p] * beta;
  }
  return out;
}

// Residual of the band model evaluated directly on pixels.
inline double residual_norm(const HsiCube& cube, std::size_t b, const CoefficientVector& coeffs) {
  cube.check_band(b);
  require(coeffs.size() == cube.bands() - 1,
          "coefficient length must be bands - 1 = " + std::to_string(cube.bands() - 1));
  auto target = cube.band(b);
  std::vector<double> r(target.begin(), target.end());
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    auto plane = cube.band(source_band(b, i));
    const double beta = coeffs.values[i];
    for (std::size_t p = 0; p < r.size(); ++p) r[p] -= plane[p] * beta;
  }
  double s = 0.0;
  for (double v : r) s += v * v;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Closed form

inline void check_ridge(double ridge_lambda) {
  require(std::isfinite(ridge_lambda) && ridge_lambda >= 0.0, "ridge_lambda must be >= 0");
}

inline RegressionFit fit_from_gram(const HsiCube& cube, const std::vector<double>& gram,
                                   std::size_t b, double ridge_lambda) {
  auto sys = normal_system(gram, cube.bands(), b, ridge_lambda);
  RegressionFit fit;
  fit.coefficients = CoefficientVector{b, solve_normal_system(sys, ridge_lambda)};
  fit.residual_fro = residual_norm(cube, b, fit.coefficients);
  fit.method = FitMethod::ClosedForm;
  fit.ridge_lambda = ridge_lambda;
  return fit;
}

// argmin_beta ||Y_b - sum_i Y_i beta_i||_F^2 + lambda ||beta||^2 via Cholesky
// of the (ridged) normal equations.
inline RegressionFit fit_closed_form(const HsiCube& cube, std::size_t b, double ridge_lambda = 0.0) {
  cube.check_band(b);
  check_ridge(ridge_lambda);
  return fit_from_gram(cube, band_gram(cube), b, ridge_lambda);
}

// ---------------------------------------------------------------------------
// Gradient descent

struct GradientDescentOptions {
  // Step size; nullopt selects 1 / trace(X^T X + lambda I).
  std::optional<double> alpha;
  std::size_t steps = 0;
  std::optional<CoefficientVector> init;
  double ridge_lambda = 0.0;
  // Consecutive objective increases that count as divergence.
  std::size_t divergence_window = 10;
};

inline double auto_step_size(const NormalSystem& sys) {
  double trace = 0.0;
  for (std::size_t i = 0; i < sys.n; ++i) trace += sys.gram[i * sys.n + i];
  require(trace > 0.0, "cannot pick a step size for an all-zero design", ErrorKind::StepSize);
  return 1.0 / trace;
}

// Objective ||y - X beta||^2 + lambda ||beta||^2 expanded on the normal system.
inline double quadratic_objective(const NormalSystem& sys, const std::vector<double>& beta) {
  double quad = 0.0;
  double lin = 0.0;
  for (std::size_t i = 0; i < sys.n; ++i) {
    double gi = 0.0;
    for (std::size_t j = 0; j < sys.n; ++j) gi += sys.gram[i * sys.n + j] * beta[j];
    quad += beta[i] * gi;
    lin += beta[i] * sys.rhs[i];
  }
  return sys.yy - 2.0 * lin + quad;
}

// Full-batch gradient descent beta <- beta - alpha * dL/dbeta on the band
// objective, for exactly opts.steps updates.
inline RegressionFit fit_gradient_descent(const HsiCube& cube, std::size_t b,
                                          const GradientDescentOptions& opts) {
  cube.check_band(b);
  check_ridge(opts.ridge_lambda);
  const std::size_t n = cube.bands() - 1;
  std::vector<double> beta(n, 0.0);
  if (opts.init) {
    require(opts.init->size() == n, "init coefficient length must be bands - 1");
    beta = opts.init->values;
  }
  auto sys = normal_system(band_gram(cube), cube.bands(), b, opts.ridge_lambda);
  const double alpha = opts.alpha ? *opts.alpha : auto_step_size(sys);
  require(std::isfinite(alpha) && alpha > 0.0, "step size alpha must be > 0", ErrorKind::StepSize);

  // Increases smaller than the rounding noise of the expanded objective are
  // not counted towards divergence.
  const double noise_floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(sys.yy, 1e-300);
  double prev = quadratic_objective(sys, beta);
  std::size_t increases = 0;
  std::vector<double> grad(n);
  for (std::size_t step = 0; step < opts.steps; ++step) {
    for (std::size_t i = 0; i < n; ++i) {
      double gi = -sys.rhs[i];
      for (std::size_t j = 0; j < n; ++j) gi += sys.gram[i * n + j] * beta[j];
      grad[i] = 2.0 * gi;
    }
    for (std::size_t i = 0; i < n; ++i) beta[i] -= alpha * grad[i];
    const double obj = quadratic_objective(sys, beta);
    if (!std::isfinite(obj)) {
      fail(ErrorKind::StepSize, "gradient descent diverged to a non-finite objective at step " +
                                    std::to_string(step + 1) + "; reduce alpha");
    }
    increases = (obj > prev + noise_floor) ? increases + 1 : 0;
    if (increases >= opts.divergence_window) {
      fail(ErrorKind::StepSize, "gradient descent diverging: objective rose for " +
                                    std::to_string(increases) + " consecutive steps (alpha " +
                                    io::format_double(alpha) + "); reduce alpha");
    }
    prev = obj;
  }

  RegressionFit fit;
  fit.coefficients = CoefficientVector{b, std::move(beta)};
  fit.residual_fro = residual_norm(cube, b, fit.coefficients);
  fit.method = FitMethod::GradientDescent;
  fit.iterations = opts.steps;
  fit.ridge_lambda = opts.ridge_lambda;
  return fit;
}

// ---------------------------------------------------------------------------
// Oracle table: the closed-form target coefficients for every band.

using OracleTable = std::vector<CoefficientVector>;

// Fits every target band from one shared Gram matrix. With `parallel`, bands
// are solved on separate tasks; each band's result does not depend on the
// others, so the table is identical either way.
inline OracleTable oracle_coefficients(const HsiCube& cube, double ridge_lambda = kOracleRidge,
                                       bool parallel = false) {
  check_ridge(ridge_lambda);
  const auto gram = band_gram(cube);
  auto fit_band = [&](std::size_t b) {
    try {
      return fit_from_gram(cube, gram, b, ridge_lambda).coefficients;
    } catch (const Error& e) {
      throw Error(e.kind(), "band " + std::to_string(b) + ": " + e.what());
    }
  };
  OracleTable table(cube.bands());
  if (parallel) {
    std::vector<std::future<CoefficientVector>> jobs;
    for (std::size_t b = 0; b < cube.bands(); ++b) {
      jobs.push_back(std::async(std::launch::async, fit_band, b));
    }
    for (std::size_t b = 0; b < cube.bands(); ++b) table[b] = jobs[b].get();
  } else {
    for (std::size_t b = 0; b < cube.bands(); ++b) table[b] = fit_band(b);
  }
  return table;
}

// CSV: header "target_band,beta_0,...,beta_{B-2}", one row per target band.
inline std::string format_oracle_table(const OracleTable& table) {
  std::ostringstream out;
  const std::size_t n = table.empty() ? 0 : table.front().size();
  out << "target_band";
  for (std::size_t i = 0; i < n; ++i) out << ",beta_" << i;
  out << '\n';
  for (const auto& row : table) {
    out << row.target_band;
    for (double v : row.values) out << ',' << io::format_double(v);
    out << '\n';
  }
  return out.str();
}

inline OracleTable parse_oracle_table(const std::string& text, std::size_t bands) {
  std::istringstream in(text);
  std::string line;
  OracleTable table;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t used = 0;
        cells.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        fail(ErrorKind::Validation, "oracle table: cannot parse '" + cell + "'");
      }
    }
    if (cells.size() != bands) {
      fail(ErrorKind::Validation, "oracle table row has " + std::to_string(cells.size()) +
                                      " fields, expected " + std::to_string(bands));
    }
    CoefficientVector cv;
    cv.target_band = static_cast<std::size_t>(cells[0]);
    cv.values.assign(cells.begin() + 1, cells.end());
    if (cv.target_band != table.size()) {
      fail(ErrorKind::Validation, "oracle table rows must list target bands 0..B-1 in order");
    }
    table.push_back(std::move(cv));
  }
  if (table.size() != bands) {
    fail(ErrorKind::Validation, "oracle table has " + std::to_string(table.size()) +
                                    " rows, expected " + std::to_string(bands));
  }
  return table;
}

// Precomputed tables are cached next to the cube as "<cube>.beta.csv".
inline std::filesystem::path oracle_table_path(const std::filesystem::path& cube_path) {
  auto p = cube_path;
  p += ".beta.csv";
  return p;
}

inline void write_oracle_table(const OracleTable& table, const std::filesystem::path& path) {
  io::write_text_atomic(path, format_oracle_table(table));
}

inline OracleTable read_oracle_table(const std::filesystem::path& path, std::size_t bands) {
  auto bytes = io::read_file(path);
  return parse_oracle_table(std::string(bytes.begin(), bytes.end()), bands);
}

}  // namespace specreg
