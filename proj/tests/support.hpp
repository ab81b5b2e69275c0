#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "specreg/cube.hpp"

namespace testing_support {

// I.i.d. uniform cube from a generator unrelated to the library RNG.
inline specreg::HsiCube random_cube(std::size_t h, std::size_t w, std::size_t b, std::uint64_t seed,
                                    double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(h * w * b);
  for (double& v : data) v = dist(gen);
  return specreg::HsiCube(h, w, b, std::move(data));
}

inline specreg::HsiCube cube_from_bands(std::size_t h, std::size_t w,
                                        const std::vector<std::vector<double>>& bands) {
  std::vector<double> data;
  for (const auto& band : bands) data.insert(data.end(), band.begin(), band.end());
  return specreg::HsiCube(h, w, bands.size(), std::move(data));
}

// (H*W) x B matrix with one band per column.
inline Eigen::MatrixXd design(const specreg::BandStack& cube) {
  Eigen::MatrixXd x(cube.pixels(), cube.bands());
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    auto plane = cube.band(b);
    for (std::size_t p = 0; p < cube.pixels(); ++p) x(p, b) = plane[p];
  }
  return x;
}

// Ridge least squares via explicit inverse of the normal matrix.
inline std::vector<double> inverse_oracle(const specreg::HsiCube& cube, std::size_t b, double lambda) {
  const Eigen::MatrixXd all = design(cube);
  Eigen::MatrixXd x(all.rows(), all.cols() - 1);
  for (Eigen::Index c = 0, k = 0; c < all.cols(); ++c) {
    if (static_cast<std::size_t>(c) != b) x.col(k++) = all.col(c);
  }
  const Eigen::VectorXd y = all.col(static_cast<Eigen::Index>(b));
  Eigen::MatrixXd g = x.transpose() * x;
  g.diagonal().array() += lambda;
  const Eigen::VectorXd beta = g.inverse() * (x.transpose() * y);
  return std::vector<double>(beta.data(), beta.data() + beta.size());
}

// Least squares through a QR factorization of the tall design matrix.
inline std::vector<double> qr_oracle(const specreg::HsiCube& cube, std::size_t b) {
  const Eigen::MatrixXd all = design(cube);
  Eigen::MatrixXd x(all.rows(), all.cols() - 1);
  for (Eigen::Index c = 0, k = 0; c < all.cols(); ++c) {
    if (static_cast<std::size_t>(c) != b) x.col(k++) = all.col(c);
  }
  const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(all.col(static_cast<Eigen::Index>(b)));
  return std::vector<double>(beta.data(), beta.data() + beta.size());
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("specreg_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
