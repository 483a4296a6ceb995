#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "balrd/problems.hpp"

namespace balrd::test {

inline bool near(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// Two-parameter quadratic used by the golden fixtures.
inline ImbalancedQuadratic golden_quadratic() {
  ImbalancedQuadratic::Params p;
  p.scale_rate = 4.0;
  p.scale_distortion = 1.0;
  p.target_rate = ParamVector{1.0, 0.0};
  p.target_distortion = ParamVector{0.0, 1.0};
  p.floor = 0.5;
  p.init = ParamVector{0.25, 0.5};
  return ImbalancedQuadratic(std::move(p));
}

inline ImbalancedQuadratic symmetric_quadratic(std::size_t dim = 3) {
  ImbalancedQuadratic::Params p;
  p.target_rate = ParamVector(dim, 0.5);
  p.target_distortion = ParamVector(dim, 0.5);
  p.floor = 1.0;
  p.init = ParamVector(dim, -1.0);
  return ImbalancedQuadratic(std::move(p));
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("balrd-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace balrd::test
