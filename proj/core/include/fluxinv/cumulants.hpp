#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

namespace fluxinv::cumulants {

// Dense n x n x n array. Third-order cumulants are O(n^3) in memory, so
// callers should keep grids to a few hundred points.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Eigen::Index n, double value = 0.0)
      : n_(n), data_(static_cast<std::size_t>(n * n * n), value) {}

  Eigen::Index dim() const { return n_; }
  double& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) { return data_[index(i, j, k)]; }
  double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const { return data_[index(i, j, k)]; }
  // Matrix (j, k) at fixed first index i.
  Eigen::MatrixXd slice(Eigen::Index i) const;
  double max_abs() const;

 private:
  std::size_t index(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return static_cast<std::size_t>((i * n_ + j) * n_ + k);
  }
  Eigen::Index n_ = 0;
  std::vector<double> data_;
};

// Interaction function b(s, u) on a grid: rows s, columns u, uniform spacing du.
struct Kernel1D {
  Eigen::MatrixXd values;
  double du = 1.0;

  // Riemann weights folded in: B = values * du.
  Eigen::MatrixXd weighted() const { return values * du; }
};

struct LognormalFieldSpec {
  Eigen::VectorXd log_mean;  // mean of ln Y1 on the grid
  Eigen::MatrixXd log_cov;   // covariance of ln Y1 on the grid
};

struct LognormalCumulants {
  Eigen::VectorXd kappa1;
  Eigen::MatrixXd kappa2;
  Tensor3 kappa3;
};

LognormalCumulants lognormal_cumulants(const LognormalFieldSpec& spec);

struct SecondOrder {
  Eigen::MatrixXd k2_22;  // kappa2_{Y2 Y2}(s, s')
  Eigen::MatrixXd k2_12;  // kappa2_{Y1 Y2}(u, s)
};

// kappa2_zeta may be omitted (zero discrepancy).
SecondOrder propagate_cumulant2(const Eigen::MatrixXd& kappa2_y1, const Kernel1D& kernel,
                                const std::optional<Eigen::MatrixXd>& kappa2_zeta = std::nullopt);

struct ThirdOrder {
  Tensor3 k3_222;             // kappa3_{Y2 Y2 Y2}(s1, s2, s3)
  Eigen::MatrixXd k3_112;     // kappa3_{Y1 Y1 Y2}(u1, u2, s) at the chosen s row
};

// `s_row` selects the kernel row used for the Y1 Y1 Y2 slice.
ThirdOrder propagate_cumulant3(const Tensor3& kappa3_y1, const Kernel1D& kernel, Eigen::Index s_row);

// kappa3_{Y2 Y2 Y2}(s0, ., .) for a single extra kernel row b(s0, .), with the
// other two arguments on the kernel's s grid. Avoids the full O(n^4) contraction.
Eigen::MatrixXd auto_cumulant3_slice(const Tensor3& kappa3_y1, const Kernel1D& kernel,
                                     const Eigen::VectorXd& row_s0);

// Directional 1-D example on D = [-10, 10] with a lognormal Y1.
struct DirectionalExample {
  Eigen::VectorXd grid;          // midpoints of grid_n equal cells
  double du = 0.0;
  Kernel1D kernel;               // b(s, u) for s, u on the grid
  Eigen::VectorXd kernel_at_0;   // b(0, u)
  LognormalFieldSpec field;
  LognormalCumulants y1;
  Eigen::VectorXd k2_21;         // kappa2_{Y2 Y1}(0, u2)
  Eigen::MatrixXd k3_211;        // kappa3_{Y2 Y1 Y1}(0, u2, u3)
  Eigen::MatrixXd k3_222;        // kappa3_{Y2 Y2 Y2}(0, s2, s3)
};

struct DirectionalExampleParams {
  double theta11 = 0.8;
  double theta12 = 1.7;
  double tau1 = 1.0;
  double log_mean = -2.0;
  double half_width = 10.0;
};

// Truncated-Gaussian interaction function centred and truncated at s (support
// u <= s) with scale 0.5 + 0.2 |u - s|, normalized to unit Riemann mass.
Eigen::VectorXd directional_kernel_row(double s, const Eigen::VectorXd& grid, double du);

DirectionalExample directional_example(Eigen::Index grid_n, const DirectionalExampleParams& params = {});

}  // namespace fluxinv::cumulants
