#include "fluxinv/cumulants.hpp"

#include <cmath>
#include <iostream>
#include <string>

#include "fluxinv/covariance.hpp"
#include "fluxinv/errors.hpp"

namespace fluxinv::cumulants {

namespace {

constexpr Eigen::Index kLargeGrid = 200;

void warn_if_large(Eigen::Index n) {
  if (n > kLargeGrid) {
    std::cerr << "warning: third-order cumulants on " << n << " points use O(n^3) memory\n";
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError("dimension mismatch: " + what);
}

}  // namespace

Eigen::MatrixXd Tensor3::slice(Eigen::Index i) const {
  Eigen::MatrixXd m(n_, n_);
  for (Eigen::Index j = 0; j < n_; ++j)
    for (Eigen::Index k = 0; k < n_; ++k) m(j, k) = (*this)(i, j, k);
  return m;
}

double Tensor3::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

LognormalCumulants lognormal_cumulants(const LognormalFieldSpec& spec) {
  const Eigen::Index n = spec.log_mean.size();
  require(spec.log_cov.rows() == n && spec.log_cov.cols() == n, "log covariance must be n x n");
  warn_if_large(n);

  LognormalCumulants out;
  out.kappa1 = (spec.log_mean.array() + 0.5 * spec.log_cov.diagonal().array()).exp();
  const Eigen::MatrixXd e = spec.log_cov.array().exp();
  out.kappa2 = (out.kappa1 * out.kappa1.transpose()).array() * (e.array() - 1.0);

  out.kappa3 = Tensor3(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = 0; k < n; ++k) {
        const double cij = spec.log_cov(i, j);
        const double cik = spec.log_cov(i, k);
        const double cjk = spec.log_cov(j, k);
        const double bracket = std::exp(cij + cik + cjk) - e(i, j) - e(i, k) - e(j, k) + 2.0;
        out.kappa3(i, j, k) = out.kappa1[i] * out.kappa1[j] * out.kappa1[k] * bracket;
      }
    }
  }
  return out;
}

SecondOrder propagate_cumulant2(const Eigen::MatrixXd& kappa2_y1, const Kernel1D& kernel,
                                const std::optional<Eigen::MatrixXd>& kappa2_zeta) {
  const Eigen::MatrixXd b = kernel.weighted();
  require(kappa2_y1.rows() == b.cols() && kappa2_y1.cols() == b.cols(),
          "kappa2 of Y1 must match the kernel's u grid");
  SecondOrder out;
  out.k2_12 = kappa2_y1 * b.transpose();
  out.k2_22 = b * out.k2_12;
  if (kappa2_zeta) {
    require(kappa2_zeta->rows() == b.rows() && kappa2_zeta->cols() == b.rows(),
            "kappa2 of the discrepancy must match the kernel's s grid");
    out.k2_22 += *kappa2_zeta;
  }
  return out;
}

namespace {

// out(a, j, k) = sum_i m(a, i) t(i, j, k), then the tensor is rotated so the
// contracted index moves to the back: result(j, k, a).
Tensor3 contract_first_and_rotate(const Tensor3& t, const Eigen::MatrixXd& m) {
  const Eigen::Index n = t.dim();
  const Eigen::Index r = m.rows();
  require(m.cols() == n && r == n, "kernel must be square for the auto-cumulant");
  Tensor3 out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index a = 0; a < r; ++a) {
      const double w = m(a, i);
      if (w == 0.0) continue;
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) out(j, k, a) += w * t(i, j, k);
    }
  }
  return out;
}

}  // namespace

ThirdOrder propagate_cumulant3(const Tensor3& kappa3_y1, const Kernel1D& kernel, Eigen::Index s_row) {
  const Eigen::MatrixXd b = kernel.weighted();
  const Eigen::Index n = kappa3_y1.dim();
  require(b.cols() == n, "kappa3 of Y1 must match the kernel's u grid");
  require(s_row >= 0 && s_row < b.rows(), "s row out of range");
  warn_if_large(n);

  ThirdOrder out;
  // Three successive mode contractions; each rotates the contracted mode to the back.
  out.k3_222 = contract_first_and_rotate(
      contract_first_and_rotate(contract_first_and_rotate(kappa3_y1, b), b), b);

  out.k3_112 = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double sum = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) sum += kappa3_y1(i, j, k) * b(s_row, k);
      out.k3_112(i, j) = sum;
    }
  return out;
}

Eigen::MatrixXd auto_cumulant3_slice(const Tensor3& kappa3_y1, const Kernel1D& kernel,
                                     const Eigen::VectorXd& row_s0) {
  const Eigen::MatrixXd b = kernel.weighted();
  const Eigen::Index n = kappa3_y1.dim();
  require(b.cols() == n && row_s0.size() == n, "kernel rows must match kappa3 of Y1");
  const Eigen::VectorXd w0 = row_s0 * kernel.du;
  // m(j, k) = sum_i w0_i kappa3(i, j, k), then B m B'.
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w0[i] == 0.0) continue;
    m += w0[i] * kappa3_y1.slice(i);
  }
  return b * m * b.transpose();
}

Eigen::VectorXd directional_kernel_row(double s, const Eigen::VectorXd& grid, double du) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double offset = grid[i] - s;
    if (offset > 0.0) continue;  // truncated side
    const double sigma = 0.5 + 0.2 * std::abs(offset);
    row[i] = std::exp(-0.5 * offset * offset / (sigma * sigma)) / sigma;
  }
  const double mass = row.sum() * du;
  if (mass > 0.0) row /= mass;
  return row;
}

DirectionalExample directional_example(Eigen::Index grid_n, const DirectionalExampleParams& params) {
  if (grid_n < 21) throw DomainError("directional example needs grid_n >= 21");
  DirectionalExample ex;
  const double width = 2.0 * params.half_width;
  ex.du = width / static_cast<double>(grid_n);
  ex.grid.resize(grid_n);
  for (Eigen::Index i = 0; i < grid_n; ++i) {
    ex.grid[i] = -params.half_width + (static_cast<double>(i) + 0.5) * ex.du;
  }

  ex.kernel.du = ex.du;
  ex.kernel.values.resize(grid_n, grid_n);
  for (Eigen::Index i = 0; i < grid_n; ++i) {
    ex.kernel.values.row(i) = directional_kernel_row(ex.grid[i], ex.grid, ex.du).transpose();
  }
  ex.kernel_at_0 = directional_kernel_row(0.0, ex.grid, ex.du);

  Locations locs;
  locs.reserve(static_cast<std::size_t>(grid_n));
  for (Eigen::Index i = 0; i < grid_n; ++i) locs.push_back({ex.grid[i], 0.0});
  ex.field.log_mean = Eigen::VectorXd::Constant(grid_n, params.log_mean);
  ex.field.log_cov = covariance::powered_exp_corr({params.theta11, params.theta12}, locs) / params.tau1;

  ex.y1 = lognormal_cumulants(ex.field);
  const Eigen::VectorXd w0 = ex.kernel_at_0 * ex.du;
  ex.k2_21 = ex.y1.kappa2 * w0;

  ex.k3_211 = Eigen::MatrixXd::Zero(grid_n, grid_n);
  for (Eigen::Index k = 0; k < grid_n; ++k) {
    if (w0[k] == 0.0) continue;
    ex.k3_211 += w0[k] * ex.y1.kappa3.slice(k);
  }
  ex.k3_222 = auto_cumulant3_slice(ex.y1.kappa3, ex.kernel, ex.kernel_at_0);
  return ex;
}

}  // namespace fluxinv::cumulants
