#include "dkf/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

namespace dkf {

Matrix symmetrize(const Matrix& x) { return 0.5 * (x + x.transpose()); }

Vector symmetric_eigenvalues(const Matrix& x) {
  if (x.size() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(x), Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

double psd_tolerance(const Vector& eigenvalues, double relative) {
  const double scale = eigenvalues.size() == 0 ? 0.0 : eigenvalues.cwiseAbs().maxCoeff();
  return relative * (1.0 + scale);
}

bool is_psd(const Matrix& x, double relative) {
  if (x.rows() != x.cols()) return false;
  if (x.size() == 0) return true;
  if (!all_finite(x)) return false;
  const Vector ev = symmetric_eigenvalues(x);
  return ev.minCoeff() >= -psd_tolerance(ev, relative);
}

bool is_symmetric(const Matrix& x, double relative) {
  if (x.rows() != x.cols()) return false;
  if (x.size() == 0) return true;
  const double asym = (x - x.transpose()).cwiseAbs().maxCoeff();
  return asym <= relative * (1.0 + x.cwiseAbs().maxCoeff());
}

Matrix pseudo_inverse(const Matrix& x, double relative_tol) {
  if (x.size() == 0) return Matrix::Zero(x.cols(), x.rows());
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = relative_tol * s(0);
  Vector s_inv = Vector::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) s_inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

Index numerical_rank(const Matrix& x, double relative_tol) {
  if (x.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(x);
  const Vector& s = svd.singularValues();
  if (s(0) <= 0.0) return 0;
  const double cutoff = relative_tol * s(0);
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) ++rank;
  }
  return rank;
}

double spectral_radius(const Matrix& x) {
  if (x.rows() != x.cols()) throw std::invalid_argument("spectral_radius: matrix is not square");
  if (x.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(x, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix block_diagonal(std::span<const Matrix> blocks) {
  Index rows = 0;
  Index cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Index r = 0;
  Index c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

bool all_finite(const Matrix& x) { return x.allFinite(); }

}  // namespace dkf
