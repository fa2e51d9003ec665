#include "dkf/noise.hpp"

#include <boost/random/normal_distribution.hpp>

#include <Eigen/Eigenvalues>

namespace dkf {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

NoiseStream::NoiseStream(std::uint64_t seed, NoiseSource source, int agent, int k) {
  std::uint64_t key = mix64(seed + 0x9e3779b97f4a7c15ULL);
  key = mix64(key ^ (static_cast<std::uint64_t>(source) + 0x632be59bd9b4e019ULL));
  key = mix64(key ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(agent)) + 0x8cb92ba72f3d8dd7ULL));
  key = mix64(key ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k)) + 0xd6e8feb86659fd93ULL));
  state_ = key;
}

NoiseStream::result_type NoiseStream::operator()() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return mix64(state_);
}

Vector NoiseStream::standard_normal(Index size) {
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  Vector out(size);
  for (Index i = 0; i < size; ++i) out(i) = normal(*this);
  return out;
}

GaussianSampler::GaussianSampler(const Matrix& covariance) {
  const Matrix sym = symmetrize(covariance);
  if (sym.size() == 0 || sym.cwiseAbs().maxCoeff() == 0.0) {
    factor_ = Matrix::Zero(sym.rows(), sym.cols());
    zero_ = true;
    return;
  }
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
    return;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  factor_ = eig.eigenvectors() * root.asDiagonal();
}

Vector GaussianSampler::sample(NoiseStream& stream) const {
  if (zero_) return Vector::Zero(factor_.rows());
  return factor_ * stream.standard_normal(factor_.cols());
}

}  // namespace dkf
