#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mfcausal/core.hpp"
#include "mfcausal/spectral.hpp"
#include "mfcausal/timeseries.hpp"

namespace mfcausal {

/// Observations along rows, features along columns. Real data is stored with
/// zero imaginary parts.
using DataBlock = Eigen::MatrixXcd;

struct CovarianceSet {
  Eigen::MatrixXcd Sxx, Syy, Sxy;
};

/// Ridge strengths as fractions of each block's mean diagonal.
struct RegConfig {
  double lambda_x = 0.1;
  double lambda_y = 0.1;
  double lambda_z = 0.1;  ///< conditioning block of partial CCA
};

struct CCASolution {
  double rho = 0.0;
  Eigen::VectorXcd u, v;
  std::vector<double> all_rhos;
};

inline DataBlock center_columns(const DataBlock& X) {
  DataBlock c = X;
  if (c.rows() > 0) c.rowwise() -= c.colwise().mean();
  return c;
}

/// Cross-moment E[a b^H] of centred blocks with (n-1) normalization.
inline Eigen::MatrixXcd cross_cov(const DataBlock& A, const DataBlock& B) {
  return A.transpose() * B.conjugate() / static_cast<double>(A.rows() - 1);
}

inline Eigen::MatrixXcd hermitian_part(const Eigen::MatrixXcd& S) {
  return 0.5 * (S + S.adjoint());
}

inline CovarianceSet covariances(const DataBlock& X, const DataBlock& Y) {
  require(X.rows() == Y.rows(), "covariances: row counts differ");
  require(X.rows() >= 2, "covariances: need at least 2 rows");
  const DataBlock Xc = center_columns(X), Yc = center_columns(Y);
  return {hermitian_part(cross_cov(Xc, Xc)), hermitian_part(cross_cov(Yc, Yc)), cross_cov(Xc, Yc)};
}

inline Eigen::MatrixXcd ridge(const Eigen::MatrixXcd& S, double lambda) {
  require(lambda >= 0.0, "regularization must be nonnegative");
  if (lambda == 0.0 || S.rows() == 0) return S;
  const double mean_diag = S.diagonal().real().mean();
  Eigen::MatrixXcd out = S;
  out.diagonal().array() += lambda * mean_diag;
  return out;
}

/// S^{-1/2} for a Hermitian positive-definite block; rejects blocks whose
/// condition number exceeds 1e12.
inline Eigen::MatrixXcd inverse_sqrt(const Eigen::MatrixXcd& S, const char* name) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S);
  if (es.info() != Eigen::Success)
    throw NumericalFailure(std::string("eigendecomposition failed for ") + name);
  const auto& ev = es.eigenvalues();
  const double hi = ev.maxCoeff(), lo = ev.minCoeff();
  if (!(hi > 0.0) || !(lo > hi * 1e-12))
    throw NumericalFailure(std::string("covariance block ") + name +
                           " is singular or ill-conditioned after regularization");
  return es.eigenvectors() * ev.cwiseInverse().cwiseSqrt().asDiagonal() *
         es.eigenvectors().adjoint();
}

/// Leading canonical pair from covariance blocks. Variates are X conj(u) and
/// Y conj(v); u is scaled to unit variance and phased so that its
/// largest-modulus entry is real and positive.
inline CCASolution cca_from_covariances(const CovarianceSet& cov, const RegConfig& reg = {}) {
  const Eigen::MatrixXcd Sxx = ridge(cov.Sxx, reg.lambda_x);
  const Eigen::MatrixXcd Syy = ridge(cov.Syy, reg.lambda_y);
  const Eigen::MatrixXcd Kx = inverse_sqrt(Sxx, "Sxx");
  const Eigen::MatrixXcd Ky = inverse_sqrt(Syy, "Syy");
  const Eigen::MatrixXcd M = Kx * cov.Sxy * Ky;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);

  CCASolution sol;
  const auto& sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size(); ++i) sol.all_rhos.push_back(std::clamp(sv(i), 0.0, 1.0));
  sol.rho = sol.all_rhos.empty() ? 0.0 : sol.all_rhos.front();
  sol.u = Kx * svd.matrixU().col(0);
  sol.v = Ky * svd.matrixV().col(0);
  Eigen::Index imax = 0;
  sol.u.cwiseAbs().maxCoeff(&imax);
  if (std::abs(sol.u(imax)) > 0.0) {
    const std::complex<double> phase = std::conj(sol.u(imax)) / std::abs(sol.u(imax));
    sol.u *= phase;
    sol.v *= phase;
  }
  return sol;
}

inline CCASolution cca(const DataBlock& X, const DataBlock& Y, const RegConfig& reg = {}) {
  return cca_from_covariances(covariances(X, Y), reg);
}

/// Removes the linear influence of Z from every covariance block:
/// S_ab|z = S_ab - S_az Szz^-1 S_zb.
inline CovarianceSet partial_covariances(const DataBlock& X, const DataBlock& Y, const DataBlock& Z,
                                         double lambda_z) {
  require(X.rows() == Y.rows() && X.rows() == Z.rows(), "partial CCA: row counts differ");
  require(X.rows() >= 2, "partial CCA: need at least 2 rows");
  const DataBlock Xc = center_columns(X), Yc = center_columns(Y), Zc = center_columns(Z);
  const Eigen::MatrixXcd Szz = ridge(hermitian_part(cross_cov(Zc, Zc)), lambda_z);
  Eigen::LDLT<Eigen::MatrixXcd> ldlt(Szz);
  const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().real().minCoeff() > dmax * 1e-12))
    throw NumericalFailure("covariance block Szz is singular after regularization");
  const Eigen::MatrixXcd Sxz = cross_cov(Xc, Zc), Syz = cross_cov(Yc, Zc);
  const Eigen::MatrixXcd Bx = ldlt.solve(Sxz.adjoint());
  const Eigen::MatrixXcd By = ldlt.solve(Syz.adjoint());
  return {hermitian_part(cross_cov(Xc, Xc) - Sxz * Bx), hermitian_part(cross_cov(Yc, Yc) - Syz * By),
          cross_cov(Xc, Yc) - Sxz * By};
}

inline CCASolution partial_cca(const DataBlock& X, const DataBlock& Y, const DataBlock& Z,
                               const RegConfig& reg = {}) {
  return cca_from_covariances(partial_covariances(X, Y, Z, reg.lambda_z), reg);
}

struct AlignedBlocks {
  DataBlock X;                   ///< spectrogram rows
  DataBlock Y;                   ///< LF samples, one column
  std::vector<std::size_t> frames;
  std::vector<std::size_t> lf_index;
};

/// Lag in whole HF samples.
inline std::ptrdiff_t lag_samples(double lag, double hf_fs) {
  return static_cast<std::ptrdiff_t>(std::llround(lag * hf_fs));
}

/// Pairs each usable LF sample with the frame whose centre lies `lag`
/// seconds after it (lag = t_frame - t_LF, quantized to the HF grid).
/// Negative lags pair HF history with LF future. LF edge transients and
/// frames outside the spectrogram are skipped.
inline AlignedBlocks align_lagged(const Spectrogram& spec, const TimeSeries& lf, double lag,
                                  std::size_t min_rows = 10) {
  const double fs = spec.source_fs;
  const auto L = lag_samples(lag, fs);
  const auto half = static_cast<std::ptrdiff_t>(spec.window_samples / 2);
  const auto first = static_cast<std::ptrdiff_t>(spec.first_sample);
  const auto hop = static_cast<std::ptrdiff_t>(spec.hop_samples);
  const auto nf = static_cast<std::ptrdiff_t>(spec.n_frames());

  AlignedBlocks out;
  const auto [lo, hi] = lf.valid_range();
  for (std::size_t k = lo; k < hi; ++k) {
    const double c = (lf.time_at(k) - spec.source_t0) * fs;
    const auto ck = static_cast<std::ptrdiff_t>(std::llround(c));
    if (std::abs(c - static_cast<double>(ck)) > 1e-6) throw InvalidArgument("LF sample off the HF grid");
    const std::ptrdiff_t s = ck + L - half - first;
    if (s < 0 || s % hop != 0 || s / hop >= nf) continue;
    out.frames.push_back(static_cast<std::size_t>(s / hop));
    out.lf_index.push_back(k);
  }
  if (out.frames.size() < min_rows) throw InvalidArgument("lag leaves too few overlapping frames");
  const auto n = static_cast<Eigen::Index>(out.frames.size());
  out.X.resize(n, spec.values.cols());
  out.Y.resize(n, 1);
  for (Eigen::Index r = 0; r < n; ++r) {
    out.X.row(r) = spec.values.row(static_cast<Eigen::Index>(out.frames[static_cast<std::size_t>(r)]));
    out.Y(r, 0) = lf[out.lf_index[static_cast<std::size_t>(r)]];
  }
  return out;
}

}  // namespace mfcausal
