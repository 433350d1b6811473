#include "hnko/numerics.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "hnko/error.hpp"

namespace hnko::numerics {

namespace {

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

// Fix the sign of a real eigenvector so that its largest-magnitude entry is
// positive; keeps outputs reproducible across equivalent decompositions.
void canonical_sign(Eigen::Ref<Vector> v) {
  Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0.0) v = -v;
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + shape(a) + " by " + shape(b));
  }
  return a * b;
}

Matrix pinv(const Matrix& x, double rank_tol) {
  if (x.size() == 0) throw DimensionError("pinv: empty matrix");
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  const double cutoff = rank_tol * (sigma.size() > 0 ? sigma(0) : 0.0);
  Vector inv = Vector::Zero(sigma.size());
  for (Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff && sigma(i) > 0.0) inv(i) = 1.0 / sigma(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix expm(const Matrix& a) { return expm(a, nullptr); }

Matrix expm(const Matrix& a, ExpmTrace* trace) {
  if (a.rows() != a.cols()) throw DimensionError("expm: non-square input " + shape(a));
  const Index n = a.rows();
  const double norm1 = n == 0 ? 0.0 : a.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1)) throw NumericalError("expm: non-finite input");

  int s = 0;
  while (std::ldexp(norm1, -s) > 0.5) ++s;
  const Matrix b = std::ldexp(1.0, -s) * a;
  const Matrix eye = Matrix::Identity(n, n);

  constexpr int N = kExpmTaylorDegree;
  std::vector<Matrix> horner(trace ? N : 0);
  Matrix q = eye + b / static_cast<double>(N);
  if (trace) horner[N - 1] = q;
  for (int j = N - 1; j >= 1; --j) {
    Matrix next = eye;
    next.noalias() += (b * q) / static_cast<double>(j);
    q = std::move(next);
    if (trace) horner[j - 1] = q;
  }

  std::vector<Matrix> powers;
  if (trace) powers.push_back(q);
  for (int i = 0; i < s; ++i) {
    Matrix sq = q * q;
    q = std::move(sq);
    if (trace) powers.push_back(q);
  }

  if (trace) {
    trace->squarings = s;
    trace->scaled = b;
    trace->horner = std::move(horner);
    trace->powers = std::move(powers);
  }
  return q;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  const Index p2 = b.rows();
  const Index q2 = b.cols();
  Matrix out(a.rows() * p2, a.cols() * q2);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * p2, j * q2, p2, q2) = a(i, j) * b;
    }
  }
  return out;
}

double orthogonality_defect(const Matrix& k) {
  if (k.rows() != k.cols()) throw DimensionError("orthogonality_defect: non-square " + shape(k));
  return (k * k.transpose() - Matrix::Identity(k.rows(), k.cols())).norm();
}

std::vector<SchurBlock> orthogonal_schur(const Matrix& k, double tol) {
  if (k.rows() != k.cols()) throw DimensionError("orthogonal_schur: non-square " + shape(k));
  const double defect = orthogonality_defect(k);
  if (!(defect <= tol)) {
    std::ostringstream os;
    os << "orthogonal_schur: input not orthogonal, ||K K^T - I||_F = " << defect << " > " << tol;
    throw ValidationError(os.str());
  }
  const Index n = k.rows();
  Eigen::RealSchur<Matrix> schur(k, true);
  if (schur.info() != Eigen::Success) throw NumericalError("orthogonal_schur: Schur iteration failed");
  const Matrix& t = schur.matrixT();
  const Matrix& u = schur.matrixU();

  std::vector<SchurBlock> blocks;
  Index i = 0;
  while (i < n) {
    SchurBlock blk;
    if (i + 1 < n && t(i + 1, i) != 0.0) {
      blk.size = 2;
      blk.block = t.block(i, i, 2, 2);
      blk.basis = u.middleCols(i, 2);
      const double a = t(i, i), b = t(i, i + 1), c = t(i + 1, i), d = t(i + 1, i + 1);
      const double re = 0.5 * (a + d);
      const double im = std::sqrt(std::max(0.0, -(0.25 * (a - d) * (a - d) + b * c)));
      blk.angle = std::atan2(im, re);
      i += 2;
    } else {
      blk.size = 1;
      blk.block = t.block(i, i, 1, 1);
      blk.basis = u.col(i);
      canonical_sign(blk.basis.col(0));
      blk.angle = t(i, i) >= 0.0 ? 0.0 : M_PI;
      i += 1;
    }
    blocks.push_back(std::move(blk));
  }
  return blocks;
}

std::vector<EigenPair> eig_orthogonal(const Matrix& k, double tol) {
  using cd = std::complex<double>;
  std::vector<EigenPair> out;
  for (const SchurBlock& blk : orthogonal_schur(k, tol)) {
    if (blk.size == 1) {
      out.push_back({cd(blk.block(0, 0), 0.0), blk.basis.col(0).cast<cd>()});
      continue;
    }
    const double a = blk.block(0, 0), b = blk.block(0, 1);
    const double c = blk.block(1, 0), d = blk.block(1, 1);
    const double re = 0.5 * (a + d);
    const double im = std::sqrt(std::max(0.0, -(0.25 * (a - d) * (a - d) + b * c)));
    for (const double sign : {1.0, -1.0}) {
      const cd lambda(re, sign * im);
      Eigen::Vector2cd z;
      if (std::abs(b) >= std::abs(c)) {
        z << cd(b, 0.0), lambda - a;
      } else {
        z << lambda - d, cd(c, 0.0);
      }
      Eigen::VectorXcd v = blk.basis.cast<cd>() * z;
      v.normalize();
      out.push_back({lambda, std::move(v)});
    }
  }
  for (const EigenPair& e : out) {
    if (std::abs(std::abs(e.value) - 1.0) > tol) {
      std::ostringstream os;
      os << "eig_orthogonal: eigenvalue " << e.value << " off the unit circle";
      throw NumericalError(os.str());
    }
  }
  return out;
}

}  // namespace hnko::numerics
