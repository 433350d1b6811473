#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace hnko {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace numerics {

/// Standard matrix product; throws DimensionError when a.cols() != b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);

/// Moore-Penrose pseudo-inverse via SVD. Singular values below
/// rank_tol * sigma_max are treated as zero.
Matrix pinv(const Matrix& x, double rank_tol = 1e-12);

/// Intermediates of one expm evaluation, kept so the scaling-and-squaring
/// recursion can be differentiated in reverse mode.
struct ExpmTrace {
  int squarings = 0;
  Matrix scaled;               ///< A / 2^s
  std::vector<Matrix> horner;  ///< horner[j-1] = Q_j, Q_1 = Taylor sum
  std::vector<Matrix> powers;  ///< powers[i] = Q_1^(2^i), i = 0..s
};

/// Taylor degree used inside expm.
inline constexpr int kExpmTaylorDegree = 18;

/// Matrix exponential by scaling and squaring: s is chosen so that
/// ||A||_1 / 2^s <= 0.5, then a degree-18 Taylor polynomial (Horner form)
/// is squared s times.
Matrix expm(const Matrix& a);
Matrix expm(const Matrix& a, ExpmTrace* trace);

/// Kronecker product, (a ⊗ b)(i*p2 + k, j*q2 + l) = a(i,j) * b(k,l).
Matrix kron(const Matrix& a, const Matrix& b);

/// Frobenius distance of k kᵀ from the identity.
double orthogonality_defect(const Matrix& k);

struct EigenPair {
  std::complex<double> value;
  Eigen::VectorXcd vector;  ///< unit 2-norm
};

/// One diagonal block of the real Schur form of an orthogonal matrix.
/// size 1: a real eigenvalue (+-1) with a real unit eigenvector in basis.
/// size 2: a rotation block, eigenvalues cos(angle) +- i sin(angle),
/// basis spans the invariant plane.
struct SchurBlock {
  int size = 1;
  double angle = 0.0;   ///< in [0, pi]; 0 or pi for 1x1 blocks
  Matrix basis;         ///< p x size, orthonormal columns
  Matrix block;         ///< size x size block of T
};

/// Real Schur decomposition specialised to orthogonal input. Throws
/// ValidationError if ||k kᵀ - I||_F exceeds tol.
std::vector<SchurBlock> orthogonal_schur(const Matrix& k, double tol = 1e-6);

/// Full spectrum of an orthogonal matrix. Eigenvalues lie on the unit circle
/// within tol; eigenvectors of real eigenvalues are returned real.
std::vector<EigenPair> eig_orthogonal(const Matrix& k, double tol = 1e-6);

}  // namespace numerics
}  // namespace hnko
