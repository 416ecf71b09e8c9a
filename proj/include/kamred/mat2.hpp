#pragma once

#include <Eigen/Dense>
#include <complex>

namespace kamred {

using Mat2d = Eigen::Matrix2d;
using Mat2c = Eigen::Matrix2cd;
using Vec2d = Eigen::Vector2d;
using Complex = std::complex<double>;

/// Largest singular value of a 2x2 complex matrix, in closed form.
double spectral_norm(const Mat2c& m);
double spectral_norm(const Mat2d& m);

/// Rotation by phi turns: R_phi = [[cos 2*pi*phi, -sin], [sin, cos]].
Mat2d rotation(double phi_turns);

/// exp of a traceless 2x2 (real or complex) via the cosh/sinh closed form.
Mat2d expm_traceless(const Mat2d& x);
Mat2c expm_traceless(const Mat2c& x);

/// Real log of A in SL(2,R). Throws LogBranchError when trace(A) <= -2 + 1e-12,
/// where no real logarithm close to 0 exists.
Mat2d logm_sl2(const Mat2d& a);

/// Eigenvalue angle of A in SL(2,R), in turns, with the branch Im rho >= 0 and
/// Re rho in [0, 1/2). Eigenvalues of A are {e^{2*pi*i*rho}, e^{-2*pi*i*rho}}.
Complex rho_of(const Mat2d& a);

/// Signed (orientation-aware) rotation angle of a constant cocycle matrix, in
/// turns. For elliptic A this is the actual fibered rotation number of
/// (alpha, A) in [0,1); for hyperbolic A the real part is 0 or 1/2 and the
/// imaginary part carries the expansion rate.
Complex oriented_rho(const Mat2d& a);

/// Real C in SL(2,R) with C^{-1} A C = R_{rho} for elliptic A, where rho is the
/// oriented angle. Throws Error when |trace| >= 2 (not elliptic).
Mat2d elliptic_diagonalizer(const Mat2d& a);

/// Fixed isomorphism sl(2,R) -> su(1,1): X -> M X M^{-1} with
/// M = (1/(1+i)) [[1, -i], [1, i]].
Mat2c su11_from_sl2(const Mat2c& x);
Mat2c sl2_from_su11(const Mat2c& x);
const Mat2c& su11_basis();

/// Unitary U such that U * S * U^H is upper triangular with the rho-branch
/// eigenvalue first. S is any 2x2 complex matrix with known eigenvalue lambda.
Mat2c schur_unitary(const Mat2c& s, Complex lambda_first);

}  // namespace kamred
