#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vgmix/linalg.hpp"

using namespace vgmix;

namespace {

double frobenius_rel(const Matrix& a, const Matrix& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      num += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
      den += b(i, j) * b(i, j);
    }
  return std::sqrt(num / den);
}

}  // namespace

TEST(Cholesky, Identity) {
  const CholFactor c = cholesky(Matrix::identity(3));
  EXPECT_EQ(c.lower(), Matrix::identity(3));
  EXPECT_EQ(c.log_det(), 0.0);
}

TEST(Cholesky, HandChecked2x2) {
  const CholFactor c = cholesky(Matrix{{4, 2}, {2, 5}});
  EXPECT_EQ(c.lower(), (Matrix{{2, 0}, {1, 2}}));
  EXPECT_NEAR(c.log_det(), std::log(16.0), 1e-15);
}

TEST(Cholesky, ReconstructsRandomSpd) {
  std::mt19937_64 gen(1);
  for (std::size_t p = 1; p <= 20; ++p) {
    const Matrix a = oracle::random_spd(p, gen);
    const CholFactor c = cholesky(a);
    EXPECT_LT(frobenius_rel(c.reconstruct(), a), 1e-10) << p;
    double ld = 0.0;
    for (std::size_t i = 0; i < p; ++i) ld += 2.0 * std::log(c.lower()(i, i));
    EXPECT_NEAR(c.log_det(), ld, 1e-12 * std::max(1.0, std::abs(ld)));
    EXPECT_NEAR(c.log_det(), oracle::log_det(a), 1e-10 * std::max(1.0, std::abs(ld)));
  }
}

TEST(Cholesky, RejectsIndefiniteWithPivot) {
  try {
    cholesky(Matrix{{1, 0, 0}, {0, 1, 2}, {0, 2, 1}});
    FAIL() << "expected NotPositiveDefinite";
  } catch (const NotPositiveDefinite& e) {
    EXPECT_EQ(e.pivot(), 2u);
  }
  // Singular within the pivot tolerance.
  EXPECT_THROW(cholesky(Matrix{{1, 1}, {1, 1}}), NotPositiveDefinite);
  EXPECT_THROW(cholesky(Matrix{{1, 0}, {0, 1e-13}}), NotPositiveDefinite);
  EXPECT_NO_THROW(cholesky(Matrix{{1, 0}, {0, 1e-11}}));
}

TEST(Cholesky, RejectsNonSquareOrAsymmetric) {
  EXPECT_ANY_THROW(cholesky(Matrix(2, 3)));
  EXPECT_ANY_THROW(cholesky(Matrix{{1, 0.5}, {0.4, 1}}));
}

TEST(Mahalanobis, Examples) {
  const CholFactor c = cholesky(Matrix{{4, 0}, {0, 9}});
  const Vector mu{1.5, -2.0};
  EXPECT_EQ(mahalanobis(mu, mu, c), 0.0);
  EXPECT_NEAR(mahalanobis(Vector{2.5, -2.0}, mu, c), 0.25, 1e-15);
  EXPECT_THROW(mahalanobis(Vector{1.0}, mu, c), DimensionMismatch);
}

TEST(Mahalanobis, MatchesExplicitInverse) {
  std::mt19937_64 gen(2);
  for (std::size_t p : {1u, 2u, 5u, 12u}) {
    const Matrix s = oracle::random_spd(p, gen);
    const CholFactor c = cholesky(s);
    const Matrix inv = oracle::inverse(s);
    for (int k = 0; k < 10; ++k) {
      const Vector x = oracle::random_vector(p, gen, 3.0), mu = oracle::random_vector(p, gen);
      const Vector d = oracle::minus(x, mu);
      const double ref = oracle::bilinear(d, inv, d);
      const double got = mahalanobis(x, mu, c);
      EXPECT_NEAR(got, ref, 1e-10 * std::max(1.0, ref));
      EXPECT_GT(got, 0.0);
    }
  }
}

TEST(QuadForm, Examples) {
  const CholFactor c = cholesky(Matrix{{4, 0}, {0, 9}});
  EXPECT_EQ(quad_form(Vector{0, 0}, c), 0.0);
  EXPECT_NEAR(quad_form(Vector{2, 0}, c), 1.0, 1e-15);
  EXPECT_THROW(quad_form(Vector{1, 2, 3}, c), DimensionMismatch);
}

TEST(QuadForm, EqualsMahalanobisFromZeroAndIsHomogeneous) {
  std::mt19937_64 gen(3);
  for (std::size_t p : {1u, 3u, 8u}) {
    const CholFactor c = cholesky(oracle::random_spd(p, gen));
    const Vector zero(p, 0.0);
    for (int k = 0; k < 10; ++k) {
      const Vector v = oracle::random_vector(p, gen);
      EXPECT_EQ(quad_form(v, c), mahalanobis(v, zero, c));
      Vector cv = v;
      for (auto& e : cv) e *= -3.7;
      EXPECT_NEAR(quad_form(cv, c), 3.7 * 3.7 * quad_form(v, c), 1e-12 * quad_form(cv, c));
    }
  }
}

TEST(CrossForm, MatchesExplicitInverse) {
  std::mt19937_64 gen(4);
  const Matrix s = oracle::random_spd(4, gen);
  const CholFactor c = cholesky(s);
  const Matrix inv = oracle::inverse(s);
  const Vector x = oracle::random_vector(4, gen), mu = oracle::random_vector(4, gen),
               v = oracle::random_vector(4, gen);
  EXPECT_NEAR(cross_form(x, mu, v, c), oracle::bilinear(v, inv, oracle::minus(x, mu)), 1e-12);
}

TEST(CholFactor, SolveInvertsMatrix) {
  std::mt19937_64 gen(5);
  const Matrix s = oracle::random_spd(6, gen);
  const Vector b = oracle::random_vector(6, gen);
  const Vector z = cholesky(s).solve(b);
  for (std::size_t i = 0; i < 6; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < 6; ++j) r += s(i, j) * z[j];
    EXPECT_NEAR(r, b[i], 1e-12);
  }
}
