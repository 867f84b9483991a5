#include "oracles.hpp"

#include <cutgp/sumfac.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace cutgp;

namespace
{
Matrix
random_matrix(std::size_t m, std::size_t n, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Matrix                                 A(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      A(i, j) = d(rng);
  return A;
}

template <int dim>
TensorField<dim>
random_field(const std::array<std::size_t, dim> &ext, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  TensorField<dim>                       u(ext);
  for (auto &v : u.data)
    v = d(rng);
  return u;
}

Eigen::VectorXd
as_vector(const std::vector<double> &v)
{
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// 1D stiffness from the monomial basis.
Eigen::MatrixXd
stiffness_1d(unsigned k)
{
  const oracle::Basis1D b(k);
  const auto [x, w] = oracle::gauss(20);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(k + 1, k + 1);
  for (std::size_t q = 0; q < x.size(); ++q)
    for (unsigned i = 0; i <= k; ++i)
      for (unsigned j = 0; j <= k; ++j)
        K(i, j) += w[q] * b.eval(i, x[q], 1) * b.eval(j, x[q], 1);
  return K;
}

/// sum_a (J / h_a^2) M ⊗ .. ⊗ K_a ⊗ .. ⊗ M
template <int dim>
Eigen::MatrixXd
stiffness_oracle(unsigned k, const std::array<double, dim> &h)
{
  const auto M = oracle::mass_1d(k);
  const auto K = stiffness_1d(k);
  double     J = 1.0;
  for (double v : h)
    J *= v;
  Eigen::MatrixXd S;
  for (int a = 0; a < dim; ++a)
    {
      std::vector<Eigen::MatrixXd> mats;
      for (int b = 0; b < dim; ++b)
        mats.push_back(b == a ? K : M);
      Eigen::MatrixXd term = (J / (h[a] * h[a])) * oracle::kron(mats);
      S                    = a == 0 ? term : Eigen::MatrixXd(S + term);
    }
  return S;
}
} // namespace

TEST(TensorField, IndexingIsLexicographic)
{
  TensorField<3> u({2, 3, 4});
  EXPECT_EQ(u.size(), 24u);
  EXPECT_EQ(u.index({1, 2, 3}), 1u + 2u * 2u + 3u * 6u);
  EXPECT_THROW(TensorField<2>({0, 2}), std::invalid_argument);
  EXPECT_THROW(TensorField<2>({2, 2}, std::vector<double>(3)), std::invalid_argument);
}

TEST(ApplyAxis, IdentityLeavesInput)
{
  std::mt19937_64 rng(1);
  const auto      u = random_field<3>({3, 4, 2}, rng);
  for (int axis = 0; axis < 3; ++axis)
    EXPECT_EQ(apply_axis(Matrix::identity(u.extents[axis]), u, axis).data, u.data);
}

TEST(ApplyAxis, MassOnUnitVector)
{
  const auto     M = mass_matrix_1d(build_reference_element(1, 2));
  TensorField<2> u({2, 2});
  u.data[0]      = 1.0;
  const auto out = apply_axis(M, u, 1);
  EXPECT_NEAR(out({0, 0}), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(out({0, 1}), 1.0 / 6.0, 1e-15);
  EXPECT_EQ(out({1, 0}), 0.0);
  EXPECT_EQ(out({1, 1}), 0.0);
}

TEST(ApplyAxis, RectangularChangesExtent)
{
  std::mt19937_64 rng(2);
  const auto      u   = random_field<2>({3, 5}, rng);
  const auto      A   = random_matrix(4, 5, rng);
  const auto      out = apply_axis(A, u, 1);
  EXPECT_EQ(out.extents[0], 3u);
  EXPECT_EQ(out.extents[1], 4u);
  EXPECT_THROW(apply_axis(A, u, 0), std::invalid_argument);
}

TEST(ApplyAxis, CountsMultiplyAdds)
{
  std::mt19937_64 rng(3);
  for (unsigned k = 1; k <= 4; ++k)
    for (int axis = 0; axis < 3; ++axis)
      {
        const std::array<std::size_t, 3> ext{k + 1, k + 2, 2 * k + 1};
        const auto                       u = random_field<3>(ext, rng);
        const std::size_t                m_out = k + 3;
        const auto                       A = random_matrix(m_out, ext[axis], rng);
        OperationCounter                 counter;
        apply_axis(A, u, axis, &counter);
        std::uint64_t expected = m_out * ext[axis];
        for (int b = 0; b < 3; ++b)
          if (b != axis)
            expected *= ext[b];
        EXPECT_EQ(counter.multiply_adds, expected);
      }
}

TEST(KronApply, MatchesDenseKronecker)
{
  std::mt19937_64 rng(4);
  for (unsigned k = 1; k <= 3; ++k)
    for (int trial = 0; trial < 20; ++trial)
      {
        const std::array<std::size_t, 3> ext{k + 1, 2 * k + 1, k + 1};
        const auto                       u = random_field<3>(ext, rng);
        std::array<Matrix, 3>            A;
        std::vector<Eigen::MatrixXd>     E;
        for (int a = 0; a < 3; ++a)
          {
            A[a] = random_matrix(ext[a], ext[a], rng);
            E.push_back(oracle::to_eigen(A[a]));
          }
        const auto            out = kron_apply<3>({&A[0], &A[1], &A[2]}, u);
        const Eigen::VectorXd ref = oracle::kron(E) * as_vector(u.data);
        EXPECT_LE((as_vector(out.data) - ref).norm(), 1e-13 * ref.norm());
      }
}

TEST(KronApply, IdentitiesAndZeros)
{
  std::mt19937_64 rng(5);
  const auto      u = random_field<2>({3, 3}, rng);
  EXPECT_EQ(kron_apply<2>({nullptr, nullptr}, u).data, u.data);
  const Matrix Z(3, 3);
  for (double v : kron_apply<2>({nullptr, &Z}, u).data)
    EXPECT_EQ(v, 0.0);
}

TEST(CellLaplacian, MatchesKroneckerStiffness)
{
  std::mt19937_64 rng(6);
  for (unsigned k = 1; k <= 3; ++k)
    {
      const auto                  elem = build_reference_element(k, k + 1);
      const std::array<double, 2> h2{0.5, 0.25};
      const std::array<double, 3> h3{0.5, 0.25, 0.75};
      const auto                  S2 = stiffness_oracle<2>(k, h2);
      const auto                  S3 = stiffness_oracle<3>(k, h3);
      for (int t = 0; t < 5; ++t)
        {
          const auto            u2 = random_field<2>({k + 1, k + 1}, rng);
          const Eigen::VectorXd r2 = S2 * as_vector(u2.data);
          EXPECT_LE((as_vector(cell_laplacian<2>(elem, h2, u2).data) - r2).norm(), 1e-12 * r2.norm());
          const auto            u3 = random_field<3>({k + 1, k + 1, k + 1}, rng);
          const Eigen::VectorXd r3 = S3 * as_vector(u3.data);
          EXPECT_LE((as_vector(cell_laplacian<3>(elem, h3, u3).data) - r3).norm(), 1e-12 * r3.norm());
        }
    }
}

TEST(CellLaplacian, ClassicalQ1Stiffness)
{
  // unit square, nodes (0,0), (1,0), (0,1), (1,1)
  const double   K[4][4] = {{4, -1, -1, -2}, {-1, 4, -2, -1}, {-1, -2, 4, -1}, {-2, -1, -1, 4}};
  const auto     elem    = build_reference_element(1, 2);
  TensorField<2> u({2, 2}, std::vector<double>{0.0, 1.0, 0.0, 1.0});
  const auto     w = cell_laplacian<2>(elem, {1.0, 1.0}, u);
  for (int i = 0; i < 4; ++i)
    {
      double ref = 0.0;
      for (int j = 0; j < 4; ++j)
        ref += K[i][j] / 6.0 * u.data[j];
      EXPECT_NEAR(w.data[i], ref, 1e-14);
    }
}

TEST(CellLaplacian, ConstantsAndSymmetry)
{
  for (unsigned k = 1; k <= 3; ++k)
    {
      const auto     elem = build_reference_element(k, k + 1);
      TensorField<3> c({k + 1, k + 1, k + 1}, 2.5);
      for (double v : cell_laplacian<3>(elem, {0.3, 0.3, 0.3}, c).data)
        EXPECT_LE(std::abs(v), 1e-13 * 2.5);

      const std::size_t n = (k + 1) * (k + 1);
      Eigen::MatrixXd   A(n, n);
      for (std::size_t j = 0; j < n; ++j)
        {
          TensorField<2> e({k + 1, k + 1});
          e.data[j]      = 1.0;
          const auto col = cell_laplacian<2>(elem, {0.2, 0.4}, e);
          for (std::size_t i = 0; i < n; ++i)
            A(i, j) = col.data[i];
        }
      EXPECT_LE(oracle::max_abs(A - A.transpose()), 1e-13 * oracle::max_abs(A));
    }
}

TEST(CellLaplacian, RejectsWrongExtents)
{
  const auto elem = build_reference_element(2, 3);
  EXPECT_THROW(cell_laplacian<2>(elem, {1.0, 1.0}, TensorField<2>({2, 3})), std::invalid_argument);
}
