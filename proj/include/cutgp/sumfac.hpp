#pragma once

#include <cutgp/dense.hpp>
#include <cutgp/tensor1d.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace cutgp
{
/// Coefficients on a tensor grid, stored lexicographically (first index fastest).
template <int dim>
struct TensorField
{
  static_assert(dim == 2 || dim == 3, "TensorField supports 2D and 3D");

  std::array<std::size_t, dim> extents{};
  std::vector<double>          data;

  TensorField() = default;

  explicit TensorField(const std::array<std::size_t, dim> &ext, double value = 0.0)
    : extents(ext)
  {
    for (auto e : ext)
      if (e == 0)
        throw std::invalid_argument("TensorField: extents must be positive");
    data.assign(product(ext), value);
  }

  TensorField(const std::array<std::size_t, dim> &ext, std::vector<double> values)
    : extents(ext)
    , data(std::move(values))
  {
    if (data.size() != product(ext))
      throw std::invalid_argument("TensorField: data length does not match extents");
  }

  static std::size_t
  product(const std::array<std::size_t, dim> &ext)
  {
    return std::accumulate(ext.begin(), ext.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t
  size() const
  {
    return data.size();
  }

  std::size_t
  index(const std::array<std::size_t, dim> &multi) const
  {
    std::size_t idx = 0, stride = 1;
    for (int a = 0; a < dim; ++a)
      {
        idx += multi[a] * stride;
        stride *= extents[a];
      }
    return idx;
  }

  double &
  operator()(const std::array<std::size_t, dim> &multi)
  {
    return data[index(multi)];
  }

  double
  operator()(const std::array<std::size_t, dim> &multi) const
  {
    return data[index(multi)];
  }
};

/// Multiply-add counter for complexity checks.
struct OperationCounter
{
  std::uint64_t multiply_adds = 0;
};

namespace detail
{
  /**
   * out[pre, j, post] (+)= sum_i A(j, i) in[pre, i, post], where `pre` runs
   * over the n_pre faster-varying axes and `post` over the slower ones.
   */
  template <bool add, bool count = false>
  inline void
  contract(const double     *A,
           std::size_t       m_out,
           std::size_t       m_in,
           std::size_t       n_pre,
           std::size_t       n_post,
           const double     *in,
           double           *out,
           OperationCounter *counter = nullptr)
  {
    for (std::size_t post = 0; post < n_post; ++post)
      {
        const double *in_b  = in + post * n_pre * m_in;
        double       *out_b = out + post * n_pre * m_out;
        for (std::size_t j = 0; j < m_out; ++j)
          {
            const double *row = A + j * m_in;
            for (std::size_t pre = 0; pre < n_pre; ++pre)
              {
                double acc = 0.0;
                for (std::size_t i = 0; i < m_in; ++i)
                  {
                    acc += row[i] * in_b[i * n_pre + pre];
                    if constexpr (count)
                      ++counter->multiply_adds;
                  }
                if constexpr (add)
                  out_b[j * n_pre + pre] += acc;
                else
                  out_b[j * n_pre + pre] = acc;
              }
          }
      }
  }

  template <int dim>
  inline std::pair<std::size_t, std::size_t>
  pre_post(const std::array<std::size_t, dim> &extents, int axis)
  {
    std::size_t n_pre = 1, n_post = 1;
    for (int b = 0; b < axis; ++b)
      n_pre *= extents[b];
    for (int b = axis + 1; b < dim; ++b)
      n_post *= extents[b];
    return {n_pre, n_post};
  }

  /// Apply A along `axis` of a buffer with the given extents; extents[axis] becomes A.rows().
  template <int dim, bool add = false>
  inline void
  apply_axis_raw(const Matrix &A, std::array<std::size_t, dim> &extents, int axis, const double *in, double *out)
  {
    const auto [n_pre, n_post] = pre_post<dim>(extents, axis);
    contract<add>(A.data().data(), A.rows(), A.cols(), n_pre, n_post, in, out);
    extents[axis] = A.rows();
  }
} // namespace detail

/// Applies A along one axis (0-based). Out-of-place; the input is preserved.
template <int dim>
TensorField<dim>
apply_axis(const Matrix &A, const TensorField<dim> &u, int axis, OperationCounter *counter = nullptr)
{
  if (axis < 0 || axis >= dim)
    throw std::invalid_argument("apply_axis: axis out of range");
  if (u.extents[axis] != A.cols())
    throw std::invalid_argument("apply_axis: extent " + std::to_string(u.extents[axis]) + " along axis " +
                                std::to_string(axis) + " does not match matrix with " + std::to_string(A.cols()) +
                                " columns");
  auto ext  = u.extents;
  ext[axis] = A.rows();
  TensorField<dim> out(ext);
  const auto [n_pre, n_post] = detail::pre_post<dim>(u.extents, axis);
  if (counter)
    detail::contract<false, true>(A.data().data(), A.rows(), A.cols(), n_pre, n_post, u.data.data(), out.data.data(),
                                  counter);
  else
    detail::contract<false>(A.data().data(), A.rows(), A.cols(), n_pre, n_post, u.data.data(), out.data.data());
  return out;
}

/// Kronecker operator A_{d-1} x ... x A_0 applied axis by axis; a null entry is the identity.
template <int dim>
TensorField<dim>
kron_apply(const std::array<const Matrix *, dim> &mats, const TensorField<dim> &u, OperationCounter *counter = nullptr)
{
  TensorField<dim> result = u;
  for (int a = 0; a < dim; ++a)
    if (mats[a] != nullptr)
      result = apply_axis(*mats[a], result, a, counter);
  return result;
}

/**
 * Sum-factorized Laplacian on an axis-parallel cell with constant diagonal
 * Jacobian. Interpolates coefficients to gradients at the tensor Gauss
 * points, scales by J w_q / h_a^2 and integrates back with the transposed
 * pipeline.
 */
template <int dim>
class CellLaplacianKernel
{
public:
  struct Scratch
  {
    std::vector<double> t0, t1, t2, t3, t4, t5;
  };

  CellLaplacianKernel(const ReferenceElement1D &elem, const std::array<double, dim> &spacing)
    : n(elem.n_dofs())
    , nq(elem.quadrature().size())
  {
    S  = elem.shape_values().transpose();
    D  = elem.shape_gradients().transpose();
    St = elem.shape_values();
    Dt = elem.shape_gradients();

    double jac = 1.0;
    for (int a = 0; a < dim; ++a)
      {
        if (!(spacing[a] > 0.0))
          throw std::invalid_argument("CellLaplacianKernel: spacing must be positive");
        jac *= spacing[a];
      }
    const auto &w = elem.quadrature().weights;
    std::size_t n_points = 1;
    for (int a = 0; a < dim; ++a)
      n_points *= nq;
    for (int a = 0; a < dim; ++a)
      coefficients[a].resize(n_points);
    for (std::size_t q = 0; q < n_points; ++q)
      {
        double      weight = jac;
        std::size_t rest   = q;
        for (int a = 0; a < dim; ++a)
          {
            weight *= w[rest % nq];
            rest /= nq;
          }
        for (int a = 0; a < dim; ++a)
          coefficients[a][q] = weight / (spacing[a] * spacing[a]);
      }
  }

  Scratch
  make_scratch() const
  {
    std::size_t size = 1;
    for (int a = 0; a < dim; ++a)
      size *= std::max(n, nq);
    Scratch s;
    for (auto *v : {&s.t0, &s.t1, &s.t2, &s.t3, &s.t4, &s.t5})
      v->assign(size, 0.0);
    return s;
  }

  std::size_t
  n_dofs() const
  {
    std::size_t s = 1;
    for (int a = 0; a < dim; ++a)
      s *= n;
    return s;
  }

  void
  apply(const double *u, double *w, Scratch &s) const
  {
    using Ext = std::array<std::size_t, dim>;
    Ext e_u;
    e_u.fill(n);
    if constexpr (dim == 2)
      {
        // forward: t0 = S_0 u, t1 = D_0 u; grad_0 = S_1 t1, grad_1 = D_1 t0
        Ext e = e_u;
        detail::apply_axis_raw<dim>(S, e, 0, u, s.t0.data());
        e = e_u;
        detail::apply_axis_raw<dim>(D, e, 0, u, s.t1.data());
        Ext e2 = e;
        detail::apply_axis_raw<dim>(S, e2, 1, s.t1.data(), s.t2.data());
        e2 = e;
        detail::apply_axis_raw<dim>(D, e2, 1, s.t0.data(), s.t3.data());
        const std::size_t nqp = nq * nq;
        for (std::size_t q = 0; q < nqp; ++q)
          {
            s.t2[q] *= coefficients[0][q];
            s.t3[q] *= coefficients[1][q];
          }
        // backward: w = D_0^T S_1^T g0 + S_0^T D_1^T g1
        Ext eq;
        eq.fill(nq);
        Ext eb = eq;
        detail::apply_axis_raw<dim>(St, eb, 1, s.t2.data(), s.t0.data());
        eb = eq;
        detail::apply_axis_raw<dim>(Dt, eb, 1, s.t3.data(), s.t1.data());
        Ext ec = eb;
        detail::apply_axis_raw<dim>(Dt, ec, 0, s.t0.data(), w);
        ec = eb;
        detail::apply_axis_raw<dim, true>(St, ec, 0, s.t1.data(), w);
      }
    else
      {
        // forward
        Ext e0 = e_u;
        detail::apply_axis_raw<dim>(S, e0, 0, u, s.t0.data()); // tS
        Ext e0d = e_u;
        detail::apply_axis_raw<dim>(D, e0d, 0, u, s.t1.data()); // tD
        Ext e1 = e0;
        detail::apply_axis_raw<dim>(S, e1, 1, s.t0.data(), s.t2.data()); // S1 tS
        e1 = e0;
        detail::apply_axis_raw<dim>(D, e1, 1, s.t0.data(), s.t3.data()); // D1 tS
        e1 = e0;
        detail::apply_axis_raw<dim>(S, e1, 1, s.t1.data(), s.t4.data()); // S1 tD
        Ext e2 = e1;
        detail::apply_axis_raw<dim>(S, e2, 2, s.t4.data(), s.t0.data()); // g0
        e2 = e1;
        detail::apply_axis_raw<dim>(S, e2, 2, s.t3.data(), s.t1.data()); // g1
        e2 = e1;
        detail::apply_axis_raw<dim>(D, e2, 2, s.t2.data(), s.t5.data()); // g2
        const std::size_t nqp = nq * nq * nq;
        for (std::size_t q = 0; q < nqp; ++q)
          {
            s.t0[q] *= coefficients[0][q];
            s.t1[q] *= coefficients[1][q];
            s.t5[q] *= coefficients[2][q];
          }
        // backward
        Ext eq;
        eq.fill(nq);
        Ext b2 = eq;
        detail::apply_axis_raw<dim>(St, b2, 2, s.t0.data(), s.t2.data()); // S2^T g0
        b2 = eq;
        detail::apply_axis_raw<dim>(St, b2, 2, s.t1.data(), s.t3.data()); // S2^T g1
        b2 = eq;
        detail::apply_axis_raw<dim>(Dt, b2, 2, s.t5.data(), s.t4.data()); // D2^T g2
        Ext b1 = b2;
        detail::apply_axis_raw<dim>(St, b1, 1, s.t2.data(), s.t0.data()); // S1^T S2^T g0
        b1 = b2;
        detail::apply_axis_raw<dim>(Dt, b1, 1, s.t3.data(), s.t1.data()); // D1^T S2^T g1
        b1 = b2;
        detail::apply_axis_raw<dim, true>(St, b1, 1, s.t4.data(), s.t1.data()); // + S1^T D2^T g2
        Ext b0 = b1;
        detail::apply_axis_raw<dim>(Dt, b0, 0, s.t0.data(), w);
        b0 = b1;
        detail::apply_axis_raw<dim, true>(St, b0, 0, s.t1.data(), w);
      }
  }

private:
  std::size_t                                n;
  std::size_t                                nq;
  Matrix                                     S, D, St, Dt;
  std::array<std::vector<double>, dim>       coefficients;
};

/// w_i = sum_q grad u(x_q) . grad phi_i(x_q) J w_q on one cell with the given spacing.
template <int dim>
TensorField<dim>
cell_laplacian(const ReferenceElement1D &elem, const std::array<double, dim> &spacing, const TensorField<dim> &u_local)
{
  for (int a = 0; a < dim; ++a)
    if (u_local.extents[a] != elem.n_dofs())
      throw std::invalid_argument("cell_laplacian: local field must have k+1 entries per axis");
  CellLaplacianKernel<dim> kernel(elem, spacing);
  auto                     scratch = kernel.make_scratch();
  TensorField<dim>         w(u_local.extents);
  kernel.apply(u_local.data.data(), w.data.data(), scratch);
  return w;
}

} // namespace cutgp
