#pragma once

#include <cutgp/dense.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cutgp
{
/// Points and weights of a one-dimensional rule on [0,1].
struct QuadratureRule1D
{
  std::vector<double> points;
  std::vector<double> weights;

  std::size_t
  size() const
  {
    return points.size();
  }
};

namespace detail
{
  // Legendre polynomial P_n and its derivative on [-1,1].
  inline std::pair<double, double>
  legendre(unsigned n, double x)
  {
    double p_prev = 1.0;
    double p      = x;
    if (n == 0)
      return {1.0, 0.0};
    for (unsigned j = 1; j < n; ++j)
      {
        const double p_next = ((2.0 * j + 1.0) * x * p - j * p_prev) / (j + 1.0);
        p_prev              = p;
        p                   = p_next;
      }
    const double dp = n * (x * p - p_prev) / (x * x - 1.0);
    return {p, dp};
  }

  inline double
  factorial(unsigned m)
  {
    if (m > 20)
      throw std::domain_error("factorial: order above 20 not representable exactly");
    std::uint64_t f = 1;
    for (unsigned j = 2; j <= m; ++j)
      f *= j;
    return static_cast<double>(f);
  }
} // namespace detail

/// n-point Gauss-Legendre rule mapped to [0,1].
inline QuadratureRule1D
gauss_legendre(unsigned n)
{
  if (n == 0)
    throw std::invalid_argument("gauss_legendre: need at least one point");
  QuadratureRule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (unsigned i = 0; i < (n + 1) / 2; ++i)
    {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it)
        {
          const auto [p, d] = detail::legendre(n, x);
          dp                = d;
          const double dx   = p / d;
          x -= dx;
          if (std::abs(dx) < 1e-16)
            break;
        }
      dp                  = detail::legendre(n, x).second;
      const double w      = 2.0 / ((1.0 - x * x) * dp * dp);
      rule.points[i]         = 0.5 * (1.0 - x);
      rule.points[n - 1 - i] = 0.5 * (1.0 + x);
      rule.weights[i]         = 0.5 * w;
      rule.weights[n - 1 - i] = 0.5 * w;
    }
  return rule;
}

/// Gauss-Lobatto support points on [0,1], sorted ascending. n_points >= 2.
inline std::vector<double>
gauss_lobatto_nodes(unsigned n_points)
{
  if (n_points < 2)
    throw std::invalid_argument("gauss_lobatto_nodes: need at least two points");
  const unsigned      k = n_points - 1;
  std::vector<double> nodes(n_points);
  nodes.front() = 0.0;
  nodes.back()  = 1.0;
  for (unsigned j = 1; j < k; ++j)
    {
      // interior nodes are the roots of P_k'
      double x = -std::cos(std::numbers::pi * j / k);
      for (int it = 0; it < 100; ++it)
        {
          const auto [p, dp] = detail::legendre(k, x);
          const double d2p   = (2.0 * x * dp - k * (k + 1.0) * p) / (1.0 - x * x);
          const double dx    = dp / d2p;
          x -= dx;
          if (std::abs(dx) < 1e-16)
            break;
        }
      nodes[j] = 0.5 * (1.0 + x);
    }
  // symmetrize to remove round-off asymmetry
  for (unsigned j = 0; j < n_points / 2; ++j)
    {
      const double s            = 0.5 * (nodes[j] + 1.0 - nodes[n_points - 1 - j]);
      nodes[j]                  = s;
      nodes[n_points - 1 - j]   = 1.0 - s;
    }
  if (n_points % 2 == 1)
    nodes[n_points / 2] = 0.5;
  return nodes;
}

/**
 * Derivatives of orders 0..out.size()-1 of the Lagrange polynomial that is one
 * at nodes[i] and zero at the other nodes, evaluated at x.
 *
 * The basis is expanded as a Taylor polynomial around x by multiplying the
 * linear factors (x + t - x_j) / (x_i - x_j); coefficient m times m! is the
 * m-th derivative.
 */
inline void
lagrange_derivatives(std::span<const double> nodes, std::size_t i, double x, std::span<double> out)
{
  const std::size_t   n_orders = out.size();
  std::vector<double> coeffs(n_orders, 0.0);
  coeffs[0] = 1.0;
  for (std::size_t j = 0; j < nodes.size(); ++j)
    {
      if (j == i)
        continue;
      const double inv = 1.0 / (nodes[i] - nodes[j]);
      const double a   = (x - nodes[j]) * inv;
      for (std::size_t m = n_orders; m-- > 1;)
        coeffs[m] = a * coeffs[m] + inv * coeffs[m - 1];
      coeffs[0] *= a;
    }
  double fact = 1.0;
  for (std::size_t m = 0; m < n_orders; ++m)
    {
      if (m > 1)
        fact *= static_cast<double>(m);
      out[m] = coeffs[m] * fact;
    }
}

/// Degree-k Lagrange basis on [0,1] with tabulated data at a Gauss rule.
class ReferenceElement1D
{
public:
  ReferenceElement1D(unsigned degree, unsigned n_quadrature_points)
    : k(degree)
  {
    if (degree == 0)
      throw std::invalid_argument("ReferenceElement1D: degree must be at least 1");
    if (n_quadrature_points < degree + 1)
      throw std::invalid_argument("ReferenceElement1D: need at least k+1 quadrature points, got " +
                                  std::to_string(n_quadrature_points));
    support_points = gauss_lobatto_nodes(degree + 1);
    quad           = gauss_legendre(n_quadrature_points);

    const std::size_t n = n_dofs();
    values              = Matrix(n, quad.size());
    gradients           = Matrix(n, quad.size());
    std::vector<double> d(2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t q = 0; q < quad.size(); ++q)
        {
          lagrange_derivatives(support_points, i, quad.points[q], d);
          values(i, q)    = d[0];
          gradients(i, q) = d[1];
        }

    endpoint.assign((k + 1) * n * 2, 0.0);
    std::vector<double> all(k + 1);
    for (std::size_t i = 0; i < n; ++i)
      for (unsigned side = 0; side < 2; ++side)
        {
          lagrange_derivatives(support_points, i, static_cast<double>(side), all);
          for (unsigned m = 0; m <= k; ++m)
            endpoint[(m * n + i) * 2 + side] = all[m];
        }
  }

  unsigned
  degree() const
  {
    return k;
  }

  std::size_t
  n_dofs() const
  {
    return k + 1;
  }

  const std::vector<double> &
  nodes() const
  {
    return support_points;
  }

  const QuadratureRule1D &
  quadrature() const
  {
    return quad;
  }

  /// shape_values()(i, q) = phi_i(x_q)
  const Matrix &
  shape_values() const
  {
    return values;
  }

  /// shape_gradients()(i, q) = phi_i'(x_q)
  const Matrix &
  shape_gradients() const
  {
    return gradients;
  }

  /// m-th derivative of basis i at reference coordinate `side` (0 or 1).
  double
  endpoint_derivative(unsigned m, std::size_t i, unsigned side) const
  {
    if (m > k || i > k || side > 1)
      throw std::out_of_range("endpoint_derivative: index out of range");
    return endpoint[(m * n_dofs() + i) * 2 + side];
  }

  /// Values and first derivatives of all basis functions at x.
  void
  evaluate(double x, std::span<double> phi, std::span<double> dphi) const
  {
    std::array<double, 2> d{};
    for (std::size_t i = 0; i < n_dofs(); ++i)
      {
        lagrange_derivatives(support_points, i, x, d);
        phi[i]  = d[0];
        dphi[i] = d[1];
      }
  }

private:
  unsigned            k;
  std::vector<double> support_points;
  QuadratureRule1D    quad;
  Matrix              values;
  Matrix              gradients;
  std::vector<double> endpoint;
};

inline ReferenceElement1D
build_reference_element(unsigned k, unsigned q)
{
  return ReferenceElement1D(k, q);
}

/// Exact 1D mass matrix on [0,1] integrated with a (k+1)-point Gauss rule.
inline Matrix
mass_matrix_1d(const ReferenceElement1D &elem)
{
  const std::size_t      n    = elem.n_dofs();
  const QuadratureRule1D rule = gauss_legendre(elem.degree() + 1);
  Matrix                 mass(n, n);
  std::vector<double>    phi(n), dphi(n);
  for (std::size_t q = 0; q < rule.size(); ++q)
    {
      elem.evaluate(rule.points[q], phi, dphi);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          mass(i, j) += phi[i] * phi[j] * rule.weights[q];
    }
  return mass;
}

/**
 * Jump of the m-th derivative across the shared point of the unit patch
 * [0,1] u [1,2]. The 2k+1 patch functions are numbered left cell first, the
 * shared node once, then the right cell's remaining k functions; the jump is
 * the right trace minus the left trace.
 */
inline std::vector<double>
jump_vector(const ReferenceElement1D &elem, unsigned m)
{
  const unsigned k = elem.degree();
  if (m > k)
    throw std::invalid_argument("jump_vector: derivative order exceeds the degree");
  std::vector<double> jump(2 * k + 1, 0.0);
  for (unsigned i = 0; i <= k; ++i)
    jump[i] -= elem.endpoint_derivative(m, i, 1);
  for (unsigned i = 0; i <= k; ++i)
    jump[k + i] += elem.endpoint_derivative(m, i, 0);
  return jump;
}

/// The 1D ghost-penalty data of one face: jump vectors and the combined matrix.
struct GhostPenalty1D
{
  std::vector<std::vector<double>> jumps;
  /// sum_m (1/m!^2) j_m j_m^T on the unit patch
  Matrix reference;

  explicit GhostPenalty1D(const ReferenceElement1D &elem)
  {
    const unsigned    k = elem.degree();
    const std::size_t n = 2 * k + 1;
    reference           = Matrix(n, n);
    for (unsigned m = 0; m <= k; ++m)
      {
        jumps.push_back(jump_vector(elem, m));
        const double f      = detail::factorial(m);
        const double weight = 1.0 / (f * f);
        const auto  &j      = jumps.back();
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = 0; b < n; ++b)
            reference(a, b) += weight * j[a] * j[b];
      }
  }

  /// G^1(h) = h^{-1} * reference
  Matrix
  scaled(double h) const
  {
    if (!(h > 0.0))
      throw std::invalid_argument("GhostPenalty1D::scaled: cell size must be positive");
    return (1.0 / h) * reference;
  }
};

inline Matrix
ghost_matrix_1d(const ReferenceElement1D &elem, double h)
{
  if (!(h > 0.0))
    throw std::invalid_argument("ghost_matrix_1d: cell size must be positive");
  return GhostPenalty1D(elem).scaled(h);
}

} // namespace cutgp
