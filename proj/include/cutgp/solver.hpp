#pragma once

#include <cutgp/operator.hpp>

#include <cmath>
#include <concepts>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace cutgp
{
struct SolveReport
{
  bool                converged  = false;
  std::size_t         iterations = 0;
  /// ||r_j|| for j = 0..iterations
  std::vector<double> residuals;
  std::string         reason;

  double
  relative_residual() const
  {
    if (residuals.empty() || residuals.front() == 0.0)
      return 0.0;
    return residuals.back() / residuals.front();
  }
};

inline std::size_t
default_max_iter(std::size_t n)
{
  return static_cast<std::size_t>(20.0 * std::sqrt(static_cast<double>(n))) + 1000;
}

namespace detail
{
  inline double
  dot(std::span<const double> a, std::span<const double> b)
  {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  }
} // namespace detail

/**
 * Unpreconditioned conjugate gradients for A x = b, starting from the given x.
 * `apply(p, q)` writes q = A p. Stops once ||r|| <= rel_tol ||r_0||.
 * Breakdown (p^T A p <= 0) or hitting max_iter returns converged = false.
 */
template <class Apply>
  requires std::invocable<Apply &, std::span<const double>, std::span<double>>
SolveReport
cg_solve(Apply &&apply, std::span<const double> b, std::span<double> x, double rel_tol = 1e-8,
         std::size_t max_iter = 0)
{
  const std::size_t n = b.size();
  if (x.size() != n)
    throw std::invalid_argument("cg_solve: x and b differ in size");
  if (!(rel_tol > 0.0))
    throw std::invalid_argument("cg_solve: tolerance must be positive");
  if (max_iter == 0)
    max_iter = default_max_iter(n);

  SolveReport         report;
  std::vector<double> r(n), p(n), q(n);
  apply(std::span<const double>(x.data(), n), std::span<double>(q));
  for (std::size_t i = 0; i < n; ++i)
    r[i] = b[i] - q[i];
  double rr = detail::dot(r, r);
  report.residuals.push_back(std::sqrt(rr));
  const double target = rel_tol * report.residuals.front();
  if (report.residuals.front() == 0.0)
    {
      report.converged = true;
      report.reason    = "zero initial residual";
      return report;
    }
  p = r;
  while (report.iterations < max_iter)
    {
      apply(std::span<const double>(p), std::span<double>(q));
      const double pq = detail::dot(p, q);
      if (!(pq > 0.0))
        {
          report.reason = "breakdown: p^T A p = " + std::to_string(pq);
          return report;
        }
      const double alpha = rr / pq;
      for (std::size_t i = 0; i < n; ++i)
        {
          x[i] += alpha * p[i];
          r[i] -= alpha * q[i];
        }
      const double rr_new = detail::dot(r, r);
      ++report.iterations;
      report.residuals.push_back(std::sqrt(rr_new));
      if (report.residuals.back() <= target)
        {
          report.converged = true;
          report.reason    = "converged";
          return report;
        }
      const double beta = rr_new / rr;
      rr                = rr_new;
      for (std::size_t i = 0; i < n; ++i)
        p[i] = r[i] + beta * p[i];
    }
  report.reason = "iteration limit " + std::to_string(max_iter) + " reached";
  return report;
}

template <int dim>
SolveReport
cg_solve(const OperatorContext<dim> &ctx, std::span<const double> b, std::span<double> x, double rel_tol = 1e-8,
         std::size_t max_iter = 0, VmultTimers *timers = nullptr)
{
  return cg_solve(
    [&](std::span<const double> p, std::span<double> q) { ctx.vmult(p, q, timers); }, b, x, rel_tol, max_iter);
}

/// Finite element function value at x, given the cell containing it.
template <int dim>
double
evaluate_solution(const OperatorContext<dim> &ctx, std::span<const double> uh, const std::type_identity_t<MultiIndex<dim>> &cell,
                  const std::type_identity_t<Point<dim>> &x)
{
  const auto       &elem  = ctx.reference_element();
  const auto       &mesh  = ctx.get_mesh();
  const std::size_t n     = elem.n_dofs();
  const std::size_t n_loc = ctx.dof_map().n_cell_dofs();
  std::vector<std::int64_t> idx(n_loc);
  ctx.dof_map().cell_dofs(cell, idx);
  const auto          box = mesh.cell_box(cell);
  std::vector<double> v(dim * n), d(n);
  for (int a = 0; a < dim; ++a)
    elem.evaluate((x[a] - box.lo[a]) / (box.hi[a] - box.lo[a]), std::span<double>(v).subspan(a * n, n), d);
  double value = 0.0;
  for (std::size_t i = 0; i < n_loc; ++i)
    {
      double      phi  = 1.0;
      std::size_t rest = i;
      for (int a = 0; a < dim; ++a)
        {
          phi *= v[a * n + rest % n];
          rest /= n;
        }
      value += uh[static_cast<std::size_t>(idx[i])] * phi;
    }
  return value;
}

/**
 * ||u_h - u||_{L2(Ω)} with error_quadrature points per direction on
 * uncut cells and a cut rule of the same order on cut cells.
 */
template <int dim>
double
l2_error(const OperatorContext<dim> &ctx, std::span<const double> uh, const std::type_identity_t<ScalarFunction<dim>> &exact)
{
  if (uh.size() != ctx.n_dofs())
    throw std::invalid_argument("l2_error: vector size does not match the DoF count");
  const auto            &mesh = ctx.get_mesh();
  const unsigned         q    = ctx.parameters().error_quadrature;
  const QuadratureRule1D rule = gauss_legendre(q);
  std::size_t            n_qp = 1;
  for (int a = 0; a < dim; ++a)
    n_qp *= q;

  double sum = 0.0;
  for (std::size_t cell : ctx.interior_cells())
    {
      const auto m   = mesh.cell_multi_index(cell);
      const auto box = mesh.cell_box(m);
      for (std::size_t p = 0; p < n_qp; ++p)
        {
          Point<dim>  x;
          double      w    = 1.0;
          std::size_t rest = p;
          for (int a = 0; a < dim; ++a)
            {
              const std::size_t j = rest % q;
              rest /= q;
              const double h = box.hi[a] - box.lo[a];
              x[a]           = box.lo[a] + h * rule.points[j];
              w *= h * rule.weights[j];
            }
          const double e = evaluate_solution(ctx, uh, m, x) - exact(x);
          sum += w * e * e;
        }
    }
  for (const auto &data : ctx.cut_cells())
    {
      const auto m     = mesh.cell_multi_index(data.cell);
      const auto inner = interior_quadrature<dim>(data.box, ctx.level_set(), q, ctx.parameters().max_depth);
      for (std::size_t p = 0; p < inner.size(); ++p)
        {
          const double e = evaluate_solution(ctx, uh, m, inner.points[p]) - exact(inner.points[p]);
          sum += inner.weights[p] * e * e;
        }
    }
  return std::sqrt(sum);
}

/// -Δu = f in the unit ball with u = 0 on the sphere.
template <int dim>
struct ManufacturedProblem
{
  LevelSet<dim>      domain;
  ScalarFunction<dim> exact;
  ScalarFunction<dim> rhs;
  ScalarFunction<dim> dirichlet;
};

/// u = -(2/d)(|x|^2 - 1), f = 4
template <int dim>
ManufacturedProblem<dim>
manufactured_problem()
{
  Point<dim> origin{};
  return {LevelSet<dim>::sphere(origin, 1.0),
          [](const Point<dim> &x) {
            double r2 = 0.0;
            for (int a = 0; a < dim; ++a)
              r2 += x[a] * x[a];
            return -(2.0 / dim) * (r2 - 1.0);
          },
          [](const Point<dim> &) { return 4.0; },
          [](const Point<dim> &) { return 0.0; }};
}

} // namespace cutgp
