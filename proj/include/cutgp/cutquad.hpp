#pragma once

#include <cutgp/geometry.hpp>
#include <cutgp/tensor1d.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cutgp
{
/// Quadrature on K ∩ Ω in physical coordinates; weights carry volume units.
template <int dim>
struct InteriorRule
{
  std::vector<Point<dim>> points;
  std::vector<double>     weights;

  std::size_t
  size() const
  {
    return points.size();
  }

  double
  total_weight() const
  {
    double s = 0.0;
    for (double w : weights)
      s += w;
    return s;
  }
};

/// Quadrature on K ∩ ∂Ω with outward unit normals.
template <int dim>
struct SurfaceRule
{
  std::vector<Point<dim>> points;
  std::vector<double>     weights;
  std::vector<Point<dim>> normals;

  std::size_t
  size() const
  {
    return points.size();
  }

  double
  total_weight() const
  {
    double s = 0.0;
    for (double w : weights)
      s += w;
    return s;
  }
};

template <int dim>
struct CutCellQuadrature
{
  InteriorRule<dim> interior;
  SurfaceRule<dim>  surface;
};

/// Counters for subdivision and low-order fallback activations.
struct QuadratureStats
{
  std::size_t subdivisions = 0;
  std::size_t fallbacks    = 0;

  QuadratureStats &
  operator+=(const QuadratureStats &o)
  {
    subdivisions += o.subdivisions;
    fallbacks += o.fallbacks;
    return *this;
  }
};

class QuadratureError : public std::runtime_error
{
public:
  explicit QuadratureError(const std::string &what, std::optional<std::size_t> cell = std::nullopt)
    : std::runtime_error(cell ? what + " (cell " + std::to_string(*cell) + ")" : what)
    , cell_index(cell)
  {}

  std::optional<std::size_t> cell_index;
};

struct CutQuadratureOptions
{
  unsigned order     = 2;
  unsigned max_depth = 8;
  /// an axis is a height direction if |d_a phi| >= threshold * max_b |d_b phi| at all samples
  double   axis_threshold = 1e-3;
  double   root_tolerance = 1e-13;
};

namespace detail
{
  template <int D>
  struct ImplicitFunction
  {
    std::function<double(const Point<D> &)>                    value;
    std::function<Point<D>(const Point<D> &)>                  gradient;
    std::function<std::pair<double, double>(const Box<D> &)>   bounds;
    /// +1: keep the region where the value is non-negative, -1: negative, 0: only split at zeros
    int sign = 0;
  };

  template <int D>
  Point<D + 1>
  lift(const Point<D> &y, int axis, double t)
  {
    Point<D + 1> x;
    for (int a = 0, b = 0; a < D + 1; ++a)
      x[a] = a == axis ? t : y[b++];
    return x;
  }

  template <int D>
  Point<D - 1>
  drop(const Point<D> &x, int axis)
  {
    Point<D - 1> y;
    for (int a = 0, b = 0; a < D; ++a)
      if (a != axis)
        y[b++] = x[a];
    return y;
  }

  template <int D>
  ImplicitFunction<D - 1>
  restrict_to_face(const ImplicitFunction<D> &f, int axis, double t)
  {
    ImplicitFunction<D - 1> r;
    r.value    = [f, axis, t](const Point<D - 1> &y) { return f.value(lift<D - 1>(y, axis, t)); };
    r.gradient = [f, axis, t](const Point<D - 1> &y) { return drop<D>(f.gradient(lift<D - 1>(y, axis, t)), axis); };
    r.bounds   = [f, axis, t](const Box<D - 1> &b) {
      Box<D> full;
      full.lo = lift<D - 1>(b.lo, axis, t);
      full.hi = lift<D - 1>(b.hi, axis, t);
      return f.bounds(full);
    };
    r.sign = 0;
    return r;
  }

  template <int dim>
  ImplicitFunction<dim>
  wrap(const LevelSet<dim> &phi, int sign)
  {
    ImplicitFunction<dim> f;
    f.value    = [&phi](const Point<dim> &x) { return phi.value(x); };
    f.gradient = [&phi](const Point<dim> &x) { return phi.gradient(x); };
    f.bounds   = [&phi](const Box<dim> &b) { return phi.bounds(b); };
    f.sign     = sign;
    return f;
  }

  /**
   * Sign changes of g on [lo, hi], located by scanning n_sub subintervals,
   * bisecting each bracket down to tol and taking one Newton step when it
   * stays inside the bracket. A zero value counts as non-negative.
   */
  template <class G, class DG>
  std::vector<double>
  line_roots(G &&g, DG &&dg, double lo, double hi, unsigned n_sub, double tol)
  {
    std::vector<double> roots;
    double              t0 = lo;
    double              g0 = g(lo);
    if (!std::isfinite(g0))
      throw QuadratureError("level set is not finite on a quadrature line");
    for (unsigned j = 1; j <= n_sub; ++j)
      {
        const double t1 = j == n_sub ? hi : lo + (hi - lo) * j / n_sub;
        const double g1 = g(t1);
        if (!std::isfinite(g1))
          throw QuadratureError("level set is not finite on a quadrature line");
        if ((g0 >= 0.0) != (g1 >= 0.0))
          {
            double a = t0, b = t1;
            bool   a_pos = g0 >= 0.0;
            int    it    = 0;
            while (b - a > tol && it++ < 200)
              {
                const double m = 0.5 * (a + b);
                if ((g(m) >= 0.0) == a_pos)
                  a = m;
                else
                  b = m;
              }
            if (b - a > tol)
              throw QuadratureError("root bisection did not converge");
            double       t  = 0.5 * (a + b);
            const double gt = g(t);
            const double dt = dg(t);
            if (dt != 0.0 && std::isfinite(dt))
              {
                const double tn = t - gt / dt;
                if (tn >= a && tn <= b)
                  t = tn;
              }
            roots.push_back(t);
          }
        t0 = t1;
        g0 = g1;
      }
    return roots;
  }

  template <int D>
  void
  tensor_gauss(const Box<D> &box, const QuadratureRule1D &rule, std::vector<Point<D>> &pts, std::vector<double> &wts)
  {
    std::size_t n = 1;
    for (int a = 0; a < D; ++a)
      n *= rule.size();
    for (std::size_t i = 0; i < n; ++i)
      {
        Point<D>    x;
        double      w    = 1.0;
        std::size_t rest = i;
        for (int a = 0; a < D; ++a)
          {
            const std::size_t j = rest % rule.size();
            rest /= rule.size();
            const double len = box.hi[a] - box.lo[a];
            x[a]             = box.lo[a] + len * rule.points[j];
            w *= len * rule.weights[j];
          }
        pts.push_back(x);
        wts.push_back(w);
      }
  }

  template <int D>
  std::vector<Point<D>>
  sample_points(const Box<D> &box, unsigned per_axis)
  {
    std::size_t n = 1;
    for (int a = 0; a < D; ++a)
      n *= per_axis;
    std::vector<Point<D>> pts(n);
    for (std::size_t i = 0; i < n; ++i)
      {
        std::size_t rest = i;
        for (int a = 0; a < D; ++a)
          {
            const double t = static_cast<double>(rest % per_axis) / (per_axis - 1);
            rest /= per_axis;
            pts[i][a] = box.lo[a] + t * (box.hi[a] - box.lo[a]);
          }
      }
    return pts;
  }

  /// Axis along which every function is strictly monotone at all samples, preferring the steepest.
  template <int D>
  std::optional<int>
  height_axis(const Box<D> &box, const std::vector<ImplicitFunction<D>> &fns, const CutQuadratureOptions &opt)
  {
    const auto         samples = sample_points<D>(box, std::max(3u, opt.order + 1));
    std::optional<int> best;
    double             best_score = -1.0;
    for (int a = 0; a < D; ++a)
      {
        bool   ok    = true;
        double score = std::numeric_limits<double>::infinity();
        for (const auto &f : fns)
          {
            int ref_sign = 0;
            for (const auto &x : samples)
              {
                const auto g    = f.gradient(x);
                double     gmax = 0.0;
                for (int b = 0; b < D; ++b)
                  gmax = std::max(gmax, std::abs(g[b]));
                const double ga = std::abs(g[a]);
                if (!(gmax > 0.0) || ga < opt.axis_threshold * gmax)
                  {
                    ok = false;
                    break;
                  }
                const int s = g[a] > 0.0 ? 1 : -1;
                if (ref_sign == 0)
                  ref_sign = s;
                else if (s != ref_sign)
                  {
                    ok = false;
                    break;
                  }
                score = std::min(score, ga);
              }
            if (!ok)
              break;
          }
        if (ok && score > best_score)
          {
            best       = a;
            best_score = score;
          }
      }
    return best;
  }

  template <int D>
  bool
  signs_hold(const std::vector<ImplicitFunction<D>> &fns, const Point<D> &x)
  {
    for (const auto &f : fns)
      if (f.sign != 0 && ((f.value(x) >= 0.0) != (f.sign > 0)))
        return false;
    return true;
  }

  template <int D>
  std::vector<Box<D>>
  split_box(const Box<D> &box)
  {
    std::vector<Box<D>> parts;
    const auto          c = box.center();
    for (unsigned mask = 0; mask < (1u << D); ++mask)
      {
        Box<D> b;
        for (int a = 0; a < D; ++a)
          {
            const bool upper = (mask >> a) & 1u;
            b.lo[a]          = upper ? c[a] : box.lo[a];
            b.hi[a]          = upper ? box.hi[a] : c[a];
          }
        parts.push_back(b);
      }
    return parts;
  }

  /// Gauss points on the pieces of [lo, hi] between roots of the line functions where the signs hold.
  template <class Values>
  void
  integrate_line(const std::vector<double> &breaks_in,
                 double                     lo,
                 double                     hi,
                 const QuadratureRule1D    &rule,
                 Values                   &&keep_piece,
                 std::vector<double>       &ts,
                 std::vector<double>       &ws)
  {
    std::vector<double> breaks;
    breaks.push_back(lo);
    for (double r : breaks_in)
      if (r > lo && r < hi)
        breaks.push_back(r);
    breaks.push_back(hi);
    std::sort(breaks.begin(), breaks.end());
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p)
      {
        const double a = breaks[p], b = breaks[p + 1];
        if (!(b > a))
          continue;
        if (!keep_piece(0.5 * (a + b)))
          continue;
        for (std::size_t j = 0; j < rule.size(); ++j)
          {
            ts.push_back(a + (b - a) * rule.points[j]);
            ws.push_back((b - a) * rule.weights[j]);
          }
      }
  }

  /**
   * Quadrature for the subset of `box` where every function with a nonzero
   * sign condition has that sign. Dimension reduction: pick a height axis
   * along which all functions are monotone, build a base rule on the
   * orthogonal face that resolves the zeros of the functions restricted to
   * the bottom and top faces, then integrate along each vertical line
   * between roots.
   */
  template <int D>
  void
  integrate_domain(const Box<D>                           &box,
                   const std::vector<ImplicitFunction<D>> &fns,
                   const CutQuadratureOptions             &opt,
                   unsigned                                depth,
                   QuadratureStats                        &stats,
                   std::vector<Point<D>>                  &pts,
                   std::vector<double>                    &wts)
  {
    const QuadratureRule1D rule = gauss_legendre(opt.order);

    std::vector<ImplicitFunction<D>> active;
    for (const auto &f : fns)
      {
        const auto [lo, hi] = f.bounds(box);
        const bool all_pos  = lo >= 0.0;
        const bool all_neg  = hi < 0.0;
        if (all_pos || all_neg)
          {
            if (f.sign != 0 && (all_pos != (f.sign > 0)))
              return;
            continue;
          }
        active.push_back(f);
      }

    if (active.empty())
      {
        tensor_gauss<D>(box, rule, pts, wts);
        return;
      }

    const double tol = opt.root_tolerance;
    if constexpr (D == 1)
      {
        std::vector<double> breaks;
        for (const auto &f : active)
          {
            auto g  = [&](double t) { return f.value(Point<1>{t}); };
            auto dg = [&](double t) { return f.gradient(Point<1>{t})[0]; };
            auto r  = line_roots(g, dg, box.lo[0], box.hi[0], opt.order + 3, tol * (box.hi[0] - box.lo[0]));
            breaks.insert(breaks.end(), r.begin(), r.end());
          }
        std::vector<double> ts, ws;
        integrate_line(
          breaks, box.lo[0], box.hi[0], rule, [&](double t) { return signs_hold<1>(active, Point<1>{t}); }, ts, ws);
        for (std::size_t i = 0; i < ts.size(); ++i)
          {
            pts.push_back(Point<1>{ts[i]});
            wts.push_back(ws[i]);
          }
      }
    else
      {
        const auto axis = height_axis<D>(box, active, opt);
        if (!axis)
          {
            if (depth < opt.max_depth)
              {
                ++stats.subdivisions;
                for (const auto &part : split_box<D>(box))
                  integrate_domain<D>(part, active, opt, depth + 1, stats, pts, wts);
              }
            else
              {
                ++stats.fallbacks;
                if (signs_hold<D>(active, box.center()))
                  tensor_gauss<D>(box, rule, pts, wts);
              }
            return;
          }
        const int a = *axis;

        Box<D - 1> base;
        base.lo = drop<D>(box.lo, a);
        base.hi = drop<D>(box.hi, a);
        std::vector<ImplicitFunction<D - 1>> base_fns;
        for (const auto &f : active)
          {
            base_fns.push_back(restrict_to_face<D>(f, a, box.lo[a]));
            base_fns.push_back(restrict_to_face<D>(f, a, box.hi[a]));
          }
        std::vector<Point<D - 1>> base_pts;
        std::vector<double>       base_wts;
        integrate_domain<D - 1>(base, base_fns, opt, 0, stats, base_pts, base_wts);

        const double        lo = box.lo[a], hi = box.hi[a];
        std::vector<double> ts, ws;
        for (std::size_t b = 0; b < base_pts.size(); ++b)
          {
            const auto         &y = base_pts[b];
            std::vector<double> breaks;
            for (const auto &f : active)
              {
                auto g  = [&](double t) { return f.value(lift<D - 1>(y, a, t)); };
                auto dg = [&](double t) { return f.gradient(lift<D - 1>(y, a, t))[a]; };
                auto r  = line_roots(g, dg, lo, hi, opt.order + 3, tol * (hi - lo));
                breaks.insert(breaks.end(), r.begin(), r.end());
              }
            ts.clear();
            ws.clear();
            integrate_line(
              breaks, lo, hi, rule, [&](double t) { return signs_hold<D>(active, lift<D - 1>(y, a, t)); }, ts, ws);
            for (std::size_t i = 0; i < ts.size(); ++i)
              {
                pts.push_back(lift<D - 1>(y, a, ts[i]));
                wts.push_back(base_wts[b] * ws[i]);
              }
          }
      }
  }

  template <int dim>
  void
  integrate_surface(const Box<dim>                &box,
                    const ImplicitFunction<dim>   &phi,
                    const CutQuadratureOptions    &opt,
                    unsigned                       depth,
                    QuadratureStats               &stats,
                    SurfaceRule<dim>              &out)
  {
    const auto [lo_v, hi_v] = phi.bounds(box);
    if (lo_v >= 0.0 || hi_v < 0.0)
      return;

    const auto axis = height_axis<dim>(box, {phi}, opt);
    if (!axis)
      {
        if (depth < opt.max_depth)
          {
            ++stats.subdivisions;
            for (const auto &part : split_box<dim>(box))
              integrate_surface<dim>(part, phi, opt, depth + 1, stats, out);
          }
        else
          ++stats.fallbacks;
        return;
      }
    const int a = *axis;

    Box<dim - 1> base;
    base.lo = drop<dim>(box.lo, a);
    base.hi = drop<dim>(box.hi, a);
    std::vector<ImplicitFunction<dim - 1>> base_fns{restrict_to_face<dim>(phi, a, box.lo[a]),
                                                    restrict_to_face<dim>(phi, a, box.hi[a])};
    std::vector<Point<dim - 1>> base_pts;
    std::vector<double>         base_wts;
    integrate_domain<dim - 1>(base, base_fns, opt, 0, stats, base_pts, base_wts);

    const double lo = box.lo[a], hi = box.hi[a];
    for (std::size_t b = 0; b < base_pts.size(); ++b)
      {
        const auto &y  = base_pts[b];
        auto        g  = [&](double t) { return phi.value(lift<dim - 1>(y, a, t)); };
        auto        dg = [&](double t) { return phi.gradient(lift<dim - 1>(y, a, t))[a]; };
        for (double t : line_roots(g, dg, lo, hi, opt.order + 3, opt.root_tolerance * (hi - lo)))
          {
            if (!(t < hi))
              continue;
            const auto x    = lift<dim - 1>(y, a, t);
            const auto grad = phi.gradient(x);
            double     norm = 0.0;
            for (int c = 0; c < dim; ++c)
              norm += grad[c] * grad[c];
            norm = std::sqrt(norm);
            if (!(norm > 0.0) || grad[a] == 0.0)
              throw QuadratureError("vanishing level-set gradient on the interface");
            Point<dim> n;
            for (int c = 0; c < dim; ++c)
              n[c] = -grad[c] / norm;
            out.points.push_back(x);
            out.weights.push_back(base_wts[b] * norm / std::abs(grad[a]));
            out.normals.push_back(n);
          }
      }
  }
} // namespace detail

/// Quadrature for K ∩ {phi >= 0} with q points per line segment.
template <int dim>
InteriorRule<dim>
interior_quadrature(const Box<dim>       &cell,
                    const LevelSet<dim>  &phi,
                    unsigned              q,
                    unsigned              max_depth = 8,
                    QuadratureStats      *stats     = nullptr)
{
  CutQuadratureOptions opt;
  opt.order     = q;
  opt.max_depth = max_depth;
  QuadratureStats   local;
  InteriorRule<dim> rule;
  detail::integrate_domain<dim>(cell, {detail::wrap<dim>(phi, +1)}, opt, 0, local, rule.points, rule.weights);
  if (stats)
    *stats += local;
  return rule;
}

/// Quadrature for K ∩ {phi = 0}; normals point out of the domain.
template <int dim>
SurfaceRule<dim>
surface_quadrature(const Box<dim>      &cell,
                   const LevelSet<dim> &phi,
                   unsigned             q,
                   unsigned             max_depth = 8,
                   QuadratureStats     *stats     = nullptr)
{
  CutQuadratureOptions opt;
  opt.order     = q;
  opt.max_depth = max_depth;
  QuadratureStats  local;
  SurfaceRule<dim> rule;
  detail::integrate_surface<dim>(cell, detail::wrap<dim>(phi, +1), opt, 0, local, rule);
  if (stats)
    *stats += local;
  return rule;
}

template <int dim>
CutCellQuadrature<dim>
cut_cell_quadrature(const Box<dim>      &cell,
                    const LevelSet<dim> &phi,
                    unsigned             q,
                    unsigned             max_depth = 8,
                    QuadratureStats     *stats     = nullptr)
{
  return {interior_quadrature<dim>(cell, phi, q, max_depth, stats),
          surface_quadrature<dim>(cell, phi, q, max_depth, stats)};
}

/// Debug dump rows: cell_index,kind{I|S},x,y[,z],w[,nx,ny[,nz]]
template <int dim>
void
write_quadrature_csv(std::ostream &out, std::size_t cell_index, const CutCellQuadrature<dim> &quad)
{
  for (std::size_t i = 0; i < quad.interior.size(); ++i)
    {
      out << cell_index << ",I";
      for (int a = 0; a < dim; ++a)
        out << ',' << detail::format_double(quad.interior.points[i][a]);
      out << ',' << detail::format_double(quad.interior.weights[i]) << '\n';
    }
  for (std::size_t i = 0; i < quad.surface.size(); ++i)
    {
      out << cell_index << ",S";
      for (int a = 0; a < dim; ++a)
        out << ',' << detail::format_double(quad.surface.points[i][a]);
      out << ',' << detail::format_double(quad.surface.weights[i]);
      for (int a = 0; a < dim; ++a)
        out << ',' << detail::format_double(quad.surface.normals[i][a]);
      out << '\n';
    }
}

} // namespace cutgp
