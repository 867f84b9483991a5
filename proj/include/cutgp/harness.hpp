#pragma once

#include <cutgp/solver.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cutgp
{
/// Invalid run configuration; the CLI maps it to exit code 2.
class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig
{
  std::string           command = "convergence";
  int                   dim     = 2;
  std::vector<unsigned> degrees{1, 2, 3};
  /// number of mesh levels in a convergence sweep
  unsigned refinements = 5;
  unsigned base_cells  = 6;
  double   box_lo      = -1.26;
  double   box_hi      = 1.26;

  /// disk | sphere | balls | halfspace
  std::string              domain = "disk";
  std::vector<std::size_t> ball_counts{1, 2, 4, 8, 16};
  std::uint64_t            seed   = 1;
  double                   r0     = 1.0;
  double                   offset = 0.0;

  std::optional<double>   gamma_A, gamma_D;
  std::optional<unsigned> cell_quadrature, cut_quadrature, error_quadrature;

  std::string output_dir = ".";
  unsigned    workers    = 1;
  double      tolerance  = 1e-8;
  /// multiballs mesh has 2^mesh_refinements cells per axis
  unsigned mesh_refinements = 5;
  unsigned breakdown_cells  = 12;
  unsigned repetitions      = 50;
  unsigned trials           = 3;
  unsigned kernel_applications = 1000;
  bool     strict           = false;

  void
  validate() const
  {
    static const std::vector<std::string> commands{"convergence", "kernelbench", "multiballs", "breakdown"};
    static const std::vector<std::string> domains{"disk", "sphere", "balls", "halfspace"};
    if (std::find(commands.begin(), commands.end(), command) == commands.end())
      throw ConfigError("unknown command '" + command + "'");
    if (std::find(domains.begin(), domains.end(), domain) == domains.end())
      throw ConfigError("unknown domain '" + domain + "'");
    if (dim != 2 && dim != 3)
      throw ConfigError("dim must be 2 or 3");
    if ((domain == "disk" && dim != 2) || (domain == "sphere" && dim != 3))
      throw ConfigError("domain '" + domain + "' does not exist in " + std::to_string(dim) + "D");
    if (command == "convergence" && domain != "disk" && domain != "sphere")
      throw ConfigError("convergence needs the disk or sphere domain");
    if (refinements < 1)
      throw ConfigError("refinements must be at least 1");
    if (degrees.empty())
      throw ConfigError("need at least one degree");
    for (unsigned k : degrees)
      if (k < 1 || k > 4)
        throw ConfigError("degrees must lie in 1..4, got " + std::to_string(k));
    if (base_cells < 1 || breakdown_cells < 1)
      throw ConfigError("cell counts must be positive");
    if (!(box_hi > box_lo))
      throw ConfigError("box_hi must exceed box_lo");
    if (gamma_A && !(*gamma_A >= 0.0))
      throw ConfigError("gamma_A must be non-negative");
    if (gamma_D && !(*gamma_D > 0.0))
      throw ConfigError("gamma_D must be positive");
    if (workers < 1 || repetitions < 1 || trials < 1 || kernel_applications < 1)
      throw ConfigError("workers, repetitions, trials and kernel applications must be positive");
    if (!(tolerance > 0.0))
      throw ConfigError("tolerance must be positive");
    if (command == "multiballs" && ball_counts.empty())
      throw ConfigError("multiballs needs at least one ball count");
  }

  Parameters
  parameters(unsigned k) const
  {
    Parameters p = Parameters::for_degree(k);
    if (gamma_A)
      p.gamma_A = *gamma_A;
    if (gamma_D)
      p.gamma_D = *gamma_D;
    if (cell_quadrature)
      p.cell_quadrature = *cell_quadrature;
    if (cut_quadrature)
      p.cut_quadrature = *cut_quadrature;
    if (error_quadrature)
      p.error_quadrature = *error_quadrature;
    p.workers = workers;
    try
      {
        p.validate();
      }
    catch (const std::invalid_argument &e)
      {
        throw ConfigError(e.what());
      }
    return p;
  }
};

template <int dim>
LevelSet<dim>
make_domain(const RunConfig &cfg, std::size_t n_balls = 1)
{
  Point<dim> origin{};
  if (cfg.domain == "disk" || cfg.domain == "sphere")
    return LevelSet<dim>::sphere(origin, 1.0);
  if (cfg.domain == "halfspace")
    {
      Point<dim> normal{};
      normal[0] = 1.0;
      return LevelSet<dim>::half_space(normal, cfg.offset);
    }
  try
    {
      return LevelSet<dim>(random_balls<dim>(cfg.box_lo, cfg.box_hi, n_balls, cfg.seed, cfg.r0));
    }
  catch (const std::invalid_argument &e)
    {
      throw ConfigError(e.what());
    }
}

// ---------------------------------------------------------------------------
// Rows

struct ConvergenceRow
{
  unsigned              k          = 1;
  unsigned              refinement = 0;
  double                h          = 0.0;
  std::size_t           n_dofs     = 0;
  std::size_t           iterations = 0;
  double                l2_error   = 0.0;
  std::optional<double> rate;
  bool                  converged = true;
};

struct KernelRow
{
  int         dim = 2;
  unsigned    k   = 1;
  std::string kernel;
  double      microseconds = 0.0;
  double      relative     = 0.0;
};

struct ThroughputRow
{
  std::size_t   n_balls = 0;
  std::uint64_t seed    = 0;
  unsigned      k       = 1;
  std::size_t   n_dofs  = 0;
  double        cut_fraction    = 0.0;
  double        dofs_per_second = 0.0;
};

struct BreakdownRow
{
  std::string component;
  double      seconds = 0.0;
  double      percent = 0.0;
};

namespace detail
{
  inline double
  median(std::vector<double> v)
  {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  }

  template <int dim>
  CartesianMesh<dim>
  cube_mesh(const RunConfig &cfg, std::size_t cells)
  {
    return CartesianMesh<dim>::cube(cfg.box_lo, cfg.box_hi, cells);
  }
} // namespace detail

// ---------------------------------------------------------------------------
// Drivers

/// One row per (k, level); rate = log2(e_prev / e), empty on the coarsest level.
template <int dim>
std::vector<ConvergenceRow>
run_convergence(const RunConfig &cfg, std::ostream *log = nullptr)
{
  const auto                  problem = manufactured_problem<dim>();
  std::vector<ConvergenceRow> rows;
  for (unsigned k : cfg.degrees)
    {
      const Parameters params = cfg.parameters(k);
      for (unsigned level = 0; level < cfg.refinements; ++level)
        {
          const auto mesh = detail::cube_mesh<dim>(cfg, std::size_t{cfg.base_cells} << level);
          OperatorContext<dim> ctx(mesh, problem.domain, params);
          const auto           b = assemble_rhs(ctx, problem.rhs, problem.dirichlet);
          std::vector<double>  x(ctx.n_dofs(), 0.0);
          const auto           report = cg_solve(ctx, b, x, cfg.tolerance);

          ConvergenceRow row;
          row.k          = k;
          row.refinement = level;
          row.h          = mesh.spacing()[0];
          row.n_dofs     = ctx.n_dofs();
          row.iterations = report.iterations;
          row.l2_error   = l2_error(ctx, x, problem.exact);
          row.converged  = report.converged;
          if (level > 0)
            row.rate = std::log2(rows.back().l2_error / row.l2_error);
          if (log)
            {
              *log << "k=" << k << " level=" << level << " dofs=" << row.n_dofs << " cg=" << row.iterations
                   << " error=" << row.l2_error << '\n';
              if (!report.converged)
                *log << "  solver did not converge: " << report.reason << '\n';
            }
          rows.push_back(row);
        }
    }
  return rows;
}

/**
 * Least-squares slope of -log2(error) against the level over the last
 * `intervals` refinement steps of degree k.
 */
inline double
fitted_rate(const std::vector<ConvergenceRow> &rows, unsigned k, std::size_t intervals)
{
  std::vector<const ConvergenceRow *> sel;
  for (const auto &r : rows)
    if (r.k == k)
      sel.push_back(&r);
  if (sel.size() < intervals + 1 || intervals == 0)
    throw std::invalid_argument("fitted_rate: not enough levels for degree " + std::to_string(k));
  sel.erase(sel.begin(), sel.end() - static_cast<std::ptrdiff_t>(intervals + 1));
  const double n = static_cast<double>(sel.size());
  double       sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto *r : sel)
    {
      const double x = r->refinement, y = -std::log2(r->l2_error);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/**
 * Times three single-cell kernels per degree: the sum-factorized Laplacian,
 * point evaluation at (k+1)^dim scattered points, and the ghost-face kernel.
 * Relative timings are normalized by the sum-factorized kernel at the lowest degree.
 */
template <int dim>
std::vector<KernelRow>
run_kernelbench(const RunConfig &cfg)
{
  using clock = std::chrono::steady_clock;
  std::vector<KernelRow> rows;
  std::mt19937_64        rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  volatile double        sink = 0.0;

  std::vector<unsigned> degrees = cfg.degrees;
  std::sort(degrees.begin(), degrees.end());
  for (unsigned k : degrees)
    {
      // two Inside cells along axis 0 so that a face patch exists
      MultiIndex<dim> cells;
      cells.fill(1);
      cells[0] = 2;
      Point<dim> origin{}, spacing;
      spacing.fill(1.0);
      Point<dim> center{};
      const CartesianMesh<dim> mesh(origin, cells, spacing);
      const OperatorContext<dim> ctx(mesh, LevelSet<dim>::sphere(center, 100.0), cfg.parameters(k));

      const std::size_t   n_loc = ctx.dof_map().n_cell_dofs();
      const std::size_t   n_pat = ctx.dof_map().n_patch_dofs();
      std::vector<double> u(n_pat), w(n_pat), tmp(n_pat), work((dim + 1) * n_loc);
      for (auto &v : u)
        v = unit(rng);

      CellLaplacianKernel<dim> lap(ctx.reference_element(), mesh.spacing());
      auto                     scratch = lap.make_scratch();

      CutCellData<dim> points;
      points.box = mesh.cell_box(MultiIndex<dim>{});
      for (std::size_t p = 0; p < n_loc; ++p)
        {
          Point<dim> x;
          for (int a = 0; a < dim; ++a)
            x[a] = unit(rng);
          points.quadrature.interior.points.push_back(x);
          points.quadrature.interior.weights.push_back(1.0 / n_loc);
        }
      detail::tabulate<dim>(ctx.reference_element(), points.box, points.quadrature.interior.points,
                            points.interior_values, points.interior_derivatives);

      auto time_kernel = [&](auto &&kernel) {
        std::vector<double> samples;
        for (unsigned t = 0; t < cfg.trials; ++t)
          {
            const auto t0 = clock::now();
            for (unsigned r = 0; r < cfg.kernel_applications; ++r)
              kernel();
            sink = sink + w[0];
            samples.push_back(detail::seconds_since(t0) * 1e6 / cfg.kernel_applications);
          }
        return detail::median(samples);
      };

      rows.push_back({dim, k, "sumfac", time_kernel([&] { lap.apply(u.data(), w.data(), scratch); }), 0.0});
      rows.push_back({dim, k, "point",
                      time_kernel([&] {
                        ctx.apply_cut_cell(points, u.data(), w.data(), work.data(), component::cut_volume);
                      }),
                      0.0});
      rows.push_back({dim, k, "ghost", time_kernel([&] { ctx.apply_face(0, u.data(), w.data(), tmp.data()); }), 0.0});
    }
  const double ref = rows.front().microseconds;
  for (auto &r : rows)
    r.relative = r.microseconds / ref;
  return rows;
}

/// Per-vmult time as the median over `trials` batches of `repetitions` applications.
template <int dim>
VmultTimers
time_vmult(const OperatorContext<dim> &ctx, const RunConfig &cfg)
{
  std::vector<double> u(ctx.n_dofs()), w(ctx.n_dofs());
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = 1.0 / (1.0 + static_cast<double>(i % 97));
  ctx.vmult(u, w);
  std::vector<VmultTimers> batches(cfg.trials);
  for (auto &t : batches)
    for (unsigned r = 0; r < cfg.repetitions; ++r)
      ctx.vmult(u, w, &t);
  std::vector<double> totals;
  for (const auto &t : batches)
    totals.push_back(t.total);
  const double med = detail::median(totals);
  // the batch whose total is the median
  const auto &pick = *std::min_element(batches.begin(), batches.end(), [&](const auto &a, const auto &b) {
    return std::abs(a.total - med) < std::abs(b.total - med);
  });
  VmultTimers per;
  per.interior      = pick.interior / pick.calls;
  per.intersected   = pick.intersected / pick.calls;
  per.ghost_penalty = pick.ghost_penalty / pick.calls;
  per.total         = pick.total / pick.calls;
  per.calls         = 1;
  return per;
}

inline std::vector<BreakdownRow>
breakdown_rows(const VmultTimers &t)
{
  std::vector<BreakdownRow> rows{{"interior", t.interior, 0.0},
                                 {"intersected", t.intersected, 0.0},
                                 {"ghost_penalty", t.ghost_penalty, 0.0},
                                 {"scatter_other", t.scatter_other(), 0.0}};
  double sum = 0.0;
  for (const auto &r : rows)
    sum += r.seconds;
  for (auto &r : rows)
    r.percent = sum > 0.0 ? 100.0 * r.seconds / sum : 0.0;
  return rows;
}

template <int dim>
struct MultiballResult
{
  std::vector<ThroughputRow>             rows;
  std::vector<std::vector<BreakdownRow>> breakdowns;
  std::vector<BallUnion<dim>>            configurations;
};

/// Throughput per ball count on a fixed mesh; configurations without active DoFs are skipped.
template <int dim>
MultiballResult<dim>
run_multiballs(const RunConfig &cfg, std::ostream *log = nullptr)
{
  MultiballResult<dim> result;
  const auto           mesh = detail::cube_mesh<dim>(cfg, std::size_t{1} << cfg.mesh_refinements);
  for (unsigned k : cfg.degrees)
    for (std::size_t n : cfg.ball_counts)
      {
        RunConfig c = cfg;
        c.domain    = "balls";
        const auto phi = make_domain<dim>(c, n);
        const OperatorContext<dim> ctx(mesh, phi, cfg.parameters(k));
        if (ctx.n_dofs() == 0)
          {
            if (log)
              *log << "skipping " << n << " balls: no active DoFs\n";
            continue;
          }
        const auto timers = time_vmult(ctx, cfg);
        result.rows.push_back({n, cfg.seed, k, ctx.n_dofs(), ctx.cells().cut_fraction(),
                               static_cast<double>(ctx.n_dofs()) / timers.total});
        result.breakdowns.push_back(breakdown_rows(timers));
        result.configurations.push_back(std::get<BallUnion<dim>>(phi.variant()));
        if (log)
          *log << "k=" << k << " balls=" << n << " dofs=" << ctx.n_dofs()
               << " cut_fraction=" << ctx.cells().cut_fraction() << " workers=" << cfg.workers << '\n';
      }
  return result;
}

/// Breakdown of one vmult on the configured domain at the first degree.
template <int dim>
std::vector<BreakdownRow>
run_breakdown(const RunConfig &cfg)
{
  const auto mesh = detail::cube_mesh<dim>(cfg, cfg.breakdown_cells);
  const auto phi  = make_domain<dim>(cfg, cfg.ball_counts.empty() ? 1 : cfg.ball_counts.front());
  const OperatorContext<dim> ctx(mesh, phi, cfg.parameters(cfg.degrees.front()));
  if (ctx.n_dofs() == 0)
    throw ConfigError("breakdown: domain has no active DoFs");
  return breakdown_rows(time_vmult(ctx, cfg));
}

// ---------------------------------------------------------------------------
// CSV

/// Shortest decimal that reads back to the same double.
inline std::string
format_number(double v)
{
  return detail::format_double(v);
}

inline void
write_convergence_csv(std::ostream &out, const std::vector<ConvergenceRow> &rows)
{
  out << "k,refinement,h,n_dofs,iterations,l2_error,rate\n";
  for (const auto &r : rows)
    out << r.k << ',' << r.refinement << ',' << format_number(r.h) << ',' << r.n_dofs << ',' << r.iterations << ','
        << format_number(r.l2_error) << ',' << (r.rate ? format_number(*r.rate) : std::string()) << '\n';
}

inline void
write_kernel_csv(std::ostream &out, const std::vector<KernelRow> &rows)
{
  out << "dim,k,kernel,microseconds,relative\n";
  for (const auto &r : rows)
    out << r.dim << ',' << r.k << ',' << r.kernel << ',' << format_number(r.microseconds) << ','
        << format_number(r.relative) << '\n';
}

inline void
write_throughput_csv(std::ostream &out, const std::vector<ThroughputRow> &rows)
{
  out << "n_balls,seed,k,n_dofs,cut_fraction,dofs_per_second\n";
  for (const auto &r : rows)
    out << r.n_balls << ',' << r.seed << ',' << r.k << ',' << r.n_dofs << ',' << format_number(r.cut_fraction) << ','
        << format_number(r.dofs_per_second) << '\n';
}

inline void
write_breakdown_csv(std::ostream &out, const std::vector<BreakdownRow> &rows)
{
  out << "component,seconds,percent\n";
  for (const auto &r : rows)
    out << r.component << ',' << format_number(r.seconds) << ',' << format_number(r.percent) << '\n';
}

// ---------------------------------------------------------------------------
// SVG

namespace detail
{
  inline std::string
  svg_header(double width, double height)
  {
    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    return s.str();
  }

  inline const char *
  palette(std::size_t i)
  {
    static const char *colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    return colors[i % 6];
  }

  /// Linear map of [lo, hi] onto [a, b].
  struct Axis
  {
    double lo, hi, a, b;

    double
    operator()(double v) const
    {
      return hi > lo ? a + (v - lo) / (hi - lo) * (b - a) : 0.5 * (a + b);
    }
  };

  inline std::pair<double, double>
  padded_range(double lo, double hi)
  {
    if (!(hi > lo))
      return {lo - 0.5, hi + 0.5};
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
  }
} // namespace detail

/// Log-log error plot, one circle per CSV row plus dashed reference slopes k+1.
inline void
write_convergence_svg(std::ostream &out, const std::vector<ConvergenceRow> &rows)
{
  const double W = 640, H = 480, L = 70, R = 20, T = 20, B = 50;
  out << detail::svg_header(W, H);
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto &r : rows)
    {
      const double e = std::max(r.l2_error, 1e-300);
      xlo = std::min(xlo, std::log10(r.h));
      xhi = std::max(xhi, std::log10(r.h));
      ylo = std::min(ylo, std::log10(e));
      yhi = std::max(yhi, std::log10(e));
    }
  if (rows.empty())
    xlo = ylo = 0.0, xhi = yhi = 1.0;
  const auto [x0, x1] = detail::padded_range(xlo, xhi);
  const auto [y0, y1] = detail::padded_range(ylo, yhi);
  const detail::Axis X{x0, x1, L, W - R}, Y{y0, y1, H - B, T};
  out << "<g stroke=\"black\" fill=\"none\"><rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R
      << "\" height=\"" << H - T - B << "\"/></g>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">log10 h</text>\n";
  out << "<text x=\"15\" y=\"" << H / 2 << "\" transform=\"rotate(-90 15 " << H / 2
      << ")\" text-anchor=\"middle\">log10 L2 error</text>\n";

  std::vector<unsigned> ks;
  for (const auto &r : rows)
    if (std::find(ks.begin(), ks.end(), r.k) == ks.end())
      ks.push_back(r.k);
  for (std::size_t c = 0; c < ks.size(); ++c)
    {
      // reference slope k+1 through the finest point of this degree
      const ConvergenceRow *finest = nullptr;
      for (const auto &r : rows)
        if (r.k == ks[c] && (!finest || r.h < finest->h))
          finest = &r;
      const double lx = std::log10(finest->h), ly = std::log10(std::max(finest->l2_error, 1e-300));
      const double slope = ks[c] + 1.0;
      out << "<line class=\"reference\" x1=\"" << X(lx) << "\" y1=\"" << Y(ly) << "\" x2=\"" << X(xhi) << "\" y2=\""
          << Y(ly + slope * (xhi - lx)) << "\" stroke=\"" << detail::palette(c)
          << "\" stroke-dasharray=\"4 3\"/>\n";
      out << "<text x=\"" << W - R - 60 << "\" y=\"" << T + 18 * (c + 1) << "\" fill=\"" << detail::palette(c)
          << "\">k=" << ks[c] << "</text>\n";
    }
  for (std::size_t i = 0; i < rows.size(); ++i)
    {
      const auto       &r = rows[i];
      const std::size_t c = std::find(ks.begin(), ks.end(), r.k) - ks.begin();
      out << "<circle data-row=\"" << i << "\" cx=\"" << X(std::log10(r.h)) << "\" cy=\""
          << Y(std::log10(std::max(r.l2_error, 1e-300))) << "\" r=\"4\" fill=\"" << detail::palette(c) << "\"/>\n";
    }
  out << "</svg>\n";
}

/// DoFs per second against cut fraction, one circle per CSV row.
inline void
write_throughput_svg(std::ostream &out, const std::vector<ThroughputRow> &rows)
{
  const double W = 640, H = 480, L = 80, R = 20, T = 20, B = 50;
  out << detail::svg_header(W, H);
  double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
  for (const auto &r : rows)
    {
      ylo = std::min(ylo, r.dofs_per_second);
      yhi = std::max(yhi, r.dofs_per_second);
    }
  if (rows.empty())
    ylo = 0.0, yhi = 1.0;
  const auto [y0, y1] = detail::padded_range(ylo, yhi);
  const detail::Axis X{0.0, 1.0, L, W - R}, Y{y0, y1, H - B, T};
  out << "<g stroke=\"black\" fill=\"none\"><rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R
      << "\" height=\"" << H - T - B << "\"/></g>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">cut fraction</text>\n";
  out << "<text x=\"15\" y=\"" << H / 2 << "\" transform=\"rotate(-90 15 " << H / 2
      << ")\" text-anchor=\"middle\">DoFs per second</text>\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    out << "<circle data-row=\"" << i << "\" cx=\"" << X(rows[i].cut_fraction) << "\" cy=\""
        << Y(rows[i].dofs_per_second) << "\" r=\"5\" fill=\"" << detail::palette(rows[i].k - 1) << "\"/>\n";
  out << "</svg>\n";
}

/// Single stacked bar, one segment per CSV row.
inline void
write_breakdown_svg(std::ostream &out, const std::vector<BreakdownRow> &rows)
{
  const double W = 480, H = 400, T = 20, B = 40, bar_x = 60, bar_w = 120;
  out << detail::svg_header(W, H);
  double y = H - B;
  for (std::size_t i = 0; i < rows.size(); ++i)
    {
      const double h = (H - T - B) * rows[i].percent / 100.0;
      y -= h;
      out << "<rect data-row=\"" << i << "\" x=\"" << bar_x << "\" y=\"" << y << "\" width=\"" << bar_w
          << "\" height=\"" << h << "\" fill=\"" << detail::palette(i) << "\"/>\n";
      out << "<text x=\"" << bar_x + bar_w + 20 << "\" y=\"" << T + 20 * (i + 1) << "\" fill=\""
          << detail::palette(i) << "\">" << rows[i].component << ' ' << std::round(rows[i].percent * 10) / 10
          << "%</text>\n";
    }
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Commands

namespace detail
{
  inline std::ofstream
  open_output(const std::filesystem::path &path)
  {
    std::ofstream out(path, std::ios::binary);
    if (!out)
      throw std::runtime_error("cannot write " + path.string());
    return out;
  }

  template <int dim>
  int
  run_command(const RunConfig &cfg, std::ostream &log)
  {
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    if (cfg.command == "convergence")
      {
        const auto rows = run_convergence<dim>(cfg, &log);
        {
          auto f = open_output(dir / "convergence.csv");
          write_convergence_csv(f, rows);
        }
        {
          auto f = open_output(dir / "convergence.svg");
          write_convergence_svg(f, rows);
        }
        const bool all_converged =
          std::all_of(rows.begin(), rows.end(), [](const auto &r) { return r.converged; });
        return (cfg.strict && !all_converged) ? 3 : 0;
      }
    if (cfg.command == "kernelbench")
      {
        auto f = open_output(dir / "kernelbench.csv");
        write_kernel_csv(f, run_kernelbench<dim>(cfg));
        return 0;
      }
    if (cfg.command == "multiballs")
      {
        const auto result = run_multiballs<dim>(cfg, &log);
        {
          auto f = open_output(dir / "multiballs.csv");
          write_throughput_csv(f, result.rows);
        }
        {
          auto f = open_output(dir / "multiballs.svg");
          write_throughput_svg(f, result.rows);
        }
        for (std::size_t i = 0; i < result.rows.size(); ++i)
          {
            const std::string tag = "k" + std::to_string(result.rows[i].k) + "_balls" +
                                    std::to_string(result.rows[i].n_balls);
            auto f = open_output(dir / ("breakdown_" + tag + ".csv"));
            write_breakdown_csv(f, result.breakdowns[i]);
            auto g = open_output(dir / ("balls_" + tag + ".txt"));
            write_balls(g, result.configurations[i]);
          }
        return 0;
      }
    const auto rows = run_breakdown<dim>(cfg);
    {
      auto f = open_output(dir / "breakdown.csv");
      write_breakdown_csv(f, rows);
    }
    auto f = open_output(dir / "breakdown.svg");
    write_breakdown_svg(f, rows);
    return 0;
  }
} // namespace detail

/// Validates cfg, runs its command and writes the output files. Returns the exit code.
inline int
run_command(const RunConfig &cfg, std::ostream &log)
{
  cfg.validate();
  return cfg.dim == 2 ? detail::run_command<2>(cfg, log) : detail::run_command<3>(cfg, log);
}

} // namespace cutgp
