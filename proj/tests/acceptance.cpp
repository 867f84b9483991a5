// Acceptance gate: one PASS/FAIL line per criterion. Exit status is nonzero if any criterion fails.

#include "oracles.hpp"

#include <cutgp/harness.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

using namespace cutgp;

namespace
{
struct Outcome
{
  bool        pass = true;
  std::string detail;
  /// non-timing output, compared bitwise by the determinism criterion
  std::string record;

  void
  check(bool ok, const std::string &what)
  {
    if (!ok)
      {
        pass = false;
        detail += (detail.empty() ? "" : "; ") + what;
      }
  }
};

std::vector<double>
random_vector(std::size_t n, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double>                    v(n);
  for (auto &x : v)
    x = d(rng);
  return v;
}

double
norm(const std::vector<double> &v)
{
  double s = 0.0;
  for (double x : v)
    s += x * x;
  return std::sqrt(s);
}

template <int dim>
OperatorContext<dim>
disk_context(std::size_t n, unsigned k, unsigned workers)
{
  auto p    = Parameters::for_degree(k);
  p.workers = workers;
  Point<dim> c{};
  return OperatorContext<dim>(CartesianMesh<dim>::cube(-1.26, 1.26, n), LevelSet<dim>::sphere(c, 1.0), p);
}

std::string
csv(const std::vector<ConvergenceRow> &rows)
{
  std::ostringstream s;
  write_convergence_csv(s, rows);
  return s.str();
}

// 1 ---------------------------------------------------------------------------

Outcome
convergence(unsigned workers)
{
  Outcome   out;
  RunConfig cfg;
  cfg.workers = workers;
  std::ostringstream detail;

  auto sweep = [&](auto dim_tag, std::vector<unsigned> degrees, unsigned levels, double margin, double budget) {
    constexpr int dim = decltype(dim_tag)::value;
    cfg.dim           = dim;
    cfg.domain        = dim == 2 ? "disk" : "sphere";
    cfg.degrees       = degrees;
    cfg.refinements   = levels;
    const auto t0     = std::chrono::steady_clock::now();
    const auto rows   = run_convergence<dim>(cfg);
    const double secs = detail::seconds_since(t0);
    out.record += csv(rows);
    for (unsigned k : degrees)
      {
        const double rate = fitted_rate(rows, k, 2);
        detail << dim << "D k=" << k << " rate " << std::round(rate * 100) / 100 << "; ";
        out.check(rate >= k + margin, std::to_string(dim) + "D k=" + std::to_string(k) + " fitted rate " +
                                        format_number(rate) + " < " + format_number(k + margin));
        double prev = std::numeric_limits<double>::infinity();
        for (const auto &r : rows)
          if (r.k == k)
            {
              out.check(r.l2_error < prev, std::to_string(dim) + "D k=" + std::to_string(k) +
                                             " error not decreasing at level " + std::to_string(r.refinement));
              out.check(r.converged, "CG did not converge");
              prev = r.l2_error;
            }
      }
    detail << dim << "D " << std::round(secs) << " s; ";
    out.check(secs < budget, std::to_string(dim) + "D sweep took " + format_number(secs) + " s");
  };
  sweep(std::integral_constant<int, 2>{}, {1, 2, 3}, 5, 0.7, 180.0);
  sweep(std::integral_constant<int, 3>{}, {1, 2}, 3, 0.6, 600.0);
  if (out.pass)
    out.detail = detail.str();
  else
    out.detail += " (" + detail.str() + ")";
  return out;
}

// 2 ---------------------------------------------------------------------------

template <int dim>
void
kronecker_case(Outcome &out, unsigned k, std::mt19937_64 &rng, double &worst)
{
  MultiIndex<dim> cells;
  cells.fill(2);
  Point<dim> origin{}, spacing, normal{};
  spacing.fill(0.37);
  normal[0]  = 1.0;
  const OperatorContext<dim> ctx(CartesianMesh<dim>(origin, cells, spacing), LevelSet<dim>::half_space(normal, 0.6),
                                 Parameters::for_degree(k));
  for (int axis = 0; axis < dim; ++axis)
    {
      std::vector<Eigen::MatrixXd> m(dim, 0.37 * oracle::mass_1d(k));
      m[axis]                 = oracle::ghost_1d(k, 0.37);
      const Eigen::MatrixXd K = 0.5 * oracle::kron(m);
      for (int t = 0; t < 20; ++t)
        {
          TensorField<dim> u(ctx.dof_map().patch_extents(axis), random_vector(K.cols(), rng));
          GhostFace<dim>   f{MultiIndex<dim>{}, axis};
          const auto       w   = ghost_face_apply(ctx, f, u);
          const auto       ref = K * Eigen::Map<const Eigen::VectorXd>(u.data.data(), u.size());
          const double     err =
            (Eigen::Map<const Eigen::VectorXd>(w.data.data(), w.size()) - ref).norm() / ref.norm();
          worst = std::max(worst, err);
          out.check(err <= 1e-12, "d=" + std::to_string(dim) + " k=" + std::to_string(k) + " relative error " +
                                    format_number(err));
          out.record += format_number(w.data[0]) + ",";
        }
    }
}

Outcome
kronecker_equivalence()
{
  Outcome         out;
  std::mt19937_64 rng(2);
  double          worst = 0.0;
  for (unsigned k = 1; k <= 3; ++k)
    {
      kronecker_case<2>(out, k, rng, worst);
      kronecker_case<3>(out, k, rng, worst);
    }
  if (out.pass)
    out.detail = "max relative error " + format_number(worst);
  return out;
}

// 3 ---------------------------------------------------------------------------

Outcome
dense_equivalence(unsigned workers)
{
  Outcome out;
  std::ostringstream d;
  for (unsigned k : {1u, 2u})
    {
      const auto   ctx   = disk_context<2>(4, k, workers);
      const auto   A     = oracle::probe(ctx);
      const auto   D     = oracle::dense_matrix(ctx);
      const double scale = oracle::max_abs(D);
      const double diff  = oracle::max_abs(A - D) / scale;
      const double asym  = oracle::max_abs(A - A.transpose()) / scale;
      out.check(diff <= 1e-10, "k=" + std::to_string(k) + " mismatch " + format_number(diff));
      out.check(asym <= 1e-10, "k=" + std::to_string(k) + " asymmetry " + format_number(asym));
      d << "k=" << k << " n=" << ctx.n_dofs() << " diff " << diff << " asym " << asym << "; ";
      for (Eigen::Index i = 0; i < A.size(); ++i)
        out.record += format_number(A.data()[i]) + ",";
    }
  if (out.pass)
    out.detail = d.str();
  return out;
}

// 4 ---------------------------------------------------------------------------

Outcome
ghost_structure(unsigned workers)
{
  Outcome         out;
  std::mt19937_64 rng(4);
  double          worst_psd = std::numeric_limits<double>::infinity(), worst_null = 0.0;
  for (unsigned k = 1; k <= 3; ++k)
    {
      const auto ctx = disk_context<2>(8, k, workers);
      auto       Ag  = [&](const std::vector<double> &u) { return ctx.vmult(u, nullptr, component::ghost); };
      for (int t = 0; t < 100; ++t)
        {
          const auto u = random_vector(ctx.n_dofs(), rng);
          const auto w = Ag(u);
          double     q = 0.0, uu = 0.0;
          for (std::size_t i = 0; i < u.size(); ++i)
            q += u[i] * w[i], uu += u[i] * u[i];
          worst_psd = std::min(worst_psd, q / uu);
          out.check(q >= -1e-12 * uu, "k=" + std::to_string(k) + " negative quadratic form " + format_number(q / uu));
        }
      // operator norm estimate by power iteration
      auto   v   = random_vector(ctx.n_dofs(), rng);
      double lam = 0.0;
      for (int it = 0; it < 30; ++it)
        {
          auto w = Ag(v);
          lam    = norm(w) / norm(v);
          v      = w;
        }
      for (unsigned px = 0; px <= k; ++px)
        for (unsigned py = 0; px + py <= k; ++py)
          {
            const auto u = interpolate<2>(ctx, [&](const Point<2> &x) {
              return std::pow(x[0] - 0.2, px) * std::pow(x[1] + 0.1, py);
            });
            const double rel = norm(Ag(u)) / (lam * norm(u));
            worst_null       = std::max(worst_null, rel);
            out.check(rel <= 1e-9, "k=" + std::to_string(k) + " monomial x^" + std::to_string(px) + " y^" +
                                     std::to_string(py) + " residual " + format_number(rel));
            out.record += format_number(rel) + ",";
          }
    }
  if (out.pass)
    out.detail = "min u'Au/u'u " + format_number(worst_psd) + ", max monomial residual " + format_number(worst_null);
  return out;
}

// 5 ---------------------------------------------------------------------------

template <int dim>
std::pair<double, double>
measure(std::size_t n, unsigned q)
{
  Point<dim> c{};
  const auto phi  = LevelSet<dim>::sphere(c, 1.0);
  const auto mesh = CartesianMesh<dim>::cube(-1.26, 1.26, n);
  const auto cls  = classify_cells(mesh, phi, q + 1);
  double     vol = 0.0, area = 0.0;
  for (std::size_t i = 0; i < mesh.n_cells(); ++i)
    {
      const auto box = mesh.cell_box(mesh.cell_multi_index(i));
      if (cls[i] == CellLabel::Inside)
        vol += box.volume();
      else if (cls[i] == CellLabel::Cut)
        {
          const auto quad = cut_cell_quadrature<dim>(box, phi, q);
          vol += quad.interior.total_weight();
          area += quad.surface.total_weight();
        }
    }
  const double pi = std::numbers::pi;
  return dim == 2 ? std::pair{std::abs(vol - pi), std::abs(area - 2 * pi)}
                  : std::pair{std::abs(vol - 4 * pi / 3), std::abs(area - 4 * pi)};
}

double
order(const std::vector<double> &e)
{
  const double n = e.size();
  double       sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < e.size(); ++i)
    {
      const double y = -std::log2(e[i]);
      sx += i, sy += y, sxx += double(i) * i, sxy += i * y;
    }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Outcome
quadrature_geometry()
{
  Outcome    out;
  const auto [ca, cp] = measure<2>(12, 5);
  const auto [sv, sa] = measure<3>(12, 5);
  out.check(ca <= 1e-8, "circle area error " + format_number(ca));
  out.check(cp <= 1e-8, "circle perimeter error " + format_number(cp));
  out.check(sv <= 1e-5, "sphere volume error " + format_number(sv));
  out.check(sa <= 1e-5, "sphere area error " + format_number(sa));
  std::vector<double> e2v, e2a, e3v, e3a;
  for (std::size_t n : {6, 12, 24, 48})
    {
      const auto [a, b] = measure<2>(n, 3);
      const auto [c, d] = measure<3>(n, 3);
      e2v.push_back(a), e2a.push_back(b), e3v.push_back(c), e3a.push_back(d);
    }
  const double o[4] = {order(e2v), order(e2a), order(e3v), order(e3a)};
  const char  *names[4] = {"circle area", "circle perimeter", "sphere volume", "sphere area"};
  for (int i = 0; i < 4; ++i)
    out.check(o[i] >= 4.0, std::string(names[i]) + " order " + format_number(o[i]));
  for (double v : {ca, cp, sv, sa, o[0], o[1], o[2], o[3]})
    out.record += format_number(v) + ",";
  if (out.pass)
    {
      std::ostringstream s;
      s << "errors " << ca << ' ' << cp << ' ' << sv << ' ' << sa << "; orders " << o[0] << ' ' << o[1] << ' '
        << o[2] << ' ' << o[3];
      out.detail = s.str();
    }
  return out;
}

// 6 ---------------------------------------------------------------------------

Outcome
small_cut_robustness()
{
  Outcome                   out;
  const std::size_t         n = 8;
  const double              h = 1.0 / n;
  const auto                mesh = CartesianMesh<2>::cube(0.0, 1.0, n);
  const std::vector<double> deltas{0.5, 1e-2, 1e-4, 1e-8};
  std::ostringstream        d;

  auto sweep = [&](double gamma_A, std::vector<std::size_t> &its, bool &all_converged) {
    all_converged = true;
    for (double delta : deltas)
      {
        auto p    = Parameters::for_degree(2);
        p.gamma_A = gamma_A;
        const OperatorContext<2> ctx(mesh, LevelSet<2>::half_space({1, 0}, 0.5 + delta * h), p);
        const auto           b = assemble_rhs<2>(ctx, [](const Point<2> &) { return 1.0; });
        std::vector<double>  x(ctx.n_dofs(), 0.0);
        const auto           rep = cg_solve(ctx, b, x);
        its.push_back(rep.iterations);
        all_converged = all_converged && rep.converged;
        d << rep.iterations << (rep.converged ? "" : "(no conv)") << ' ';
      }
  };
  std::vector<std::size_t> with, without;
  bool                     conv_with, conv_without;
  d << "gamma_A=0.5 iterations: ";
  sweep(0.5, with, conv_with);
  d << "; gamma_A=0 iterations: ";
  sweep(0.0, without, conv_without);

  const auto ratio = [](const std::vector<std::size_t> &v) {
    return double(*std::max_element(v.begin(), v.end())) / double(*std::min_element(v.begin(), v.end()));
  };
  out.check(conv_with, "stabilized solve did not converge");
  out.check(ratio(with) <= 2.0, "stabilized iteration ratio " + format_number(ratio(with)));
  out.check(!conv_without || ratio(without) > 2.0,
            "unstabilized iteration ratio only " + format_number(ratio(without)));
  out.detail = (out.pass ? "" : out.detail + " (") + d.str() + (out.pass ? "" : ")");
  return out;
}

// 7 ---------------------------------------------------------------------------

Outcome
sumfac_complexity()
{
  Outcome         out;
  std::mt19937_64 rng(7);
  std::size_t     cases = 0;
  for (unsigned k = 1; k <= 4; ++k)
    for (int axis = 0; axis < 3; ++axis)
      for (std::size_t m_out : {std::size_t{k + 1}, std::size_t{2 * k + 1}, std::size_t{1}})
        {
          const std::array<std::size_t, 3> ext{k + 1, 2 * k + 1, k + 2};
          TensorField<3>                   u(ext, random_vector(ext[0] * ext[1] * ext[2], rng));
          Matrix                           A(m_out, ext[axis]);
          OperationCounter                 counter;
          apply_axis(A, u, axis, &counter);
          std::uint64_t expected = m_out * ext[axis];
          for (int b = 0; b < 3; ++b)
            if (b != axis)
              expected *= ext[b];
          out.check(counter.multiply_adds == expected,
                    "k=" + std::to_string(k) + " axis " + std::to_string(axis) + " counted " +
                      std::to_string(counter.multiply_adds) + " expected " + std::to_string(expected));
          ++cases;
        }
  // full cell kernel: d (k+1)^(d+1) per axis sweep
  for (unsigned k = 1; k <= 4; ++k)
    {
      TensorField<3>        u({k + 1, k + 1, k + 1}, 1.0);
      const Matrix          M = Matrix::identity(k + 1);
      OperationCounter      counter;
      kron_apply<3>({&M, &M, &M}, u, &counter);
      const std::uint64_t n = k + 1;
      out.check(counter.multiply_adds == 3 * n * n * n * n, "kron_apply count for k=" + std::to_string(k));
      ++cases;
    }
  if (out.pass)
    out.detail = std::to_string(cases) + " exact counts";
  return out;
}

// 8 ---------------------------------------------------------------------------

double
spearman(const std::vector<double> &a, const std::vector<double> &b)
{
  auto ranks = [](const std::vector<double> &v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();)
      {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
          ++j;
        for (std::size_t t = i; t <= j; ++t)
          r[idx[t]] = 0.5 * double(i + j);
        i = j + 1;
      }
    return r;
  };
  const auto   ra = ranks(a), rb = ranks(b);
  const double n  = a.size();
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double       sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    {
      sab += (ra[i] - ma) * (rb[i] - mb);
      saa += (ra[i] - ma) * (ra[i] - ma);
      sbb += (rb[i] - mb) * (rb[i] - mb);
    }
  return sab / std::sqrt(saa * sbb);
}

Outcome
throughput_trends()
{
  Outcome            out;
  std::ostringstream d;

  RunConfig kb;
  kb.dim                 = 3;
  kb.domain              = "sphere";
  kb.degrees             = {1, 2, 3};
  kb.trials              = 5;
  kb.kernel_applications = 2000;
  const auto rows        = run_kernelbench<3>(kb);
  std::vector<double> ratio;
  for (unsigned k = 1; k <= 3; ++k)
    {
      double sumfac = 0, point = 0;
      for (const auto &r : rows)
        if (r.k == k && r.kernel == "sumfac")
          sumfac = r.microseconds;
        else if (r.k == k && r.kernel == "point")
          point = r.microseconds;
      ratio.push_back(point / sumfac);
    }
  d << "(a) point/sumfac " << ratio[0] << ' ' << ratio[1] << ' ' << ratio[2];
  out.check(ratio[0] < ratio[1] && ratio[1] < ratio[2], "(a) point/sumfac ratio not increasing in k");

  RunConfig mb;
  mb.command          = "multiballs";
  mb.domain           = "balls";
  mb.degrees          = {2};
  mb.mesh_refinements = 5;
  mb.repetitions      = 30;
  mb.trials           = 3;
  const auto res      = run_multiballs<2>(mb);
  std::vector<double> cut, thr;
  for (const auto &r : res.rows)
    cut.push_back(r.cut_fraction), thr.push_back(r.dofs_per_second);
  const double rho = cut.size() >= 2 ? spearman(cut, thr) : 0.0;
  d << "; (b) " << cut.size() << " configurations, Spearman " << rho;
  out.check(cut.size() == 5, "(b) expected 5 multi-ball configurations, got " + std::to_string(cut.size()));
  out.check(rho < 0.0, "(b) rank correlation " + format_number(rho) + " is not negative");

  RunConfig br;
  br.command         = "breakdown";
  br.degrees         = {3};
  br.breakdown_cells = 12;
  const auto parts   = run_breakdown<2>(br);
  double     sum     = 0.0;
  for (const auto &p : parts)
    sum += p.percent;
  const auto top = std::max_element(parts.begin(), parts.end(),
                                    [](const auto &a, const auto &b) { return a.percent < b.percent; });
  d << "; (c) sum " << sum << ", largest " << top->component << ' ' << top->percent << '%';
  out.check(std::abs(sum - 100.0) <= 0.5, "(c) percentages sum to " + format_number(sum));
  out.check(top->component == "intersected", "(c) largest component is " + top->component);

  out.detail = (out.pass ? "" : out.detail + " (") + d.str() + (out.pass ? "" : ")");
  return out;
}

// 9 ---------------------------------------------------------------------------

Outcome
determinism(const std::vector<Outcome> &first)
{
  // same seeds, repeated, and with four workers instead of one
  Outcome                               out;
  const std::vector<std::function<Outcome()>> again{
    [] { return convergence(4); },          kronecker_equivalence, [] { return dense_equivalence(4); },
    [] { return ghost_structure(4); },      quadrature_geometry};
  for (std::size_t i = 0; i < again.size(); ++i)
    {
      const auto second = again[i]();
      out.check(!first[i].record.empty() && second.record == first[i].record,
                "criterion " + std::to_string(i + 1) + " output differs between runs");
    }
  if (out.pass)
    out.detail = "criteria 1-5 reproduced bitwise with 4 workers";
  return out;
}

void
report(int id, const Outcome &o, int &failures)
{
  std::cout << "CRITERION " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  failures += !o.pass;
}
} // namespace

int
main()
{
  int                  failures = 0;
  std::vector<Outcome> first;
  first.push_back(convergence(1));
  report(1, first.back(), failures);
  first.push_back(kronecker_equivalence());
  report(2, first.back(), failures);
  first.push_back(dense_equivalence(1));
  report(3, first.back(), failures);
  first.push_back(ghost_structure(1));
  report(4, first.back(), failures);
  first.push_back(quadrature_geometry());
  report(5, first.back(), failures);
  report(6, small_cut_robustness(), failures);
  report(7, sumfac_complexity(), failures);
  report(8, throughput_trends(), failures);
  report(9, determinism(first), failures);
  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAIL") << std::endl;
  return failures == 0 ? 0 : 1;
}
