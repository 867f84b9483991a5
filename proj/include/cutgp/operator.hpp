#pragma once

#include <cutgp/cutquad.hpp>
#include <cutgp/geometry.hpp>
#include <cutgp/sumfac.hpp>
#include <cutgp/tensor1d.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace cutgp
{
struct Parameters
{
  unsigned degree = 1;
  /// ghost penalty strength
  double gamma_A = 0.5;
  /// Nitsche penalty, used as gamma_D / h
  double   gamma_D          = 60.0;
  unsigned cell_quadrature  = 2;
  unsigned cut_quadrature   = 2;
  unsigned error_quadrature = 3;
  unsigned max_depth        = 8;
  unsigned workers          = 1;

  /// gamma_D = 30 k (k+1), k+1 points for the operator, k+2 for error integration
  static Parameters
  for_degree(unsigned k)
  {
    Parameters p;
    p.degree           = k;
    p.gamma_D          = 30.0 * k * (k + 1.0);
    p.cell_quadrature  = k + 1;
    p.cut_quadrature   = k + 1;
    p.error_quadrature = k + 2;
    return p;
  }

  void
  validate() const
  {
    if (degree == 0)
      throw std::invalid_argument("Parameters: degree must be at least 1");
    if (!(gamma_A >= 0.0))
      throw std::invalid_argument("Parameters: gamma_A must be non-negative");
    if (!(gamma_D > 0.0))
      throw std::invalid_argument("Parameters: gamma_D must be positive");
    if (cell_quadrature < degree + 1 || cut_quadrature < degree + 1 || error_quadrature < degree + 1)
      throw std::invalid_argument("Parameters: quadrature orders must be at least k+1");
    if (workers == 0)
      throw std::invalid_argument("Parameters: need at least one worker");
  }
};

/// Which parts of the operator vmult evaluates.
namespace component
{
  enum : unsigned
  {
    interior   = 1u,
    cut_volume = 2u,
    nitsche    = 4u,
    ghost      = 8u,
    all        = 15u
  };
} // namespace component

/// Accumulated wall time per vmult component, in seconds.
struct VmultTimers
{
  double      interior      = 0.0;
  double      intersected   = 0.0;
  double      ghost_penalty = 0.0;
  double      total         = 0.0;
  std::size_t calls         = 0;

  double
  scatter_other() const
  {
    return std::max(0.0, total - interior - intersected - ghost_penalty);
  }
};

/// Stored data of one cut cell: quadrature and 1D basis tables at every point coordinate.
template <int dim>
struct CutCellData
{
  std::size_t            cell = 0;
  Box<dim>               box;
  CutCellQuadrature<dim> quadrature;
  /// [(point * dim + axis) * (k+1) + i]
  std::vector<double> interior_values, interior_derivatives;
  std::vector<double> surface_values, surface_derivatives;
};

namespace detail
{
  template <int dim>
  void
  tabulate(const ReferenceElement1D     &elem,
           const Box<dim>               &box,
           const std::vector<Point<dim>> &pts,
           std::vector<double>          &values,
           std::vector<double>          &derivs)
  {
    const std::size_t n = elem.n_dofs();
    values.assign(pts.size() * dim * n, 0.0);
    derivs.assign(pts.size() * dim * n, 0.0);
    for (std::size_t p = 0; p < pts.size(); ++p)
      for (int a = 0; a < dim; ++a)
        {
          const double h  = box.hi[a] - box.lo[a];
          const double xi = (pts[p][a] - box.lo[a]) / h;
          const auto   o  = (p * dim + a) * n;
          elem.evaluate(xi, std::span<double>(values).subspan(o, n), std::span<double>(derivs).subspan(o, n));
          for (std::size_t i = 0; i < n; ++i)
            derivs[o + i] /= h;
        }
  }

  /// Values and physical gradients of all (k+1)^dim basis functions at one point.
  template <int dim>
  void
  basis_at_point(const double *v, const double *d, std::size_t n, double *phi, std::array<double *, dim> grad)
  {
    // v, d hold dim consecutive blocks of n entries
    if constexpr (dim == 2)
      {
        std::size_t idx = 0;
        for (std::size_t i1 = 0; i1 < n; ++i1)
          for (std::size_t i0 = 0; i0 < n; ++i0, ++idx)
            {
              phi[idx]     = v[i0] * v[n + i1];
              grad[0][idx] = d[i0] * v[n + i1];
              grad[1][idx] = v[i0] * d[n + i1];
            }
      }
    else
      {
        std::size_t idx = 0;
        for (std::size_t i2 = 0; i2 < n; ++i2)
          for (std::size_t i1 = 0; i1 < n; ++i1)
            {
              const double v12 = v[n + i1] * v[2 * n + i2];
              const double d1  = d[n + i1] * v[2 * n + i2];
              const double d2  = v[n + i1] * d[2 * n + i2];
              for (std::size_t i0 = 0; i0 < n; ++i0, ++idx)
                {
                  phi[idx]     = v[i0] * v12;
                  grad[0][idx] = d[i0] * v12;
                  grad[1][idx] = v[i0] * d1;
                  grad[2][idx] = v[i0] * d2;
                }
            }
      }
  }

  /// Runs body(begin, end) over [0, n) split into contiguous chunks, one per worker.
  template <class Body>
  void
  parallel_chunks(std::size_t n, unsigned workers, Body &&body)
  {
    if (workers <= 1 || n < 2 * workers)
      {
        body(std::size_t{0}, n);
        return;
      }
    std::vector<std::thread> threads;
    const std::size_t        chunk = (n + workers - 1) / workers;
    for (unsigned w = 1; w < workers; ++w)
      {
        const std::size_t b = std::min(n, w * chunk), e = std::min(n, (w + 1) * chunk);
        if (b < e)
          threads.emplace_back([&body, b, e] { body(b, e); });
      }
    body(std::size_t{0}, std::min(n, chunk));
    for (auto &t : threads)
      t.join();
  }

  inline double
  seconds_since(std::chrono::steady_clock::time_point t0)
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
} // namespace detail

/**
 * Everything one operator application needs: mesh, classification, DoF
 * numbering, ghost faces, 1D matrices, the sum-factorization kernel and the
 * cached cut-cell quadrature. Immutable after construction.
 *
 * Cells and faces are grouped into colors whose members share no DoF;
 * processing colors in a fixed order makes vmult bitwise independent of the
 * worker count.
 */
template <int dim>
class OperatorContext
{
public:
  OperatorContext(const CartesianMesh<dim> &mesh_, const LevelSet<dim> &phi_, const Parameters &params_)
    : mesh(mesh_)
    , phi(phi_)
    , params(params_)
    , classification((params_.validate(), classify_cells<dim>(mesh_, phi_, params_.degree + 2)))
    , dofs(mesh_, params_.degree, classification)
    , faces(ghost_faces<dim>(mesh_, classification))
    , element(params_.degree, params_.cell_quadrature)
    , mass(mass_matrix_1d(element))
    , laplacian(element, mesh_.spacing())
  {
    const GhostPenalty1D ghost(element);
    for (int a = 0; a < dim; ++a)
      {
        const double h    = mesh.spacing()[a];
        tangential_mass[a] = h * mass;
        normal_penalty[a]  = ghost.scaled(h);
      }
    nitsche_h = *std::min_element(mesh.spacing().begin(), mesh.spacing().end());

    const std::size_t n_loc = dofs.n_cell_dofs();
    cut_slot.assign(mesh.n_cells(), -1);
    for (std::size_t cell = 0; cell < mesh.n_cells(); ++cell)
      {
        const CellLabel label = classification[cell];
        if (label == CellLabel::Outside)
          continue;
        const auto          m = mesh.cell_multi_index(cell);
        std::vector<std::int64_t> idx(n_loc);
        dofs.cell_dofs(m, idx);
        if (label == CellLabel::Inside)
          {
            interior.push_back(cell);
            interior_dofs.insert(interior_dofs.end(), idx.begin(), idx.end());
          }
        else
          {
            CutCellData<dim> data;
            data.cell = cell;
            data.box  = mesh.cell_box(m);
            try
              {
                data.quadrature =
                  cut_cell_quadrature<dim>(data.box, phi, params.cut_quadrature, params.max_depth, &stats);
              }
            catch (const QuadratureError &e)
              {
                throw QuadratureError(e.what(), cell);
              }
            detail::tabulate<dim>(element, data.box, data.quadrature.interior.points, data.interior_values,
                                  data.interior_derivatives);
            detail::tabulate<dim>(element, data.box, data.quadrature.surface.points, data.surface_values,
                                  data.surface_derivatives);
            cut_slot[cell] = static_cast<std::int64_t>(cut.size());
            cut.push_back(std::move(data));
            cut_dofs.insert(cut_dofs.end(), idx.begin(), idx.end());
          }
      }

    const std::size_t n_patch = dofs.n_patch_dofs();
    face_dofs.resize(faces.size() * n_patch);
    for (std::size_t f = 0; f < faces.size(); ++f)
      dofs.face_patch_dofs(faces[f], std::span<std::int64_t>(face_dofs).subspan(f * n_patch, n_patch));

    build_colors();
  }

  const CartesianMesh<dim> &
  get_mesh() const
  {
    return mesh;
  }

  const LevelSet<dim> &
  level_set() const
  {
    return phi;
  }

  const Parameters &
  parameters() const
  {
    return params;
  }

  const CellClassification<dim> &
  cells() const
  {
    return classification;
  }

  const DofMap<dim> &
  dof_map() const
  {
    return dofs;
  }

  const std::vector<GhostFace<dim>> &
  ghost_face_list() const
  {
    return faces;
  }

  const ReferenceElement1D &
  reference_element() const
  {
    return element;
  }

  std::size_t
  n_dofs() const
  {
    return dofs.n_active();
  }

  const std::vector<std::size_t> &
  interior_cells() const
  {
    return interior;
  }

  const std::vector<CutCellData<dim>> &
  cut_cells() const
  {
    return cut;
  }

  /// cut-cell data of a mesh cell, nullptr if the cell is not cut
  const CutCellData<dim> *
  cut_data(std::size_t cell) const
  {
    return cut_slot[cell] < 0 ? nullptr : &cut[static_cast<std::size_t>(cut_slot[cell])];
  }

  const Matrix &
  tangential_mass_matrix(int axis) const
  {
    return tangential_mass[axis];
  }

  const Matrix &
  normal_penalty_matrix(int axis) const
  {
    return normal_penalty[axis];
  }

  double
  nitsche_cell_size() const
  {
    return nitsche_h;
  }

  const QuadratureStats &
  quadrature_stats() const
  {
    return stats;
  }

  /// Mesh-level weights for partitioning (0 outside, 1 inside, k^(d-1) cut).
  std::vector<double>
  cell_weights() const
  {
    std::vector<double> w(mesh.n_cells());
    for (std::size_t c = 0; c < w.size(); ++c)
      w[c] = cell_weight(classification[c], params.degree, dim);
    return w;
  }

  /// w = A u on the active DoFs.
  void
  vmult(std::span<const double> u, std::span<double> w, VmultTimers *timers = nullptr,
        unsigned components = component::all) const
  {
    if (u.size() != n_dofs() || w.size() != n_dofs())
      throw std::invalid_argument("vmult: vector size " + std::to_string(u.size()) + "/" + std::to_string(w.size()) +
                                  " does not match " + std::to_string(n_dofs()) + " active DoFs");
    using clock   = std::chrono::steady_clock;
    const auto t0 = clock::now();
    std::fill(w.begin(), w.end(), 0.0);
    const std::size_t n_loc   = dofs.n_cell_dofs();
    const std::size_t n_patch = dofs.n_patch_dofs();

    // phases without work report zero time
    auto t = clock::now();
    const bool do_interior = (components & component::interior) && !interior_colors.empty();
    if (do_interior)
      for (const auto &color : interior_colors)
        detail::parallel_chunks(color.size(), params.workers, [&](std::size_t b, std::size_t e) {
          auto                scratch = laplacian.make_scratch();
          std::vector<double> ul(n_loc), wl(n_loc);
          for (std::size_t j = b; j < e; ++j)
            {
              const std::int64_t *idx = &interior_dofs[color[j] * n_loc];
              for (std::size_t i = 0; i < n_loc; ++i)
                ul[i] = u[static_cast<std::size_t>(idx[i])];
              laplacian.apply(ul.data(), wl.data(), scratch);
              for (std::size_t i = 0; i < n_loc; ++i)
                w[static_cast<std::size_t>(idx[i])] += wl[i];
            }
        });
    const double t_interior = do_interior ? detail::seconds_since(t) : 0.0;

    t                 = clock::now();
    const bool do_cut = (components & (component::cut_volume | component::nitsche)) && !cut.empty();
    if (do_cut)
      for (const auto &color : cut_colors)
        detail::parallel_chunks(color.size(), params.workers, [&](std::size_t b, std::size_t e) {
          std::vector<double> ul(n_loc), wl(n_loc), work((dim + 1) * n_loc);
          for (std::size_t j = b; j < e; ++j)
            {
              const std::int64_t *idx = &cut_dofs[color[j] * n_loc];
              for (std::size_t i = 0; i < n_loc; ++i)
                ul[i] = u[static_cast<std::size_t>(idx[i])];
              apply_cut_cell(cut[color[j]], ul.data(), wl.data(), work.data(), components);
              for (std::size_t i = 0; i < n_loc; ++i)
                w[static_cast<std::size_t>(idx[i])] += wl[i];
            }
        });
    const double t_cut = do_cut ? detail::seconds_since(t) : 0.0;

    t                   = clock::now();
    const bool do_ghost = (components & component::ghost) && params.gamma_A != 0.0 && !faces.empty();
    if (do_ghost)
      for (const auto &color : face_colors)
        detail::parallel_chunks(color.size(), params.workers, [&](std::size_t b, std::size_t e) {
          std::vector<double> up(n_patch), wp(n_patch), tmp(n_patch);
          for (std::size_t j = b; j < e; ++j)
            {
              const std::size_t   f   = color[j];
              const std::int64_t *idx = &face_dofs[f * n_patch];
              for (std::size_t i = 0; i < n_patch; ++i)
                up[i] = u[static_cast<std::size_t>(idx[i])];
              apply_face(faces[f].axis, up.data(), wp.data(), tmp.data());
              for (std::size_t i = 0; i < n_patch; ++i)
                w[static_cast<std::size_t>(idx[i])] += wp[i];
            }
        });
    const double t_ghost = do_ghost ? detail::seconds_since(t) : 0.0;

    if (timers)
      {
        timers->interior += t_interior;
        timers->intersected += t_cut;
        timers->ghost_penalty += t_ghost;
        timers->total += detail::seconds_since(t0);
        ++timers->calls;
      }
  }

  std::vector<double>
  vmult(std::span<const double> u, VmultTimers *timers = nullptr, unsigned components = component::all) const
  {
    std::vector<double> w(n_dofs());
    vmult(u, w, timers, components);
    return w;
  }

  /**
   * Cut-cell contribution: volume term over K ∩ Ω plus the symmetric Nitsche
   * terms -(d_n u, v) - (u, d_n v) + (gamma_D / h)(u, v) over K ∩ ∂Ω.
   * `work` holds (dim+1) * (k+1)^dim entries.
   */
  void
  apply_cut_cell(const CutCellData<dim> &data, const double *u, double *w, double *work,
                 unsigned components = component::all) const
  {
    const std::size_t n     = element.n_dofs();
    const std::size_t n_loc = dofs.n_cell_dofs();
    std::fill(w, w + n_loc, 0.0);
    double                   *phi_v = work;
    std::array<double *, dim> grad;
    for (int a = 0; a < dim; ++a)
      grad[a] = work + (a + 1) * n_loc;

    if (components & component::cut_volume)
      {
        const auto &rule = data.quadrature.interior;
        for (std::size_t p = 0; p < rule.size(); ++p)
          {
            detail::basis_at_point<dim>(&data.interior_values[p * dim * n], &data.interior_derivatives[p * dim * n], n,
                                        phi_v, grad);
            std::array<double, dim> gu{};
            for (int a = 0; a < dim; ++a)
              for (std::size_t i = 0; i < n_loc; ++i)
                gu[a] += u[i] * grad[a][i];
            for (int a = 0; a < dim; ++a)
              gu[a] *= rule.weights[p];
            for (int a = 0; a < dim; ++a)
              for (std::size_t i = 0; i < n_loc; ++i)
                w[i] += gu[a] * grad[a][i];
          }
      }

    if (components & component::nitsche)
      {
        const auto  &rule    = data.quadrature.surface;
        const double penalty = params.gamma_D / nitsche_h;
        for (std::size_t p = 0; p < rule.size(); ++p)
          {
            detail::basis_at_point<dim>(&data.surface_values[p * dim * n], &data.surface_derivatives[p * dim * n], n,
                                        phi_v, grad);
            const auto &normal = rule.normals[p];
            double      us = 0.0, dnu = 0.0;
            for (std::size_t i = 0; i < n_loc; ++i)
              {
                us += u[i] * phi_v[i];
                double dn = 0.0;
                for (int a = 0; a < dim; ++a)
                  dn += normal[a] * grad[a][i];
                dnu += u[i] * dn;
              }
            const double wq = rule.weights[p];
            for (std::size_t i = 0; i < n_loc; ++i)
              {
                double dn = 0.0;
                for (int a = 0; a < dim; ++a)
                  dn += normal[a] * grad[a][i];
                w[i] += wq * (-dnu * phi_v[i] - dn * us + penalty * us * phi_v[i]);
              }
          }
      }
  }

  /// gamma_A (h M ⊗ ... ⊗ G(h) ⊗ ... ⊗ h M) u on a face patch, G along the face normal.
  void
  apply_face(int axis, const double *u, double *w, double *tmp) const
  {
    MultiIndex<dim> ext = dofs.patch_extents(axis);
    // G^1 first, then the tangential masses; ping-pong between buffers ending in w
    const double *src = u;
    int           n_applied = 0;
    for (int a = 0; a < dim; ++a)
      {
        const int    b   = (axis + a) % dim;
        const Matrix &A  = b == axis ? normal_penalty[b] : tangential_mass[b];
        double       *dst = ((dim - n_applied) % 2 == 1) ? w : tmp;
        detail::apply_axis_raw<dim>(A, ext, b, src, dst);
        src = dst;
        ++n_applied;
      }
    const std::size_t n = dofs.n_patch_dofs();
    for (std::size_t i = 0; i < n; ++i)
      w[i] *= params.gamma_A;
  }

private:
  void
  build_colors()
  {
    const std::size_t n_cell_colors = std::size_t{1} << dim;
    auto              cell_color    = [&](std::size_t cell) {
      const auto  m = mesh.cell_multi_index(cell);
      std::size_t c = 0;
      for (int a = 0; a < dim; ++a)
        c |= (m[a] % 2) << a;
      return c;
    };
    interior_colors.assign(n_cell_colors, {});
    for (std::size_t j = 0; j < interior.size(); ++j)
      interior_colors[cell_color(interior[j])].push_back(j);
    cut_colors.assign(n_cell_colors, {});
    for (std::size_t j = 0; j < cut.size(); ++j)
      cut_colors[cell_color(cut[j].cell)].push_back(j);

    // patches span two cells along the normal: residue mod 3 there, parity elsewhere
    const std::size_t per_axis = 3 * (std::size_t{1} << (dim - 1));
    face_colors.assign(dim * per_axis, {});
    for (std::size_t f = 0; f < faces.size(); ++f)
      {
        const auto &face = faces[f];
        std::size_t c    = face.lower[face.axis] % 3;
        std::size_t bit  = 0;
        for (int a = 0; a < dim; ++a)
          if (a != face.axis)
            c += 3 * ((face.lower[a] % 2) << bit++);
        face_colors[face.axis * per_axis + c].push_back(f);
      }
  }

  CartesianMesh<dim>          mesh;
  LevelSet<dim>               phi;
  Parameters                  params;
  CellClassification<dim>     classification;
  DofMap<dim>                 dofs;
  std::vector<GhostFace<dim>> faces;
  ReferenceElement1D          element;
  Matrix                      mass;
  std::array<Matrix, dim>     tangential_mass;
  std::array<Matrix, dim>     normal_penalty;
  double                      nitsche_h = 1.0;
  CellLaplacianKernel<dim>    laplacian;
  QuadratureStats             stats;

  std::vector<std::size_t>      interior;
  std::vector<std::int64_t>     interior_dofs;
  std::vector<CutCellData<dim>> cut;
  std::vector<std::int64_t>     cut_dofs;
  std::vector<std::int64_t>     cut_slot;
  std::vector<std::int64_t>     face_dofs;

  std::vector<std::vector<std::size_t>> interior_colors;
  std::vector<std::vector<std::size_t>> cut_colors;
  std::vector<std::vector<std::size_t>> face_colors;
};

/// Kronecker ghost-penalty kernel on a gathered two-cell patch.
template <int dim>
TensorField<dim>
ghost_face_apply(const OperatorContext<dim> &ctx, const GhostFace<dim> &face, const TensorField<dim> &u_patch)
{
  if (u_patch.extents != ctx.dof_map().patch_extents(face.axis))
    throw std::invalid_argument("ghost_face_apply: patch extents do not match the face");
  std::array<const Matrix *, dim> mats;
  for (int a = 0; a < dim; ++a)
    mats[a] = a == face.axis ? &ctx.normal_penalty_matrix(a) : &ctx.tangential_mass_matrix(a);
  auto out = kron_apply<dim>(mats, u_patch);
  for (auto &v : out.data)
    v *= ctx.parameters().gamma_A;
  return out;
}

/// Point-evaluation kernel of one cut cell on its local coefficients.
template <int dim>
TensorField<dim>
cut_cell_apply(const OperatorContext<dim> &ctx, std::size_t cell, const TensorField<dim> &u_local,
               unsigned components = component::all)
{
  const auto *data = ctx.cut_data(cell);
  if (data == nullptr)
    throw std::invalid_argument("cut_cell_apply: cell " + std::to_string(cell) + " has no cut quadrature");
  const std::size_t n = ctx.reference_element().n_dofs();
  for (int a = 0; a < dim; ++a)
    if (u_local.extents[a] != n)
      throw std::invalid_argument("cut_cell_apply: local field must have k+1 entries per axis");
  TensorField<dim>    w(u_local.extents);
  std::vector<double> work((dim + 1) * u_local.size());
  ctx.apply_cut_cell(*data, u_local.data.data(), w.data.data(), work.data(), components);
  return w;
}

template <int dim>
std::vector<double>
vmult(const OperatorContext<dim> &ctx, std::span<const double> u, VmultTimers *timers = nullptr,
      unsigned components = component::all)
{
  return ctx.vmult(u, timers, components);
}

template <int dim>
using ScalarFunction = std::function<double(const Point<dim> &)>;

/**
 * b_i = (f, phi_i)_Ω. When Dirichlet data g is given, the Nitsche terms
 * (g, -d_n phi_i + (gamma_D / h) phi_i) on ∂Ω are added as well.
 */
template <int dim>
std::vector<double>
assemble_rhs(const OperatorContext<dim> &ctx, const std::type_identity_t<ScalarFunction<dim>> &f, const std::type_identity_t<ScalarFunction<dim>> &g = {})
{
  const auto       &dofs  = ctx.dof_map();
  const auto       &mesh  = ctx.get_mesh();
  const auto       &elem  = ctx.reference_element();
  const std::size_t n     = elem.n_dofs();
  const std::size_t n_loc = dofs.n_cell_dofs();
  std::vector<double>       b(ctx.n_dofs(), 0.0);
  std::vector<std::int64_t> idx(n_loc);
  std::vector<double>       phi(n_loc), work(dim * n_loc);
  std::array<double *, dim> grad;
  for (int a = 0; a < dim; ++a)
    grad[a] = work.data() + a * n_loc;

  const auto       &rule = elem.quadrature();
  const std::size_t nq   = rule.size();
  std::size_t       n_qp = 1;
  for (int a = 0; a < dim; ++a)
    n_qp *= nq;
  std::vector<double> v(dim * n), d(dim * n);
  for (std::size_t cell : ctx.interior_cells())
    {
      const auto m   = mesh.cell_multi_index(cell);
      const auto box = mesh.cell_box(m);
      dofs.cell_dofs(m, idx);
      for (std::size_t q = 0; q < n_qp; ++q)
        {
          Point<dim>  x;
          double      wq   = 1.0;
          std::size_t rest = q;
          for (int a = 0; a < dim; ++a)
            {
              const std::size_t j = rest % nq;
              rest /= nq;
              const double h = box.hi[a] - box.lo[a];
              x[a]           = box.lo[a] + h * rule.points[j];
              wq *= h * rule.weights[j];
              for (std::size_t i = 0; i < n; ++i)
                {
                  v[a * n + i] = elem.shape_values()(i, j);
                  d[a * n + i] = elem.shape_gradients()(i, j) / h;
                }
            }
          detail::basis_at_point<dim>(v.data(), d.data(), n, phi.data(), grad);
          const double fx = f(x) * wq;
          for (std::size_t i = 0; i < n_loc; ++i)
            b[static_cast<std::size_t>(idx[i])] += fx * phi[i];
        }
    }

  const double penalty = ctx.parameters().gamma_D / ctx.nitsche_cell_size();
  for (const auto &data : ctx.cut_cells())
    {
      dofs.cell_dofs(mesh.cell_multi_index(data.cell), idx);
      const auto &in = data.quadrature.interior;
      for (std::size_t p = 0; p < in.size(); ++p)
        {
          detail::basis_at_point<dim>(&data.interior_values[p * dim * n], &data.interior_derivatives[p * dim * n], n,
                                      phi.data(), grad);
          const double fx = f(in.points[p]) * in.weights[p];
          for (std::size_t i = 0; i < n_loc; ++i)
            b[static_cast<std::size_t>(idx[i])] += fx * phi[i];
        }
      if (!g)
        continue;
      const auto &s = data.quadrature.surface;
      for (std::size_t p = 0; p < s.size(); ++p)
        {
          const double gx = g(s.points[p]);
          if (gx == 0.0)
            continue;
          detail::basis_at_point<dim>(&data.surface_values[p * dim * n], &data.surface_derivatives[p * dim * n], n,
                                      phi.data(), grad);
          for (std::size_t i = 0; i < n_loc; ++i)
            {
              double dn = 0.0;
              for (int a = 0; a < dim; ++a)
                dn += s.normals[p][a] * grad[a][i];
              b[static_cast<std::size_t>(idx[i])] += gx * (-dn + penalty * phi[i]) * s.weights[p];
            }
        }
    }
  return b;
}

/// Nodal interpolant of u on the active DoFs.
template <int dim>
std::vector<double>
interpolate(const OperatorContext<dim> &ctx, const std::type_identity_t<ScalarFunction<dim>> &u)
{
  const auto         &dofs  = ctx.dof_map();
  const auto         &mesh  = ctx.get_mesh();
  const auto         &nodes = ctx.reference_element().nodes();
  const unsigned      k     = dofs.degree();
  std::vector<double> values(ctx.n_dofs());
  for (std::size_t j = 0; j < values.size(); ++j)
    {
      const auto m = dofs.node_multi_index(dofs.global_index(j));
      Point<dim> x;
      for (int a = 0; a < dim; ++a)
        {
          const std::size_t c = m[a] / k, i = m[a] % k;
          x[a] = mesh.origin()[a] + (static_cast<double>(c) + nodes[i]) * mesh.spacing()[a];
        }
      values[j] = u(x);
    }
  return values;
}

} // namespace cutgp
