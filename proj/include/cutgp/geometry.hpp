#pragma once

#include <cutgp/sumfac.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace cutgp
{
template <int dim>
using Point = std::array<double, dim>;

template <int dim>
using MultiIndex = std::array<std::size_t, dim>;

/// Axis-aligned box [lo, hi].
template <int dim>
struct Box
{
  Point<dim> lo{};
  Point<dim> hi{};

  Point<dim>
  center() const
  {
    Point<dim> c;
    for (int a = 0; a < dim; ++a)
      c[a] = 0.5 * (lo[a] + hi[a]);
    return c;
  }

  double
  diameter() const
  {
    double s = 0.0;
    for (int a = 0; a < dim; ++a)
      s += (hi[a] - lo[a]) * (hi[a] - lo[a]);
    return std::sqrt(s);
  }

  double
  volume() const
  {
    double v = 1.0;
    for (int a = 0; a < dim; ++a)
      v *= hi[a] - lo[a];
    return v;
  }
};

/// Uniform axis-aligned grid; cell c covers [origin + c h, origin + (c+1) h] per axis.
template <int dim>
class CartesianMesh
{
public:
  CartesianMesh(const Point<dim> &origin, const MultiIndex<dim> &cells_per_axis, const Point<dim> &spacing)
    : origin_(origin)
    , cells_(cells_per_axis)
    , spacing_(spacing)
  {
    for (int a = 0; a < dim; ++a)
      {
        if (cells_[a] == 0)
          throw std::invalid_argument("CartesianMesh: need at least one cell per axis");
        if (!(spacing_[a] > 0.0))
          throw std::invalid_argument("CartesianMesh: spacing must be positive");
      }
  }

  /// n cells per axis over the cube [lo, hi]^dim.
  static CartesianMesh
  cube(double lo, double hi, std::size_t n)
  {
    Point<dim>      origin, spacing;
    MultiIndex<dim> cells;
    origin.fill(lo);
    spacing.fill((hi - lo) / static_cast<double>(n));
    cells.fill(n);
    return CartesianMesh(origin, cells, spacing);
  }

  const Point<dim> &
  origin() const
  {
    return origin_;
  }

  const MultiIndex<dim> &
  cells_per_axis() const
  {
    return cells_;
  }

  const Point<dim> &
  spacing() const
  {
    return spacing_;
  }

  std::size_t
  n_cells() const
  {
    std::size_t n = 1;
    for (auto c : cells_)
      n *= c;
    return n;
  }

  std::size_t
  cell_index(const MultiIndex<dim> &c) const
  {
    std::size_t idx = 0, stride = 1;
    for (int a = 0; a < dim; ++a)
      {
        idx += c[a] * stride;
        stride *= cells_[a];
      }
    return idx;
  }

  MultiIndex<dim>
  cell_multi_index(std::size_t index) const
  {
    MultiIndex<dim> c;
    for (int a = 0; a < dim; ++a)
      {
        c[a] = index % cells_[a];
        index /= cells_[a];
      }
    return c;
  }

  Box<dim>
  cell_box(const MultiIndex<dim> &c) const
  {
    Box<dim> b;
    for (int a = 0; a < dim; ++a)
      {
        b.lo[a] = origin_[a] + static_cast<double>(c[a]) * spacing_[a];
        b.hi[a] = origin_[a] + static_cast<double>(c[a] + 1) * spacing_[a];
      }
    return b;
  }

  double
  cell_diameter() const
  {
    double s = 0.0;
    for (auto h : spacing_)
      s += h * h;
    return std::sqrt(s);
  }

private:
  Point<dim>      origin_;
  MultiIndex<dim> cells_;
  Point<dim>      spacing_;
};

// ---------------------------------------------------------------------------
// Level sets: positive inside the domain.

template <int dim>
struct Sphere
{
  Point<dim> center{};
  double     radius = 1.0;
};

template <int dim>
struct BallUnion
{
  std::vector<Point<dim>> centers;
  std::vector<double>     radii;
};

/// phi(x) = offset - normal . x
template <int dim>
struct HalfSpace
{
  Point<dim> normal{};
  double     offset = 0.0;
};

namespace detail
{
  template <int dim>
  double
  distance(const Point<dim> &x, const Point<dim> &c)
  {
    double s = 0.0;
    for (int a = 0; a < dim; ++a)
      s += (x[a] - c[a]) * (x[a] - c[a]);
    return std::sqrt(s);
  }

  // exact range of |x - c| over a box
  template <int dim>
  std::pair<double, double>
  distance_range(const Box<dim> &box, const Point<dim> &c)
  {
    double near = 0.0, far = 0.0;
    for (int a = 0; a < dim; ++a)
      {
        const double clamped = std::clamp(c[a], box.lo[a], box.hi[a]);
        near += (clamped - c[a]) * (clamped - c[a]);
        const double f = std::max(std::abs(box.lo[a] - c[a]), std::abs(box.hi[a] - c[a]));
        far += f * f;
      }
    return {std::sqrt(near), std::sqrt(far)};
  }

  template <int dim>
  Point<dim>
  ball_gradient(const Point<dim> &x, const Point<dim> &c)
  {
    const double r = distance<dim>(x, c);
    Point<dim>   g{};
    if (r == 0.0)
      return g;
    for (int a = 0; a < dim; ++a)
      g[a] = -(x[a] - c[a]) / r;
    return g;
  }
} // namespace detail

/**
 * Implicit domain description. Provides value, gradient and a conservative
 * range over a box (used to skip boxes where the sign cannot change).
 */
template <int dim>
class LevelSet
{
public:
  using Variant = std::variant<Sphere<dim>, BallUnion<dim>, HalfSpace<dim>>;

  LevelSet(Sphere<dim> s)
    : shape(std::move(s))
  {
    if (!(std::get<Sphere<dim>>(shape).radius > 0.0))
      throw std::invalid_argument("Sphere: radius must be positive");
  }

  LevelSet(BallUnion<dim> b)
    : shape(std::move(b))
  {
    const auto &u = std::get<BallUnion<dim>>(shape);
    if (u.centers.empty() || u.centers.size() != u.radii.size())
      throw std::invalid_argument("BallUnion: need matching, non-empty center and radius lists");
  }

  LevelSet(HalfSpace<dim> h)
    : shape(std::move(h))
  {}

  static LevelSet
  sphere(const Point<dim> &center, double radius)
  {
    return LevelSet(Sphere<dim>{center, radius});
  }

  static LevelSet
  half_space(const Point<dim> &normal, double offset)
  {
    return LevelSet(HalfSpace<dim>{normal, offset});
  }

  static LevelSet
  balls(std::vector<Point<dim>> centers, std::vector<double> radii)
  {
    return LevelSet(BallUnion<dim>{std::move(centers), std::move(radii)});
  }

  const Variant &
  variant() const
  {
    return shape;
  }

  double
  value(const Point<dim> &x) const
  {
    return std::visit(
      [&](const auto &s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere<dim>>)
          return s.radius - detail::distance<dim>(x, s.center);
        else if constexpr (std::is_same_v<T, BallUnion<dim>>)
          {
            double v = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < s.centers.size(); ++i)
              v = std::max(v, s.radii[i] - detail::distance<dim>(x, s.centers[i]));
            return v;
          }
        else
          {
            double v = s.offset;
            for (int a = 0; a < dim; ++a)
              v -= s.normal[a] * x[a];
            return v;
          }
      },
      shape);
  }

  Point<dim>
  gradient(const Point<dim> &x) const
  {
    return std::visit(
      [&](const auto &s) -> Point<dim> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere<dim>>)
          return detail::ball_gradient<dim>(x, s.center);
        else if constexpr (std::is_same_v<T, BallUnion<dim>>)
          {
            std::size_t best   = 0;
            double      best_v = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < s.centers.size(); ++i)
              {
                const double v = s.radii[i] - detail::distance<dim>(x, s.centers[i]);
                if (v > best_v)
                  {
                    best_v = v;
                    best   = i;
                  }
              }
            return detail::ball_gradient<dim>(x, s.centers[best]);
          }
        else
          {
            Point<dim> g;
            for (int a = 0; a < dim; ++a)
              g[a] = -s.normal[a];
            return g;
          }
      },
      shape);
  }

  /// Lower and upper bound of the level set over the box (exact for spheres and half-spaces).
  std::pair<double, double>
  bounds(const Box<dim> &box) const
  {
    return std::visit(
      [&](const auto &s) -> std::pair<double, double> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere<dim>>)
          {
            const auto [near, far] = detail::distance_range<dim>(box, s.center);
            return {s.radius - far, s.radius - near};
          }
        else if constexpr (std::is_same_v<T, BallUnion<dim>>)
          {
            double lo = -std::numeric_limits<double>::infinity();
            double hi = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < s.centers.size(); ++i)
              {
                const auto [near, far] = detail::distance_range<dim>(box, s.centers[i]);
                lo                     = std::max(lo, s.radii[i] - far);
                hi                     = std::max(hi, s.radii[i] - near);
              }
            return {lo, hi};
          }
        else
          {
            double lo = s.offset, hi = s.offset;
            for (int a = 0; a < dim; ++a)
              {
                const double t0 = -s.normal[a] * box.lo[a];
                const double t1 = -s.normal[a] * box.hi[a];
                lo += std::min(t0, t1);
                hi += std::max(t0, t1);
              }
            return {lo, hi};
          }
      },
      shape);
  }

private:
  Variant shape;
};

// ---------------------------------------------------------------------------
// Classification

enum class CellLabel : std::uint8_t
{
  Inside,
  Outside,
  Cut
};

inline const char *
to_string(CellLabel l)
{
  switch (l)
    {
      case CellLabel::Inside:
        return "Inside";
      case CellLabel::Outside:
        return "Outside";
      case CellLabel::Cut:
        return "Cut";
    }
  return "?";
}

template <int dim>
struct CellClassification
{
  std::vector<CellLabel> labels;

  CellLabel
  operator[](std::size_t cell) const
  {
    return labels[cell];
  }

  std::size_t
  count(CellLabel l) const
  {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
  }

  /// Cut cells over cells that intersect the domain.
  double
  cut_fraction() const
  {
    const std::size_t active = labels.size() - count(CellLabel::Outside);
    return active == 0 ? 0.0 : static_cast<double>(count(CellLabel::Cut)) / static_cast<double>(active);
  }
};

/**
 * Label each cell by the sign of phi on a samples_per_axis^dim tensor grid
 * including the cell corners. A zero sample counts as inside.
 */
template <int dim>
CellClassification<dim>
classify_cells(const CartesianMesh<dim> &mesh, const LevelSet<dim> &phi, unsigned samples_per_axis)
{
  if (samples_per_axis < 2)
    throw std::invalid_argument("classify_cells: need at least two samples per axis");
  CellClassification<dim> result;
  result.labels.resize(mesh.n_cells());
  std::size_t n_samples = 1;
  for (int a = 0; a < dim; ++a)
    n_samples *= samples_per_axis;
  for (std::size_t cell = 0; cell < mesh.n_cells(); ++cell)
    {
      const auto box = mesh.cell_box(mesh.cell_multi_index(cell));
      bool       any_in = false, any_out = false;
      for (std::size_t s = 0; s < n_samples && !(any_in && any_out); ++s)
        {
          Point<dim>  x;
          std::size_t rest = s;
          for (int a = 0; a < dim; ++a)
            {
              const double t = static_cast<double>(rest % samples_per_axis) / (samples_per_axis - 1);
              rest /= samples_per_axis;
              x[a] = box.lo[a] + t * (box.hi[a] - box.lo[a]);
            }
          if (phi.value(x) >= 0.0)
            any_in = true;
          else
            any_out = true;
        }
      result.labels[cell] = any_in && any_out ? CellLabel::Cut : (any_in ? CellLabel::Inside : CellLabel::Outside);
    }
  return result;
}

// ---------------------------------------------------------------------------
// Ghost-penalty faces

template <int dim>
struct GhostFace
{
  MultiIndex<dim> lower{};
  int             axis = 0;

  MultiIndex<dim>
  upper() const
  {
    auto u = lower;
    ++u[axis];
    return u;
  }

  friend bool
  operator==(const GhostFace &, const GhostFace &) = default;
};

/// Interior faces between two non-Outside cells with at least one Cut cell, sorted by axis then lower cell.
template <int dim>
std::vector<GhostFace<dim>>
ghost_faces(const CartesianMesh<dim> &mesh, const CellClassification<dim> &cls)
{
  if (cls.labels.size() != mesh.n_cells())
    throw std::invalid_argument("ghost_faces: classification does not match mesh");
  std::vector<GhostFace<dim>> faces;
  for (int axis = 0; axis < dim; ++axis)
    for (std::size_t cell = 0; cell < mesh.n_cells(); ++cell)
      {
        const auto lower = mesh.cell_multi_index(cell);
        if (lower[axis] + 1 >= mesh.cells_per_axis()[axis])
          continue;
        auto upper = lower;
        ++upper[axis];
        const CellLabel a = cls[cell];
        const CellLabel b = cls[mesh.cell_index(upper)];
        if (a == CellLabel::Outside || b == CellLabel::Outside)
          continue;
        if (a == CellLabel::Cut || b == CellLabel::Cut)
          faces.push_back({lower, axis});
      }
  return faces;
}

/// Load-balancing weight: 0 outside, 1 inside, k^(d-1) for cut cells.
inline double
cell_weight(CellLabel label, unsigned k, unsigned d)
{
  switch (label)
    {
      case CellLabel::Outside:
        return 0.0;
      case CellLabel::Inside:
        return 1.0;
      case CellLabel::Cut:
        return std::pow(static_cast<double>(k), static_cast<double>(d) - 1.0);
    }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Degrees of freedom

/**
 * Lexicographic numbering of the global nodal grid (k n_a + 1 points per
 * axis) and a compact numbering of the active subset. A node is active when
 * some cell in its support is not Outside.
 */
template <int dim>
class DofMap
{
public:
  static constexpr std::int64_t inactive = -1;

  DofMap(const CartesianMesh<dim> &mesh, unsigned degree, const CellClassification<dim> &cls)
    : k(degree)
    , cells(mesh.cells_per_axis())
    , labels(cls.labels)
  {
    if (degree == 0)
      throw std::invalid_argument("DofMap: degree must be positive");
    if (cls.labels.size() != mesh.n_cells())
      throw std::invalid_argument("DofMap: classification does not match mesh");
    std::size_t n_global = 1;
    for (int a = 0; a < dim; ++a)
      {
        grid[a] = k * cells[a] + 1;
        n_global *= grid[a];
      }
    compact.assign(n_global, inactive);
    std::vector<std::uint8_t> active(n_global, 0);
    std::vector<std::size_t>  local(n_cell_dofs());
    for (std::size_t cell = 0; cell < labels.size(); ++cell)
      {
        if (labels[cell] == CellLabel::Outside)
          continue;
        global_cell_dofs(mesh.cell_multi_index(cell), local);
        for (auto g : local)
          active[g] = 1;
      }
    for (std::size_t g = 0; g < n_global; ++g)
      if (active[g])
        {
          compact[g] = static_cast<std::int64_t>(global_of_active.size());
          global_of_active.push_back(g);
        }
  }

  unsigned
  degree() const
  {
    return k;
  }

  const MultiIndex<dim> &
  grid_extents() const
  {
    return grid;
  }

  std::size_t
  n_global() const
  {
    return compact.size();
  }

  std::size_t
  n_active() const
  {
    return global_of_active.size();
  }

  bool
  is_active(std::size_t global) const
  {
    return compact[global] != inactive;
  }

  std::int64_t
  active_index(std::size_t global) const
  {
    return compact[global];
  }

  std::size_t
  global_index(std::size_t active) const
  {
    return global_of_active[active];
  }

  std::size_t
  global_index(const MultiIndex<dim> &node) const
  {
    std::size_t idx = 0, stride = 1;
    for (int a = 0; a < dim; ++a)
      {
        idx += node[a] * stride;
        stride *= grid[a];
      }
    return idx;
  }

  MultiIndex<dim>
  node_multi_index(std::size_t global) const
  {
    MultiIndex<dim> m;
    for (int a = 0; a < dim; ++a)
      {
        m[a] = global % grid[a];
        global /= grid[a];
      }
    return m;
  }

  CellLabel
  label(const MultiIndex<dim> &cell) const
  {
    std::size_t idx = 0, stride = 1;
    for (int a = 0; a < dim; ++a)
      {
        idx += cell[a] * stride;
        stride *= cells[a];
      }
    return labels[idx];
  }

  std::size_t
  n_cell_dofs() const
  {
    std::size_t n = 1;
    for (int a = 0; a < dim; ++a)
      n *= k + 1;
    return n;
  }

  std::size_t
  n_patch_dofs() const
  {
    return n_cell_dofs() / (k + 1) * (2 * k + 1);
  }

  /// Global node indices of a cell in local lexicographic order.
  void
  global_cell_dofs(const MultiIndex<dim> &cell, std::span<std::size_t> out) const
  {
    MultiIndex<dim> ext;
    ext.fill(k + 1);
    box_nodes(cell, ext, out);
  }

  /// Compact indices of a non-Outside cell in local lexicographic order.
  void
  cell_dofs(const MultiIndex<dim> &cell, std::span<std::int64_t> out) const
  {
    if (label(cell) == CellLabel::Outside)
      throw std::invalid_argument("DofMap::cell_dofs: cell is outside the domain");
    std::vector<std::size_t> g(n_cell_dofs());
    global_cell_dofs(cell, g);
    for (std::size_t i = 0; i < g.size(); ++i)
      out[i] = compact[g[i]];
  }

  /// Patch extents of a face: 2k+1 along the normal, k+1 elsewhere.
  MultiIndex<dim>
  patch_extents(int axis) const
  {
    MultiIndex<dim> ext;
    ext.fill(k + 1);
    ext[axis] = 2 * k + 1;
    return ext;
  }

  /// Compact indices of the two-cell patch of a face, lower cell first along the normal.
  void
  face_patch_dofs(const GhostFace<dim> &face, std::span<std::int64_t> out) const
  {
    if (label(face.lower) == CellLabel::Outside || label(face.upper()) == CellLabel::Outside)
      throw std::invalid_argument("DofMap::face_patch_dofs: face touches an Outside cell");
    const auto               ext = patch_extents(face.axis);
    std::vector<std::size_t> g(n_patch_dofs());
    box_nodes(face.lower, ext, g);
    for (std::size_t i = 0; i < g.size(); ++i)
      out[i] = compact[g[i]];
  }

private:
  // nodes of the block starting at k*cell with the given extents
  void
  box_nodes(const MultiIndex<dim> &cell, const MultiIndex<dim> &ext, std::span<std::size_t> out) const
  {
    std::size_t n = 1;
    for (int a = 0; a < dim; ++a)
      {
        if (cell[a] * k + ext[a] > grid[a])
          throw std::out_of_range("DofMap: block exceeds the node grid");
        n *= ext[a];
      }
    for (std::size_t i = 0; i < n; ++i)
      {
        std::size_t rest = i, idx = 0, stride = 1;
        for (int a = 0; a < dim; ++a)
          {
            idx += (cell[a] * k + rest % ext[a]) * stride;
            rest /= ext[a];
            stride *= grid[a];
          }
        out[i] = idx;
      }
  }

  unsigned               k;
  MultiIndex<dim>        cells;
  MultiIndex<dim>        grid{};
  std::vector<CellLabel> labels;
  std::vector<std::int64_t> compact;
  std::vector<std::size_t>  global_of_active;
};

template <int dim>
TensorField<dim>
gather_face_patch(std::span<const double> u, const GhostFace<dim> &face, const DofMap<dim> &dofs)
{
  std::vector<std::int64_t> idx(dofs.n_patch_dofs());
  dofs.face_patch_dofs(face, idx);
  TensorField<dim> patch(dofs.patch_extents(face.axis));
  for (std::size_t i = 0; i < idx.size(); ++i)
    patch.data[i] = u[static_cast<std::size_t>(idx[i])];
  return patch;
}

template <int dim>
void
scatter_add_face_patch(const TensorField<dim> &w_patch, const GhostFace<dim> &face, const DofMap<dim> &dofs,
                       std::span<double> w)
{
  if (w_patch.extents != dofs.patch_extents(face.axis))
    throw std::invalid_argument("scatter_add_face_patch: patch extents do not match the face");
  std::vector<std::int64_t> idx(dofs.n_patch_dofs());
  dofs.face_patch_dofs(face, idx);
  for (std::size_t i = 0; i < idx.size(); ++i)
    w[static_cast<std::size_t>(idx[i])] += w_patch.data[i];
}

// ---------------------------------------------------------------------------
// Random ball configurations

/**
 * n balls of radius r0 / n with centers uniform in the box shrunk by one
 * radius on every side.
 */
template <int dim>
BallUnion<dim>
random_balls(double box_lo, double box_hi, std::size_t n, std::uint64_t seed, double r0)
{
  if (n == 0)
    throw std::invalid_argument("random_balls: need at least one ball");
  const double r = r0 / static_cast<double>(n);
  if (!(box_hi - box_lo > 2.0 * r))
    throw std::invalid_argument("random_balls: radius too large for the box");
  std::mt19937_64                        rng(seed);
  std::uniform_real_distribution<double> dist(box_lo + r, box_hi - r);
  BallUnion<dim>                         balls;
  for (std::size_t i = 0; i < n; ++i)
    {
      Point<dim> c;
      for (int a = 0; a < dim; ++a)
        c[a] = dist(rng);
      balls.centers.push_back(c);
      balls.radii.push_back(r);
    }
  return balls;
}

namespace detail
{
  inline std::string
  format_double(double v)
  {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  }
} // namespace detail

/// One line per ball: `cx cy [cz] r`, shortest round-trip decimal.
template <int dim>
void
write_balls(std::ostream &out, const BallUnion<dim> &balls)
{
  for (std::size_t i = 0; i < balls.centers.size(); ++i)
    {
      for (int a = 0; a < dim; ++a)
        out << detail::format_double(balls.centers[i][a]) << ' ';
      out << detail::format_double(balls.radii[i]) << '\n';
    }
}

template <int dim>
BallUnion<dim>
read_balls(std::istream &in)
{
  BallUnion<dim> balls;
  std::string    line;
  std::size_t    line_no = 0;
  while (std::getline(in, line))
    {
      ++line_no;
      std::istringstream       ls(line);
      std::vector<std::string> tokens;
      for (std::string t; ls >> t;)
        tokens.push_back(t);
      if (tokens.empty())
        continue;
      if (tokens.size() != static_cast<std::size_t>(dim) + 1)
        throw std::runtime_error("read_balls: line " + std::to_string(line_no) + " has " +
                                 std::to_string(tokens.size()) + " fields, expected " + std::to_string(dim + 1));
      std::array<double, dim + 1> v;
      for (int j = 0; j <= dim; ++j)
        {
          const auto &t   = tokens[j];
          auto        res = std::from_chars(t.data(), t.data() + t.size(), v[j]);
          if (res.ec != std::errc() || res.ptr != t.data() + t.size())
            throw std::runtime_error("read_balls: cannot parse '" + t + "' on line " + std::to_string(line_no));
        }
      Point<dim> c;
      for (int a = 0; a < dim; ++a)
        c[a] = v[a];
      balls.centers.push_back(c);
      balls.radii.push_back(v[dim]);
    }
  return balls;
}

} // namespace cutgp
