#include "fieldspace/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fieldspace/errors.hpp"

namespace fieldspace {

namespace {

constexpr double kSymmetryTolerance = 1e-9;

// exp(-q) never reaches exactly zero; the smallest subnormal keeps unit
// energies strictly positive.
double energy_from_form(double q) {
  return std::max(std::exp(-q), std::numeric_limits<double>::denorm_min());
}

bool all_finite(const Matrix2& m) {
  return std::isfinite(m.a11) && std::isfinite(m.a12) && std::isfinite(m.a21) &&
         std::isfinite(m.a22);
}

Matrix2 invert(const Matrix2& m) {
  const double d = m.det();
  return {m.a22 / d, -m.a12 / d, -m.a21 / d, m.a11 / d};
}

std::string describe(const Matrix2& m) {
  return "[[" + std::to_string(m.a11) + ", " + std::to_string(m.a12) + "], [" +
         std::to_string(m.a21) + ", " + std::to_string(m.a22) + "]]";
}

// 2 * sym(A⁻¹) v; the quadratic form uses only the symmetric part.
Vec2 form_gradient(const Matrix2& inv, double vx, double vy) {
  const double off = inv.a12 + inv.a21;
  return {2.0 * inv.a11 * vx + off * vy, off * vx + 2.0 * inv.a22 * vy};
}

}  // namespace

Vec2::Vec2(double x_, double y_) : x(x_), y(y_) {
  if (!std::isfinite(x_) || !std::isfinite(y_)) {
    throw std::invalid_argument("Vec2 components must be finite");
  }
}

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double norm(Vec2 v) { return std::hypot(v.x, v.y); }

bool is_symmetric(const Matrix2& m) {
  const double scale = std::max({std::abs(m.a12), std::abs(m.a21), 1.0});
  return std::abs(m.a12 - m.a21) <= kSymmetryTolerance * scale;
}

bool is_positive_definite(const Matrix2& m) { return m.a11 > 0.0 && m.det() > 0.0; }

RepulsionMatrix::RepulsionMatrix(const Matrix2& entries) : entries_(entries) {
  if (!all_finite(entries)) {
    throw MatrixError("repulsion matrix has non-finite entries");
  }
  if (!is_symmetric(entries)) {
    throw MatrixError("repulsion matrix is not symmetric: " + describe(entries));
  }
  if (!is_positive_definite(entries)) {
    throw MatrixError("repulsion matrix is not positive definite: " + describe(entries));
  }
  inverse_ = invert(entries);
}

double RepulsionMatrix::inverse_form(double dx, double dy) const {
  return inverse_.a11 * dx * dx + (inverse_.a12 + inverse_.a21) * dx * dy +
         inverse_.a22 * dy * dy;
}

double RepulsionMatrix::max_eigenvalue() const {
  const double off = 0.5 * (entries_.a12 + entries_.a21);
  const double mean = 0.5 * (entries_.a11 + entries_.a22);
  const double half_diff = 0.5 * (entries_.a11 - entries_.a22);
  return mean + std::hypot(half_diff, off);
}

ShapeMatrix::ShapeMatrix(const Matrix2& entries) : entries_(entries) {
  if (!all_finite(entries)) {
    throw MatrixError("shape matrix has non-finite entries");
  }
  const double off = 0.5 * (entries.a12 + entries.a21);
  const Matrix2 sym{entries.a11, off, off, entries.a22};
  if (!is_positive_definite(sym) || !(entries.det() > 0.0)) {
    throw MatrixError("shape matrix is not positive definite: " + describe(entries));
  }
  inverse_ = invert(entries);
}

Vec2 ShapeMatrix::apply_inverse(double dx, double dy) const {
  return {inverse_.a11 * dx + inverse_.a12 * dy, inverse_.a21 * dx + inverse_.a22 * dy};
}

Vec2 ShapeMatrix::half_extent() const {
  return {std::hypot(entries_.a11, entries_.a12), std::hypot(entries_.a21, entries_.a22)};
}

double eval_point_unit(Vec2 x, Vec2 center, const RepulsionMatrix& a) {
  return energy_from_form(a.inverse_form(x.x - center.x, x.y - center.y));
}

namespace {

struct LineProjection {
  double ux, uy;  // p2 - p1
  double t;       // clamped parameter
  bool interior;  // 0 < unclamped t < 1
};

LineProjection project_onto_segment(Vec2 x, Vec2 p1, Vec2 p2) {
  const double ux = p2.x - p1.x;
  const double uy = p2.y - p1.y;
  const double len2 = ux * ux + uy * uy;
  if (len2 == 0.0) {
    return {ux, uy, 0.0, false};
  }
  const double t = (ux * (x.x - p1.x) + uy * (x.y - p1.y)) / len2;
  return {ux, uy, std::clamp(t, 0.0, 1.0), t > 0.0 && t < 1.0};
}

// Component of the rectangle repulsion vector along one axis.
double rect_component(double x, double c1, double c2) {
  const double gap = 0.5 * (std::abs(x - c1) + std::abs(x - c2) - std::abs(c1 - c2));
  const double s = (x > c1) ? 1.0 : (x < c1 ? -1.0 : 0.0);
  return s * gap;
}

}  // namespace

double eval_line_unit(Vec2 x, Vec2 p1, Vec2 p2, const RepulsionMatrix& a) {
  const LineProjection p = project_onto_segment(x, p1, p2);
  const double cx = p1.x + p.t * p.ux;
  const double cy = p1.y + p.t * p.uy;
  return energy_from_form(a.inverse_form(x.x - cx, x.y - cy));
}

double eval_rect_unit(Vec2 x, Vec2 c1, Vec2 c2, const RepulsionMatrix& a) {
  const double gx = rect_component(x.x, c1.x, c2.x);
  const double gy = rect_component(x.y, c1.y, c2.y);
  return energy_from_form(a.inverse_form(gx, gy));
}

namespace {

struct EllipseRepulsion {
  double vx, vy;  // x - center
  double scale;   // max(1 - 1/‖B⁻¹v‖, 0)
  Vec2 w;         // B⁻¹ v
  double n;       // ‖B⁻¹ v‖
};

EllipseRepulsion ellipse_repulsion(Vec2 x, Vec2 center, const ShapeMatrix& b) {
  const double vx = x.x - center.x;
  const double vy = x.y - center.y;
  const Vec2 w = b.apply_inverse(vx, vy);
  const double n = std::hypot(w.x, w.y);
  const double scale = n > 1.0 ? 1.0 - 1.0 / n : 0.0;
  return {vx, vy, scale, w, n};
}

}  // namespace

double eval_ellipse_unit(Vec2 x, Vec2 center, const ShapeMatrix& b, const RepulsionMatrix& a) {
  const EllipseRepulsion r = ellipse_repulsion(x, center, b);
  return energy_from_form(a.inverse_form(r.scale * r.vx, r.scale * r.vy));
}

FieldUnit FieldUnit::point(Vec2 center, const RepulsionMatrix& repulsion) {
  return FieldUnit(PointShape{center}, repulsion);
}

FieldUnit FieldUnit::line(Vec2 p1, Vec2 p2, const RepulsionMatrix& repulsion) {
  return FieldUnit(LineShape{p1, p2}, repulsion);
}

FieldUnit FieldUnit::rectangle(Vec2 c1, Vec2 c2, const RepulsionMatrix& repulsion) {
  const Vec2 lo{std::min(c1.x, c2.x), std::min(c1.y, c2.y)};
  const Vec2 hi{std::max(c1.x, c2.x), std::max(c1.y, c2.y)};
  return FieldUnit(RectShape{lo, hi}, repulsion);
}

FieldUnit FieldUnit::ellipse(Vec2 center, const ShapeMatrix& shape,
                             const RepulsionMatrix& repulsion) {
  return FieldUnit(EllipseShape{center, shape}, repulsion);
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double FieldUnit::evaluate(Vec2 x) const {
  return std::visit(
      Overloaded{
          [&](const PointShape& s) { return eval_point_unit(x, s.center, repulsion_); },
          [&](const LineShape& s) { return eval_line_unit(x, s.p1, s.p2, repulsion_); },
          [&](const RectShape& s) { return eval_rect_unit(x, s.lo, s.hi, repulsion_); },
          [&](const EllipseShape& s) {
            return eval_ellipse_unit(x, s.center, s.shape, repulsion_);
          },
      },
      geometry_);
}

Vec2 FieldUnit::gradient(Vec2 x) const {
  const Matrix2& inv = repulsion_.inverse();
  // ∇σ = -σ ∇q with q the quadratic form of the repulsion vector g(x).
  return std::visit(
      Overloaded{
          [&](const PointShape& s) {
            const double dx = x.x - s.center.x;
            const double dy = x.y - s.center.y;
            const double e = energy_from_form(repulsion_.inverse_form(dx, dy));
            const Vec2 gq = form_gradient(inv, dx, dy);
            return Vec2{-e * gq.x, -e * gq.y};
          },
          [&](const LineShape& s) {
            const LineProjection p = project_onto_segment(x, s.p1, s.p2);
            const double dx = x.x - (s.p1.x + p.t * p.ux);
            const double dy = x.y - (s.p1.y + p.t * p.uy);
            const double e = energy_from_form(repulsion_.inverse_form(dx, dy));
            Vec2 gq = form_gradient(inv, dx, dy);
            if (p.interior) {
              // The closest point slides with x; remove the along-segment part.
              const double len2 = p.ux * p.ux + p.uy * p.uy;
              const double along = (p.ux * gq.x + p.uy * gq.y) / len2;
              gq = {gq.x - along * p.ux, gq.y - along * p.uy};
            }
            return Vec2{-e * gq.x, -e * gq.y};
          },
          [&](const RectShape& s) {
            const double gx = rect_component(x.x, s.lo.x, s.hi.x);
            const double gy = rect_component(x.y, s.lo.y, s.hi.y);
            const double e = energy_from_form(repulsion_.inverse_form(gx, gy));
            const Vec2 gq = form_gradient(inv, gx, gy);
            const bool out_x = x.x < s.lo.x || x.x > s.hi.x;
            const bool out_y = x.y < s.lo.y || x.y > s.hi.y;
            return Vec2{out_x ? -e * gq.x : 0.0, out_y ? -e * gq.y : 0.0};
          },
          [&](const EllipseShape& s) {
            const EllipseRepulsion r = ellipse_repulsion(x, s.center, s.shape);
            if (r.scale == 0.0) {
              return Vec2{0.0, 0.0};
            }
            const double gx = r.scale * r.vx;
            const double gy = r.scale * r.vy;
            const double e = energy_from_form(repulsion_.inverse_form(gx, gy));
            // Mg and the derivative of ‖B⁻¹v‖ carried through g = (1 - 1/n) v.
            const Vec2 mg = 0.5 * form_gradient(inv, gx, gy);
            const Matrix2& c = s.shape.inverse();
            const double ctw_x = c.a11 * r.w.x + c.a21 * r.w.y;
            const double ctw_y = c.a12 * r.w.x + c.a22 * r.w.y;
            const double vmg = r.vx * mg.x + r.vy * mg.y;
            const double n3 = r.n * r.n * r.n;
            const double qx = 2.0 * (r.scale * mg.x + ctw_x * vmg / n3);
            const double qy = 2.0 * (r.scale * mg.y + ctw_y * vmg / n3);
            return Vec2{-e * qx, -e * qy};
          },
      },
      geometry_);
}

std::pair<Vec2, Vec2> FieldUnit::core_bounds() const {
  return std::visit(
      Overloaded{
          [](const PointShape& s) { return std::pair{s.center, s.center}; },
          [](const LineShape& s) {
            return std::pair{Vec2{std::min(s.p1.x, s.p2.x), std::min(s.p1.y, s.p2.y)},
                             Vec2{std::max(s.p1.x, s.p2.x), std::max(s.p1.y, s.p2.y)}};
          },
          [](const RectShape& s) { return std::pair{s.lo, s.hi}; },
          [](const EllipseShape& s) {
            const Vec2 h = s.shape.half_extent();
            return std::pair{s.center - h, s.center + h};
          },
      },
      geometry_);
}

std::optional<std::size_t> CompositeField::dominant_unit(Vec2 x) const {
  std::optional<std::size_t> best;
  double best_energy = -1.0;
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const double e = units_[i].evaluate(x);
    if (e > best_energy) {
      best_energy = e;
      best = i;
    }
  }
  return best;
}

double eval_composite(const CompositeField& field, Vec2 x) {
  double best = 0.0;
  for (const FieldUnit& unit : field.units()) {
    best = std::max(best, unit.evaluate(x));
  }
  return best;
}

Vec2 grad_composite(const CompositeField& field, Vec2 x) {
  const auto idx = field.dominant_unit(x);
  if (!idx) {
    return {0.0, 0.0};
  }
  return field.units()[*idx].gradient(x);
}

Vec2 grad_composite_fd(const CompositeField& field, Vec2 x, double h) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("finite-difference step must be positive");
  }
  const double gx =
      (eval_composite(field, {x.x + h, x.y}) - eval_composite(field, {x.x - h, x.y})) /
      (2.0 * h);
  const double gy =
      (eval_composite(field, {x.x, x.y + h}) - eval_composite(field, {x.x, x.y - h})) /
      (2.0 * h);
  return {gx, gy};
}

double lattice_coordinate(double lo, double hi, std::size_t i, std::size_t n) {
  if (i == 0) return lo;
  if (i + 1 == n) return hi;
  return lo + (hi - lo) * (static_cast<double>(i) / static_cast<double>(n - 1));
}

EnergyGrid sample_grid(const CompositeField& field, const BBox& bbox, std::size_t nx,
                       std::size_t ny, std::size_t cap) {
  if (nx < 2 || ny < 2) {
    throw std::invalid_argument("grid needs at least 2 samples per axis");
  }
  if (!(bbox.hi.x > bbox.lo.x) || !(bbox.hi.y > bbox.lo.y)) {
    throw std::invalid_argument("grid bounding box is degenerate");
  }
  if (nx > cap / ny) {
    throw std::invalid_argument("grid of " + std::to_string(nx) + "x" + std::to_string(ny) +
                                " exceeds the sample cap of " + std::to_string(cap));
  }
  EnergyGrid grid{nx, ny, std::vector<double>(nx * ny)};
  for (std::size_t row = 0; row < ny; ++row) {
    const double y = lattice_coordinate(bbox.lo.y, bbox.hi.y, row, ny);
    for (std::size_t col = 0; col < nx; ++col) {
      const double x = lattice_coordinate(bbox.lo.x, bbox.hi.x, col, nx);
      grid.values[row * nx + col] = eval_composite(field, {x, y});
    }
  }
  return grid;
}

double transform_energy(double e, double epsilon) {
  if (!(e >= 0.0 && e <= 1.0)) {
    throw std::domain_error("energy outside [0, 1]");
  }
  if (e >= 1.0 - epsilon) {
    return std::numeric_limits<double>::infinity();
  }
  return -std::log1p(-e);
}

}  // namespace fieldspace
