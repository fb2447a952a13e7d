#ifndef FIELDSPACE_FIELD_HPP_
#define FIELDSPACE_FIELD_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace fieldspace {

/// A point or displacement in the evaluation plane. Components are finite.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  /// Throws std::invalid_argument if either component is NaN or infinite.
  Vec2(double x_, double y_);

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

Vec2 operator+(Vec2 a, Vec2 b);
Vec2 operator-(Vec2 a, Vec2 b);
Vec2 operator*(double s, Vec2 v);
double dot(Vec2 a, Vec2 b);
double norm(Vec2 v);

/// Raw 2x2 entries, row-major.
struct Matrix2 {
  double a11 = 0.0;
  double a12 = 0.0;
  double a21 = 0.0;
  double a22 = 0.0;

  friend bool operator==(const Matrix2&, const Matrix2&) = default;

  static Matrix2 diag(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }
  double det() const { return a11 * a22 - a12 * a21; }
};

/// Symmetric positive definite matrix A controlling how fast energy decays
/// away from a unit's zero-repulsion set. Entries are squared lengths.
class RepulsionMatrix {
 public:
  /// Throws MatrixError unless the entries are finite, symmetric within
  /// 1e-9 relative, and positive definite.
  explicit RepulsionMatrix(const Matrix2& entries);

  const Matrix2& entries() const { return entries_; }
  const Matrix2& inverse() const { return inverse_; }

  /// dᵀ A⁻¹ d
  double inverse_form(double dx, double dy) const;
  double max_eigenvalue() const;

  friend bool operator==(const RepulsionMatrix& a, const RepulsionMatrix& b) {
    return a.entries_ == b.entries_;
  }

 private:
  Matrix2 entries_;
  Matrix2 inverse_;
};

/// Matrix B mapping the unit disc onto an ellipse boundary. Entries are
/// lengths. The symmetric part must be positive definite; the matrix itself
/// may be asymmetric, in which case ‖B⁻¹v‖ still describes an ellipse.
class ShapeMatrix {
 public:
  explicit ShapeMatrix(const Matrix2& entries);

  const Matrix2& entries() const { return entries_; }
  const Matrix2& inverse() const { return inverse_; }

  /// B⁻¹ v
  Vec2 apply_inverse(double dx, double dy) const;
  /// Half-widths of the axis-aligned box enclosing the ellipse {B u : |u| <= 1}.
  Vec2 half_extent() const;

  friend bool operator==(const ShapeMatrix& a, const ShapeMatrix& b) {
    return a.entries_ == b.entries_;
  }

 private:
  Matrix2 entries_;
  Matrix2 inverse_;
};

/// Checks used at every matrix construction; exposed for the parser.
bool is_symmetric(const Matrix2& m);
bool is_positive_definite(const Matrix2& m);

struct PointShape {
  Vec2 center;
  friend bool operator==(const PointShape&, const PointShape&) = default;
};

struct LineShape {
  Vec2 p1;
  Vec2 p2;
  friend bool operator==(const LineShape&, const LineShape&) = default;
};

/// Corners are canonical: lo is the element-wise minimum, hi the maximum.
struct RectShape {
  Vec2 lo;
  Vec2 hi;
  friend bool operator==(const RectShape&, const RectShape&) = default;
};

struct EllipseShape {
  Vec2 center;
  ShapeMatrix shape;
  friend bool operator==(const EllipseShape&, const EllipseShape&) = default;
};

/// One fundamental repulsive unit: point, line segment, rectangle or ellipse.
class FieldUnit {
 public:
  using Geometry = std::variant<PointShape, LineShape, RectShape, EllipseShape>;

  static FieldUnit point(Vec2 center, const RepulsionMatrix& repulsion);
  static FieldUnit line(Vec2 p1, Vec2 p2, const RepulsionMatrix& repulsion);
  /// Any two opposite corners; stored canonicalized.
  static FieldUnit rectangle(Vec2 c1, Vec2 c2, const RepulsionMatrix& repulsion);
  static FieldUnit ellipse(Vec2 center, const ShapeMatrix& shape,
                           const RepulsionMatrix& repulsion);

  const Geometry& geometry() const { return geometry_; }
  const RepulsionMatrix& repulsion() const { return repulsion_; }

  /// Energy in (0, 1].
  double evaluate(Vec2 x) const;
  /// Analytic gradient of evaluate().
  Vec2 gradient(Vec2 x) const;

  /// Axis-aligned box enclosing the zero-repulsion set.
  std::pair<Vec2, Vec2> core_bounds() const;

  friend bool operator==(const FieldUnit&, const FieldUnit&) = default;

 private:
  FieldUnit(Geometry geometry, const RepulsionMatrix& repulsion)
      : geometry_(std::move(geometry)), repulsion_(repulsion) {}

  Geometry geometry_;
  RepulsionMatrix repulsion_;
};

// Single-unit evaluations, one per fundamental unit.
double eval_point_unit(Vec2 x, Vec2 center, const RepulsionMatrix& a);
double eval_line_unit(Vec2 x, Vec2 p1, Vec2 p2, const RepulsionMatrix& a);
/// Corners must already be canonical (c1 <= c2 element-wise).
double eval_rect_unit(Vec2 x, Vec2 c1, Vec2 c2, const RepulsionMatrix& a);
double eval_ellipse_unit(Vec2 x, Vec2 center, const ShapeMatrix& b,
                         const RepulsionMatrix& a);

/// Ordered collection of units combined by pointwise maximum.
class CompositeField {
 public:
  CompositeField() = default;
  explicit CompositeField(std::vector<FieldUnit> units) : units_(std::move(units)) {}

  std::span<const FieldUnit> units() const { return units_; }
  std::size_t size() const { return units_.size(); }
  bool empty() const { return units_.empty(); }

  /// Index of the maximizing unit at x, lowest index on ties.
  std::optional<std::size_t> dominant_unit(Vec2 x) const;

 private:
  std::vector<FieldUnit> units_;
};

/// Pointwise maximum of the unit energies; 0 for an empty field.
double eval_composite(const CompositeField& field, Vec2 x);

/// Gradient of the maximizing unit (lowest index on ties); (0,0) when empty.
Vec2 grad_composite(const CompositeField& field, Vec2 x);

/// Central finite-difference gradient of eval_composite with step h.
Vec2 grad_composite_fd(const CompositeField& field, Vec2 x, double h);

/// Default finite-difference step for a problem of the given extent.
constexpr double default_fd_step(double domain_scale = 100.0) {
  return 1e-6 * domain_scale;
}

struct BBox {
  Vec2 lo;
  Vec2 hi;
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Row-major lattice of energies. Row 0 is the minimum-y row.
struct EnergyGrid {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const { return values[row * nx + col]; }
};

inline constexpr std::size_t kDefaultSampleCap = 4'000'000;

/// Coordinate of lattice index i out of n across [lo, hi]; endpoints exact.
double lattice_coordinate(double lo, double hi, std::size_t i, std::size_t n);

/// Samples the field on an nx-by-ny lattice spanning bbox (edges included).
/// Throws std::invalid_argument for nx or ny below 2, a degenerate box, or
/// more than `cap` samples.
EnergyGrid sample_grid(const CompositeField& field, const BBox& bbox, std::size_t nx,
                       std::size_t ny, std::size_t cap = kDefaultSampleCap);

inline constexpr double kDefaultTransformEpsilon = 1e-9;

/// Divergent energy-to-cost transform -ln(1 - e). Returns +inf once
/// e >= 1 - epsilon. Throws std::domain_error outside [0, 1].
double transform_energy(double e, double epsilon = kDefaultTransformEpsilon);

}  // namespace fieldspace

#endif  // FIELDSPACE_FIELD_HPP_
