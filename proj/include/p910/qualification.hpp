#pragma once

// Participant screening and environment checks. Everything here is a pure
// function of its inputs so the browser client and the post-processing
// replay reach the same verdicts.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "p910/error.hpp"
#include "p910/random.hpp"

namespace p910 {

using Millis = std::int64_t;

/// Physical width of an ID-1 card (credit card), used by the card-sizing widget.
inline constexpr double kIdCardWidthMm = 85.6;
/// Worst-case viewing distance the ring sizes are computed for.
inline constexpr double kMinViewingDistanceCm = 50.0;
/// The 20/30 line of a standard chart: 1.5 arcmin gap.
inline constexpr double kRequiredAcuity = 2.0 / 3.0;
inline constexpr int kMaxLandoltTrials = 5;
inline constexpr int kDefaultRequiredCorrect = 3;

// ---------------------------------------------------------------------------
// Color vision

struct PlateAnswer {
  std::string plate_id;
  std::string reported_value;
  bool operator==(const PlateAnswer&) const = default;
};

/// plate id -> value seen with normal color vision. Loaded from config; the
/// default deployment configures plates "3" and "4".
using IshiharaKey = std::map<std::string, std::string>;

inline bool evaluate_ishihara(const std::vector<PlateAnswer>& answers, const IshiharaKey& key) {
  std::map<std::string, bool> seen;
  bool all_correct = true;
  for (const auto& a : answers) {
    auto it = key.find(a.plate_id);
    if (it == key.end()) throw Error(ErrorCode::UnknownPlate, a.plate_id);
    seen[a.plate_id] = true;
    if (a.reported_value != it->second) all_correct = false;
  }
  // An unanswered plate is a failed plate.
  return all_correct && seen.size() == key.size();
}

// ---------------------------------------------------------------------------
// Visual acuity (Landolt rings)

enum class Direction { N, NE, E, SE, S, SW, W, NW };

constexpr int degrees(Direction d) { return static_cast<int>(d) * 45; }

struct LandoltTrial {
  Direction gap_direction_true = Direction::N;
  Direction gap_direction_reported = Direction::N;
  double gap_px = 0.0;
  double diameter_px = 0.0;
  bool operator==(const LandoltTrial&) const = default;

  bool correct() const { return gap_direction_true == gap_direction_reported; }
  bool well_formed() const { return gap_px > 0.0 && std::abs(diameter_px - 5.0 * gap_px) <= 0.5; }
};

struct AcuityRecord {
  double adjusted_card_width_px = 0.0;
  double pixel_pitch_mm = 0.0;
  std::vector<LandoltTrial> ring_trials;
  bool operator==(const AcuityRecord&) const = default;
};

struct QualificationRecord {
  std::vector<PlateAnswer> ishihara_answers;
  AcuityRecord acuity;
  std::optional<Millis> passed_at;
  bool operator==(const QualificationRecord&) const = default;
};

inline double pixel_pitch_from_card(double adjusted_card_width_px,
                                    double physical_card_width_mm = kIdCardWidthMm) {
  if (!(adjusted_card_width_px > 0.0)) throw Error(ErrorCode::NonPositiveWidth);
  return physical_card_width_mm / adjusted_card_width_px;
}

struct LandoltGeometry {
  double gap_arcmin = 0.0;
  double gap_mm = 0.0;
  double gap_px = 0.0;
  double diameter_px = 0.0;
};

/// Ring size whose gap subtends 1/acuity arc minutes at the given distance.
inline LandoltGeometry landolt_geometry(double pixel_pitch_mm, double viewing_distance_cm,
                                        double acuity) {
  if (!(pixel_pitch_mm > 0.0) || !(viewing_distance_cm > 0.0) || !(acuity > 0.0)) {
    throw Error(ErrorCode::NonPositiveInput);
  }
  LandoltGeometry g;
  g.gap_arcmin = 1.0 / acuity;
  const double gap_rad = g.gap_arcmin / 60.0 * std::numbers::pi / 180.0;
  g.gap_mm = 2.0 * (viewing_distance_cm * 10.0) * std::tan(gap_rad / 2.0);
  g.gap_px = g.gap_mm / pixel_pitch_mm;
  g.diameter_px = 5.0 * g.gap_px;
  return g;
}

inline bool evaluate_acuity(const std::vector<LandoltTrial>& trials,
                            int required_correct = kDefaultRequiredCorrect) {
  if (trials.empty()) throw Error(ErrorCode::EmptyTrials);
  if (trials.size() > static_cast<std::size_t>(kMaxLandoltTrials)) {
    throw Error(ErrorCode::TooManyTrials, std::to_string(trials.size()));
  }
  int correct = 0;
  for (const auto& t : trials) correct += t.correct() ? 1 : 0;
  return correct >= required_correct;
}

// ---------------------------------------------------------------------------
// Brightness matrix

enum class ShapeKind { Circle, Triangle };

struct Shape {
  ShapeKind kind = ShapeKind::Circle;
  int size = 0;  // circle radius, or triangle half-height, in pixels
  int x = 0;     // center, relative to the cell's top-left corner
  int y = 0;
  int foreground_gray = 0;
  bool operator==(const Shape&) const = default;
};

struct MatrixCell {
  int background_gray = 0;
  std::optional<Shape> shape;
  bool operator==(const MatrixCell&) const = default;
};

struct ShapeCounts {
  int circles = 0;
  int triangles = 0;
  bool operator==(const ShapeCounts&) const = default;
  int total() const { return circles + triangles; }
};

inline constexpr int kMatrixSide = 4;
inline constexpr int kMatrixCellPx = 100;
/// Foreground/background distance in RGB24 integer points.
inline constexpr int kMatrixContrast = 4;
inline constexpr int kMatrixGrayLevels = 16;
inline constexpr int kMatrixGrayLo = 40;
inline constexpr int kMatrixGrayHi = 215;

struct MatrixSpec {
  std::array<MatrixCell, kMatrixSide * kMatrixSide> cells{};
  ShapeCounts truth_counts;
  bool operator==(const MatrixSpec&) const = default;

  ShapeCounts count_shapes() const {
    ShapeCounts c;
    for (const auto& cell : cells) {
      if (!cell.shape) continue;
      (cell.shape->kind == ShapeKind::Circle ? c.circles : c.triangles) += 1;
    }
    return c;
  }

  bool valid() const {
    for (const auto& cell : cells) {
      if (cell.background_gray < 0 || cell.background_gray > 255) return false;
      if (cell.shape && std::abs(cell.shape->foreground_gray - cell.background_gray) != kMatrixContrast) {
        return false;
      }
    }
    return truth_counts == count_shapes();
  }
};

/// i-th of 16 evenly spaced gray levels in [40, 215], rounded to integers.
constexpr int matrix_gray_level(int i) {
  return kMatrixGrayLo + (i * (kMatrixGrayHi - kMatrixGrayLo) + (kMatrixGrayLevels - 1) / 2) /
                             (kMatrixGrayLevels - 1);
}

inline MatrixSpec generate_matrix(std::uint64_t seed) {
  Rng rng(seed);
  MatrixSpec spec;
  for (auto& cell : spec.cells) {
    cell.background_gray = matrix_gray_level(static_cast<int>(rng.below(kMatrixGrayLevels)));
  }
  std::array<int, kMatrixSide * kMatrixSide> order{};
  for (int i = 0; i < static_cast<int>(order.size()); ++i) order[i] = i;
  rng.shuffle(order);
  const int count = 1 + static_cast<int>(rng.below(order.size()));
  for (int k = 0; k < count; ++k) {
    auto& cell = spec.cells[order[k]];
    Shape s;
    s.kind = rng.coin() ? ShapeKind::Circle : ShapeKind::Triangle;
    s.size = static_cast<int>(rng.between(14, 32));
    s.x = static_cast<int>(rng.between(s.size + 4, kMatrixCellPx - s.size - 5));
    s.y = static_cast<int>(rng.between(s.size + 4, kMatrixCellPx - s.size - 5));
    s.foreground_gray = cell.background_gray + (rng.coin() ? kMatrixContrast : -kMatrixContrast);
    cell.shape = s;
  }
  spec.truth_counts = spec.count_shapes();
  return spec;
}

/// Fixed 4-circle / 10-triangle layout used as the default calibration asset.
inline MatrixSpec reference_matrix() {
  static constexpr std::string_view kLayout = "TCTTTTCT.TTCTCT.";
  MatrixSpec spec;
  for (int i = 0; i < static_cast<int>(kLayout.size()); ++i) {
    auto& cell = spec.cells[i];
    cell.background_gray = matrix_gray_level((i * 7) % kMatrixGrayLevels);
    if (kLayout[i] == '.') continue;
    Shape s;
    s.kind = kLayout[i] == 'C' ? ShapeKind::Circle : ShapeKind::Triangle;
    s.size = 16 + (i * 5) % 16;
    s.x = 40 + (i * 11) % 20;
    s.y = 45 + (i * 13) % 15;
    s.foreground_gray = cell.background_gray + ((i % 2 == 0) ? kMatrixContrast : -kMatrixContrast);
    cell.shape = s;
  }
  spec.truth_counts = spec.count_shapes();
  return spec;
}

inline bool score_matrix(const ShapeCounts& reported, const ShapeCounts& truth) {
  return reported.circles == truth.circles && reported.triangles == truth.triangles;
}

/// 8-bit RGB raster, row-major, three equal channels per pixel.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  int gray_at(int x, int y) const { return rgb[3 * (static_cast<std::size_t>(y) * width + x)]; }
};

inline bool shape_covers(const Shape& s, int px, int py) {
  const int dx = px - s.x;
  const int dy = py - s.y;
  if (s.kind == ShapeKind::Circle) return dx * dx + dy * dy <= s.size * s.size;
  // Upward isosceles triangle: apex at (x, y - size), base at y + size with
  // half-width size.
  if (dy < -s.size || dy > s.size) return false;
  return 2 * std::abs(dx) <= dy + s.size;
}

inline Raster render_matrix(const MatrixSpec& spec) {
  Raster r;
  r.width = kMatrixSide * kMatrixCellPx;
  r.height = kMatrixSide * kMatrixCellPx;
  r.rgb.resize(static_cast<std::size_t>(r.width) * r.height * 3);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      const auto& cell = spec.cells[(y / kMatrixCellPx) * kMatrixSide + x / kMatrixCellPx];
      int gray = cell.background_gray;
      if (cell.shape && shape_covers(*cell.shape, x % kMatrixCellPx, y % kMatrixCellPx)) {
        gray = cell.shape->foreground_gray;
      }
      const std::size_t o = 3 * (static_cast<std::size_t>(y) * r.width + x);
      r.rgb[o] = r.rgb[o + 1] = r.rgb[o + 2] = static_cast<std::uint8_t>(gray);
    }
  }
  return r;
}

/// Binary PPM (P6) encoding.
inline std::string encode_ppm(const Raster& r) {
  std::string out = "P6\n" + std::to_string(r.width) + " " + std::to_string(r.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(r.rgb.data()), r.rgb.size());
  return out;
}

// ---------------------------------------------------------------------------
// Setup section: matrices and viewing distance

enum class DistanceAnswer { LeftBetter, RightBetter, Same };
enum class DistanceClass { TooClose, Expected, TooFar, Unknown };

constexpr std::string_view to_string(DistanceClass c) {
  switch (c) {
    case DistanceClass::TooClose: return "too_close";
    case DistanceClass::Expected: return "expected";
    case DistanceClass::TooFar: return "too_far";
    case DistanceClass::Unknown: return "unknown";
  }
  return "unknown";
}

struct Matrix1Record {
  ShapeCounts reported;
  ShapeCounts truth;
  int attempts = 1;
  bool operator==(const Matrix1Record&) const = default;
};

/// The second matrix never gives feedback, so it has a single attempt.
struct Matrix2Record {
  ShapeCounts reported;
  ShapeCounts truth;
  bool operator==(const Matrix2Record&) const = default;
};

struct SetupRecord {
  Matrix1Record matrix1;
  Matrix2Record matrix2;
  std::vector<DistanceAnswer> distance_answers;
  DistanceClass distance_class = DistanceClass::Unknown;
  bool operator==(const SetupRecord&) const = default;
};

/// Pair 1 is only discriminable from too close, pair 2 at the expected
/// distance, pair 3 even from too far. A correct pair 1 wins regardless of
/// the others.
inline DistanceClass classify_viewing_distance(const std::vector<bool>& correct) {
  if (correct.size() != 3) throw Error(ErrorCode::WrongArity, std::to_string(correct.size()));
  if (correct[0]) return DistanceClass::TooClose;
  if (correct[1]) return DistanceClass::Expected;
  if (correct[2]) return DistanceClass::TooFar;
  return DistanceClass::Unknown;
}

/// `key[i]` is the side showing the undistorted (better) image; "same" is
/// never correct.
inline std::vector<bool> distance_correctness(const std::vector<DistanceAnswer>& answers,
                                              const std::vector<DistanceAnswer>& key) {
  if (answers.size() != key.size()) throw Error(ErrorCode::WrongArity, "answers vs key");
  std::vector<bool> out;
  out.reserve(answers.size());
  for (std::size_t i = 0; i < answers.size(); ++i) {
    out.push_back(answers[i] != DistanceAnswer::Same && answers[i] == key[i]);
  }
  return out;
}

inline DistanceClass classify_viewing_distance(const std::vector<DistanceAnswer>& answers,
                                               const std::vector<DistanceAnswer>& key) {
  return classify_viewing_distance(distance_correctness(answers, key));
}

}  // namespace p910
