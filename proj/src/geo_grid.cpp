#include "snapdrive/geo_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "csv.hpp"
#include "snapdrive/error.hpp"

namespace snapdrive {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
// Ceiling slack so that an extent of exactly N tiles (up to rounding in the
// degree-to-meter conversion) does not spill into an extra row or column.
constexpr double kExtentSlack = 1e-9;

double cross(GeoPoint o, GeoPoint a, GeoPoint b) noexcept {
  return (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon);
}

double scale_of(GeoPoint a, GeoPoint b) noexcept {
  return std::max({std::abs(a.lat), std::abs(a.lon), std::abs(b.lat), std::abs(b.lon), 1.0});
}

bool on_segment(GeoPoint p, GeoPoint a, GeoPoint b) noexcept {
  const double s = scale_of(a, b);
  if (std::abs(cross(a, b, p)) > 1e-12 * s * s) return false;
  return p.lon >= std::min(a.lon, b.lon) - 1e-12 * s && p.lon <= std::max(a.lon, b.lon) + 1e-12 * s &&
         p.lat >= std::min(a.lat, b.lat) - 1e-12 * s && p.lat <= std::max(a.lat, b.lat) + 1e-12 * s;
}

int orientation(GeoPoint o, GeoPoint a, GeoPoint b) noexcept {
  const double s = scale_of(o, a);
  const double c = cross(o, a, b);
  if (std::abs(c) <= 1e-12 * s * s) return 0;
  return c > 0 ? 1 : -1;
}

bool segments_touch(GeoPoint a, GeoPoint b, GeoPoint c, GeoPoint d) noexcept {
  const int o1 = orientation(a, b, c);
  const int o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a);
  const int o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
  return (o1 == 0 && on_segment(c, a, b)) || (o2 == 0 && on_segment(d, a, b)) ||
         (o3 == 0 && on_segment(a, c, d)) || (o4 == 0 && on_segment(b, c, d));
}

std::vector<GeoPoint> normalize_ring(std::vector<GeoPoint> ring) {
  std::vector<GeoPoint> out;
  out.reserve(ring.size());
  for (const auto& p : ring) {
    if (out.empty() || !(out.back() == p)) out.push_back(p);
  }
  while (out.size() > 1 && out.front() == out.back()) out.pop_back();
  return out;
}

double signed_area(std::span<const GeoPoint> ring) noexcept {
  double a = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const auto& p = ring[i];
    const auto& q = ring[(i + 1) % ring.size()];
    a += p.lon * q.lat - q.lon * p.lat;
  }
  return 0.5 * a;
}

void validate_ring(std::span<const GeoPoint> ring) {
  if (ring.size() < 3) fail(ErrorCode::kInvalidPolygon, "polygon ring needs at least 3 distinct vertices");
  for (const auto& p : ring) {
    if (!p.valid()) fail(ErrorCode::kInvalidPolygon, "polygon vertex out of range");
  }
  if (signed_area(ring) == 0.0) fail(ErrorCode::kInvalidPolygon, "polygon ring has zero area");
  if (ring_self_intersects(ring)) fail(ErrorCode::kInvalidPolygon, "polygon ring intersects itself");
}

bool ray_cast(GeoPoint p, std::span<const GeoPoint> ring) noexcept {
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const auto& a = ring[i];
    const auto& b = ring[j];
    if (on_segment(p, a, b)) return true;
    if ((a.lat > p.lat) != (b.lat > p.lat)) {
      const double lon_at = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
      if (p.lon < lon_at) inside = !inside;
    }
  }
  return inside;
}

}  // namespace

bool GeoPoint::valid() const noexcept {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 && lon >= -180.0 &&
         lon <= 180.0;
}

LocalXY project_local(GeoPoint p, GeoPoint origin) noexcept {
  return {(p.lon - origin.lon) * kMetersPerDegree * std::cos(origin.lat * kDegToRad),
          (p.lat - origin.lat) * kMetersPerDegree};
}

GeoPoint unproject_local(LocalXY xy, GeoPoint origin) noexcept {
  return {origin.lat + xy.y_m / kMetersPerDegree,
          origin.lon + xy.x_m / (kMetersPerDegree * std::cos(origin.lat * kDegToRad))};
}

bool ring_self_intersects(std::span<const GeoPoint> ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_touch(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n])) return true;
    }
  }
  return false;
}

bool point_in_polygon(GeoPoint p, std::span<const GeoPoint> ring) {
  const auto normalized = normalize_ring({ring.begin(), ring.end()});
  validate_ring(normalized);
  return ray_cast(p, normalized);
}

Region Region::from_bbox(BBox box) {
  if (!(box.south < box.north) || !(box.west < box.east) || !box.southwest().valid() ||
      !GeoPoint{box.north, box.east}.valid()) {
    fail(ErrorCode::kInvalidRegion, "bbox requires south < north and west < east within range");
  }
  Region r;
  r.kind_ = Kind::kBBox;
  r.bbox_ = box;
  return r;
}

Region Region::from_polygon(std::vector<GeoPoint> ring) {
  auto normalized = normalize_ring(std::move(ring));
  validate_ring(normalized);
  Region r;
  r.kind_ = Kind::kPolygon;
  r.bbox_ = {normalized[0].lat, normalized[0].lon, normalized[0].lat, normalized[0].lon};
  for (const auto& p : normalized) {
    r.bbox_.south = std::min(r.bbox_.south, p.lat);
    r.bbox_.north = std::max(r.bbox_.north, p.lat);
    r.bbox_.west = std::min(r.bbox_.west, p.lon);
    r.bbox_.east = std::max(r.bbox_.east, p.lon);
  }
  r.ring_ = std::move(normalized);
  return r;
}

bool Region::contains(GeoPoint p) const {
  if (kind_ == Kind::kBBox) return bbox_.contains(p);
  return bbox_.contains(p) && ray_cast(p, ring_);
}

TileGrid::TileGrid(GeoPoint origin, double tile_size_m, int n_rows, int n_cols,
                   std::vector<bool> active_mask)
    : origin_(origin),
      tile_size_m_(tile_size_m),
      n_rows_(n_rows),
      n_cols_(n_cols),
      active_(std::move(active_mask)) {
  if (n_rows <= 0 || n_cols <= 0 || !(tile_size_m > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "tile grid needs positive dimensions and tile size");
  }
  if (active_.size() != static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols)) {
    fail(ErrorCode::kShape, "active mask does not match grid dimensions");
  }
  position_.assign(active_.size(), -1);
  for (int r = 0; r < n_rows_; ++r) {
    for (int c = 0; c < n_cols_; ++c) {
      const TileIndex t{r, c};
      if (active_[flat(t)]) {
        position_[flat(t)] = static_cast<long>(active_tiles_.size());
        active_tiles_.push_back(t);
      }
    }
  }
}

bool TileGrid::in_bounds(TileIndex t) const noexcept {
  return t.row >= 0 && t.row < n_rows_ && t.col >= 0 && t.col < n_cols_;
}

bool TileGrid::active(TileIndex t) const noexcept { return in_bounds(t) && active_[flat(t)]; }

GeoPoint TileGrid::center(TileIndex t) const noexcept {
  return unproject_local({(t.col + 0.5) * tile_size_m_, (t.row + 0.5) * tile_size_m_}, origin_);
}

std::optional<std::size_t> TileGrid::active_position(TileIndex t) const noexcept {
  if (!in_bounds(t)) return std::nullopt;
  const long pos = position_[flat(t)];
  if (pos < 0) return std::nullopt;
  return static_cast<std::size_t>(pos);
}

std::optional<TileIndex> TileGrid::locate(GeoPoint p) const noexcept {
  if (!p.valid()) return std::nullopt;
  const LocalXY xy = project_local(p, origin_);
  const double col = std::floor(xy.x_m / tile_size_m_);
  const double row = std::floor(xy.y_m / tile_size_m_);
  if (!(col >= 0.0 && col < n_cols_ && row >= 0.0 && row < n_rows_)) return std::nullopt;
  const TileIndex t{static_cast<int>(row), static_cast<int>(col)};
  if (!active_[flat(t)]) return std::nullopt;
  return t;
}

TileGrid build_grid(const Region& region, double tile_size_m) {
  if (!(tile_size_m > 0.0) || !std::isfinite(tile_size_m)) {
    fail(ErrorCode::kInvalidArgument, "tile size must be positive");
  }
  const BBox& box = region.bbox();
  const GeoPoint origin = box.southwest();
  const LocalXY extent = project_local({box.north, box.east}, origin);
  if (!(extent.x_m > 0.0) || !(extent.y_m > 0.0)) {
    fail(ErrorCode::kInvalidRegion, "region has zero projected width or height");
  }
  const double cols = std::ceil(extent.x_m / tile_size_m - kExtentSlack);
  const double rows = std::ceil(extent.y_m / tile_size_m - kExtentSlack);
  if (cols * rows > 1e8) fail(ErrorCode::kInvalidArgument, "grid would exceed 1e8 tiles");
  const int n_cols = std::max(1, static_cast<int>(cols));
  const int n_rows = std::max(1, static_cast<int>(rows));

  std::vector<bool> mask(static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols), true);
  if (region.kind() == Region::Kind::kPolygon) {
    const double ts = tile_size_m;
    for (int r = 0; r < n_rows; ++r) {
      for (int c = 0; c < n_cols; ++c) {
        const GeoPoint center = unproject_local({(c + 0.5) * ts, (r + 0.5) * ts}, origin);
        mask[static_cast<std::size_t>(r) * n_cols + c] = ray_cast(center, region.ring());
      }
    }
  }
  return TileGrid(origin, tile_size_m, n_rows, n_cols, std::move(mask));
}

void write_grid_csv(std::ostream& out, const TileGrid& grid) {
  out << "row,col,center_lat,center_lon,active\n";
  for (int r = 0; r < grid.n_rows(); ++r) {
    for (int c = 0; c < grid.n_cols(); ++c) {
      const TileIndex t{r, c};
      const GeoPoint center = grid.center(t);
      out << r << ',' << c << ',' << detail::format_double(center.lat) << ','
          << detail::format_double(center.lon) << ',' << (grid.active(t) ? 1 : 0) << '\n';
    }
  }
}

}  // namespace snapdrive
