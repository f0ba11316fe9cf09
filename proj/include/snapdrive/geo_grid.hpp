#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace snapdrive {

/// Meters per degree of latitude used by the local projection.
inline constexpr double kMetersPerDegree = 111320.0;
inline constexpr double kDefaultTileSizeM = 1000.0;

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  bool valid() const noexcept;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct BBox {
  double south = 0.0;
  double west = 0.0;
  double north = 0.0;
  double east = 0.0;

  GeoPoint southwest() const noexcept { return {south, west}; }
  bool contains(GeoPoint p) const noexcept {
    return p.lat >= south && p.lat <= north && p.lon >= west && p.lon <= east;
  }
};

/// Planar offsets in meters from a projection origin (x east, y north).
struct LocalXY {
  double x_m = 0.0;
  double y_m = 0.0;
};

/// Equirectangular projection anchored at `origin`.
LocalXY project_local(GeoPoint p, GeoPoint origin) noexcept;
GeoPoint unproject_local(LocalXY xy, GeoPoint origin) noexcept;

/// Even-odd ray casting in (lon, lat) coordinates. Points on an edge or
/// vertex are inside. Throws kInvalidPolygon when the ring has fewer than
/// three distinct vertices or intersects itself.
bool point_in_polygon(GeoPoint p, std::span<const GeoPoint> ring);

/// True when two non-adjacent edges of the ring touch or cross.
bool ring_self_intersects(std::span<const GeoPoint> ring);

/// A city boundary: either a bounding box or a simple polygon ring.
class Region {
 public:
  enum class Kind { kBBox, kPolygon };

  /// Throws kInvalidRegion unless south < north and west < east.
  static Region from_bbox(BBox box);
  /// The ring may repeat its first vertex at the end. Throws kInvalidPolygon
  /// for self-intersecting or degenerate rings.
  static Region from_polygon(std::vector<GeoPoint> ring);

  Kind kind() const noexcept { return kind_; }
  const BBox& bbox() const noexcept { return bbox_; }
  /// Open ring (no repeated closing vertex); empty for bbox regions.
  std::span<const GeoPoint> ring() const noexcept { return ring_; }

  bool contains(GeoPoint p) const;

 private:
  Region() = default;
  Kind kind_ = Kind::kBBox;
  BBox bbox_;
  std::vector<GeoPoint> ring_;
};

struct TileIndex {
  int row = 0;
  int col = 0;
  friend bool operator==(const TileIndex&, const TileIndex&) = default;
};

/// Fixed-size square tiles laid over a region's bounding box, anchored at
/// its southwest corner. Tiles whose center falls outside the region are
/// inactive. Immutable once built.
class TileGrid {
 public:
  TileGrid(GeoPoint origin, double tile_size_m, int n_rows, int n_cols,
           std::vector<bool> active_mask);

  GeoPoint origin() const noexcept { return origin_; }
  double tile_size_m() const noexcept { return tile_size_m_; }
  int n_rows() const noexcept { return n_rows_; }
  int n_cols() const noexcept { return n_cols_; }
  std::size_t n_tiles() const noexcept { return active_.size(); }
  std::size_t active_count() const noexcept { return active_tiles_.size(); }

  bool in_bounds(TileIndex t) const noexcept;
  bool active(TileIndex t) const noexcept;
  std::size_t flat(TileIndex t) const noexcept {
    return static_cast<std::size_t>(t.row) * static_cast<std::size_t>(n_cols_) +
           static_cast<std::size_t>(t.col);
  }
  GeoPoint center(TileIndex t) const noexcept;

  /// Active tiles in row-major order. Per-tile count vectors align with it.
  std::span<const TileIndex> active_tiles() const noexcept { return active_tiles_; }
  /// Position of `t` in active_tiles(), or nullopt when inactive.
  std::optional<std::size_t> active_position(TileIndex t) const noexcept;

  /// Floor-convention lookup: x = k * tile_size maps to column k.
  std::optional<TileIndex> locate(GeoPoint p) const noexcept;

  friend bool operator==(const TileGrid&, const TileGrid&) = default;

 private:
  GeoPoint origin_;
  double tile_size_m_;
  int n_rows_;
  int n_cols_;
  std::vector<bool> active_;
  std::vector<TileIndex> active_tiles_;
  std::vector<long> position_;
};

/// Throws kInvalidArgument for a non-positive tile size and kInvalidRegion
/// when the projected extent is zero.
TileGrid build_grid(const Region& region, double tile_size_m = kDefaultTileSizeM);

inline std::optional<TileIndex> locate(GeoPoint p, const TileGrid& grid) noexcept {
  return grid.locate(p);
}

/// CSV with header `row,col,center_lat,center_lon,active`, one line per tile.
void write_grid_csv(std::ostream& out, const TileGrid& grid);

}  // namespace snapdrive
