#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covspec/model.hpp"
#include "covspec/simulate.hpp"
#include "covspec/spectra.hpp"

namespace covspec::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Files

std::string read_text(const fs::path& path);

/// Writes to a sibling temporary file and renames it over the target.
void atomic_write(const fs::path& path, const std::string& content);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);
std::string sha256_hex(const std::string& bytes);

/// Splits a CSV or whitespace-delimited line. Double quotes group a field.
std::vector<std::string> split_fields(const std::string& line, char delimiter);

/// "%.17g"
std::string format_double(double x);

// ---------------------------------------------------------------------------
// Models: {"beta", "c": [...], "a": [...], "b": [...], "v": [...], "p"}

std::string model_to_json(const SteinModel& model);
SteinModel model_from_json(const std::string& text);
SteinModel read_model(const fs::path& path);

// ---------------------------------------------------------------------------
// Stations

struct StationTable {
  std::vector<std::string> ids;
  Eigen::MatrixXd coords;  // S x 2: (lon, lat) degrees or (x, y) km
  bool geographic = true;

  std::size_t size() const { return ids.size(); }
};

/// Decimal degrees, or degrees-minutes with a hemisphere letter such as
/// 51d56'N or 10d13'W (S and W are negative).
double parse_coordinate(const std::string& text);

/// Columns: an id column (id, station_id, station, code) plus either
/// lon/lat (longitude/latitude) or x_km/y_km. Comma or whitespace delimited.
StationTable read_stations(const fs::path& path);

/// Equirectangular projection to km about the centroid, or about
/// (origin_lon, origin_lat) when given. Projected tables pass through.
SiteLayout project(const StationTable& stations, std::optional<Eigen::Vector2d> origin = std::nullopt);

// ---------------------------------------------------------------------------
// Observation panels

struct Date {
  int year = 0;
  int month = 0;
  int day = 0;

  auto operator<=>(const Date&) const = default;
  std::string str() const;
};

/// "YYYY-MM-DD".
Date parse_date(const std::string& text);

/// 0-based day of a non-leap year; Feb 29 shares the index of Feb 28.
int day_of_year(const Date& date);

struct Panel {
  std::vector<std::string> station_ids;
  std::vector<Date> dates;  // empty when the time axis is an integer index
  Eigen::MatrixXd values;   // S x T
};

/// Long format (station_id, date | t, value), wide format with a header
/// (date or year/month/day, then one column per station), or headerless
/// whitespace rows "year month day v_1 ... v_S" whose columns follow
/// `fallback_ids`. Two-digit years are read as 19xx. Every cell must be
/// present; missing ones are reported as (station, date).
Panel read_panel(const fs::path& path, const std::vector<std::string>& fallback_ids = {});

/// Reorders panel rows to the station order. Throws for ids absent from
/// the station table and for stations without data.
Panel align_panel(const Panel& panel, const std::vector<std::string>& station_ids);

/// sqrt, minus the day-of-year mean (pooled over years, and over stations
/// unless per_station), then per-station centering. Requires dates and
/// nonnegative values.
Eigen::MatrixXd preprocess_wind(const Panel& panel, bool per_station = false);

// ---------------------------------------------------------------------------
// Simulated samples: long CSV "site_id,t,value" with a "# seed=" header

std::string sample_to_csv(const FieldSample& sample);

// ---------------------------------------------------------------------------
// Spectra tables

/// One row per (pair, tau) with the pair written "i-j" (0-based, i <= j):
/// pair_id, lag columns, tau, re, im, modulus, angle, unwound. Auto rows
/// have i = j. Metadata (T, span, dimension) sits in "#" comment lines.
std::string spectra_to_csv(const CrossSpectraTable& table);
CrossSpectraTable spectra_from_csv(const std::string& text);

}  // namespace covspec::io
