#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covspec/estimate.hpp"
#include "covspec/io.hpp"

namespace covspec {

struct RunConfig {
  // inputs
  std::filesystem::path data;      // observation panel
  std::filesystem::path stations;  // station table
  std::filesystem::path spectra;   // previously dumped spectra CSV (fit skips the FFT stage)
  std::filesystem::path model;     // model JSON for simulate
  std::filesystem::path output;    // directory (fit, spectra) or file (simulate)

  int span = 255;
  std::vector<int> display_spans{5, 55};
  double mask_fraction = 300.0 / 3287.0;
  std::optional<int> k1, k2, k3;  // nullopt = AIC
  bool nonparametric = true;
  bool wind_preprocess = false;
  bool per_station_seasonal = false;
  std::optional<Eigen::Vector2d> origin;  // projection origin (lon, lat)
  KernelSmoothOptions smoother;

  // simulate
  std::uint64_t seed = 0;
  std::size_t T = 4096;
  std::size_t n_sites = 10;  // random layout when no station table is given
  double box_km = 400.0;

  /// Throws ValidationError for even spans, a mask fraction outside
  /// [0, 0.5) or orders outside 0..6 (1..6 for K3).
  void validate() const;
  EstimationConfig estimation() const;
  /// Every setting that changes the numbers, as JSON.
  std::string to_json() const;
};

/// S x T series matrix and the site layout it lives on.
struct Dataset {
  Eigen::MatrixXd values;
  SiteLayout layout;
};

/// Reads stations and panel, aligns them and optionally applies the wind
/// preprocessing. Without a station table the data must be a simulated
/// sample whose ids are not needed for lags, which is rejected.
Dataset load_dataset(const RunConfig& config);

/// Smoothed table from either the data or a dumped spectra CSV.
CrossSpectraTable spectra_for_fit(const RunConfig& config);

/// Runs the estimators and writes report.json, curves.csv, spectra.csv,
/// residuals.csv and manifest.json into config.output.
FitReport run_fit(const RunConfig& config);

/// Writes spectra_span<N>.csv for the analysis span and each display span.
void run_spectra(const RunConfig& config);

/// Simulates from the model JSON on the station layout (or a random layout
/// of n_sites in a box_km square) and writes a sample CSV to config.output.
FieldSample run_simulate(const RunConfig& config);

/// Random sites uniform in [0, box_km]^2.
SiteLayout random_layout(std::size_t n_sites, double box_km, std::uint64_t seed);

std::string report_to_json(const FitReport& report, const RunConfig& config);
std::string curves_to_csv(const FitReport& report);
std::string residuals_to_csv(const FitReport& report);

/// Human-readable summary of a report.json.
std::string render_report(const std::string& report_json);

}  // namespace covspec
