#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "windscale/grid.hpp"

namespace windscale {

/// sqrt(mean((a - b)^2)) over every element. Throws ShapeError on mismatch.
double rmse(const torch::Tensor& a, const torch::Tensor& b);

/// Radially averaged power spectral density of one (H, W) field.
///
/// Power is |DFT|^2 / (H*W). Frequency (fy, fx) in cycles per grid unit falls
/// in ring round(sqrt(fy^2 + fx^2) * min(H, W)); rings 1 .. min(H, W)/2 are
/// kept, so the zero frequency and the corners beyond Nyquist are excluded.
struct Rapsd {
  /// Ring centres in cycles per grid unit, ring / min(H, W).
  std::vector<double> wavenumber;
  /// Mean power per ring, >= 0.
  std::vector<double> power;
  std::vector<std::int64_t> counts;
  /// H * W of the source field.
  std::int64_t cells = 0;

  std::size_t size() const { return power.size(); }
  /// Sum of binned power divided by H*W; equals the variance of the field up
  /// to the excluded corner frequencies.
  double total_power() const;
};

/// Throws ShapeError unless x is 2-D with both sides >= 8.
Rapsd rapsd(const torch::Tensor& x);

/// Input resolution limit marked on spectra: one cycle per 8 fine cells, in
/// cycles per km for the given fine spacing.
double cutoff_wavenumber_per_km(double spacing_km, std::int64_t factor = kScaleFactor);

/// sqrt(mean_r (10 log10(ref_r / pred_r))^2) in dB. With floor > 0 every bin
/// is raised to at least `floor` first; otherwise a non-positive bin raises
/// NumericError listing the offending rings.
double lsd(const Rapsd& ref, const Rapsd& pred, double floor = 0.0);

struct MedianMad {
  double median = 0.0;
  /// Median of |x - median|, unscaled.
  double mad = 0.0;
};
/// Throws ConfigError on an empty input.
MedianMad median_mad(std::vector<double> values);

// ----------------------------------------------------------------------------
// Reports
// ----------------------------------------------------------------------------

struct MetricRow {
  std::string method;
  std::string component;  // "u10" or "v10"
  std::string timestamp;
  std::string month;
  std::string region;  // "domain" for the whole trimmed field
  double rmse = 0.0;
  double lsd = 0.0;
  bool operator==(const MetricRow&) const = default;
};

std::string format_report(std::span<const MetricRow> rows);
std::vector<MetricRow> parse_report(const std::string& text);
void save_report(const std::filesystem::path& path, std::span<const MetricRow> rows);
std::vector<MetricRow> load_report(const std::filesystem::path& path);

struct AggregateRow {
  std::string method;
  std::string component;
  std::string month;  // "all" pools every month
  std::string region;
  std::int64_t n = 0;
  MedianMad rmse;
  MedianMad lsd;
};

/// Median and MAD per (method, component, month, region), plus a pooled
/// "all" month per (method, component, region). Output order is sorted by
/// key, so the result does not depend on the order of `rows`.
std::vector<AggregateRow> aggregate(std::span<const MetricRow> rows);

/// Plain-text table with one row per method and median (MAD) columns per
/// component and metric over the pooled month of `region`. The lowest median
/// in each column is wrapped in asterisks.
std::string format_table(std::span<const AggregateRow> rows, const std::string& region = "domain");

// ----------------------------------------------------------------------------
// Evaluation
// ----------------------------------------------------------------------------

/// Rectangular evaluation region in fine-grid cells of the trimmed domain.
struct Region {
  std::string name;
  std::int64_t top = 0;
  std::int64_t left = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  bool operator==(const Region&) const = default;
};

/// A downscaling method: maps a test pair to (u10, v10) on a grid whose shape
/// is the reference shape trimmed to a multiple of 8.
struct Method {
  std::string name;
  std::function<FieldGrid(const SamplePair&)> run;
};

struct EvalOptions {
  std::vector<Region> regions;
  double lsd_floor = 0.0;
  std::int64_t workers = 1;
};

/// Per-pair, per-method, per-component RMSE and LSD in physical units on the
/// trimmed domain, plus one row set per region. Rows are ordered by pair,
/// then method, then region, then component.
std::vector<MetricRow> evaluate(std::span<const SamplePair> pairs, std::span<const Method> methods,
                                const EvalOptions& opts);

}  // namespace windscale
