#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "windscale/grid.hpp"
#include "windscale/metrics.hpp"
#include "windscale/training.hpp"

namespace windscale {

using Rgb = std::array<std::uint8_t, 3>;

/// RGB raster with primitive drawing operations. Coordinates outside the
/// canvas are clipped.
class Canvas {
 public:
  Canvas(std::int64_t width, std::int64_t height, Rgb background = {255, 255, 255});

  std::int64_t width() const { return width_; }
  std::int64_t height() const { return height_; }
  Rgb at(std::int64_t x, std::int64_t y) const;

  void set(std::int64_t x, std::int64_t y, Rgb c);
  void fill_rect(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1, Rgb c);
  /// Bresenham line; `dash` > 0 alternates dash-length on/off segments.
  void line(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1, Rgb c,
            std::int64_t thickness = 1, std::int64_t dash = 0);
  /// 5x7 bitmap glyphs scaled by `scale`; lowercase renders as uppercase.
  void text(std::int64_t x, std::int64_t y, std::string_view s, Rgb c, std::int64_t scale = 1);
  static std::int64_t text_width(std::string_view s, std::int64_t scale = 1);

  /// 8-bit RGB PNG.
  void save_png(const std::filesystem::path& path) const;

 private:
  std::int64_t width_;
  std::int64_t height_;
  std::vector<std::uint8_t> pixels_;
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct CurveInput {
  std::string label;
  std::vector<StepRecord> log;
};

/// Validation MSE averaged over consecutive step intervals [k*n+1, (k+1)*n];
/// x is the interval end. Intervals without a validation record are skipped.
Series interval_averages(const CurveInput& input, std::int64_t interval);

/// Lowest interval average; +inf when there is none.
double best_interval_average(const CurveInput& input, std::int64_t interval);

void plot_validation_curves(std::span<const CurveInput> inputs, std::int64_t interval,
                            const std::filesystem::path& out, std::int64_t width = 960,
                            std::int64_t height = 600);

struct ViolinGroup {
  std::string component;
  std::string method;
  std::string month;  // "all" unless split by month
  std::vector<double> values;
};

/// Groups ordered by component, then method (first appearance), then month.
std::vector<ViolinGroup> violin_groups(std::span<const MetricRow> rows, std::string_view metric,
                                       bool by_month = false, std::string_view region = "domain");

void plot_violin(std::span<const MetricRow> rows, std::string_view metric,
                 const std::filesystem::path& out, bool by_month = false,
                 std::int64_t width = 960, std::int64_t height = 600);

struct SpectrumInput {
  std::string label;
  Rapsd spectrum;
};

/// Log-log spectra against wavenumber in cycles per km with a dashed vertical
/// line at the coarse-input cutoff. Returns the cutoff that was marked.
double plot_rapsd(std::span<const SpectrumInput> spectra, double spacing_km,
                  const std::filesystem::path& out, std::int64_t width = 960,
                  std::int64_t height = 600);

/// One channel as a diverging colour map with a colour bar.
void plot_fieldmap(const FieldGrid& grid, Variable channel, const std::filesystem::path& out,
                   std::int64_t max_side = 800);

}  // namespace windscale
