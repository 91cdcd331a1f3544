#include "windscale/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>

#include <png.h>

#include "windscale/error.hpp"

namespace windscale {

namespace {

struct Glyph {
  char c;
  std::array<std::uint8_t, 7> rows;  // 5 bits per row, MSB on the left
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}}, {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}}, {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}}, {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}}, {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}}, {'*', {0x00, 0x04, 0x15, 0x0E, 0x15, 0x04, 0x00}},
};

const Glyph* glyph(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  for (const auto& g : kFont) {
    if (g.c == c) return &g;
  }
  return nullptr;
}

constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrey{150, 150, 150};
constexpr Rgb kLightGrey{225, 225, 225};
constexpr std::array<Rgb, 8> kPalette{{{31, 119, 180},
                                       {214, 39, 40},
                                       {44, 160, 44},
                                       {255, 127, 14},
                                       {148, 103, 189},
                                       {140, 86, 75},
                                       {227, 119, 194},
                                       {23, 190, 207}}};

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace

Canvas::Canvas(std::int64_t width, std::int64_t height, Rgb background)
    : width_(width), height_(height) {
  if (width < 1 || height < 1) throw ConfigError("canvas must be at least 1x1");
  pixels_.resize(static_cast<std::size_t>(width * height * 3));
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = background[0];
    pixels_[i + 1] = background[1];
    pixels_[i + 2] = background[2];
  }
}

Rgb Canvas::at(std::int64_t x, std::int64_t y) const {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) throw BoundsError("pixel outside the canvas");
  const auto i = static_cast<std::size_t>((y * width_ + x) * 3);
  return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void Canvas::set(std::int64_t x, std::int64_t y, Rgb c) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const auto i = static_cast<std::size_t>((y * width_ + x) * 3);
  pixels_[i] = c[0];
  pixels_[i + 1] = c[1];
  pixels_[i + 2] = c[2];
}

void Canvas::fill_rect(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1, Rgb c) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  for (auto y = std::max<std::int64_t>(y0, 0); y <= std::min(y1, height_ - 1); ++y) {
    for (auto x = std::max<std::int64_t>(x0, 0); x <= std::min(x1, width_ - 1); ++x) set(x, y, c);
  }
}

void Canvas::line(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1, Rgb c,
                  std::int64_t thickness, std::int64_t dash) {
  const auto dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const auto sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  auto err = dx + dy;
  const auto r = (thickness - 1) / 2;
  for (std::int64_t n = 0;; ++n) {
    if (dash <= 0 || (n / dash) % 2 == 0) fill_rect(x0 - r, y0 - r, x0 + r + (thickness - 1) % 2, y0 + r, c);
    if (x0 == x1 && y0 == y1) break;
    const auto e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Canvas::text(std::int64_t x, std::int64_t y, std::string_view s, Rgb c, std::int64_t scale) {
  for (char ch : s) {
    if (const auto* g = glyph(ch)) {
      for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
          if (g->rows[static_cast<std::size_t>(row)] & (0x10 >> col)) {
            fill_rect(x + col * scale, y + row * scale, x + (col + 1) * scale - 1,
                      y + (row + 1) * scale - 1, c);
          }
        }
      }
    }
    x += 6 * scale;
  }
}

std::int64_t Canvas::text_width(std::string_view s, std::int64_t scale) {
  return s.empty() ? 0 : static_cast<std::int64_t>(s.size()) * 6 * scale - scale;
}

void Canvas::save_png(const std::filesystem::path& path) const {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw FileError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw FileError("libpng failed while writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width_), static_cast<png_uint_32>(height_), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::int64_t y = 0; y < height_; ++y) {
    png_write_row(png, pixels_.data() + y * width_ * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

// ----------------------------------------------------------------------------

namespace {

std::vector<double> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  if (!(span > 0.0)) return {lo};
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
    ticks.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
  }
  return ticks;
}

/// Plot area with data-to-pixel mapping.
struct Axes {
  std::int64_t left, top, right, bottom;
  double x0, x1, y0, y1;
  bool log_x = false, log_y = false;

  double tx(double v) const { return log_x ? std::log10(v) : v; }
  double ty(double v) const { return log_y ? std::log10(v) : v; }
  std::int64_t px(double v) const {
    return left + static_cast<std::int64_t>(std::lround((tx(v) - tx(x0)) / (tx(x1) - tx(x0)) *
                                                        static_cast<double>(right - left)));
  }
  std::int64_t py(double v) const {
    return bottom - static_cast<std::int64_t>(std::lround((ty(v) - ty(y0)) / (ty(y1) - ty(y0)) *
                                                          static_cast<double>(bottom - top)));
  }

  std::vector<double> ticks(bool x) const {
    const bool lg = x ? log_x : log_y;
    const double lo = x ? x0 : y0, hi = x ? x1 : y1;
    if (!lg) return linear_ticks(lo, hi);
    std::vector<double> out;
    for (double e = std::ceil(std::log10(lo) - 1e-9); e <= std::log10(hi) + 1e-9; e += 1.0) {
      out.push_back(std::pow(10.0, e));
    }
    return out;
  }

  void frame(Canvas& c, const std::string& title, const std::string& xlabel,
             const std::string& ylabel, bool x_ticks = true) const {
    for (double t : ticks(false)) {
      c.line(left, py(t), right, py(t), kLightGrey);
      const auto label = format_number(t);
      c.text(left - 8 - Canvas::text_width(label), py(t) - 3, label, kBlack);
    }
    if (x_ticks) {
      for (double t : ticks(true)) {
        c.line(px(t), top, px(t), bottom, kLightGrey);
        const auto label = format_number(t);
        c.text(px(t) - Canvas::text_width(label) / 2, bottom + 8, label, kBlack);
      }
    }
    c.line(left, top, left, bottom, kBlack);
    c.line(left, bottom, right, bottom, kBlack);
    c.line(right, top, right, bottom, kBlack);
    c.line(left, top, right, top, kBlack);
    c.text((left + right - Canvas::text_width(title, 2)) / 2, top - 26, title, kBlack, 2);
    c.text((left + right - Canvas::text_width(xlabel)) / 2, bottom + 26, xlabel, kBlack);
    c.text(8, top - 14, ylabel, kBlack);
  }
};

void draw_series(Canvas& c, const Axes& ax, const Series& s, Rgb color) {
  for (std::size_t i = 1; i < s.x.size(); ++i) {
    c.line(ax.px(s.x[i - 1]), ax.py(s.y[i - 1]), ax.px(s.x[i]), ax.py(s.y[i]), color, 2);
  }
  if (s.x.size() == 1) c.fill_rect(ax.px(s.x[0]) - 2, ax.py(s.y[0]) - 2, ax.px(s.x[0]) + 2, ax.py(s.y[0]) + 2, color);
}

void draw_legend(Canvas& c, const Axes& ax, const std::vector<std::string>& labels) {
  std::int64_t y = ax.top + 10;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto color = kPalette[i % kPalette.size()];
    c.fill_rect(ax.right - 170, y, ax.right - 156, y + 6, color);
    c.text(ax.right - 150, y, labels[i], kBlack);
    y += 14;
  }
}

void pad_range(double& lo, double& hi, bool log) {
  if (log) {
    lo /= 1.5;
    hi *= 1.5;
    return;
  }
  const double span = hi - lo;
  const double pad = span > 0.0 ? 0.05 * span : std::max(std::abs(lo) * 0.1, 1.0);
  lo -= pad;
  hi += pad;
}

}  // namespace

Series interval_averages(const CurveInput& input, std::int64_t interval) {
  if (interval < 1) throw ConfigError("interval must be >= 1");
  std::map<std::int64_t, std::pair<double, std::int64_t>> bins;
  for (const auto& r : input.log) {
    if (std::isnan(r.val_mse)) continue;
    const auto bin = (r.summary.step - 1) / interval;
    bins[bin].first += r.val_mse;
    ++bins[bin].second;
  }
  Series s;
  s.label = input.label;
  for (const auto& [bin, acc] : bins) {
    s.x.push_back(static_cast<double>((bin + 1) * interval));
    s.y.push_back(acc.first / static_cast<double>(acc.second));
  }
  return s;
}

double best_interval_average(const CurveInput& input, std::int64_t interval) {
  auto s = interval_averages(input, interval);
  double best = std::numeric_limits<double>::infinity();
  for (double v : s.y) best = std::min(best, v);
  return best;
}

void plot_validation_curves(std::span<const CurveInput> inputs, std::int64_t interval,
                            const std::filesystem::path& out, std::int64_t width,
                            std::int64_t height) {
  std::vector<Series> series;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& in : inputs) {
    auto s = interval_averages(in, interval);
    if (s.x.empty()) continue;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
    series.push_back(std::move(s));
  }
  if (series.empty()) throw FileError("no validation records to plot");
  pad_range(x0, x1, false);
  pad_range(y0, y1, false);
  Canvas c(width, height);
  Axes ax{90, 50, width - 30, height - 60, x0, x1, y0, y1};
  ax.frame(c, "VALIDATION MSE (INTERVAL " + std::to_string(interval) + ")", "training step", "mse");
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < series.size(); ++i) {
    draw_series(c, ax, series[i], kPalette[i % kPalette.size()]);
    labels.push_back(series[i].label);
  }
  draw_legend(c, ax, labels);
  c.save_png(out);
}

std::vector<ViolinGroup> violin_groups(std::span<const MetricRow> rows, std::string_view metric,
                                       bool by_month, std::string_view region) {
  if (metric != "rmse" && metric != "lsd") {
    throw ConfigError("unknown metric '" + std::string(metric) + "' (expected rmse or lsd)");
  }
  std::vector<std::string> components, methods, months;
  auto note = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& r : rows) {
    if (r.region != region) continue;
    note(components, r.component);
    note(methods, r.method);
    note(months, by_month ? r.month : std::string("all"));
  }
  std::sort(components.begin(), components.end());
  std::sort(months.begin(), months.end());
  std::vector<ViolinGroup> groups;
  for (const auto& comp : components) {
    for (const auto& m : methods) {
      for (const auto& month : months) {
        ViolinGroup g{comp, m, month, {}};
        for (const auto& r : rows) {
          if (r.region == region && r.component == comp && r.method == m &&
              (!by_month || r.month == month)) {
            g.values.push_back(metric == "rmse" ? r.rmse : r.lsd);
          }
        }
        if (!g.values.empty()) groups.push_back(std::move(g));
      }
    }
  }
  return groups;
}

void plot_violin(std::span<const MetricRow> rows, std::string_view metric,
                 const std::filesystem::path& out, bool by_month, std::int64_t width,
                 std::int64_t height) {
  auto groups = violin_groups(rows, metric, by_month);
  if (groups.empty()) throw FileError("report is empty, nothing to plot");
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  for (const auto& g : groups) {
    for (double v : g.values) {
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  pad_range(y0, y1, false);
  const auto n = static_cast<double>(groups.size());
  Canvas c(width, height);
  Axes ax{90, 50, width - 30, height - 80, 0.0, n, y0, y1};
  std::string title(metric == "rmse" ? "RMSE" : "LSD");
  ax.frame(c, title + " BY METHOD", "", metric == "rmse" ? "m/s" : "db", false);

  std::vector<std::string> methods;
  for (const auto& g : groups) {
    if (std::find(methods.begin(), methods.end(), g.method) == methods.end()) methods.push_back(g.method);
  }
  const double half_width = 0.4;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const auto method_idx = static_cast<std::size_t>(
        std::find(methods.begin(), methods.end(), g.method) - methods.begin());
    const auto color = kPalette[method_idx % kPalette.size()];
    const double centre = static_cast<double>(gi) + 0.5;
    // Gaussian kernel density with Silverman's bandwidth.
    const auto mm = median_mad(g.values);
    double mean = 0.0, var = 0.0;
    for (double v : g.values) mean += v;
    mean /= static_cast<double>(g.values.size());
    for (double v : g.values) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / std::max<double>(1.0, static_cast<double>(g.values.size()) - 1.0));
    const double bw = std::max(1.06 * sd * std::pow(static_cast<double>(g.values.size()), -0.2),
                               1e-3 * (y1 - y0));
    std::vector<std::pair<std::int64_t, double>> profile;
    double peak = 0.0;
    for (auto py = ax.top; py <= ax.bottom; ++py) {
      const double y = y1 - (y1 - y0) * static_cast<double>(py - ax.top) /
                                static_cast<double>(ax.bottom - ax.top);
      double d = 0.0;
      for (double v : g.values) d += std::exp(-0.5 * std::pow((y - v) / bw, 2));
      profile.emplace_back(py, d);
      peak = std::max(peak, d);
    }
    const double unit = static_cast<double>(ax.px(1.0) - ax.px(0.0));
    for (const auto& [py, d] : profile) {
      const auto hw = static_cast<std::int64_t>(std::lround(d / peak * half_width * unit));
      if (hw > 0 && d / peak > 1e-3) c.line(ax.px(centre) - hw, py, ax.px(centre) + hw, py, color);
    }
    c.line(ax.px(centre) - static_cast<std::int64_t>(0.15 * unit), ax.py(mm.median),
           ax.px(centre) + static_cast<std::int64_t>(0.15 * unit), ax.py(mm.median), kBlack, 2);
    std::string label = g.component + (g.month != "all" ? " " + g.month : "");
    c.text(ax.px(centre) - Canvas::text_width(label) / 2, ax.bottom + 8, label, kBlack);
    c.text(ax.px(centre) - Canvas::text_width(g.method) / 2, ax.bottom + 22, g.method, color);
  }
  draw_legend(c, ax, methods);
  c.save_png(out);
}

double plot_rapsd(std::span<const SpectrumInput> spectra, double spacing_km,
                  const std::filesystem::path& out, std::int64_t width, std::int64_t height) {
  if (spectra.empty()) throw FileError("no spectra to plot");
  const double cutoff = cutoff_wavenumber_per_km(spacing_km);
  std::vector<Series> series;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : spectra) {
    Series line;
    line.label = s.label;
    for (std::size_t i = 0; i < s.spectrum.size(); ++i) {
      if (!(s.spectrum.power[i] > 0.0)) continue;
      line.x.push_back(s.spectrum.wavenumber[i] / spacing_km);
      line.y.push_back(s.spectrum.power[i]);
      x0 = std::min(x0, line.x.back());
      x1 = std::max(x1, line.x.back());
      y0 = std::min(y0, line.y.back());
      y1 = std::max(y1, line.y.back());
    }
    series.push_back(std::move(line));
  }
  if (!(x1 > 0.0)) throw FileError("spectra contain no positive power");
  x0 = std::min(x0, cutoff);
  x1 = std::max(x1, cutoff);
  pad_range(x0, x1, true);
  pad_range(y0, y1, true);
  Canvas c(width, height);
  Axes ax{90, 50, width - 30, height - 60, x0, x1, y0, y1, true, true};
  ax.frame(c, "RAPSD", "wavenumber (1/km)", "power");
  c.line(ax.px(cutoff), ax.top, ax.px(cutoff), ax.bottom, kGrey, 2, 6);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < series.size(); ++i) {
    draw_series(c, ax, series[i], kPalette[i % kPalette.size()]);
    labels.push_back(series[i].label);
  }
  draw_legend(c, ax, labels);
  c.save_png(out);
  return cutoff;
}

void plot_fieldmap(const FieldGrid& grid, Variable channel, const std::filesystem::path& out,
                   std::int64_t max_side) {
  if (grid.empty()) throw FileError("field is empty, nothing to plot");
  auto data = grid.channel(channel).contiguous();
  const auto h = grid.height(), w = grid.width();
  const double cell = std::max(1.0, std::floor(static_cast<double>(max_side) /
                                               static_cast<double>(std::max(h, w))));
  const double shrink = std::max(1.0, static_cast<double>(std::max(h, w)) / static_cast<double>(max_side));
  const auto img_w = static_cast<std::int64_t>(static_cast<double>(w) * cell / shrink);
  const auto img_h = static_cast<std::int64_t>(static_cast<double>(h) * cell / shrink);
  const double lo = data.min().item<double>(), hi = data.max().item<double>();
  const double span = hi > lo ? hi - lo : 1.0;
  auto colour = [](double t) -> Rgb {
    // Blue-white-red diverging map.
    t = std::clamp(t, 0.0, 1.0);
    const auto mix = [](double a, double b, double u) {
      return static_cast<std::uint8_t>(std::lround(a + (b - a) * u));
    };
    if (t < 0.5) {
      const double u = t / 0.5;
      return {mix(33, 255, u), mix(102, 255, u), mix(172, 255, u)};
    }
    const double u = (t - 0.5) / 0.5;
    return {mix(255, 178, u), mix(255, 24, u), mix(255, 43, u)};
  };

  Canvas c(img_w + 130, img_h + 60);
  const auto acc = data.accessor<double, 2>();
  for (std::int64_t py = 0; py < img_h; ++py) {
    const auto i = std::min(h - 1, static_cast<std::int64_t>(static_cast<double>(py) * shrink / cell));
    for (std::int64_t px = 0; px < img_w; ++px) {
      const auto j = std::min(w - 1, static_cast<std::int64_t>(static_cast<double>(px) * shrink / cell));
      c.set(px + 10, py + 40, colour((acc[i][j] - lo) / span));
    }
  }
  const auto bar_x = img_w + 30;
  for (std::int64_t py = 0; py < img_h; ++py) {
    const double t = 1.0 - static_cast<double>(py) / static_cast<double>(std::max<std::int64_t>(1, img_h - 1));
    c.line(bar_x, py + 40, bar_x + 16, py + 40, colour(t));
  }
  c.text(bar_x + 22, 40, format_number(hi), kBlack);
  c.text(bar_x + 22, 40 + img_h - 7, format_number(lo), kBlack);
  const auto& info = variable_info(channel);
  c.text(10, 12, std::string(info.name) + " (" + std::string(info.units) + ") " + grid.timestamp(),
         kBlack, 2);
  c.save_png(out);
}

}  // namespace windscale
