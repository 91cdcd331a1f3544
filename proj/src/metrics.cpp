#include "windscale/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include "windscale/error.hpp"
#include "windscale/synth.hpp"

namespace windscale {

double rmse(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) throw ShapeError("rmse operands differ in shape");
  if (a.numel() == 0) throw ShapeError("rmse of an empty array");
  auto d = a.to(torch::kFloat64) - b.to(torch::kFloat64);
  return std::sqrt(d.square().mean().item<double>());
}

double Rapsd::total_power() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < power.size(); ++i) sum += power[i] * static_cast<double>(counts[i]);
  return sum / static_cast<double>(cells);
}

namespace {

double fft_frequency(std::int64_t i, std::int64_t n) {
  const auto k = i < (n + 1) / 2 ? i : i - n;
  return static_cast<double>(k) / static_cast<double>(n);
}

}  // namespace

Rapsd rapsd(const torch::Tensor& x) {
  if (x.dim() != 2) throw ShapeError("rapsd expects a 2-D field");
  const auto h = x.size(0), w = x.size(1);
  if (h < 8 || w < 8) {
    throw ShapeError("rapsd needs at least 8x8 cells, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  auto spectrum = torch::fft::fft2(x.to(torch::kFloat64).contiguous());
  auto power = (torch::real(spectrum).square() + torch::imag(spectrum).square()).contiguous();
  const auto acc = power.accessor<double, 2>();
  const auto m = std::min(h, w);
  const auto n_rings = m / 2;
  const double norm = static_cast<double>(h * w);

  Rapsd out;
  out.cells = h * w;
  out.power.assign(static_cast<std::size_t>(n_rings), 0.0);
  out.counts.assign(static_cast<std::size_t>(n_rings), 0);
  for (std::int64_t i = 0; i < h; ++i) {
    const double fy = fft_frequency(i, h);
    for (std::int64_t j = 0; j < w; ++j) {
      const double fx = fft_frequency(j, w);
      const auto ring =
          static_cast<std::int64_t>(std::round(std::sqrt(fy * fy + fx * fx) * static_cast<double>(m)));
      if (ring < 1 || ring > n_rings) continue;
      out.power[static_cast<std::size_t>(ring - 1)] += acc[i][j] / norm;
      ++out.counts[static_cast<std::size_t>(ring - 1)];
    }
  }
  for (std::int64_t r = 1; r <= n_rings; ++r) {
    const auto k = static_cast<std::size_t>(r - 1);
    out.wavenumber.push_back(static_cast<double>(r) / static_cast<double>(m));
    if (out.counts[k] > 0) out.power[k] /= static_cast<double>(out.counts[k]);
  }
  return out;
}

double cutoff_wavenumber_per_km(double spacing_km, std::int64_t factor) {
  if (!(spacing_km > 0.0) || factor < 1) throw ConfigError("spacing and factor must be positive");
  return 1.0 / (static_cast<double>(factor) * spacing_km);
}

double lsd(const Rapsd& ref, const Rapsd& pred, double floor) {
  if (ref.size() != pred.size() || ref.wavenumber != pred.wavenumber) {
    throw ShapeError("lsd operands use different wavenumber bins");
  }
  if (ref.size() == 0) throw ShapeError("lsd of an empty spectrum");
  if (floor < 0.0) throw ConfigError("lsd floor must be >= 0");
  std::vector<std::size_t> bad;
  double sum = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    double a = ref.power[i], b = pred.power[i];
    if (floor > 0.0) {
      a = std::max(a, floor);
      b = std::max(b, floor);
    }
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
      bad.push_back(i + 1);
      continue;
    }
    const double d = 10.0 * std::log10(a / b);
    sum += d * d;
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "lsd: non-positive power in ring";
    if (bad.size() > 1) msg << 's';
    for (std::size_t i = 0; i < bad.size() && i < 16; ++i) msg << (i ? ", " : " ") << bad[i];
    if (bad.size() > 16) msg << ", ...";
    msg << " (pass an explicit floor to compare collapsed spectra)";
    throw NumericError(msg.str());
  }
  return std::sqrt(sum / static_cast<double>(ref.size()));
}

namespace {

double median_of(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

MedianMad median_mad(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of an empty group");
  MedianMad out;
  out.median = median_of(values);
  for (auto& v : values) v = std::abs(v - out.median);
  out.mad = median_of(values);
  return out;
}

// ----------------------------------------------------------------------------

namespace {

constexpr const char* kReportHeader = "method\tcomponent\ttimestamp\tmonth\tregion\trmse\tlsd";

}  // namespace

std::string format_report(std::span<const MetricRow> rows) {
  std::ostringstream out;
  out << kReportHeader << '\n' << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.method << '\t' << r.component << '\t' << r.timestamp << '\t' << r.month << '\t'
        << r.region << '\t' << r.rmse << '\t' << r.lsd << '\n';
  }
  return out.str();
}

std::vector<MetricRow> parse_report(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<MetricRow> rows;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == kReportHeader) continue;
    std::vector<std::string> cols;
    std::istringstream fields(line);
    std::string col;
    while (std::getline(fields, col, '\t')) cols.push_back(col);
    if (cols.size() != 7) {
      throw FileError("report line " + std::to_string(line_no) + " has " +
                      std::to_string(cols.size()) + " columns, expected 7");
    }
    MetricRow r{cols[0], cols[1], cols[2], cols[3], cols[4], 0.0, 0.0};
    try {
      r.rmse = std::stod(cols[5]);
      r.lsd = std::stod(cols[6]);
    } catch (const std::exception&) {
      throw FileError("report line " + std::to_string(line_no) + " has a malformed number");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void save_report(const std::filesystem::path& path, std::span<const MetricRow> rows) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write " + path.string());
  out << format_report(rows);
}

std::vector<MetricRow> load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot read report " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_report(buf.str());
}

std::vector<AggregateRow> aggregate(std::span<const MetricRow> rows) {
  if (rows.empty()) throw ConfigError("cannot aggregate an empty report");
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : rows) {
    for (const auto& month : {r.month, std::string("all")}) {
      auto& g = groups[{r.method, r.component, month, r.region}];
      g.first.push_back(r.rmse);
      g.second.push_back(r.lsd);
    }
  }
  std::vector<AggregateRow> out;
  for (auto& [key, values] : groups) {
    AggregateRow a;
    std::tie(a.method, a.component, a.month, a.region) = key;
    a.n = static_cast<std::int64_t>(values.first.size());
    a.rmse = median_mad(values.first);
    a.lsd = median_mad(values.second);
    out.push_back(std::move(a));
  }
  return out;
}

std::string format_table(std::span<const AggregateRow> rows, const std::string& region) {
  // Columns: RMSE u10, RMSE v10, LSD u10, LSD v10.
  std::vector<std::string> methods;
  std::map<std::pair<std::string, int>, MedianMad> cells;
  for (const auto& a : rows) {
    if (a.month != "all" || a.region != region) continue;
    if (std::find(methods.begin(), methods.end(), a.method) == methods.end()) {
      methods.push_back(a.method);
    }
    const int c = a.component == "u10" ? 0 : 1;
    cells[{a.method, c}] = a.rmse;
    cells[{a.method, 2 + c}] = a.lsd;
  }
  if (methods.empty()) throw ConfigError("no aggregated rows for region '" + region + "'");

  std::array<double, 4> best;
  best.fill(std::numeric_limits<double>::infinity());
  for (const auto& [key, mm] : cells) best[key.second] = std::min(best[key.second], mm.median);

  auto cell_text = [&](const std::string& method, int col) {
    auto it = cells.find({method, col});
    if (it == cells.end()) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << it->second.median << " (" << it->second.mad << ")";
    return it->second.median == best[col] ? "*" + s.str() + "*" : s.str();
  };

  const std::array<const char*, 4> headers{"RMSE u10", "RMSE v10", "LSD u10", "LSD v10"};
  std::size_t name_w = 6;
  for (const auto& m : methods) name_w = std::max(name_w, m.size());
  std::array<std::size_t, 4> col_w{};
  for (int c = 0; c < 4; ++c) {
    col_w[c] = std::string(headers[c]).size();
    for (const auto& m : methods) col_w[c] = std::max(col_w[c], cell_text(m, c).size());
  }

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_w)) << "method";
  for (int c = 0; c < 4; ++c) out << "  " << std::setw(static_cast<int>(col_w[c])) << headers[c];
  out << '\n';
  for (const auto& m : methods) {
    out << std::setw(static_cast<int>(name_w)) << m;
    for (int c = 0; c < 4; ++c) out << "  " << std::setw(static_cast<int>(col_w[c])) << cell_text(m, c);
    out << '\n';
  }
  out << "median (MAD) over " << region << "; * marks the lowest median per column\n";
  return out.str();
}

// ----------------------------------------------------------------------------

namespace {

std::vector<MetricRow> evaluate_pair(const SamplePair& pair, std::span<const Method> methods,
                                     const EvalOptions& opts) {
  torch::NoGradGuard no_grad;
  std::vector<MetricRow> rows;
  const auto month = month_of(pair.timestamp);
  for (const auto& method : methods) {
    auto out = method.run(pair);
    if (out.height() > pair.high.height() || out.width() > pair.high.width()) {
      throw ShapeError("method " + method.name + " produced a grid larger than the reference");
    }
    // Trailing trim of the reference to the method's output grid.
    auto ref = pair.high.window(0, 0, out.height(), out.width());

    std::vector<Region> regions{{"domain", 0, 0, out.height(), out.width()}};
    regions.insert(regions.end(), opts.regions.begin(), opts.regions.end());
    for (const auto& region : regions) {
      if (region.top < 0 || region.left < 0 || region.height < 8 || region.width < 8 ||
          region.top + region.height > out.height() || region.left + region.width > out.width()) {
        throw BoundsError("region '" + region.name + "' does not fit the evaluated domain");
      }
      for (auto v : kPredictands) {
        auto a = ref.channel(v).narrow(0, region.top, region.height).narrow(1, region.left, region.width);
        auto b = out.channel(v).narrow(0, region.top, region.height).narrow(1, region.left, region.width);
        MetricRow row;
        row.method = method.name;
        row.component = std::string(variable_name(v));
        row.timestamp = pair.timestamp;
        row.month = month;
        row.region = region.name;
        row.rmse = rmse(a, b);
        row.lsd = lsd(rapsd(a), rapsd(b), opts.lsd_floor);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

}  // namespace

std::vector<MetricRow> evaluate(std::span<const SamplePair> pairs, std::span<const Method> methods,
                                const EvalOptions& opts) {
  if (pairs.empty()) throw ConfigError("no test pairs to evaluate");
  if (methods.empty()) throw ConfigError("no evaluation methods given");
  if (opts.workers < 1) throw ConfigError("workers must be >= 1");
  std::vector<std::vector<MetricRow>> per_pair(pairs.size());
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(opts.workers), pairs.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < pairs.size(); ++i) per_pair[i] = evaluate_pair(pairs[i], methods, opts);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < pairs.size(); i += workers) {
            per_pair[i] = evaluate_pair(pairs[i], methods, opts);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<MetricRow> rows;
  for (auto& p : per_pair) rows.insert(rows.end(), p.begin(), p.end());
  return rows;
}

}  // namespace windscale
