#include <doctest.h>

#include <algorithm>
#include <complex>

#include "support.hpp"
#include "windscale/error.hpp"
#include "windscale/inference.hpp"
#include "windscale/metrics.hpp"
#include "windscale/synth.hpp"

using namespace windscale;

namespace {

/// Direct O(N^4) DFT with the documented ring binning.
Rapsd dft_oracle(const torch::Tensor& x) {
  const auto H = x.size(0), W = x.size(1);
  auto a = x.accessor<double, 2>();
  const auto m = std::min(H, W);
  const auto rings = m / 2;
  std::vector<double> sum(rings + 1, 0.0);
  std::vector<std::int64_t> cnt(rings + 1, 0);
  auto freq = [](std::int64_t k, std::int64_t n) {
    return static_cast<double>(k < (n + 1) / 2 ? k : k - n) / static_cast<double>(n);
  };
  for (std::int64_t ky = 0; ky < H; ++ky) {
    for (std::int64_t kx = 0; kx < W; ++kx) {
      std::complex<double> acc = 0.0;
      for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t xx = 0; xx < W; ++xx)
          acc += a[y][xx] * std::polar(1.0, -2.0 * M_PI *
                                                (static_cast<double>(ky * y) / H +
                                                 static_cast<double>(kx * xx) / W));
      const double fy = freq(ky, H), fx = freq(kx, W);
      const auto ring =
          static_cast<std::int64_t>(std::llround(std::sqrt(fy * fy + fx * fx) * m));
      if (ring < 1 || ring > rings) continue;
      sum[ring] += std::norm(acc) / static_cast<double>(H * W);
      ++cnt[ring];
    }
  }
  Rapsd out;
  out.cells = H * W;
  for (std::int64_t r = 1; r <= rings; ++r) {
    out.wavenumber.push_back(static_cast<double>(r) / m);
    out.power.push_back(sum[r] / cnt[r]);
    out.counts.push_back(cnt[r]);
  }
  return out;
}

Rapsd scaled(Rapsd s, double f) {
  for (auto& p : s.power) p *= f;
  return s;
}

/// Red-spectrum random field standing in for a smooth geophysical field.
torch::Tensor red_field(std::int64_t h, std::int64_t w, std::uint64_t seed) {
  auto rng = make_engine(seed, 99);
  return power_law_field(h, w, 3.0, rng) * 4.0 + 1.0;
}

std::vector<MetricRow> sample_rows() {
  std::vector<MetricRow> rows;
  const double r[3][2] = {{1.0, 1.2}, {2.0, 2.5}, {1.5, 1.1}};
  const char* methods[3] = {"model", "bilinear", "nearest"};
  for (int m = 0; m < 3; ++m)
    for (int t = 0; t < 3; ++t)
      for (const char* comp : {"u10", "v10"}) {
        MetricRow row{methods[m], comp, "2021-0" + std::to_string(1 + t % 2) + "-01T0" + std::to_string(t),
                      "2021-0" + std::to_string(1 + t % 2), "domain",
                      r[m][0] + 0.1 * t, r[m][1] + 0.05 * t};
        rows.push_back(row);
      }
  return rows;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("rmse examples and metric axioms") {
    const auto a = wt::randn64({5, 7}, 1);
    CHECK(rmse(a, a) == 0.0);
    CHECK(rmse(a, a + 2.0) == doctest::Approx(2.0).epsilon(1e-12));
    const auto z = torch::zeros({2}, torch::kFloat64);
    const auto b = torch::tensor({3.0, 4.0}, torch::kFloat64);
    CHECK(rmse(z, b) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
    CHECK(rmse(z, b) == doctest::Approx(3.5355).epsilon(1e-4));
    CHECK_THROWS_AS(rmse(a, wt::randn64({7, 5}, 1)), ShapeError);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto x = wt::randn64({16}, 3 * s), y = wt::randn64({16}, 3 * s + 1),
                 w = wt::randn64({16}, 3 * s + 2);
      CHECK(std::abs(rmse(x, y) - rmse(y, x)) <= 1e-9);
      CHECK(rmse(x, w) <= rmse(x, y) + rmse(y, w) + 1e-9);
      CHECK(rmse(x, y) >= 0.0);
    }
  }

  TEST_CASE("rapsd of a constant field is zero in every ring") {
    const auto s = rapsd(torch::full({16, 24}, 3.0, torch::kFloat64));
    CHECK(s.size() == 8);
    CHECK(*std::max_element(s.power.begin(), s.power.end()) <= 1e-20);
    CHECK_THROWS_AS(rapsd(torch::zeros({4, 16}, torch::kFloat64)), ShapeError);
    CHECK_THROWS_AS(rapsd(torch::zeros({2, 8, 8}, torch::kFloat64)), ShapeError);
  }

  TEST_CASE("a pure cosine lands in its ring") {
    const std::int64_t n = 64, q = 5;
    const auto j = torch::arange(n, torch::kFloat64);
    const auto x = torch::cos(j * (2.0 * M_PI * q / n)).unsqueeze(0).expand({n, n}).contiguous();
    const auto s = rapsd(x);
    double total = 0;
    for (std::size_t i = 0; i < s.size(); ++i) total += s.power[i] * s.counts[i];
    const double in_ring = s.power[q - 1] * s.counts[q - 1];
    CHECK(s.wavenumber[q - 1] == doctest::Approx(static_cast<double>(q) / n));
    CHECK(in_ring / total > 0.99);
  }

  TEST_CASE("rapsd matches the direct DFT oracle on 8x8 fields") {
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto x = wt::randn64({8, 8}, seed);
      const auto fast = rapsd(x), slow = dft_oracle(x);
      REQUIRE(fast.size() == slow.size());
      CHECK(fast.counts == slow.counts);
      CHECK(fast.wavenumber == slow.wavenumber);
      for (std::size_t i = 0; i < fast.size(); ++i) {
        CHECK(fast.power[i] == doctest::Approx(slow.power[i]).epsilon(1e-12));
      }
    }
    // Non-square: rings scale with the short side.
    const auto x = wt::randn64({8, 12}, 4);
    const auto fast = rapsd(x), slow = dft_oracle(x);
    CHECK(fast.counts == slow.counts);
    for (std::size_t i = 0; i < fast.size(); ++i)
      CHECK(fast.power[i] == doctest::Approx(slow.power[i]).epsilon(1e-12));
  }

  TEST_CASE("binned power matches the variance of red fields") {
    for (std::uint64_t seed : {1, 2, 3, 4}) {
      const auto x = red_field(64, 64, seed);
      const auto s = rapsd(x);
      const double var = x.var(false).item<double>();
      CHECK(std::abs(s.total_power() - var) / var < 0.02);
    }
  }

  TEST_CASE("lsd examples") {
    const auto a = rapsd(red_field(32, 32, 5)), b = rapsd(red_field(32, 32, 6));
    CHECK(lsd(a, a) == 0.0);
    CHECK(lsd(a, scaled(a, 0.1)) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(lsd(a, b) == lsd(b, a));
    CHECK(lsd(a, b) > 0.0);

    const auto flat = rapsd(torch::full({16, 16}, 1.0, torch::kFloat64));
    const auto ref16 = rapsd(red_field(16, 16, 1));
    try {
      lsd(ref16, flat);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("ring") != std::string::npos);
    }
    CHECK(std::isfinite(lsd(ref16, flat, 1e-12)));
    CHECK_THROWS_AS(lsd(a, ref16), ShapeError);
  }

  TEST_CASE("median and MAD") {
    const auto m = median_mad({1.0, 2.0, 3.0});
    CHECK(m.median == 2.0);
    CHECK(m.mad == 1.0);
    const auto c = median_mad({4.0, 4.0, 4.0, 4.0});
    CHECK(c.median == 4.0);
    CHECK(c.mad == 0.0);
    CHECK(median_mad({3.0, 1.0, 4.0, 2.0}).median == 2.5);
    CHECK_THROWS_AS(median_mad({}), ConfigError);
  }

  TEST_CASE("reports round-trip exactly") {
    auto rows = sample_rows();
    rows[0].rmse = 0.1 + 0.2;
    rows[1].lsd = 1.0 / 3.0;
    CHECK((parse_report(format_report(rows)) == rows));
    wt::TempDir dir("report");
    save_report(dir.path / "r.tsv", rows);
    CHECK((load_report(dir.path / "r.tsv") == rows));
    CHECK_THROWS_AS(parse_report("method\tcomponent\n"), FileError);
  }

  TEST_CASE("aggregate is permutation invariant and pools months") {
    auto rows = sample_rows();
    const auto agg = aggregate(rows);
    std::reverse(rows.begin(), rows.end());
    std::swap(rows[2], rows[7]);
    const auto agg2 = aggregate(rows);
    REQUIRE(agg.size() == agg2.size());
    for (std::size_t i = 0; i < agg.size(); ++i) {
      CHECK(agg[i].method == agg2[i].method);
      CHECK(agg[i].month == agg2[i].month);
      CHECK(agg[i].rmse.median == agg2[i].rmse.median);
      CHECK(agg[i].lsd.mad == agg2[i].lsd.mad);
    }
    // 3 methods x 2 components x (2 months + pooled).
    CHECK(agg.size() == 18);
    const auto pooled = std::find_if(agg.begin(), agg.end(), [](const AggregateRow& r) {
      return r.method == "model" && r.component == "u10" && r.month == "all";
    });
    REQUIRE(pooled != agg.end());
    CHECK(pooled->n == 3);
    CHECK(pooled->rmse.median == doctest::Approx(1.1));
  }

  TEST_CASE("table highlights the best method per column") {
    const auto table = format_table(aggregate(sample_rows()));
    INFO(table);
    CHECK(table.find("*1.100 (0.100)*") != std::string::npos);
    CHECK(table.find("RMSE u10") != std::string::npos);
    CHECK(table.find("LSD v10") != std::string::npos);
    CHECK(table.find("bilinear") != std::string::npos);
    // nearest has the lowest LSD medians.
    CHECK(table.find("*1.150 (0.050)*") != std::string::npos);
  }

  TEST_CASE("evaluate: truth oracle scores zero, baselines are ordered") {
    const auto& data = wt::shared_dataset();
    std::vector<Method> methods{
        {"truth", [](const SamplePair& p) { return p.high; }},
        {"nearest",
         [](const SamplePair& p) { return downscale_baseline(p.low, BaselineMethod::Nearest); }},
        {"bilinear",
         [](const SamplePair& p) { return downscale_baseline(p.low, BaselineMethod::Bilinear); }},
    };
    EvalOptions opts;
    opts.regions = {Region{"corner", 0, 0, 32, 32}};
    opts.workers = 2;
    const auto rows = evaluate(data.test, methods, opts);
    CHECK(rows.size() == data.test.size() * 3 * 2 * 2);
    CHECK(rows[0].method == "truth");
    CHECK(rows[0].region == "domain");
    CHECK(rows[0].timestamp == data.test[0].timestamp);
    for (const auto& r : rows) {
      if (r.method == "truth") {
        CHECK(r.rmse == 0.0);
        CHECK(r.lsd == 0.0);
      }
    }
    std::vector<double> ln, lb;
    for (const auto& r : rows) {
      if (r.region != "domain") continue;
      if (r.method == "nearest") ln.push_back(r.lsd);
      if (r.method == "bilinear") lb.push_back(r.lsd);
    }
    CHECK(median_mad(lb).median > median_mad(ln).median);

    // Identical rows regardless of worker count.
    opts.workers = 1;
    CHECK((evaluate(data.test, methods, opts) == rows));

    opts.regions = {Region{"outside", 40, 40, 32, 32}};
    CHECK_THROWS_AS(evaluate(data.test, methods, opts), BoundsError);
  }

  TEST_CASE("cutoff wavenumber") {
    CHECK(cutoff_wavenumber_per_km(2.5) == doctest::Approx(0.05));
    CHECK(cutoff_wavenumber_per_km(1.0, 4) == doctest::Approx(0.25));
  }
}
