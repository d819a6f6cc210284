#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ganaug/csv.hpp"
#include "ganaug/error.hpp"
#include "ganaug/image.hpp"
#include "ganaug/parallel.hpp"
#include "ganaug/rng.hpp"

namespace ganaug {

enum class SsimChannelPolicy {
  Luma,            // scores on the BT.601 luma plane
  PerChannelMean,  // scores each RGB channel, averages the three
};

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double dynamic_range = 255.0;
  SsimChannelPolicy channel_policy = SsimChannelPolicy::Luma;

  double c1() const { return (0.01 * dynamic_range) * (0.01 * dynamic_range); }
  double c2() const { return (0.03 * dynamic_range) * (0.03 * dynamic_range); }

  // Normalized 1-D Gaussian taps; the separable 2-D window sums to 1.
  std::vector<double> window_1d() const {
    std::vector<double> w(static_cast<std::size_t>(window));
    double center = (window - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < window; ++i) {
      double d = i - center;
      w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
      total += w[static_cast<std::size_t>(i)];
    }
    for (auto& v : w) v /= total;
    return w;
  }
};

namespace detail {

// Forces v through a genuine double so FP contraction cannot fuse the
// producing multiply into a neighbouring add; keeps the ssim ratio exactly 1
// on identical inputs.
inline double pin_rounding(double v) {
  volatile double pinned = v;
  return pinned;
}

// Valid-mode separable filtering: horizontal then vertical pass.
inline std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                        const std::vector<double>& taps) {
  int k = static_cast<int>(taps.size());
  int ow = w - k + 1;
  int oh = h - k + 1;
  std::vector<double> horiz(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    const double* src = plane.data() + static_cast<std::size_t>(y) * w;
    double* dst = horiz.data() + static_cast<std::size_t>(y) * ow;
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += taps[static_cast<std::size_t>(i)] * src[x + i];
      dst[x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    double* dst = out.data() + static_cast<std::size_t>(y) * ow;
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i)
        acc += taps[static_cast<std::size_t>(i)] * horiz[static_cast<std::size_t>(y + i) * ow + x];
      dst[x] = acc;
    }
  }
  return out;
}

inline double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, int h, int w,
                         const SsimConfig& cfg) {
  auto taps = cfg.window_1d();
  std::size_t n = a.size();
  std::vector<double> a2(n), b2(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    a2[i] = a[i] * a[i];
    b2[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  auto mu_a = filter_valid(a, h, w, taps);
  auto mu_b = filter_valid(b, h, w, taps);
  auto s_a2 = filter_valid(a2, h, w, taps);
  auto s_b2 = filter_valid(b2, h, w, taps);
  auto s_ab = filter_valid(ab, h, w, taps);

  double c1 = cfg.c1(), c2 = cfg.c2();
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    double ma = mu_a[i], mb = mu_b[i];
    double paa = pin_rounding(ma * ma);
    double pbb = pin_rounding(mb * mb);
    double pab = pin_rounding(ma * mb);
    double va = pin_rounding(s_a2[i] - paa);
    double vb = pin_rounding(s_b2[i] - pbb);
    double cov = pin_rounding(s_ab[i] - pab);
    // identical inputs make every term bitwise equal, so the ratio is an
    // exact 1 (2x is written x+x to keep both sides pure sums)
    double num = (pab + pab + c1) * (cov + cov + c2);
    double den = (paa + pbb + c1) * (va + vb + c2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

inline std::vector<double> luma_plane(const Image& img) {
  std::vector<double> out(static_cast<std::size_t>(img.height) * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out[static_cast<std::size_t>(y) * img.width + x] =
          0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
  return out;
}

inline std::vector<double> channel_plane(const Image& img, int c) {
  std::vector<double> out(static_cast<std::size_t>(img.height) * img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out[static_cast<std::size_t>(y) * img.width + x] = img.at(y, x, c);
  return out;
}

}  // namespace detail

// Mean structural similarity over all stride-1 valid window positions.
inline double ssim_pair(const Image& a, const Image& b, const SsimConfig& cfg = {}) {
  require(a.height == b.height && a.width == b.width, ErrorKind::DimensionMismatch,
          "ssim_pair requires equal image dimensions");
  require(a.height >= cfg.window && a.width >= cfg.window, ErrorKind::DimensionMismatch,
          "image smaller than the ssim window");
  if (cfg.channel_policy == SsimChannelPolicy::Luma) {
    return detail::ssim_plane(detail::luma_plane(a), detail::luma_plane(b), a.height, a.width, cfg);
  }
  double total = 0.0;
  for (int c = 0; c < 3; ++c)
    total +=
        detail::ssim_plane(detail::channel_plane(a, c), detail::channel_plane(b, c), a.height,
                           a.width, cfg);
  return total / 3.0;
}

// How each generated image is scored against the sampled real set.
enum class PairingPolicy { MaxOverSample, MeanOverSample };

struct SsimReportRow {
  std::string class_name;
  double max_ssim = 0.0;
  double mean_ssim = 0.0;
  double min_ssim = 0.0;
};

struct SsimReport {
  std::vector<SsimReportRow> rows;
};

// Per class: each generated image gets one score against a seeded sample of
// at most sample_cap real images (max or mean over the sample); the row
// aggregates max/mean/min of those per-image scores.
inline SsimReport ssim_report(const std::vector<std::string>& class_names,
                              const std::vector<std::vector<Image>>& generated,
                              const std::vector<std::vector<Image>>& real,
                              const SsimConfig& cfg = {},
                              PairingPolicy policy = PairingPolicy::MaxOverSample,
                              std::size_t sample_cap = 100, std::uint64_t seed = 0) {
  require(class_names.size() == generated.size() && class_names.size() == real.size(),
          ErrorKind::ShapeMismatch, "ssim_report class list mismatch");
  SsimReport report;
  Rng rng(seed);
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    const auto& gen = generated[c];
    const auto& ref = real[c];
    require(!gen.empty(), ErrorKind::EmptyClass, "no generated images for " + class_names[c]);
    require(!ref.empty(), ErrorKind::EmptyClass, "no real images for " + class_names[c]);

    std::vector<std::size_t> sample(ref.size());
    for (std::size_t i = 0; i < sample.size(); ++i) sample[i] = i;
    if (ref.size() > sample_cap) {
      Rng class_rng = rng.split(c);
      class_rng.shuffle(sample);
      sample.resize(sample_cap);
      std::sort(sample.begin(), sample.end());
    }

    std::vector<double> scores(gen.size());
    parallel_for(0, static_cast<std::int64_t>(gen.size()), [&](std::int64_t i) {
      double best = -2.0;
      double total = 0.0;
      for (std::size_t j : sample) {
        double s = ssim_pair(gen[static_cast<std::size_t>(i)], ref[j], cfg);
        best = std::max(best, s);
        total += s;
      }
      scores[static_cast<std::size_t>(i)] = policy == PairingPolicy::MaxOverSample
                                                ? best
                                                : total / static_cast<double>(sample.size());
    });

    SsimReportRow row;
    row.class_name = class_names[c];
    row.max_ssim = scores[0];
    row.min_ssim = scores[0];
    double total = 0.0;
    for (double s : scores) {  // index order keeps the aggregation deterministic
      row.max_ssim = std::max(row.max_ssim, s);
      row.min_ssim = std::min(row.min_ssim, s);
      total += s;
    }
    row.mean_ssim = total / static_cast<double>(scores.size());
    report.rows.push_back(row);
  }
  return report;
}

inline void write_ssim_csv(const SsimReport& report, const std::string& path) {
  CsvTable table;
  table.header = {"class", "max", "mean", "min"};
  for (const auto& row : report.rows)
    table.rows.push_back(
        {row.class_name, csv_float(row.max_ssim), csv_float(row.mean_ssim),
         csv_float(row.min_ssim)});
  table.write(path);
}

}  // namespace ganaug
