#include "deepbf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace deepbf {

Roi Roi::disk(double row, double col, double radius_rows, double radius_cols) {
  Roi r;
  r.kind = Kind::Disk;
  r.center_row = row;
  r.center_col = col;
  r.radius_rows = radius_rows;
  r.radius_cols = radius_cols;
  return r;
}

Roi Roi::annulus(double row, double col, double outer_rows, double outer_cols, double inner_scale) {
  Roi r = disk(row, col, outer_rows, outer_cols);
  r.kind = Kind::Annulus;
  r.inner_scale = inner_scale;
  return r;
}

Roi Roi::rect(std::size_t row0, std::size_t col0, std::size_t row1, std::size_t col1) {
  Roi r;
  r.kind = Kind::Rect;
  r.row0 = row0;
  r.col0 = col0;
  r.row1 = row1;
  r.col1 = col1;
  return r;
}

bool Roi::contains(std::size_t r, std::size_t c) const {
  if (kind == Kind::Rect) return r >= row0 && r < row1 && c >= col0 && c < col1;
  const double dr = (static_cast<double>(r) - center_row) / radius_rows;
  const double dc = (static_cast<double>(c) - center_col) / radius_cols;
  const double rho2 = dr * dr + dc * dc;
  if (rho2 > 1.0) return false;
  return kind == Kind::Disk || rho2 >= inner_scale * inner_scale;
}

std::vector<std::size_t> Roi::pixels(std::size_t rows, std::size_t cols) const {
  double rmin, rmax, cmin, cmax;
  if (kind == Kind::Rect) {
    rmin = static_cast<double>(row0);
    rmax = static_cast<double>(row1) - 1;
    cmin = static_cast<double>(col0);
    cmax = static_cast<double>(col1) - 1;
  } else {
    if (!(radius_rows > 0 && radius_cols > 0)) throw Error("ROI radius must be > 0");
    rmin = std::ceil(center_row - radius_rows);
    rmax = std::floor(center_row + radius_rows);
    cmin = std::ceil(center_col - radius_cols);
    cmax = std::floor(center_col + radius_cols);
  }
  if (rmin < 0 || cmin < 0 || rmax >= static_cast<double>(rows) || cmax >= static_cast<double>(cols))
    throw Error("ROI extends outside the image");
  std::vector<std::size_t> out;
  for (auto r = static_cast<std::size_t>(std::max(rmin, 0.0)); static_cast<double>(r) <= rmax; ++r)
    for (auto c = static_cast<std::size_t>(std::max(cmin, 0.0)); static_cast<double>(c) <= cmax; ++c)
      if (contains(r, c)) out.push_back(r * cols + c);
  if (out.empty()) throw Error("ROI contains no pixels");
  return out;
}

std::vector<double> roi_values(const BModeImage& image, const Roi& roi) {
  std::vector<double> v;
  for (std::size_t idx : roi.pixels(image.rows(), image.cols())) v.push_back(image.pixels_db.data[idx]);
  return v;
}

namespace {

struct Moments {
  double mean;
  double var;
};

Moments moments(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, ss / n};
}

void check_rois(const BModeImage& image, const Roi& target, const Roi& background) {
  const auto t = target.pixels(image.rows(), image.cols());
  const auto b = background.pixels(image.rows(), image.cols());
  if (t.size() < 16 || b.size() < 16) throw Error("ROIs need at least 16 pixels each");
  std::vector<std::size_t> ts(t), bs(b);
  std::sort(ts.begin(), ts.end());
  std::sort(bs.begin(), bs.end());
  std::vector<std::size_t> common;
  std::set_intersection(ts.begin(), ts.end(), bs.begin(), bs.end(), std::back_inserter(common));
  if (!common.empty()) throw Error("target and background ROIs overlap");
}

}  // namespace

double cnr_values(std::span<const double> target, std::span<const double> background) {
  if (target.empty() || background.empty()) throw Error("cnr needs non-empty ROIs");
  const auto t = moments(target), b = moments(background);
  const double joint = t.var + b.var;
  if (!(joint > 0)) throw Error("cnr undefined: zero variance in both ROIs");
  return std::abs(t.mean - b.mean) / std::sqrt(joint);
}

double cnr(const BModeImage& image, const Roi& target, const Roi& background) {
  check_rois(image, target, background);
  return cnr_values(roi_values(image, target), roi_values(image, background));
}

double gcnr_values(std::span<const double> target, std::span<const double> background, int n_bins) {
  if (target.empty() || background.empty()) throw Error("gcnr needs non-empty ROIs");
  if (n_bins < 1) throw Error("gcnr needs at least one bin");
  const auto [t_lo, t_hi] = std::minmax_element(target.begin(), target.end());
  const auto [b_lo, b_hi] = std::minmax_element(background.begin(), background.end());
  const double lo = std::min(*t_lo, *b_lo), hi = std::max(*t_hi, *b_hi);
  if (!(hi > lo)) throw Error("gcnr undefined: both ROIs are the same constant");

  const auto bin = [&](double v) {
    const auto k = static_cast<int>(std::floor((v - lo) / (hi - lo) * n_bins));
    return std::clamp(k, 0, n_bins - 1);
  };
  std::vector<double> ht(static_cast<std::size_t>(n_bins)), hb(static_cast<std::size_t>(n_bins));
  for (double v : target) ht[bin(v)] += 1.0;
  for (double v : background) hb[bin(v)] += 1.0;
  const double nt = static_cast<double>(target.size()), nb = static_cast<double>(background.size());
  double overlap = 0.0;
  for (int k = 0; k < n_bins; ++k) overlap += std::min(ht[k] / nt, hb[k] / nb);
  return std::clamp(1.0 - overlap, 0.0, 1.0);
}

double gcnr(const BModeImage& image, const Roi& target, const Roi& background, int n_bins) {
  check_rois(image, target, background);
  return gcnr_values(roi_values(image, target), roi_values(image, background), n_bins);
}

double psnr(const BModeImage& reference, const BModeImage& test) {
  if (reference.rows() != test.rows() || reference.cols() != test.cols())
    throw Error("psnr: image shapes differ");
  double se = 0.0;
  for (std::size_t k = 0; k < reference.pixels_db.data.size(); ++k) {
    const double d = reference.pixels_db.data[k] - test.pixels_db.data[k];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(reference.pixels_db.data.size());
  const double peak = reference.dynamic_range_db;
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_taps() {
  std::vector<double> w(kWindow);
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double x = i - kWindow / 2;
    w[i] = std::exp(-x * x / (2.0 * kSigma * kSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable 'valid' Gaussian filtering.
Grid filter_valid(const Grid& in, const std::vector<double>& taps) {
  const std::size_t out_r = in.rows - kWindow + 1, out_c = in.cols - kWindow + 1;
  Grid tmp(in.rows, out_c);
  for (std::size_t r = 0; r < in.rows; ++r)
    for (std::size_t c = 0; c < out_c; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[k] * in(r, c + k);
      tmp(r, c) = acc;
    }
  Grid out(out_r, out_c);
  for (std::size_t r = 0; r < out_r; ++r)
    for (std::size_t c = 0; c < out_c; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[k] * tmp(r + k, c);
      out(r, c) = acc;
    }
  return out;
}

}  // namespace

double ssim(const BModeImage& reference, const BModeImage& test) {
  if (reference.rows() != test.rows() || reference.cols() != test.cols())
    throw Error("ssim: image shapes differ");
  if (reference.rows() < kWindow || reference.cols() < kWindow)
    throw Error("ssim needs images of at least 11x11 pixels");

  const double L = reference.dynamic_range_db;
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  const std::size_t n = reference.pixels_db.data.size();
  Grid x(reference.rows(), reference.cols()), y(x.rows, x.cols), xx(x.rows, x.cols),
      yy(x.rows, x.cols), xy(x.rows, x.cols);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = reference.pixels_db.data[k] + L, b = test.pixels_db.data[k] + L;
    x.data[k] = a;
    y.data[k] = b;
    xx.data[k] = a * a;
    yy.data[k] = b * b;
    xy.data[k] = a * b;
  }
  const auto taps = gaussian_taps();
  const Grid mx = filter_valid(x, taps), my = filter_valid(y, taps), sxx = filter_valid(xx, taps),
             syy = filter_valid(yy, taps), sxy = filter_valid(xy, taps);
  double total = 0.0;
  for (std::size_t k = 0; k < mx.data.size(); ++k) {
    const double mux = mx.data[k], muy = my.data[k];
    const double vx = sxx.data[k] - mux * mux, vy = syy.data[k] - muy * muy;
    const double cov = sxy.data[k] - mux * muy;
    total += ((2 * mux * muy + c1) * (2 * cov + c2)) / ((mux * mux + muy * muy + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.data.size());
}

CystRois cyst_rois(double center_x_m, double center_z_m, double radius_m, double depth_start_m,
                   double depth_step_m, double lateral_start_m, double lateral_step_m) {
  const double row = (center_z_m - depth_start_m) / depth_step_m;
  const double col = (center_x_m - lateral_start_m) / lateral_step_m;
  const double rr = radius_m / depth_step_m, rc = radius_m / lateral_step_m;
  // Annulus [1.2 R, R_out] with R_out^2 - (1.2 R)^2 = (0.8 R)^2.
  const double outer = std::sqrt(1.2 * 1.2 + 0.8 * 0.8);
  return {Roi::disk(row, col, 0.8 * rr, 0.8 * rc),
          Roi::annulus(row, col, outer * rr, outer * rc, 1.2 / outer)};
}

}  // namespace deepbf
