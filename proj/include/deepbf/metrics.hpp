// Image-quality metrics on log-compressed B-mode images.
#pragma once

#include <span>
#include <vector>

#include "deepbf/core.hpp"

namespace deepbf {

/// Region of interest in pixel coordinates (row = depth index, col = lateral index).
/// Disks and annuli are elliptical in index space so they can stay circular in
/// meters when rows and columns have different spacing.
struct Roi {
  enum class Kind { Disk, Annulus, Rect };
  Kind kind = Kind::Disk;
  double center_row = 0.0;
  double center_col = 0.0;
  double radius_rows = 0.0;  // disk / outer annulus radius
  double radius_cols = 0.0;
  double inner_scale = 0.0;  // annulus: inner radius = inner_scale * outer radius
  std::size_t row0 = 0, col0 = 0, row1 = 0, col1 = 0;  // rect, half-open

  static Roi disk(double row, double col, double radius_rows, double radius_cols);
  static Roi annulus(double row, double col, double outer_rows, double outer_cols,
                     double inner_scale);
  static Roi rect(std::size_t row0, std::size_t col0, std::size_t row1, std::size_t col1);

  bool contains(std::size_t r, std::size_t c) const;
  /// Flat indices (r * cols + c) of member pixels. Throws if the ROI is empty
  /// or leaves the image.
  std::vector<std::size_t> pixels(std::size_t rows, std::size_t cols) const;
};

std::vector<double> roi_values(const BModeImage& image, const Roi& roi);

/// |mu_t - mu_b| / sqrt(var_t + var_b), population variances, dB domain.
double cnr(const BModeImage& image, const Roi& target, const Roi& background);
double cnr_values(std::span<const double> target, std::span<const double> background);

/// 1 - histogram overlap on a shared uniform grid over the pooled range.
double gcnr(const BModeImage& image, const Roi& target, const Roi& background, int n_bins = 256);
double gcnr_values(std::span<const double> target, std::span<const double> background,
                   int n_bins = 256);

/// 10 log10(DR^2 / MSE); +infinity for identical images.
double psnr(const BModeImage& reference, const BModeImage& test);

/// Mean SSIM over all valid 11x11 Gaussian (sigma 1.5) windows, K1 = 0.01,
/// K2 = 0.03, L = dynamic range. Pixels are shifted to [0, DR] first.
double ssim(const BModeImage& reference, const BModeImage& test);

/// Cyst ROIs: target disk at 0.8 x radius, background annulus of equal area
/// starting at 1.2 x radius. Geometry is mapped to pixels using the depth grid
/// (start, step) and the lateral pitch between columns.
struct CystRois {
  Roi target;
  Roi background;
};
CystRois cyst_rois(double center_x_m, double center_z_m, double radius_m, double depth_start_m,
                   double depth_step_m, double lateral_start_m, double lateral_step_m);

}  // namespace deepbf
