#pragma once

// Lidar-driven sheet refinement: fits vertex log-depths (and optionally
// lattice offsets) to sparse depth with a Laplacian smoothness prior.
//
// The data model is the sheet's own source-view depth render: a lidar pixel
// inside face (a, b, c) with screen barycentrics (ba, bb, bc) sees
//   D = 1 / (ba / za + bb / zb + bc / zc),
// which is what the rasterizer produces for the identity pose.

#include <string>
#include <vector>

#include "sheetwarp/geometry.hpp"
#include "sheetwarp/image.hpp"
#include "sheetwarp/sheet.hpp"

namespace sheetwarp {

struct RefineConfig {
  int max_iters = 500;
  double step = 0.1;  ///< largest log-depth change per iteration
  double lambda_smooth = 0.05;
  double tol = 1e-6;  ///< relative improvement below which we stop
  bool optimize_offsets = false;
  double huber_delta = 0.01;  ///< in far-plane-normalized depth
  double far_plane = 1000.0;
  // Term weights. Only the direct depth term is optimized; the image and
  // rendered-depth weights are carried for weighted_objective().
  double lambda_img = 1.0;
  double lambda_direct = 1.0;
  double lambda_rendered = 1.0;

  void validate() const;
};

enum class RefineStatus { Converged, MaxIters, StepUnderflow };

std::string to_string(RefineStatus s);

struct RefineResult {
  WorldSheet sheet;
  std::vector<double> trace;  ///< objective before the first step, then after every accepted step
  int iterations = 0;
  RefineStatus status = RefineStatus::Converged;
};

struct ObjectiveValue {
  double total = 0.0;
  double data = 0.0;    ///< weighted Huber direct-depth term
  double smooth = 0.0;  ///< weighted Laplacian term
  std::vector<double> grad_z;   ///< d total / d z per vertex
  std::vector<double> grad_du;  ///< d total / d du (cells); empty unless offsets are optimized
  std::vector<double> grad_dv;
};

/// Refine objective and its analytic gradient at the current sheet.
ObjectiveValue refine_objective(const WorldSheet& sheet, const DepthMap& lidar, const RefineConfig& cfg);

RefineResult refine_sheet(const WorldSheet& sheet, const DepthMap& lidar, const CameraModel& camera,
                          const RefineConfig& cfg = {});

/// Analytic vs central-difference gradient (h = 1e-4 z per vertex, 1e-4 cell
/// for offsets). Returns max|a - n| / max(|a|_inf, |n|_inf), or the absolute
/// max difference when both gradients vanish.
double gradient_check(const WorldSheet& sheet, const DepthMap& lidar, const CameraModel& camera,
                      const RefineConfig& cfg = {});

/// lambda_img * l_im + lambda_direct * l_direct + lambda_rendered * l_rendered.
double weighted_objective(double l_im, double l_direct, double l_rendered, const RefineConfig& cfg);

}  // namespace sheetwarp
