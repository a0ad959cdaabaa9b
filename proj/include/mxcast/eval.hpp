// Copyright 2026 The mxcast Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MXCAST__EVAL_HPP_
#define MXCAST__EVAL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "mxcast/data.hpp"
#include "mxcast/geometry.hpp"
#include "mxcast/model.hpp"

namespace mxcast::eval {

/// Displacement errors of one pedestrian's forecast against ground truth:
/// mean over the horizon and final step.
struct PedMetric {
  std::int64_t ped_id{0};
  std::int64_t start_frame{0};
  double mean_err{0.0};
  double final_err{0.0};
  double angular_err_deg{0.0};
  double mean_gt_speed{0.0};
  int steps{0};
};

struct VelocityBinMetric {
  double lo{0.0};
  double hi{0.0};
  double mad{0.0};
  int count{0};
};

struct MetricReport {
  double mad{0.0};            // averaged per pedestrian
  double mad_per_point{0.0};  // averaged over all predicted points
  double fad{0.0};
  double mean_angular_error_deg{0.0};
  std::vector<PedMetric> per_ped;
  std::vector<VelocityBinMetric> velocity_bins;
  int windows{0};
  int skipped{0};
};

/// (MAD, FAD) of aligned position sequences; every inner vector is one
/// pedestrian's horizon.
std::pair<double, double> mad_fad(const std::vector<std::vector<Position>> & pred,
                                  const std::vector<std::vector<Position>> & gt);

/// (MAD, FAD) of a forecast against the ground-truth scene; pedestrians and
/// frames are matched by id; a mismatch throws.
std::pair<double, double> mad_fad(const model::ForecastResult & pred, const Scene & gt);

/// Mean wrapped absolute angle difference, degrees in [0, 180].
double angular_error_deg(const std::vector<double> & pred_rad,
                         const std::vector<double> & gt_rad);

/// Jammalamadaka-Sarma circular correlation coefficient.
double circular_correlation(const std::vector<double> & a, const std::vector<double> & b);

/// Forecasts every window and scores it against `gt_windows` (same order,
/// same pedestrians; pass the same vector twice for clean evaluation).
MetricReport evaluate_windows(const model::MxLstmModel & m,
                              const std::vector<data::SceneWindow> & input_windows,
                              const std::vector<data::SceneWindow> & gt_windows,
                              const model::ForecastOptions & opt = {});

struct TrackOmega {
  std::int64_t ped_id{0};
  double mean_omega_deg{0.0};
  double mean_speed{0.0};
  int frames{0};
};

struct VelocityBinCorr {
  double center{0.0};
  double corr{0.0};
  int count{0};
};

struct CorrelationReport {
  double overall_corr{0.0};
  long overall_count{0};
  std::vector<TrackOmega> per_track;      // sorted by mean omega ascending
  std::vector<double> smoothed_speed;     // window-10 moving average over per_track order
  std::vector<VelocityBinCorr> bins;
  double velocity_threshold{0.45};
  double bin_half_width_frac{0.01};
};

/// Head-pose versus motion-direction analysis: per-frame alpha, beta and
/// omega = |alpha - beta| wrapped, overall and velocity-binned circular
/// correlation. Frames slower than the threshold (or with zero displacement)
/// are dropped; bins with fewer than 3 samples are omitted.
CorrelationReport motivation_analysis(const Scene & scene, double velocity_threshold = 0.45,
                                      double bin_half_width_frac = 0.01, int num_bins = 50);

std::string metric_report_text(const MetricReport & r);
std::string metric_report_csv(const MetricReport & r);
std::string correlation_report_text(const CorrelationReport & r);
std::string correlation_report_csv(const CorrelationReport & r);
std::string forecast_tsv(const model::ForecastResult & fr);

}  // namespace mxcast::eval

#endif  // MXCAST__EVAL_HPP_
