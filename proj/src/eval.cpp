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

#include "mxcast/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace mxcast::eval {

std::pair<double, double> mad_fad(const std::vector<std::vector<Position>> & pred,
                                  const std::vector<std::vector<Position>> & gt)
{
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("mad_fad: pedestrian count mismatch");
  }
  double mad_sum = 0.0;
  double fad_sum = 0.0;
  int peds = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != gt[i].size()) {
      throw std::invalid_argument("mad_fad: horizon length mismatch");
    }
    if (pred[i].empty()) {
      continue;
    }
    double err = 0.0;
    for (std::size_t t = 0; t < pred[i].size(); ++t) {
      err += distance(pred[i][t], gt[i][t]);
    }
    mad_sum += err / static_cast<double>(pred[i].size());
    fad_sum += distance(pred[i].back(), gt[i].back());
    ++peds;
  }
  if (peds == 0) {
    return {0.0, 0.0};
  }
  return {mad_sum / peds, fad_sum / peds};
}

std::pair<double, double> mad_fad(const model::ForecastResult & pred, const Scene & gt)
{
  std::map<std::int64_t, const PedestrianTrack *> by_id;
  for (const auto & t : gt.tracks) {
    by_id[t.ped_id] = &t;
  }
  std::vector<std::vector<Position>> p, g;
  for (const auto & pf : pred.peds) {
    auto it = by_id.find(pf.ped_id);
    if (it == by_id.end()) {
      throw std::invalid_argument("mad_fad: pedestrian " + std::to_string(pf.ped_id) +
                                  " missing from ground truth");
    }
    std::vector<Position> pp, gg;
    for (std::size_t k = 0; k < pf.steps.size(); ++k) {
      const std::int64_t frame = pf.first_pred_frame + static_cast<std::int64_t>(k);
      const auto & samples = it->second->samples;
      auto sit = std::lower_bound(samples.begin(), samples.end(), frame,
                                  [](const TrackSample & s, std::int64_t f) { return s.frame < f; });
      if (sit == samples.end() || sit->frame != frame) {
        throw std::invalid_argument("mad_fad: frame " + std::to_string(frame) +
                                    " missing for pedestrian " + std::to_string(pf.ped_id));
      }
      pp.push_back(pf.steps[k].position);
      gg.push_back(sit->position);
    }
    p.push_back(std::move(pp));
    g.push_back(std::move(gg));
  }
  return mad_fad(p, g);
}

double angular_error_deg(const std::vector<double> & pred_rad, const std::vector<double> & gt_rad)
{
  if (pred_rad.size() != gt_rad.size()) {
    throw std::invalid_argument("angular_error: length mismatch");
  }
  if (pred_rad.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < pred_rad.size(); ++k) {
    sum += std::abs(rad_to_deg(wrap_angle(pred_rad[k] - gt_rad[k])));
  }
  return sum / static_cast<double>(pred_rad.size());
}

double circular_correlation(const std::vector<double> & a, const std::vector<double> & b)
{
  if (a.size() != b.size() || a.size() < 2) {
    return 0.0;
  }
  double sa = 0.0, ca = 0.0, sb = 0.0, cb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sa += std::sin(a[k]);
    ca += std::cos(a[k]);
    sb += std::sin(b[k]);
    cb += std::cos(b[k]);
  }
  const double mean_a = std::atan2(sa, ca);
  const double mean_b = std::atan2(sb, cb);
  double num = 0.0, da2 = 0.0, db2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double da = std::sin(a[k] - mean_a);
    const double db = std::sin(b[k] - mean_b);
    num += da * db;
    da2 += da * da;
    db2 += db * db;
  }
  const double denom = std::sqrt(da2 * db2);
  if (denom < 1e-300) {
    return 0.0;
  }
  return num / denom;
}

MetricReport evaluate_windows(const model::MxLstmModel & m,
                              const std::vector<data::SceneWindow> & input_windows,
                              const std::vector<data::SceneWindow> & gt_windows,
                              const model::ForecastOptions & opt)
{
  if (input_windows.size() != gt_windows.size()) {
    throw std::invalid_argument("evaluate_windows: window count mismatch");
  }
  MetricReport report;
  report.windows = static_cast<int>(input_windows.size());
  const int t_obs = m.hp.t_obs;
  const int horizon = m.hp.pred_steps();

  double mad_sum = 0.0, fad_sum = 0.0, ang_sum = 0.0, point_sum = 0.0;
  long point_count = 0;
  int peds = 0;

  for (std::size_t w = 0; w < input_windows.size(); ++w) {
    const auto & win = input_windows[w];
    const auto & gt = gt_windows[w];
    if (win.peds.size() != gt.peds.size()) {
      throw std::invalid_argument("evaluate_windows: pedestrian mismatch in window " +
                                  std::to_string(w));
    }
    const auto fr = model::forecast(m, win, opt);
    for (std::size_t i = 0; i < fr.peds.size(); ++i) {
      const auto & pf = fr.peds[i];
      const auto & gw = gt.peds[i];
      if (static_cast<int>(pf.steps.size()) != horizon ||
          static_cast<int>(gw.pos.size()) < t_obs + horizon) {
        throw std::invalid_argument("evaluate_windows: horizon mismatch");
      }
      PedMetric pm;
      pm.ped_id = pf.ped_id;
      pm.start_frame = win.start_frame;
      pm.steps = horizon;
      std::vector<double> pred_ang, gt_ang;
      double speed_sum = 0.0;
      for (int k = 0; k < horizon; ++k) {
        const Position & gp = gw.pos[t_obs + k];
        const double e = distance(pf.steps[k].position, gp);
        pm.mean_err += e;
        point_sum += e;
        ++point_count;
        if (k == horizon - 1) {
          pm.final_err = e;
        }
        pred_ang.push_back(pf.steps[k].head_angle_rad);
        gt_ang.push_back(angle_from_vislet(Vislet{gw.anchor[t_obs + k], gp}).alpha);
        const Position & prev = gw.pos[t_obs + k - 1];
        speed_sum += distance(gp, prev) / m.hp.frame_period;
      }
      pm.mean_err /= horizon;
      pm.angular_err_deg = angular_error_deg(pred_ang, gt_ang);
      pm.mean_gt_speed = speed_sum / horizon;
      report.per_ped.push_back(pm);
      mad_sum += pm.mean_err;
      fad_sum += pm.final_err;
      ang_sum += pm.angular_err_deg;
      ++peds;
    }
  }

  if (peds > 0) {
    report.mad = mad_sum / peds;
    report.fad = fad_sum / peds;
    report.mean_angular_error_deg = ang_sum / peds;
    report.mad_per_point = point_sum / static_cast<double>(point_count);
  }

  // Velocity-binned MAD, fixed 0.25 m/s buckets.
  constexpr double kBinWidth = 0.25;
  std::map<int, std::pair<double, int>> bins;
  for (const auto & pm : report.per_ped) {
    const int b = static_cast<int>(std::floor(pm.mean_gt_speed / kBinWidth));
    bins[b].first += pm.mean_err;
    bins[b].second += 1;
  }
  for (const auto & [b, acc] : bins) {
    VelocityBinMetric vb;
    vb.lo = b * kBinWidth;
    vb.hi = (b + 1) * kBinWidth;
    vb.mad = acc.first / acc.second;
    vb.count = acc.second;
    report.velocity_bins.push_back(vb);
  }
  return report;
}

CorrelationReport motivation_analysis(const Scene & scene, double velocity_threshold,
                                      double bin_half_width_frac, int num_bins)
{
  CorrelationReport report;
  report.velocity_threshold = velocity_threshold;
  report.bin_half_width_frac = bin_half_width_frac;

  struct FrameStat {
    double alpha, beta, speed;
  };
  std::vector<FrameStat> retained;
  for (const auto & track : scene.tracks) {
    double omega_sum = 0.0;
    double speed_sum = 0.0;
    int used = 0;
    for (std::size_t k = 0; k + 1 < track.samples.size(); ++k) {
      const auto & s0 = track.samples[k];
      const auto & s1 = track.samples[k + 1];
      if (s1.frame != s0.frame + 1) {
        continue;  // gap
      }
      if (s0.position == s1.position) {
        continue;  // beta undefined
      }
      const double speed = distance(s0.position, s1.position) / scene.frame_period;
      if (speed < velocity_threshold) {
        continue;
      }
      const double alpha = angle_from_vislet(s0.vislet).alpha;
      const double beta = movement_angle(s0.position, s1.position).alpha;
      retained.push_back({alpha, beta, speed});
      omega_sum += std::abs(rad_to_deg(wrap_angle(alpha - beta)));
      speed_sum += speed;
      ++used;
    }
    if (used > 0) {
      TrackOmega to;
      to.ped_id = track.ped_id;
      to.mean_omega_deg = omega_sum / used;
      to.mean_speed = speed_sum / used;
      to.frames = used;
      report.per_track.push_back(to);
    }
  }

  std::sort(report.per_track.begin(), report.per_track.end(),
            [](const TrackOmega & a, const TrackOmega & b) {
              return a.mean_omega_deg != b.mean_omega_deg ? a.mean_omega_deg < b.mean_omega_deg
                                                          : a.ped_id < b.ped_id;
            });

  // Window-10 moving average of the per-track speeds in omega order.
  const int n_tracks = static_cast<int>(report.per_track.size());
  report.smoothed_speed.resize(n_tracks);
  for (int i = 0; i < n_tracks; ++i) {
    const int lo = std::max(0, i - 4);
    const int hi = std::min(n_tracks - 1, i + 5);
    double s = 0.0;
    for (int j = lo; j <= hi; ++j) {
      s += report.per_track[j].mean_speed;
    }
    report.smoothed_speed[i] = s / (hi - lo + 1);
  }

  std::vector<double> alphas, betas;
  for (const auto & f : retained) {
    alphas.push_back(f.alpha);
    betas.push_back(f.beta);
  }
  report.overall_corr = circular_correlation(alphas, betas);
  report.overall_count = static_cast<long>(retained.size());

  if (!retained.empty() && num_bins > 0) {
    double vmin = retained.front().speed, vmax = retained.front().speed;
    for (const auto & f : retained) {
      vmin = std::min(vmin, f.speed);
      vmax = std::max(vmax, f.speed);
    }
    const double range = vmax - vmin;
    if (range > 0.0) {
      const double half = bin_half_width_frac * range;
      for (int b = 0; b < num_bins; ++b) {
        const double center = vmin + range * (b + 0.5) / num_bins;
        std::vector<double> ba, bb;
        for (const auto & f : retained) {
          if (std::abs(f.speed - center) <= half) {
            ba.push_back(f.alpha);
            bb.push_back(f.beta);
          }
        }
        if (ba.size() < 3) {
          continue;
        }
        VelocityBinCorr vb;
        vb.center = center;
        vb.corr = circular_correlation(ba, bb);
        vb.count = static_cast<int>(ba.size());
        report.bins.push_back(vb);
      }
    }
  }
  return report;
}

namespace {

std::string fmt(double v, const char * spec = "%.6f")
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

std::string metric_report_text(const MetricReport & r)
{
  std::ostringstream out;
  out << "# mxcast evaluation report\n";
  out << "windows " << r.windows << "\n";
  out << "pedestrians " << r.per_ped.size() << "\n";
  out << "skipped " << r.skipped << "\n";
  out << "mad " << fmt(r.mad) << "\n";
  out << "mad_per_point " << fmt(r.mad_per_point) << "\n";
  out << "fad " << fmt(r.fad) << "\n";
  out << "mean_angular_error_deg " << fmt(r.mean_angular_error_deg, "%.4f") << "\n";
  return out.str();
}

std::string metric_report_csv(const MetricReport & r)
{
  std::ostringstream out;
  out << "ped_id,start_frame,mean_err,final_err,angular_err_deg,mean_gt_speed,steps\n";
  for (const auto & pm : r.per_ped) {
    out << pm.ped_id << "," << pm.start_frame << "," << fmt(pm.mean_err) << ","
        << fmt(pm.final_err) << "," << fmt(pm.angular_err_deg, "%.4f") << ","
        << fmt(pm.mean_gt_speed) << "," << pm.steps << "\n";
  }
  out << "\nbin_lo,bin_hi,mad,count\n";
  for (const auto & vb : r.velocity_bins) {
    out << fmt(vb.lo, "%.2f") << "," << fmt(vb.hi, "%.2f") << "," << fmt(vb.mad) << ","
        << vb.count << "\n";
  }
  return out.str();
}

std::string correlation_report_text(const CorrelationReport & r)
{
  std::ostringstream out;
  out << "# mxcast motivation analysis\n";
  out << "velocity_threshold " << fmt(r.velocity_threshold, "%.3f") << "\n";
  out << "frames_used " << r.overall_count << "\n";
  out << "tracks " << r.per_track.size() << "\n";
  out << "overall_circular_correlation " << fmt(r.overall_corr) << "\n";
  if (!r.per_track.empty()) {
    out << "min_mean_omega_deg " << fmt(r.per_track.front().mean_omega_deg, "%.4f") << "\n";
    out << "max_mean_omega_deg " << fmt(r.per_track.back().mean_omega_deg, "%.4f") << "\n";
  }
  return out.str();
}

std::string correlation_report_csv(const CorrelationReport & r)
{
  std::ostringstream out;
  out << "rank,ped_id,mean_omega_deg,mean_speed,smoothed_speed,frames\n";
  for (std::size_t i = 0; i < r.per_track.size(); ++i) {
    const auto & t = r.per_track[i];
    out << i << "," << t.ped_id << "," << fmt(t.mean_omega_deg, "%.4f") << ","
        << fmt(t.mean_speed) << "," << fmt(r.smoothed_speed[i]) << "," << t.frames << "\n";
  }
  out << "\nbin_center,circular_correlation,count\n";
  for (const auto & b : r.bins) {
    out << fmt(b.center) << "," << fmt(b.corr) << "," << b.count << "\n";
  }
  return out.str();
}

std::string forecast_tsv(const model::ForecastResult & fr)
{
  std::ostringstream out;
  out << "ped_id\tframe\tpred_x\tpred_y\tpred_ax\tpred_ay";
  out << "\tmu_x\tmu_y\tmu_ax\tmu_ay";
  for (int k = 0; k < 10; ++k) {
    out << "\ttheta_" << k;
  }
  out << "\n";
  for (const auto & pf : fr.peds) {
    for (std::size_t k = 0; k < pf.steps.size(); ++k) {
      const auto & sp = pf.steps[k];
      out << pf.ped_id << "\t" << pf.first_pred_frame + static_cast<std::int64_t>(k);
      out << "\t" << fmt(sp.position.x) << "\t" << fmt(sp.position.y);
      out << "\t" << fmt(sp.anchor.x) << "\t" << fmt(sp.anchor.y);
      for (int j = 0; j < 4; ++j) {
        out << "\t" << fmt(sp.mu_world[j], "%.9g");
      }
      for (int j = 0; j < 10; ++j) {
        out << "\t" << fmt(sp.theta_world[j], "%.9g");
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace mxcast::eval
