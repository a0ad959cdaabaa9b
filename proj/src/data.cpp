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

#include "mxcast/data.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mxcast/rng.hpp"

namespace mxcast::data {

namespace {

constexpr const char * kMagic = "# mxcast trajectory v1";

struct Row {
  std::int64_t frame;
  std::int64_t ped;
  double x;
  double y;
  bool has_head;
  double head_deg;
};

std::vector<std::string> split_tabs(const std::string & line)
{
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, '\t')) {
    out.push_back(cur);
  }
  return out;
}

double parse_double(const std::string & s, int line_no, const char * what)
{
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception &) {
    throw parse_error(std::string("malformed ") + what + " '" + s + "'", line_no);
  }
  if (pos != s.size() || !std::isfinite(v)) {
    throw parse_error(std::string("malformed ") + what + " '" + s + "'", line_no);
  }
  return v;
}

std::int64_t parse_int(const std::string & s, int line_no, const char * what)
{
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception &) {
    throw parse_error(std::string("malformed ") + what + " '" + s + "'", line_no);
  }
  if (pos != s.size()) {
    throw parse_error(std::string("malformed ") + what + " '" + s + "'", line_no);
  }
  return v;
}

Eigen::Vector2d unit(double angle)
{
  return {std::cos(angle), std::sin(angle)};
}

Position step_from(const Position & p, const Eigen::Vector2d & d)
{
  return {p.x + d.x(), p.y + d.y()};
}

}  // namespace

Scene parse_trajectory_text(const std::string & text, double vislet_radius)
{
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool saw_magic = false;
  double frame_period = 0.4;

  std::vector<Row> rows;
  int head_columns = -1;  // -1 unknown, 0 absent, 1 present

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    if (line[0] == '#') {
      if (line_no == 1) {
        if (line != kMagic) {
          throw parse_error("missing or unknown format header", line_no);
        }
        saw_magic = true;
        continue;
      }
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "frame_period") {
        hs >> frame_period;
        if (!hs || frame_period <= 0.0) {
          throw parse_error("invalid frame_period header", line_no);
        }
      }
      continue;
    }
    if (!saw_magic) {
      throw parse_error("missing or unknown format header", 1);
    }
    const auto cols = split_tabs(line);
    if (cols.size() != 4 && cols.size() != 5) {
      throw parse_error("expected 4 or 5 tab-separated columns, got " +
                          std::to_string(cols.size()),
                        line_no);
    }
    const int has_head = cols.size() == 5 ? 1 : 0;
    if (head_columns == -1) {
      head_columns = has_head;
    } else if (head_columns != has_head) {
      throw parse_error("inconsistent column count", line_no);
    }
    Row r;
    r.frame = parse_int(cols[0], line_no, "frame");
    r.ped = parse_int(cols[1], line_no, "ped_id");
    r.x = parse_double(cols[2], line_no, "x");
    r.y = parse_double(cols[3], line_no, "y");
    r.has_head = has_head != 0;
    if (r.has_head) {
      r.head_deg = parse_double(cols[4], line_no, "head_deg");
      if (r.head_deg < 0.0 || r.head_deg >= 360.0) {
        throw parse_error("head angle out of [0, 360)", line_no);
      }
    } else {
      r.head_deg = 0.0;
    }
    if (!rows.empty()) {
      const Row & prev = rows.back();
      if (r.frame < prev.frame || (r.frame == prev.frame && r.ped <= prev.ped)) {
        throw parse_error("rows not sorted by (frame, ped_id)", line_no);
      }
    }
    rows.push_back(r);
  }
  if (!saw_magic) {
    throw parse_error("missing or unknown format header", 1);
  }

  std::map<std::int64_t, PedestrianTrack> tracks;
  for (const Row & r : rows) {
    auto & track = tracks[r.ped];
    track.ped_id = r.ped;
    if (!track.samples.empty() && r.frame <= track.samples.back().frame) {
      // unreachable under the global sort check, kept as a guard
      throw parse_error("non-monotone frames for ped " + std::to_string(r.ped), line_no);
    }
    TrackSample s;
    s.frame = r.frame;
    s.position = {r.x, r.y};
    const double alpha = wrap_angle(deg_to_rad(r.head_deg));
    s.vislet = vislet_from_angle(s.position, HeadAngle(alpha), vislet_radius);
    track.samples.push_back(s);
  }

  Scene scene;
  scene.frame_period = frame_period;
  scene.has_heads = head_columns != 0;
  for (auto & [id, track] : tracks) {
    scene.tracks.push_back(std::move(track));
  }
  scene.validate();
  return scene;
}

Scene parse_trajectory_file(const std::string & path, double vislet_radius)
{
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open trajectory file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trajectory_text(buf.str(), vislet_radius);
}

std::string write_trajectory_text(const Scene & scene)
{
  std::ostringstream out;
  out << kMagic << "\n";
  char tmp[64];
  std::snprintf(tmp, sizeof(tmp), "%.6f", scene.frame_period);
  out << "# frame_period " << tmp << "\n";
  out << "# units meters\n";

  struct OutRow {
    std::int64_t frame;
    std::int64_t ped;
    const TrackSample * s;
  };
  std::vector<OutRow> rows;
  for (const auto & t : scene.tracks) {
    for (const auto & s : t.samples) {
      rows.push_back({s.frame, t.ped_id, &s});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const OutRow & a, const OutRow & b) {
    return a.frame != b.frame ? a.frame < b.frame : a.ped < b.ped;
  });
  for (const auto & r : rows) {
    char line[160];
    if (scene.has_heads) {
      double deg = rad_to_deg(angle_from_vislet(r.s->vislet).alpha);
      if (deg < 0.0) {
        deg += 360.0;
      }
      if (deg >= 360.0) {
        deg = 0.0;
      }
      std::snprintf(line, sizeof(line), "%lld\t%lld\t%.6f\t%.6f\t%.4f\n",
                    static_cast<long long>(r.frame), static_cast<long long>(r.ped), r.s->position.x,
                    r.s->position.y, deg);
    } else {
      std::snprintf(line, sizeof(line), "%lld\t%lld\t%.6f\t%.6f\n",
                    static_cast<long long>(r.frame), static_cast<long long>(r.ped), r.s->position.x,
                    r.s->position.y);
    }
    out << line;
  }
  return out.str();
}

void write_trajectory_file(const std::string & path, const Scene & scene)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open output file: " + path);
  }
  out << write_trajectory_text(scene);
}

SyntheticSceneSpec::Scenario scenario_from_string(const std::string & name)
{
  if (name == "linear") return SyntheticSceneSpec::Scenario::kLinear;
  if (name == "turn_with_head_lead") return SyntheticSceneSpec::Scenario::kTurnWithHeadLead;
  if (name == "group_conversation") return SyntheticSceneSpec::Scenario::kGroupConversation;
  if (name == "slow_wander") return SyntheticSceneSpec::Scenario::kSlowWander;
  throw std::invalid_argument("unknown scenario: " + name);
}

std::string scenario_to_string(SyntheticSceneSpec::Scenario s)
{
  switch (s) {
    case SyntheticSceneSpec::Scenario::kLinear: return "linear";
    case SyntheticSceneSpec::Scenario::kTurnWithHeadLead: return "turn_with_head_lead";
    case SyntheticSceneSpec::Scenario::kGroupConversation: return "group_conversation";
    case SyntheticSceneSpec::Scenario::kSlowWander: return "slow_wander";
  }
  return "unknown";
}

namespace {

struct EpisodeTrack {
  std::vector<Position> pos;
  std::vector<double> alpha;
};

// Straight walk; head aligned with the heading.
std::vector<EpisodeTrack> gen_linear(const SyntheticSceneSpec & spec, Rng & rng)
{
  std::vector<EpisodeTrack> tracks(spec.members);
  const double dt = spec.frame_period;
  for (auto & tr : tracks) {
    const double psi = rng.uniform(-M_PI, M_PI);
    Position p{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
    for (int t = 0; t < spec.episode_frames; ++t) {
      if (t > 0) {
        Eigen::Vector2d d = spec.speed * dt * unit(psi);
        if (spec.pos_noise > 0.0) {
          d += Eigen::Vector2d(rng.normal(0.0, spec.pos_noise), rng.normal(0.0, spec.pos_noise));
        }
        p = step_from(p, d);
      }
      tr.pos.push_back(p);
      double a = psi;
      if (spec.head_noise_deg > 0.0) {
        a += deg_to_rad(spec.head_noise_deg) * rng.normal();
      }
      tr.alpha.push_back(wrap_angle(a));
    }
  }
  return tracks;
}

// Straight walk with one turn; the head rotates toward the post-turn heading
// `head_lead` motion-frames before the path does.
std::vector<EpisodeTrack> gen_turn(const SyntheticSceneSpec & spec, Rng & rng, int t_obs)
{
  std::vector<EpisodeTrack> tracks(spec.members);
  const double dt = spec.frame_period;
  for (auto & tr : tracks) {
    const double psi = rng.uniform(-M_PI, M_PI);
    const double mag = deg_to_rad(rng.uniform(45.0, 90.0));
    const double delta = rng.uniform() < 0.5 ? mag : -mag;
    const double v = spec.speed * rng.uniform(0.8, 1.2);
    // First frame whose incoming displacement uses the new heading.
    const int turn_frame =
      t_obs + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.head_lead) + 1));
    const int head_frame = turn_frame - 1 - spec.head_lead;

    Position p{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
    for (int t = 0; t < spec.episode_frames; ++t) {
      if (t > 0) {
        const double heading = t >= turn_frame ? psi + delta : psi;
        Eigen::Vector2d d = v * dt * unit(heading);
        if (spec.pos_noise > 0.0) {
          d += Eigen::Vector2d(rng.normal(0.0, spec.pos_noise), rng.normal(0.0, spec.pos_noise));
        }
        p = step_from(p, d);
      }
      tr.pos.push_back(p);
      double a = t >= head_frame ? psi + delta : psi;
      if (spec.head_noise_deg > 0.0) {
        a += deg_to_rad(spec.head_noise_deg) * rng.normal();
      }
      tr.alpha.push_back(wrap_angle(a));
    }
  }
  return tracks;
}

// Standing conversational group. Members sway slowly; each member's motion is
// biased along (or, for some, against) their gaze toward the current speaker,
// with mild repulsion from group members they can see up close. Step lengths
// are capped so speeds stay below 0.45 m/s.
std::vector<EpisodeTrack> gen_group(const SyntheticSceneSpec & spec, Rng & rng)
{
  const int k = std::max(3, spec.members);
  const double dt = spec.frame_period;
  const double max_step = 0.44 * dt;

  const Position center{rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0)};
  const double ring = rng.uniform(0.8, 1.1);

  struct Member {
    Position p;
    double bias;          // signed, m/s along gaze
    double jitter;        // m/s
  };
  std::vector<Member> members(k);
  for (int i = 0; i < k; ++i) {
    const double ang = 2.0 * M_PI * i / k + rng.uniform(-0.15, 0.15);
    members[i].p = {center.x + ring * std::cos(ang), center.y + ring * std::sin(ang)};
    if (i == 0) {
      members[i].bias = spec.gaze_bias_speed;
      members[i].jitter = 0.3 * spec.jitter_speed;
    } else if (i == 1) {
      members[i].bias = -spec.gaze_bias_speed;
      members[i].jitter = 0.3 * spec.jitter_speed;
    } else {
      const double sign = rng.uniform() < 0.7 ? 1.0 : -1.0;
      members[i].bias = sign * spec.gaze_bias_speed * rng.uniform(0.5, 1.0);
      members[i].jitter = spec.jitter_speed * rng.uniform(0.5, 1.0);
    }
  }

  std::vector<EpisodeTrack> tracks(k);
  int speaker = static_cast<int>(rng.uniform_int(k));
  int next_switch = 5 + static_cast<int>(rng.uniform_int(5));

  for (int t = 0; t < spec.episode_frames; ++t) {
    if (t == next_switch) {
      speaker = (speaker + 1 + static_cast<int>(rng.uniform_int(k - 1))) % k;
      next_switch += 5 + static_cast<int>(rng.uniform_int(5));
    }
    // Gaze targets from current positions (speaker looks at a fixed peer).
    std::vector<Eigen::Vector2d> gaze(k);
    for (int i = 0; i < k; ++i) {
      const int target = i == speaker ? (speaker + 1) % k : speaker;
      Eigen::Vector2d g(members[target].p.x - members[i].p.x,
                        members[target].p.y - members[i].p.y);
      const double n = g.norm();
      gaze[i] = n > 1e-9 ? Eigen::Vector2d(g / n) : Eigen::Vector2d(1.0, 0.0);
    }
    for (int i = 0; i < k; ++i) {
      tracks[i].pos.push_back(members[i].p);
      tracks[i].alpha.push_back(std::atan2(gaze[i].y(), gaze[i].x()));
    }
    // Advance positions.
    std::vector<Position> next(k);
    for (int i = 0; i < k; ++i) {
      Eigen::Vector2d step = members[i].bias * dt * gaze[i];
      step += Eigen::Vector2d(rng.normal(0.0, members[i].jitter * dt),
                              rng.normal(0.0, members[i].jitter * dt));
      // Repulsion from visible members closer than 0.6 m.
      for (int j = 0; j < k; ++j) {
        if (j == i) {
          continue;
        }
        Eigen::Vector2d away(members[i].p.x - members[j].p.x, members[i].p.y - members[j].p.y);
        const double dist = away.norm();
        if (dist < 1e-9 || dist >= 0.6) {
          continue;
        }
        const double cos_view = gaze[i].dot(-away) / dist;
        if (cos_view < std::cos(deg_to_rad(20.0))) {
          continue;  // not in view
        }
        step += (0.25 * dt * (0.6 - dist) / 0.6) * (away / dist);
      }
      const double n = step.norm();
      if (n > max_step) {
        step *= max_step / n;
      }
      next[i] = step_from(members[i].p, step);
    }
    for (int i = 0; i < k; ++i) {
      members[i].p = next[i];
    }
  }
  return tracks;
}

// Slow meandering walk; the head looks along the upcoming displacement.
std::vector<EpisodeTrack> gen_wander(const SyntheticSceneSpec & spec, Rng & rng)
{
  std::vector<EpisodeTrack> tracks(spec.members);
  const double dt = spec.frame_period;
  for (auto & tr : tracks) {
    double psi = rng.uniform(-M_PI, M_PI);
    const double v = rng.uniform(0.2, 0.6);
    Position p{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
    std::vector<double> headings(spec.episode_frames);
    for (int t = 0; t < spec.episode_frames; ++t) {
      headings[t] = psi;
      psi = wrap_angle(psi + deg_to_rad(15.0) * rng.normal());
    }
    for (int t = 0; t < spec.episode_frames; ++t) {
      if (t > 0) {
        Eigen::Vector2d d = v * dt * unit(headings[t]);
        if (spec.pos_noise > 0.0) {
          d += Eigen::Vector2d(rng.normal(0.0, spec.pos_noise), rng.normal(0.0, spec.pos_noise));
        }
        p = step_from(p, d);
      }
      tr.pos.push_back(p);
      const double look = t + 1 < spec.episode_frames ? headings[t + 1] : headings[t];
      double a = look;
      if (spec.head_noise_deg > 0.0) {
        a += deg_to_rad(spec.head_noise_deg) * rng.normal();
      }
      tr.alpha.push_back(wrap_angle(a));
    }
  }
  return tracks;
}

}  // namespace

Scene generate_synthetic(const SyntheticSceneSpec & spec)
{
  if (spec.episodes < 1 || spec.members < 1 || spec.episode_frames < 2) {
    throw std::invalid_argument("generate_synthetic: invalid spec counts");
  }
  Scene scene;
  scene.frame_period = spec.frame_period;
  scene.has_heads = true;

  constexpr std::int64_t kEpisodeStride = 1000;
  for (int e = 0; e < spec.episodes; ++e) {
    Rng rng(Rng::derive(spec.seed, static_cast<std::uint64_t>(e)));
    std::vector<EpisodeTrack> tracks;
    switch (spec.scenario) {
      case SyntheticSceneSpec::Scenario::kLinear:
        tracks = gen_linear(spec, rng);
        break;
      case SyntheticSceneSpec::Scenario::kTurnWithHeadLead:
        tracks = gen_turn(spec, rng, 8);
        break;
      case SyntheticSceneSpec::Scenario::kGroupConversation:
        tracks = gen_group(spec, rng);
        break;
      case SyntheticSceneSpec::Scenario::kSlowWander:
        tracks = gen_wander(spec, rng);
        break;
    }
    for (std::size_t m = 0; m < tracks.size(); ++m) {
      PedestrianTrack track;
      track.ped_id = static_cast<std::int64_t>(e) * 100 + static_cast<std::int64_t>(m) + 1;
      for (int t = 0; t < spec.episode_frames; ++t) {
        TrackSample s;
        s.frame = static_cast<std::int64_t>(e) * kEpisodeStride + t;
        s.position = tracks[m].pos[t];
        s.vislet =
          vislet_from_angle(s.position, HeadAngle(tracks[m].alpha[t]), spec.vislet_radius);
        track.samples.push_back(s);
      }
      scene.tracks.push_back(std::move(track));
    }
  }
  scene.validate();
  return scene;
}

Scene inject_head_noise(const Scene & scene, double sigma_deg, std::uint64_t seed)
{
  if (sigma_deg < 0.0) {
    throw std::invalid_argument("inject_head_noise: sigma must be >= 0");
  }
  if (sigma_deg == 0.0) {
    return scene;
  }
  Scene out = scene;
  Rng rng(seed);
  const double sigma = deg_to_rad(sigma_deg);
  for (auto & track : out.tracks) {
    for (auto & s : track.samples) {
      const double alpha = angle_from_vislet(s.vislet).alpha;
      const double noised = wrap_angle(alpha + sigma * rng.normal());
      s.vislet = vislet_from_angle(s.position, HeadAngle(noised), s.vislet.radius());
    }
  }
  return out;
}

std::vector<SceneWindow> extract_windows(const Scene & scene, int frames, int stride,
                                         int * skipped)
{
  if (frames < 2 || stride < 1) {
    throw std::invalid_argument("extract_windows: invalid frames/stride");
  }
  // Contiguous runs per track: (track index, first frame, length).
  struct Run {
    std::size_t track;
    std::int64_t first;
    int len;
    std::size_t offset;  // sample index of `first` within the track
  };
  std::vector<Run> runs;
  for (std::size_t ti = 0; ti < scene.tracks.size(); ++ti) {
    const auto & samples = scene.tracks[ti].samples;
    std::size_t run_start = 0;
    for (std::size_t k = 1; k <= samples.size(); ++k) {
      if (k == samples.size() || samples[k].frame != samples[k - 1].frame + 1) {
        runs.push_back({ti, samples[run_start].frame, static_cast<int>(k - run_start), run_start});
        run_start = k;
      }
    }
  }

  std::set<std::int64_t> starts;
  for (const auto & r : runs) {
    for (std::int64_t s = r.first; s + frames <= r.first + r.len; s += stride) {
      starts.insert(s);
    }
  }

  int skipped_count = 0;
  std::vector<SceneWindow> windows;
  for (std::int64_t start : starts) {
    SceneWindow w;
    w.start_frame = start;
    for (const auto & r : runs) {
      const bool overlaps = r.first < start + frames && start < r.first + r.len;
      if (!overlaps) {
        continue;
      }
      if (r.first > start || r.first + r.len < start + frames) {
        ++skipped_count;
        continue;
      }
      const auto & track = scene.tracks[r.track];
      PedWindow pw;
      pw.ped_id = track.ped_id;
      const std::size_t base = r.offset + static_cast<std::size_t>(start - r.first);
      for (int t = 0; t < frames; ++t) {
        const auto & s = track.samples[base + t];
        pw.pos.push_back(s.position);
        pw.anchor.push_back(s.vislet.anchor);
      }
      pw.anchor_in = pw.anchor;
      w.peds.push_back(std::move(pw));
    }
    if (!w.peds.empty()) {
      windows.push_back(std::move(w));
    }
  }
  if (skipped != nullptr) {
    *skipped = skipped_count;
  }
  return windows;
}

}  // namespace mxcast::data
