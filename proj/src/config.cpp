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

#include "mxcast/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace mxcast::config {

namespace {

struct Field {
  const char * key;
  std::function<std::string(const RunConfig &)> get;
  std::function<void(RunConfig &, const std::string &)> set;
};

std::string fmt_double(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_double(const std::string & s)
{
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) {
    throw std::invalid_argument("bad number: " + s);
  }
  return v;
}

int to_int(const std::string & s)
{
  std::size_t pos = 0;
  const int v = std::stoi(s, &pos);
  if (pos != s.size()) {
    throw std::invalid_argument("bad integer: " + s);
  }
  return v;
}

#define STR_FIELD(name)                                               \
  Field{#name, [](const RunConfig & c) { return c.name; },            \
        [](RunConfig & c, const std::string & v) { c.name = v; }}
#define INT_FIELD(name)                                               \
  Field{#name, [](const RunConfig & c) { return std::to_string(c.name); }, \
        [](RunConfig & c, const std::string & v) { c.name = to_int(v); }}
#define DBL_FIELD(name)                                               \
  Field{#name, [](const RunConfig & c) { return fmt_double(c.name); },     \
        [](RunConfig & c, const std::string & v) { c.name = to_double(v); }}

const std::vector<Field> & fields()
{
  static const std::vector<Field> f = {
    STR_FIELD(variant),
    INT_FIELD(hidden),
    INT_FIELD(grid_cells),
    DBL_FIELD(cell_size),
    DBL_FIELD(gamma_deg),
    DBL_FIELD(vislet_radius),
    INT_FIELD(t_obs),
    INT_FIELD(t_pred),
    DBL_FIELD(lr),
    DBL_FIELD(l2),
    DBL_FIELD(lr_decay),
    DBL_FIELD(clip_norm),
    INT_FIELD(epochs),
    INT_FIELD(batch),
    DBL_FIELD(scheduled_sampling),
    DBL_FIELD(noise_aug_sigma_deg),
    Field{"seed", [](const RunConfig & c) { return std::to_string(c.seed); },
          [](RunConfig & c, const std::string & v) { c.seed = std::stoull(v); }},
    STR_FIELD(mode),
    DBL_FIELD(noise_sigma_deg),
    DBL_FIELD(frame_period),
    INT_FIELD(threads),
    INT_FIELD(window_stride),
    Field{"gt_neighbors", [](const RunConfig & c) { return c.gt_neighbors ? "1" : "0"; },
          [](RunConfig & c, const std::string & v) { c.gt_neighbors = v == "1" || v == "true"; }},
    DBL_FIELD(min_speed),
    DBL_FIELD(bin_half_width),
    INT_FIELD(bins),
    STR_FIELD(scenario),
    INT_FIELD(episodes),
    INT_FIELD(members),
    INT_FIELD(episode_frames),
    INT_FIELD(head_lead),
    DBL_FIELD(speed),
    DBL_FIELD(pos_noise),
    DBL_FIELD(head_noise_deg),
    DBL_FIELD(gaze_bias_speed),
    DBL_FIELD(jitter_speed),
  };
  return f;
}

#undef STR_FIELD
#undef INT_FIELD
#undef DBL_FIELD

}  // namespace

std::string to_text(const RunConfig & cfg)
{
  std::ostringstream out;
  for (const auto & f : fields()) {
    out << f.key << "=" << f.get(cfg) << "\n";
  }
  return out.str();
}

void save_config(const std::string & path, const RunConfig & cfg)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write config: " + path);
  }
  out << to_text(cfg);
}

RunConfig parse_config_text(const std::string & text, std::set<std::string> * seen)
{
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": missing '='");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    bool found = false;
    for (const auto & f : fields()) {
      if (key == f.key) {
        f.set(cfg, value);
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" +
                               key + "'");
    }
    if (seen != nullptr) {
      seen->insert(key);
    }
  }
  return cfg;
}

RunConfig load_config(const std::string & path, std::set<std::string> * seen)
{
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), seen);
}

}  // namespace mxcast::config
