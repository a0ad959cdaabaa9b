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

#include <fstream>

#include <json.hpp>

#include "mxcast/model.hpp"

// Checkpoint container, version 1:
//   bytes 0..7   magic "MXCKPT01"
//   u64          header length in bytes (little endian)
//   header       UTF-8 JSON: variant, hyperparameters, input_scale, seed,
//                epochs_done, optimizer config/step, has_optimizer
//   tensors      for each parameter block in order (W_x, b_x, [W_a, b_a],
//                [W_H, b_H], W_lstm, b_lstm, W_o, b_o):
//                  u32 name length, name bytes,
//                  u64 rows, u64 cols, rows*cols float64 (column-major)
//                followed by m_/v_ moment tensors in the same order when
//                has_optimizer is true.

namespace mxcast::model {

namespace {

constexpr char kMagic[8] = {'M', 'X', 'C', 'K', 'P', 'T', '0', '1'};

void write_u64(std::ostream & out, std::uint64_t v)
{
  out.write(reinterpret_cast<const char *>(&v), sizeof(v));
}

void write_u32(std::ostream & out, std::uint32_t v)
{
  out.write(reinterpret_cast<const char *>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream & in)
{
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char *>(&v), sizeof(v));
  return v;
}

std::uint32_t read_u32(std::istream & in)
{
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char *>(&v), sizeof(v));
  return v;
}

void write_tensor(std::ostream & out, const std::string & name, const Eigen::MatrixXd & m)
{
  write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  write_u64(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char *>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Eigen::MatrixXd read_tensor(std::istream & in, std::string & name)
{
  const std::uint32_t name_len = read_u32(in);
  name.resize(name_len);
  in.read(name.data(), name_len);
  const auto rows = static_cast<Eigen::Index>(read_u64(in));
  const auto cols = static_cast<Eigen::Index>(read_u64(in));
  Eigen::MatrixXd m(rows, cols);
  in.read(reinterpret_cast<char *>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) {
    throw std::runtime_error("checkpoint: truncated tensor " + name);
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::string & path, const MxLstmModel & m,
                     const nn::AdamOptimizer * opt, int epochs_done)
{
  nlohmann::json header;
  header["version"] = 1;
  header["variant"] = variant_to_string(m.variant);
  header["hidden"] = m.hp.hidden;
  header["grid_cells"] = m.hp.grid_cells;
  header["cell_size"] = m.hp.cell_size;
  header["gamma_deg"] = m.hp.gamma_deg;
  header["vislet_radius"] = m.hp.vislet_radius;
  header["t_obs"] = m.hp.t_obs;
  header["t_pred"] = m.hp.t_pred;
  header["frame_period"] = m.hp.frame_period;
  header["seed"] = m.hp.seed;
  header["input_scale"] = m.input_scale;
  header["epochs_done"] = epochs_done;
  header["has_optimizer"] = opt != nullptr;
  if (opt != nullptr) {
    const auto & c = opt->config();
    header["opt"] = {{"lr", c.lr},         {"l2", c.l2},   {"beta1", c.beta1},
                     {"beta2", c.beta2},   {"eps", c.eps}, {"lr_decay", c.lr_decay},
                     {"step", opt->step_count()}, {"lr_now", opt->current_lr()}};
  }
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open checkpoint for writing: " + path);
  }
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, header_str.size());
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

  auto blocks = param_blocks(const_cast<MxLstmModel &>(m));
  for (const auto & b : blocks) {
    if (b.mat != nullptr) {
      write_tensor(out, b.name, *b.mat);
    } else {
      write_tensor(out, b.name, Eigen::MatrixXd(*b.vec));
    }
  }
  if (opt != nullptr) {
    auto * mut = const_cast<nn::AdamOptimizer *>(opt);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      write_tensor(out, "m_" + blocks[k].name, mut->moments_m().at(k));
      write_tensor(out, "v_" + blocks[k].name, mut->moments_v().at(k));
    }
  }
  if (!out) {
    throw std::runtime_error("checkpoint write failed: " + path);
  }
}

Checkpoint load_checkpoint(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint: " + path);
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, 8) != std::string(kMagic, 8)) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  const std::uint64_t header_len = read_u64(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  const auto header = nlohmann::json::parse(header_str);
  if (header.at("version").get<int>() != 1) {
    throw std::runtime_error("unsupported checkpoint version");
  }

  Hyperparams hp;
  hp.hidden = header.at("hidden").get<int>();
  hp.grid_cells = header.at("grid_cells").get<int>();
  hp.cell_size = header.at("cell_size").get<double>();
  hp.gamma_deg = header.at("gamma_deg").get<double>();
  hp.vislet_radius = header.at("vislet_radius").get<double>();
  hp.t_obs = header.at("t_obs").get<int>();
  hp.t_pred = header.at("t_pred").get<int>();
  hp.frame_period = header.at("frame_period").get<double>();
  hp.seed = header.at("seed").get<std::uint64_t>();

  Checkpoint ck;
  ck.model = MxLstmModel::create(variant_from_string(header.at("variant").get<std::string>()), hp);
  ck.model.input_scale = header.at("input_scale").get<double>();
  ck.epochs_done = header.at("epochs_done").get<int>();

  auto blocks = param_blocks(ck.model);
  for (auto & b : blocks) {
    std::string name;
    Eigen::MatrixXd t = read_tensor(in, name);
    if (name != b.name) {
      throw std::runtime_error("checkpoint: expected tensor " + b.name + ", found " + name);
    }
    if (b.mat != nullptr) {
      if (t.rows() != b.mat->rows() || t.cols() != b.mat->cols()) {
        throw std::runtime_error("checkpoint: shape mismatch for " + name);
      }
      *b.mat = t;
    } else {
      if (t.rows() != b.vec->size() || t.cols() != 1) {
        throw std::runtime_error("checkpoint: shape mismatch for " + name);
      }
      *b.vec = t.col(0);
    }
  }

  ck.has_optimizer = header.at("has_optimizer").get<bool>();
  if (ck.has_optimizer) {
    nn::AdamOptimizer::Config cfg;
    const auto & oc = header.at("opt");
    cfg.lr = oc.at("lr").get<double>();
    cfg.l2 = oc.at("l2").get<double>();
    cfg.beta1 = oc.at("beta1").get<double>();
    cfg.beta2 = oc.at("beta2").get<double>();
    cfg.eps = oc.at("eps").get<double>();
    cfg.lr_decay = oc.at("lr_decay").get<double>();
    ck.optimizer = nn::AdamOptimizer(cfg);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      std::string name;
      Eigen::MatrixXd mm = read_tensor(in, name);
      if (name != "m_" + blocks[k].name) {
        throw std::runtime_error("checkpoint: unexpected moment tensor " + name);
      }
      Eigen::MatrixXd vv = read_tensor(in, name);
      if (name != "v_" + blocks[k].name) {
        throw std::runtime_error("checkpoint: unexpected moment tensor " + name);
      }
      ck.optimizer.add_block(mm.rows(), mm.cols());
      ck.optimizer.moments_m().back() = mm;
      ck.optimizer.moments_v().back() = vv;
    }
    ck.optimizer.restore(oc.at("step").get<long>(), oc.at("lr_now").get<double>());
  }
  return ck;
}

}  // namespace mxcast::model
