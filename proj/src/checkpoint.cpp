// Copyright 2026 The pointda Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pointda/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "pointda/error.hpp"

namespace fs = std::filesystem;

namespace pointda {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'P', 'D', 'A', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  template <typename T>
  void pod(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    buf_.append(s);
  }
  void floats(const std::vector<float>& v) {
    pod<std::uint64_t>(v.size());
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string bytes, std::string origin) : buf_(std::move(bytes)), origin_(std::move(origin)) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void floats_into(std::vector<float>& dst, const std::string& what) {
    const auto n = pod<std::uint64_t>();
    if (n != dst.size()) {
      throw ParseError(fmt::format("{}: {} has {} values, model expects {}", origin_, what, n,
                                   dst.size()));
    }
    need(n * sizeof(float));
    std::memcpy(dst.data(), buf_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t position() const { return pos_; }
  const std::string& buffer() const { return buf_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw ParseError(fmt::format("{}: truncated checkpoint", origin_));
  }
  std::string buf_;
  std::string origin_;
  std::size_t pos_ = 0;
};

void write_params(Writer& w, const std::vector<Parameter*>& params, Adam& opt) {
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    w.str(p->name);
    w.floats(p->value);
  }
  w.pod<std::int64_t>(opt.steps());
  for (std::size_t i = 0; i < params.size(); ++i) {
    w.floats(opt.first_moments()[i]);
    w.floats(opt.second_moments()[i]);
  }
}

void read_params(Reader& r, const std::vector<Parameter*>& params, Adam& opt,
                 const std::string& origin) {
  const auto count = r.pod<std::uint32_t>();
  if (count != params.size()) {
    throw ParseError(fmt::format("{}: {} parameter tensors, model has {}", origin, count,
                                 params.size()));
  }
  for (Parameter* p : params) {
    const std::string name = r.str();
    if (name != p->name) {
      throw ParseError(fmt::format("{}: expected tensor {}, found {}", origin, p->name, name));
    }
    r.floats_into(p->value, name);
  }
  opt.set_steps(r.pod<std::int64_t>());
  for (std::size_t i = 0; i < params.size(); ++i) {
    r.floats_into(opt.first_moments()[i], params[i]->name + " adam.m");
    r.floats_into(opt.second_moments()[i], params[i]->name + " adam.v");
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open checkpoint {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CheckpointHeader read_header(Reader& r, const std::string& origin) {
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw ParseError(fmt::format("{}: not a pointda checkpoint", origin));
  }
  CheckpointHeader h;
  h.version = r.pod<std::uint32_t>();
  if (h.version != kCheckpointVersion) {
    throw ParseError(fmt::format("{}: unsupported checkpoint version {}", origin, h.version));
  }
  h.config_hash = r.pod<std::uint64_t>();
  h.step = r.pod<std::int64_t>();
  h.seed = r.pod<std::uint64_t>();
  h.best_metric = r.pod<double>();
  h.best_step = r.pod<std::int64_t>();
  h.config_yaml = r.str();
  return h;
}

Reader open_verified(const fs::path& path) {
  std::string bytes = read_file(path);
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t)) {
    throw ParseError(fmt::format("{}: truncated checkpoint", path.string()));
  }
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, sizeof stored);
  if (stored != fnv1a64(bytes.substr(0, body))) {
    throw ParseError(fmt::format("{}: checksum mismatch", path.string()));
  }
  bytes.resize(body);
  return Reader(std::move(bytes), path.string());
}

}  // namespace

void save_checkpoint(const fs::path& path, TrainState& state, const std::string& config_yaml) {
  Writer w;
  w.pod(kMagic);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.pod<std::uint64_t>(fnv1a64(config_yaml));
  w.pod<std::int64_t>(state.step);
  w.pod<std::uint64_t>(state.seed);
  w.pod<double>(state.best_metric);
  w.pod<std::int64_t>(state.best_step);
  w.str(config_yaml);
  write_params(w, state.main.parameters(), state.main_opt);
  write_params(w, state.disc.parameters(), state.disc_opt);
  const std::uint64_t checksum = fnv1a64(w.bytes());
  w.pod(checksum);

  // Write-then-rename so an interrupted save never leaves a torn checkpoint.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot open {} for writing", tmp.string()));
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError(fmt::format("write to {} failed", tmp.string()));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError(fmt::format("cannot move {} to {}: {}", tmp.string(), path.string(), ec.message()));
}

CheckpointHeader read_checkpoint_header(const fs::path& path) {
  Reader r = open_verified(path);
  return read_header(r, path.string());
}

CheckpointHeader load_checkpoint(const fs::path& path, TrainState& state) {
  Reader r = open_verified(path);
  CheckpointHeader h = read_header(r, path.string());
  read_params(r, state.main.parameters(), state.main_opt, path.string());
  read_params(r, state.disc.parameters(), state.disc_opt, path.string());
  if (r.position() != r.buffer().size()) {
    throw ParseError(fmt::format("{}: trailing bytes after parameter sections", path.string()));
  }
  state.step = h.step;
  state.seed = h.seed;
  state.best_metric = h.best_metric;
  state.best_step = h.best_step;
  return h;
}

}  // namespace pointda
