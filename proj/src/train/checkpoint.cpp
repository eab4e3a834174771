/*
 * Copyright (c) 2026 The Sparseflow Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sparseflow/train/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sparseflow/errors.hpp"

namespace sparseflow::train {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'F', 'L', 'C', 'K', 'P', 'T'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    v = to_little(v);
    const auto* p = reinterpret_cast<const char*>(&v);
    out_.append(p, sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void put_bytes(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }
  std::string get_string(const char* what) {
    const auto n = get<std::uint32_t>(what);
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw DataError(source_ + ": truncated checkpoint while reading " + what + " at byte " + std::to_string(pos_));
    }
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    w.put_string(k);
    w.put_string(v);
  }
  for (double v : {ckpt.stats.mean, ckpt.stats.std, ckpt.stats.min, ckpt.stats.max, ckpt.stats.clip_max}) w.put(v);
  w.put(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.put_string(t.name);
    w.put(std::uint32_t{2});
    w.put(static_cast<std::uint64_t>(t.value.rows()));
    w.put(static_cast<std::uint64_t>(t.value.cols()));
    for (graphmodel::Index i = 0; i < t.value.size(); ++i) w.put(t.value.data()[i]);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source) {
  Reader r(bytes, source);
  r.need(sizeof(kMagic), "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw DataError(source + ": not a checkpoint file");
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.get<char>("magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw DataError(source + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  const auto n_meta = r.get<std::uint32_t>("metadata count");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.get_string("metadata key");
    c.meta[k] = r.get_string("metadata value");
  }
  c.stats.mean = r.get<double>("stats");
  c.stats.std = r.get<double>("stats");
  c.stats.min = r.get<double>("stats");
  c.stats.max = r.get<double>("stats");
  c.stats.clip_max = r.get<double>("stats");
  const auto n_tensors = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor t;
    t.name = r.get_string("tensor name");
    const auto ndims = r.get<std::uint32_t>("tensor rank");
    if (ndims != 2) throw DataError(source + ": tensor '" + t.name + "' has rank " + std::to_string(ndims));
    const auto rows = r.get<std::uint64_t>("tensor dims");
    const auto cols = r.get<std::uint64_t>("tensor dims");
    if (rows != 0 && cols > (bytes.size() / sizeof(double)) / rows) {
      throw DataError(source + ": tensor '" + t.name + "' larger than the file");
    }
    r.need(rows * cols * sizeof(double), "tensor payload");
    t.value.resize(static_cast<graphmodel::Index>(rows), static_cast<graphmodel::Index>(cols));
    for (graphmodel::Index j = 0; j < t.value.size(); ++j) t.value.data()[j] = r.get<double>("tensor payload");
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw DataError(source + ": trailing bytes after checkpoint at byte " + std::to_string(r.pos()));
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open checkpoint");
  std::ostringstream os;
  os << in.rdbuf();
  return deserialize_checkpoint(os.str(), path.string());
}

Checkpoint average_last_k(const std::vector<Checkpoint>& checkpoints, std::size_t k) {
  if (k == 0) throw ContractError("average_last_k: k must be positive");
  if (checkpoints.size() < k) {
    throw ContractError("average_last_k: need " + std::to_string(k) + " checkpoints, have " +
                        std::to_string(checkpoints.size()));
  }
  const std::size_t first = checkpoints.size() - k;
  Checkpoint out = checkpoints.back();
  for (std::size_t t = 0; t < out.tensors.size(); ++t) {
    Mat total = Mat::Zero(out.tensors[t].value.rows(), out.tensors[t].value.cols());
    for (std::size_t c = first; c < checkpoints.size(); ++c) {
      const auto& src = checkpoints[c].tensors;
      if (src.size() != out.tensors.size() || src[t].name != out.tensors[t].name ||
          src[t].value.rows() != total.rows() || src[t].value.cols() != total.cols()) {
        throw ContractError("average_last_k: checkpoints have different layouts");
      }
      total += src[t].value;
    }
    out.tensors[t].value = total / static_cast<double>(k);
  }
  return out;
}

}  // namespace sparseflow::train
