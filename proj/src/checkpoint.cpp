#include "icprl/checkpoint.hpp"

#include <cstdio>
#include <cstring>

namespace icprl::nn {

namespace {

constexpr char kMagic[4] = {'I', 'C', 'P', 'K'};

struct File {
  FILE* f;
  explicit File(FILE* f) : f(f) {}
  ~File() {
    if (f) fclose(f);
  }
};

void put_bytes(FILE* f, const void* p, size_t n) {
  if (fwrite(p, 1, n, f) != n) fail("checkpoint: short write");
}

template <class T>
void put(FILE* f, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  put_bytes(f, &v, sizeof(T));  // little-endian host assumed and verified below
}

void get_bytes(FILE* f, void* p, size_t n, const std::string& path) {
  if (fread(p, 1, n, f) != n) fail("checkpoint: truncated file " + path);
}

template <class T>
T get(FILE* f, const std::string& path) {
  T v;
  get_bytes(f, &v, sizeof(T), path);
  return v;
}

void check_endianness() {
  uint32_t x = 1;
  unsigned char b;
  std::memcpy(&b, &x, 1);
  if (b != 1) fail("checkpoint: big-endian hosts are not supported");
}

}  // namespace

void save_checkpoint(const std::string& path, uint64_t config_hash,
                     const std::vector<Tensor>& params) {
  check_endianness();
  File file(fopen(path.c_str(), "wb"));
  if (!file.f) fail("checkpoint: cannot open " + path + " for writing");
  FILE* f = file.f;
  put_bytes(f, kMagic, 4);
  put<uint32_t>(f, kCheckpointVersion);
  put<uint64_t>(f, config_hash);
  put<uint32_t>(f, (uint32_t)params.size());
  for (const auto& p : params) {
    require(!p.name().empty(), "checkpoint: parameter without a name");
    put<uint32_t>(f, (uint32_t)p.name().size());
    put_bytes(f, p.name().data(), p.name().size());
    put<uint32_t>(f, (uint32_t)p.shape().size());
    for (long d : p.shape()) put<int64_t>(f, d);
    put_bytes(f, p.value().data(), p.numel() * sizeof(double));
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  check_endianness();
  File file(fopen(path.c_str(), "rb"));
  if (!file.f) fail("checkpoint: cannot open " + path);
  FILE* f = file.f;
  char magic[4];
  get_bytes(f, magic, 4, path);
  if (std::memcmp(magic, kMagic, 4) != 0) fail("checkpoint: bad magic in " + path);
  Checkpoint ck;
  ck.version = get<uint32_t>(f, path);
  if (ck.version != kCheckpointVersion)
    fail("checkpoint: unsupported format version " + std::to_string(ck.version) + " in " + path);
  ck.config_hash = get<uint64_t>(f, path);
  uint32_t count = get<uint32_t>(f, path);
  for (uint32_t i = 0; i < count; i++) {
    uint32_t name_len = get<uint32_t>(f, path);
    if (name_len == 0 || name_len > 4096) fail("checkpoint: implausible name length in " + path);
    std::string name(name_len, '\0');
    get_bytes(f, name.data(), name_len, path);
    uint32_t ndim = get<uint32_t>(f, path);
    if (ndim == 0 || ndim > 8) fail("checkpoint: implausible rank in " + path);
    CheckpointEntry e;
    long numel = 1;
    for (uint32_t d = 0; d < ndim; d++) {
      int64_t dim = get<int64_t>(f, path);
      if (dim <= 0 || dim > (1 << 28)) fail("checkpoint: implausible dimension in " + path);
      e.shape.push_back((long)dim);
      numel *= dim;
    }
    e.data.resize(numel);
    get_bytes(f, e.data.data(), numel * sizeof(double), path);
    if (!ck.entries.emplace(std::move(name), std::move(e)).second)
      fail("checkpoint: duplicate parameter name in " + path);
  }
  return ck;
}

void restore_params(const Checkpoint& ck, std::vector<Tensor>& params) {
  for (auto& p : params) {
    auto it = ck.entries.find(p.name());
    if (it == ck.entries.end()) fail("checkpoint: missing parameter '" + p.name() + "'");
    if (it->second.shape != p.shape())
      fail("checkpoint: shape mismatch for '" + p.name() + "': file has " +
           shape_str(it->second.shape) + ", model has " + shape_str(p.shape()));
    p.value() = it->second.data;
  }
}

}  // namespace icprl::nn
