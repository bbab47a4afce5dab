#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rosanna/common.hpp"
#include "rosanna/dataset.hpp"

namespace rosanna {

namespace {

[[noreturn]] void fail(const std::string& path, uint64_t offset,
                       const std::string& what) {
  std::ostringstream msg;
  msg << path << ": " << what << " at byte offset " << offset;
  throw IoError(msg.str());
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

template <typename OffsetFn>
void check_finite(const std::vector<float>& data, const std::string& path,
                  OffsetFn value_offset) {
  for (size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i]))
      fail(path, value_offset(i), "non-finite value");
  }
}

// Little-endian readers; the build targets are little-endian, memcpy suffices.
uint32_t read_u32(const char* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

}  // namespace

VectorSet load_fvecs(const std::string& path) {
  std::ifstream in = open_input(path);
  VectorSet out;
  out.source = path;

  uint64_t offset = 0;
  char dim_buf[4];
  while (in.read(dim_buf, 4)) {
    uint32_t d = read_u32(dim_buf);
    if (out.n == 0) {
      if (d == 0 || d > (1u << 24)) fail(path, offset, "implausible dimension");
      out.k = d;
    } else if (d != out.k) {
      fail(path, offset, "record dimension mismatch");
    }
    size_t base = out.data.size();
    out.data.resize(base + d);
    if (!in.read(reinterpret_cast<char*>(out.data.data() + base),
                 static_cast<std::streamsize>(d) * 4))
      fail(path, offset, "truncated record");
    for (uint32_t j = 0; j < d; ++j) {
      if (!std::isfinite(out.data[base + j]))
        fail(path, offset + 4 + 4ull * j, "non-finite value");
    }
    offset += 4 + 4ull * d;
    ++out.n;
  }
  if (in.gcount() != 0) fail(path, offset, "truncated record header");
  return out;
}

VectorSet load_bvecs(const std::string& path) {
  std::ifstream in = open_input(path);
  VectorSet out;
  out.source = path;

  uint64_t offset = 0;
  char dim_buf[4];
  std::vector<uint8_t> record;
  while (in.read(dim_buf, 4)) {
    uint32_t d = read_u32(dim_buf);
    if (out.n == 0) {
      if (d == 0 || d > (1u << 24)) fail(path, offset, "implausible dimension");
      out.k = d;
    } else if (d != out.k) {
      fail(path, offset, "record dimension mismatch");
    }
    record.resize(d);
    if (!in.read(reinterpret_cast<char*>(record.data()), d))
      fail(path, offset, "truncated record");
    for (uint8_t b : record) out.data.push_back(static_cast<float>(b));
    offset += 4 + d;
    ++out.n;
  }
  if (in.gcount() != 0) fail(path, offset, "truncated record header");
  return out;
}

VectorSet load_raw(const std::string& path) {
  std::ifstream in = open_input(path);
  uint64_t header[2];
  if (!in.read(reinterpret_cast<char*>(header), 16))
    fail(path, 0, "truncated header");

  VectorSet out;
  out.source = path;
  out.n = header[0];
  if (header[1] == 0 || header[1] > (1u << 24))
    fail(path, 8, "implausible dimension");
  out.k = static_cast<uint32_t>(header[1]);
  out.data.resize(out.n * out.k);
  if (!in.read(reinterpret_cast<char*>(out.data.data()),
               static_cast<std::streamsize>(out.data.size()) * 4))
    fail(path, 16, "truncated payload");
  check_finite(out.data, path, [](uint64_t i) { return 16 + 4 * i; });
  return out;
}

VectorSet load_vectors(const std::string& path) {
  auto ends_with = [&](const char* suffix) {
    std::string s(suffix);
    return path.size() >= s.size() &&
           path.compare(path.size() - s.size(), s.size(), s) == 0;
  };
  if (ends_with(".fvecs")) return load_fvecs(path);
  if (ends_with(".bvecs")) return load_bvecs(path);
  if (ends_with(".raw")) return load_raw(path);
  throw UsageError("unrecognized vector file extension: " + path);
}

void write_fvecs(const VectorSet& v, const std::string& path) {
  std::ofstream out = open_output(path);
  for (uint64_t i = 0; i < v.n; ++i) {
    uint32_t d = v.k;
    out.write(reinterpret_cast<const char*>(&d), 4);
    out.write(reinterpret_cast<const char*>(v.data.data() + i * v.k),
              static_cast<std::streamsize>(v.k) * 4);
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_raw(const VectorSet& v, const std::string& path) {
  std::ofstream out = open_output(path);
  uint64_t header[2] = {v.n, v.k};
  out.write(reinterpret_cast<const char*>(header), 16);
  out.write(reinterpret_cast<const char*>(v.data.data()),
            static_cast<std::streamsize>(v.data.size()) * 4);
  if (!out) throw IoError("write failed: " + path);
}

void save_ground_truth_csv(const GroundTruth& gt, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "query_id,nn_id,nn_dist_sq\n";
  out.precision(17);
  for (size_t i = 0; i < gt.size(); ++i)
    out << i << ',' << gt.nn_id[i] << ',' << gt.nn_dist_sq[i] << '\n';
  if (!out) throw IoError("write failed: " + path);
}

GroundTruth load_ground_truth_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  GroundTruth gt;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty ground-truth file");
  size_t expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    uint64_t qid;
    uint32_t id;
    double d;
    char c1, c2;
    if (!(row >> qid >> c1 >> id >> c2 >> d) || c1 != ',' || c2 != ',')
      throw IoError(path + ": malformed ground-truth row: " + line);
    if (qid != expected)
      throw IoError(path + ": ground-truth rows out of order");
    gt.nn_id.push_back(id);
    gt.nn_dist_sq.push_back(d);
    ++expected;
  }
  return gt;
}

}  // namespace rosanna
