#include "e4g/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "io_bytes.hpp"

namespace e4g {

namespace {

constexpr char kMagic[4] = {'E', '4', 'G', 'D'};
constexpr uint32_t kVersion = 1;
constexpr size_t kMaskBytes = (kSegmentLen + 7) / 8;  // 313

using detail::ByteReader;

}  // namespace

void write_segments(const std::vector<Segment>& segments, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  detail::put_u32(out, kVersion);
  detail::put_u32(out, uint32_t(segments.size()));
  for (const Segment& s : segments) {
    if (s.x.numel() != kSegmentLen || s.y.size() != kSegmentLen) {
      throw DataError("dataset: segment is not " + std::to_string(kSegmentLen) +
                      " samples long");
    }
    detail::put_u32(out, s.patient_id);
    detail::put_u8(out, uint8_t(s.artifact_kind));
    const float* x = s.x.data();
    for (size_t i = 0; i < kSegmentLen; ++i) detail::put_f32(out, x[i]);
    for (size_t b = 0; b < kMaskBytes; ++b) {
      uint8_t byte = 0;
      for (size_t bit = 0; bit < 8; ++bit) {
        const size_t idx = b * 8 + bit;
        if (idx < kSegmentLen && s.y[idx]) byte |= uint8_t(1u << bit);
      }
      detail::put_u8(out, byte);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("dataset: cannot open " + path + " for writing");
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw IoError("dataset: short write to " + path);
}

std::vector<Segment> read_segments(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("dataset: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  ByteReader r(buf, "dataset");

  if (r.bytes(4) != std::string(kMagic, 4)) throw IoError("dataset: bad magic");
  const uint32_t version = r.u32();
  if (version != kVersion) {
    throw IoError("dataset: unsupported version " + std::to_string(version));
  }
  const uint32_t count = r.u32();
  std::vector<Segment> segments;
  segments.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    Segment s;
    s.patient_id = r.u32();
    const uint8_t kind = r.u8();
    if (kind > uint8_t(ArtifactKind::shiver)) {
      throw IoError("dataset: bad artifact kind byte");
    }
    s.artifact_kind = ArtifactKind(kind);
    s.x = Tensor<float>::zeros({1, kSegmentLen});
    float* x = s.x.data();
    for (size_t k = 0; k < kSegmentLen; ++k) x[k] = r.f32();
    s.y.resize(kSegmentLen);
    for (size_t b = 0; b < kMaskBytes; ++b) {
      const uint8_t byte = r.u8();
      if (b + 1 == kMaskBytes && (byte & 0xf0) != 0) {
        throw IoError("dataset: nonzero padding bits in mask");
      }
      for (size_t bit = 0; bit < 8; ++bit) {
        const size_t idx = b * 8 + bit;
        if (idx < kSegmentLen) s.y[idx] = (byte >> bit) & 1u;
      }
    }
    segments.push_back(std::move(s));
  }
  if (!r.exhausted()) throw IoError("dataset: trailing bytes");
  return segments;
}

void write_annotations(const std::vector<Annotation>& annotations,
                       const std::string& path) {
  std::ostringstream os;
  char num[64];
  for (const Annotation& a : annotations) {
    os << a.patient_id << ' ' << a.channel_id;
    std::snprintf(num, sizeof(num), " %.17g %.17g", a.start_s, a.end_s);
    os << num << ' ' << artifact_kind_name(a.kind) << '\n';
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("annotations: cannot open " + path + " for writing");
  f << os.str();
  if (!f) throw IoError("annotations: short write to " + path);
}

std::vector<Annotation> read_annotations(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("annotations: cannot open " + path);
  std::vector<Annotation> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    Annotation a;
    std::string kind;
    if (!(is >> a.patient_id >> a.channel_id >> a.start_s >> a.end_s >> kind)) {
      throw DataError("annotations: malformed line " + std::to_string(lineno));
    }
    std::string extra;
    if (is >> extra) {
      throw DataError("annotations: trailing tokens on line " + std::to_string(lineno));
    }
    a.kind = artifact_kind_from_string(kind);  // throws DataError on unknown names
    out.push_back(a);
  }
  return out;
}

}  // namespace e4g
