#include "e4g/dataset_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "e4g/errors.hpp"
#include "e4g/rng.hpp"

using namespace e4g;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("e4g_io_" + std::to_string(std::rand()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<Segment> sample_segments(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<Segment> out;
  for (size_t k = 0; k < n; ++k) {
    Segment s;
    s.patient_id = uint32_t(rng.uniform_int(0, 40));
    s.channel_id = 0;
    s.artifact_kind = ArtifactKind(rng.uniform_int(0, int64_t(kArtifactKinds)));
    s.x = Tensor<float>::zeros({1, kSegmentLen});
    for (size_t i = 0; i < kSegmentLen; ++i) s.x.data()[i] = float(rng.normal());
    s.y.assign(kSegmentLen, 0);
    const size_t start = size_t(rng.uniform_int(0, kSegmentLen - 200));
    for (size_t i = start; i < start + 150; ++i) s.y[i] = 1;
    out.push_back(std::move(s));
  }
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("segments survive a round trip bit for bit") {
  TempDir dir;
  std::vector<Segment> segs = sample_segments(5, 77);
  segs[1].channel_id = 2;  // dropped on write
  const std::string path = dir.file("t.e4gd");
  write_segments(segs, path);
  std::vector<Segment> back = read_segments(path);

  REQUIRE(back.size() == segs.size());
  for (size_t k = 0; k < segs.size(); ++k) {
    CHECK(back[k].patient_id == segs[k].patient_id);
    CHECK(back[k].channel_id == 0);  // not persisted
    CHECK(back[k].artifact_kind == segs[k].artifact_kind);
    REQUIRE(back[k].y.size() == kSegmentLen);
    for (size_t i = 0; i < kSegmentLen; ++i) {
      CHECK(back[k].x.data()[i] == segs[k].x.data()[i]);
      CHECK(back[k].y[i] == segs[k].y[i]);
    }
  }

  // rewriting what was read reproduces the identical file
  const std::string copy = dir.file("copy.e4gd");
  write_segments(back, copy);
  CHECK(slurp(path) == slurp(copy));
}

TEST_CASE("segment files reject corruption") {
  TempDir dir;
  std::vector<Segment> segs = sample_segments(2, 13);
  const std::string path = dir.file("t.e4gd");
  write_segments(segs, path);
  const std::string good = slurp(path);

  const std::string bad = dir.file("bad.e4gd");

  std::string magic = good;
  magic[0] = 'X';
  spit(bad, magic);
  CHECK_THROWS_AS(read_segments(bad), IoError);

  spit(bad, good.substr(0, good.size() - 10));
  CHECK_THROWS_AS(read_segments(bad), IoError);

  spit(bad, good + "zz");
  CHECK_THROWS_AS(read_segments(bad), IoError);

  // flip one of the four padding bits in the first mask
  std::string padding = good;
  const size_t mask_end = 4 + 4 + 4 + (4 + 1 + kSegmentLen * 4 + 313);
  padding[mask_end - 1] = char(uint8_t(padding[mask_end - 1]) | 0x80);
  spit(bad, padding);
  CHECK_THROWS_AS(read_segments(bad), IoError);

  // an artifact kind byte outside the enum
  std::string kind = good;
  kind[4 + 4 + 4 + 4] = 9;
  spit(bad, kind);
  CHECK_THROWS_AS(read_segments(bad), IoError);

  CHECK_THROWS_AS(read_segments(dir.file("missing.e4gd")), IoError);

  // wrong-length segments never reach the disk
  std::vector<Segment> short_seg = sample_segments(1, 5);
  short_seg[0].y.pop_back();
  CHECK_THROWS_AS(write_segments(short_seg, dir.file("short.e4gd")), DataError);
}

TEST_CASE("annotations round trip through text") {
  TempDir dir;
  std::vector<Annotation> anns = {
      {0, 0, 1.5, 3.25, ArtifactKind::eye},
      {3, 1, 0.02, 0.52, ArtifactKind::shiver},
      {17, 0, 100.0, 103.5, ArtifactKind::electrode},
  };
  const std::string path = dir.file("a.txt");
  write_annotations(anns, path);
  std::vector<Annotation> back = read_annotations(path);
  REQUIRE(back.size() == anns.size());
  for (size_t i = 0; i < anns.size(); ++i) {
    CHECK(back[i].patient_id == anns[i].patient_id);
    CHECK(back[i].channel_id == anns[i].channel_id);
    CHECK(back[i].start_s == anns[i].start_s);  // %.17g is lossless
    CHECK(back[i].end_s == anns[i].end_s);
    CHECK(back[i].kind == anns[i].kind);
  }

  spit(path, "1 0 1.0 2.0\n");
  CHECK_THROWS_AS(read_annotations(path), DataError);
  spit(path, "1 0 1.0 2.0 eye extra\n");
  CHECK_THROWS_AS(read_annotations(path), DataError);
  spit(path, "1 0 1.0 2.0 blink\n");
  CHECK_THROWS_AS(read_annotations(path), DataError);
  CHECK_THROWS_AS(read_annotations(dir.file("missing.txt")), IoError);

  // empty files are an empty list, not an error
  spit(path, "");
  CHECK(read_annotations(path).empty());
}
