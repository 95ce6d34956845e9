#pragma once

#include <string>
#include <vector>

#include "e4g/signal.hpp"

namespace e4g {

// Binary segment container (magic "E4GD"). Little-endian; per segment the
// signal is stored as f32 and the mask as 2500 bits packed LSB-first into
// 313 bytes (the final four bits are zero). channel_id is not persisted.
void write_segments(const std::vector<Segment>& segments, const std::string& path);
std::vector<Segment> read_segments(const std::string& path);

// Plain-text annotations, one per line: patient_id channel_id start_s end_s kind
void write_annotations(const std::vector<Annotation>& annotations,
                       const std::string& path);
std::vector<Annotation> read_annotations(const std::string& path);

}  // namespace e4g
