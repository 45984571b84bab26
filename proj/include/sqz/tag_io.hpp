#pragma once

// TagStream persistence. Binary records are 16 bytes, little endian:
// u16 channel, u16 flags, u32 reserved (0), u64 time in ps since run start.
// The sidecar "<file>.hdr" holds clock_period_ps, duration_s and channel names as key = value.

#include <filesystem>
#include <istream>
#include <ostream>

#include "sqz/tag_pipeline.hpp"

namespace sqz {

void write_tag_stream(const std::filesystem::path& bin_path, const TagStream& stream);
TagStream read_tag_stream(const std::filesystem::path& bin_path);

/// CSV with columns channel, clock_index, time_offset_ps. Reading needs the clock period,
/// which the CSV does not carry.
void write_tag_csv(std::ostream& out, const TagStream& stream);
TagStream read_tag_csv(std::istream& in, double clock_period_ps, double duration_s);

std::filesystem::path header_path(const std::filesystem::path& bin_path);

}  // namespace sqz
