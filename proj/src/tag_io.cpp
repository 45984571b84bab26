#include "sqz/tag_io.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "sqz/csv.hpp"
#include "sqz/errors.hpp"

namespace sqz {

namespace {

template <typename T>
void put_le(std::array<unsigned char, 16>& buf, std::size_t at, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[at + i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
}

template <typename T>
T get_le(const std::array<unsigned char, 16>& buf, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(buf[at + i]) << (8 * i));
  return v;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::io, "tag header key '" + key + "' is not a number");
  }
}

}  // namespace

std::filesystem::path header_path(const std::filesystem::path& bin_path) {
  auto p = bin_path;
  p += ".hdr";
  return p;
}

void write_tag_stream(const std::filesystem::path& bin_path, const TagStream& stream) {
  stream.validate();
  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw Error(ErrorKind::io, "cannot open " + bin_path.string() + " for writing");
  std::array<unsigned char, 16> buf{};
  for (const auto& r : stream.records) {
    put_le<std::uint16_t>(buf, 0, r.channel);
    put_le<std::uint16_t>(buf, 2, r.flags);
    put_le<std::uint32_t>(buf, 4, 0);
    put_le<std::uint64_t>(buf, 8, r.time_ps);
    bin.write(reinterpret_cast<const char*>(buf.data()), buf.size());
  }
  if (!bin) throw Error(ErrorKind::io, "write failed for " + bin_path.string());

  std::ofstream hdr(header_path(bin_path), std::ios::trunc);
  if (!hdr) throw Error(ErrorKind::io, "cannot open tag header for writing");
  hdr << "format = sqz-tags-v1\n";
  hdr << "clock_period_ps = " << format_number(stream.clock_period_ps) << '\n';
  hdr << "duration_s = " << format_number(stream.duration_s) << '\n';
  hdr << "records = " << stream.records.size() << '\n';
  for (const auto& [ch, name] : stream.channel_names) hdr << "channel." << ch << " = " << name << '\n';
  if (!hdr) throw Error(ErrorKind::io, "write failed for tag header");
}

TagStream read_tag_stream(const std::filesystem::path& bin_path) {
  std::ifstream hdr(header_path(bin_path));
  if (!hdr) throw Error(ErrorKind::io, "missing tag header " + header_path(bin_path).string());
  TagStream s;
  bool have_period = false;
  std::string line;
  while (std::getline(hdr, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "clock_period_ps") {
      s.clock_period_ps = parse_double(key, val);
      have_period = true;
    } else if (key == "duration_s") {
      s.duration_s = parse_double(key, val);
    } else if (key.rfind("channel.", 0) == 0) {
      s.channel_names[static_cast<std::uint16_t>(std::stoul(key.substr(8)))] = val;
    }
  }
  if (!have_period || !(s.clock_period_ps > 0.0)) throw Error(ErrorKind::io, "tag header lacks a valid clock_period_ps");

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error(ErrorKind::io, "cannot open " + bin_path.string());
  std::array<unsigned char, 16> buf{};
  while (bin.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
    s.records.push_back(make_tag(get_le<std::uint16_t>(buf, 0), get_le<std::uint64_t>(buf, 8), s.clock_period_ps,
                                 get_le<std::uint16_t>(buf, 2)));
  }
  if (bin.gcount() != 0) throw Error(ErrorKind::io, "tag file length is not a multiple of 16 bytes");
  s.validate();
  return s;
}

void write_tag_csv(std::ostream& out, const TagStream& stream) {
  CsvWriter w(out);
  w.header({"channel", "clock_index", "time_offset_ps"});
  for (const auto& r : stream.records)
    w.raw_row({format_number(static_cast<std::uint64_t>(r.channel)), format_number(r.clock_index),
               format_number(r.time_offset_ps)});
}

TagStream read_tag_csv(std::istream& in, double clock_period_ps, double duration_s) {
  TagStream s;
  s.clock_period_ps = clock_period_ps;
  s.duration_s = duration_s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.rfind("channel", 0) == 0) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) throw Error(ErrorKind::io, "tag CSV line " + std::to_string(lineno) + " needs 3 columns");
    try {
      const auto ch = static_cast<std::uint16_t>(std::stoul(cells[0]));
      const auto idx = std::stoull(cells[1]);
      const double off = std::stod(cells[2]);
      const double t = static_cast<double>(idx) * clock_period_ps + off;
      s.records.push_back(make_tag(ch, static_cast<std::uint64_t>(std::llround(t)), clock_period_ps));
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::io, "tag CSV line " + std::to_string(lineno) + " is malformed");
    }
  }
  std::stable_sort(s.records.begin(), s.records.end(),
                   [](const TagRecord& a, const TagRecord& b) { return a.time_ps < b.time_ps; });
  s.validate();
  return s;
}

}  // namespace sqz
