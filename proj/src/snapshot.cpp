#include "sktlab/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sktlab {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  std::uint64_t bits = 0;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
}

template <typename T>
T get_le(const std::vector<unsigned char>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("snapshot: truncated data");
  std::uint64_t bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) bits |= static_cast<std::uint64_t>(in[pos + b]) << (8 * b);
  pos += sizeof(T);
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string slice_name(const std::string& stem, std::size_t k) {
  std::ostringstream s;
  s << stem << '_' << std::setw(5) << std::setfill('0') << k << ".fld";
  return s.str();
}

}  // namespace

std::vector<unsigned char> encode_snapshot(const Field& f) {
  const Grid& g = f.grid();
  std::vector<unsigned char> out{'F', 'L', 'D', '1'};
  put_le<std::uint32_t>(out, kSnapshotVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(g.dim()));
  for (int a = 0; a < g.dim(); ++a) put_le<std::uint64_t>(out, g.cells(a));
  out.reserve(out.size() + 8 * f.size());
  for (double v : f.values()) put_le<double>(out, v);
  return out;
}

RawSnapshot decode_snapshot(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "FLD1", 4) != 0)
    throw std::runtime_error("snapshot: bad magic");
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kSnapshotVersion) throw std::runtime_error("snapshot: unsupported version");
  const auto rank = get_le<std::uint8_t>(bytes, pos);
  if (rank < 1 || rank > 2) throw std::runtime_error("snapshot: unsupported rank");
  RawSnapshot raw;
  std::uint64_t count = 1;
  for (int a = 0; a < rank; ++a) {
    raw.cells.push_back(get_le<std::uint64_t>(bytes, pos));
    count *= raw.cells.back();
  }
  if (bytes.size() - pos != 8 * count) throw std::runtime_error("snapshot: size mismatch");
  raw.values.resize(count);
  for (auto& v : raw.values) v = get_le<double>(bytes, pos);
  return raw;
}

void write_file_atomic(const fs::path& path, const std::vector<unsigned char>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  write_file_atomic(path, std::vector<unsigned char>(contents.begin(), contents.end()));
}

void write_snapshot(const fs::path& path, const Field& f) { write_file_atomic(path, encode_snapshot(f)); }

RawSnapshot read_snapshot(const fs::path& path) { return decode_snapshot(read_bytes(path)); }

std::vector<fs::path> write_space_time(const fs::path& dir, const std::string& stem,
                                       const SpaceTimeField& f) {
  const Grid& g = f.grid();
  std::vector<fs::path> written;
  json files = json::array();
  for (std::size_t k = 0; k < f.slices(); ++k) {
    const auto name = slice_name(stem, k);
    write_snapshot(dir / name, f.slice(k));
    written.push_back(dir / name);
    files.push_back(name);
  }
  json side;
  side["format"] = "FLD1";
  side["rank"] = g.dim();
  side["cells"] = json::array();
  side["lo"] = json::array();
  side["hi"] = json::array();
  for (int a = 0; a < g.dim(); ++a) {
    side["cells"].push_back(g.cells(a));
    side["lo"].push_back(g.lo(a));
    side["hi"].push_back(g.hi(a));
  }
  side["t0"] = f.axis().t0();
  side["T"] = f.axis().T();
  side["steps"] = f.axis().steps();
  side["dt"] = f.axis().dt();
  side["files"] = files;
  const auto sidecar = dir / (stem + ".json");
  write_file_atomic(sidecar, side.dump(2) + "\n");
  written.push_back(sidecar);
  return written;
}

SpaceTimeField read_space_time(const fs::path& dir, const std::string& stem) {
  std::ifstream in(dir / (stem + ".json"));
  if (!in) throw std::runtime_error("cannot open sidecar for " + stem);
  const json side = json::parse(in);
  const int rank = side.at("rank").get<int>();
  Grid grid = rank == 1
                  ? Grid::line(side["lo"][0], side["hi"][0], side["cells"][0].get<std::size_t>())
                  : Grid::rect({side["lo"][0], side["lo"][1]}, {side["hi"][0], side["hi"][1]},
                               {side["cells"][0].get<std::size_t>(), side["cells"][1].get<std::size_t>()});
  TimeAxis axis(side.at("t0").get<double>(), side.at("T").get<double>(),
                side.at("steps").get<std::size_t>());
  std::vector<Field> slices;
  for (const auto& name : side.at("files")) {
    auto raw = read_snapshot(dir / name.get<std::string>());
    for (int a = 0; a < rank; ++a)
      if (raw.cells.size() != static_cast<std::size_t>(rank) || raw.cells[a] != grid.cells(a))
        throw std::runtime_error("snapshot: shape differs from sidecar");
    slices.emplace_back(grid, std::move(raw.values));
  }
  return SpaceTimeField(axis, std::move(slices));
}

}  // namespace sktlab
