#pragma once

// Field snapshots: one UTF-8 JSON header line terminated by '\n', followed by
// nz*ny*nx little-endian IEEE-754 doubles in [z][y][x] order.
//
//   {"format":"phm-snapshot","version":1,"grid":{"L":1.0,"nx":64,"ny":64,"nz":32},
//    "model":{"L":1.0,"U0":1.0},"time":0.5,"variable":"theta",
//    "byte_order":"little","dtype":"float64","count":131072}

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "phm/errors.hpp"
#include "phm/grid.hpp"
#include "phm/state.hpp"

namespace phm {

inline constexpr int snapshot_version = 1;

struct SnapshotHeader {
  int version = snapshot_version;
  GridSpec grid{};
  ModelParams model{};
  double time = 0.0;
  std::string variable = "theta";
  std::string byte_order = "little";
  std::string dtype = "float64";
};

struct Snapshot {
  SnapshotHeader header;
  ScalarField field;
};

namespace detail {

inline bool known_variable(const std::string& v) {
  for (const char* n : {"theta", "eta", "w", "omega", "u", "v"})
    if (v == n) return true;
  return false;
}

inline std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

}  // namespace detail

inline nlohmann::ordered_json snapshot_header_json(const SnapshotHeader& h, std::size_t count) {
  nlohmann::ordered_json j;
  j["format"] = "phm-snapshot";
  j["version"] = h.version;
  j["grid"] = {{"L", h.grid.L}, {"nx", h.grid.nx}, {"ny", h.grid.ny}, {"nz", h.grid.nz}};
  j["model"] = {{"L", h.model.L}, {"U0", h.model.U0}};
  j["time"] = h.time;
  j["variable"] = h.variable;
  j["byte_order"] = h.byte_order;
  j["dtype"] = h.dtype;
  j["count"] = count;
  return j;
}

/// Writes `f` with `h`; the grid recorded is always f's grid.
inline void write_snapshot(const std::filesystem::path& path, const ScalarField& f, SnapshotHeader h) {
  if (!detail::known_variable(h.variable)) throw SnapshotError("snapshot: unknown variable '" + h.variable + "'");
  h.grid = f.grid();
  h.byte_order = "little";
  h.dtype = "float64";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SnapshotError("snapshot: cannot open '" + path.string() + "' for writing");
  out << snapshot_header_json(h, f.size()).dump() << '\n';
  std::vector<std::uint64_t> buf(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) buf[i] = detail::to_little(std::bit_cast<std::uint64_t>(f[i]));
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * 8));
  if (!out) throw SnapshotError("snapshot: write failed for '" + path.string() + "'");
}

/// Reads a snapshot; throws SnapshotError on a malformed header, a version or
/// byte-order mismatch, or a payload whose size differs from the header.
inline Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError("snapshot: cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw SnapshotError("snapshot: missing header line");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw SnapshotError(std::string("snapshot: header is not valid JSON: ") + e.what());
  }
  SnapshotHeader h;
  std::size_t count = 0;
  try {
    if (j.at("format").get<std::string>() != "phm-snapshot") throw SnapshotError("snapshot: not a phm snapshot");
    h.version = j.at("version").get<int>();
    if (h.version != snapshot_version)
      throw SnapshotError("snapshot: version mismatch (file " + std::to_string(h.version) + ", reader " +
                          std::to_string(snapshot_version) + ")");
    h.byte_order = j.at("byte_order").get<std::string>();
    if (h.byte_order != "little")
      throw SnapshotError("snapshot: unsupported byte order '" + h.byte_order + "' (only little-endian is read)");
    h.dtype = j.at("dtype").get<std::string>();
    if (h.dtype != "float64") throw SnapshotError("snapshot: unsupported element type '" + h.dtype + "'");
    const auto& g = j.at("grid");
    h.grid = GridSpec{g.at("L").get<double>(), g.at("nx").get<int>(), g.at("ny").get<int>(), g.at("nz").get<int>()};
    h.model = ModelParams{j.at("model").at("L").get<double>(), j.at("model").at("U0").get<double>()};
    h.time = j.at("time").get<double>();
    h.variable = j.at("variable").get<std::string>();
    count = j.at("count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SnapshotError(std::string("snapshot: bad header field: ") + e.what());
  }
  try {
    h.grid.validate();
  } catch (const ConfigError& e) {
    throw SnapshotError(std::string("snapshot: bad grid: ") + e.what());
  }
  if (!detail::known_variable(h.variable)) throw SnapshotError("snapshot: unknown variable '" + h.variable + "'");
  if (count != h.grid.size()) throw SnapshotError("snapshot: size mismatch (count vs grid)");

  const auto payload_start = in.tellg();
  in.seekg(0, std::ios::end);
  const auto payload = std::uint64_t(in.tellg() - payload_start);
  if (payload != count * 8)
    throw SnapshotError("snapshot: size mismatch (header declares " + std::to_string(count * 8) + " payload bytes, file has " +
                        std::to_string(payload) + ")");
  in.seekg(payload_start);
  std::vector<std::uint64_t> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(count * 8));
  if (!in) throw SnapshotError("snapshot: read failed");
  ScalarField f(h.grid);
  for (std::size_t i = 0; i < count; ++i) f[i] = std::bit_cast<double>(detail::to_little(buf[i]));
  return {h, std::move(f)};
}

}  // namespace phm
