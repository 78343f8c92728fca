#include "slag/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/core.h>
#include <json.hpp>

#include "slag/error.hpp"

namespace slag {

namespace {

using nlohmann::json;

json header_json(const PotentialField& u) {
  const GridSpec& g = u.grid;
  json j;
  j["format"] = "PF1";
  j["dim"] = g.dim;
  j["shape"] = json::array();
  j["origin"] = json::array();
  for (int a = 0; a < g.dim; ++a) {
    j["shape"].push_back(g.shape[a]);
    j["origin"].push_back(g.origin[a]);
  }
  j["spacing"] = g.spacing;
  j["ball_radius"] = g.ball_radius;
  j["value_kind"] = u.value_kind;
  return j;
}

PotentialField field_from_header(const json& j) {
  PotentialField u;
  GridSpec& g = u.grid;
  try {
    if (j.contains("format") && j.at("format").get<std::string>() != "PF1")
      throw ParseError("PF1 header: unsupported format tag", 0);
    g.dim = j.at("dim").get<int>();
    if (g.dim != 2 && g.dim != 3) throw ParseError(fmt::format("PF1 header: unsupported dim {}", g.dim), 0);
    const auto& shape = j.at("shape");
    const auto& origin = j.at("origin");
    if (shape.size() != static_cast<std::size_t>(g.dim) || origin.size() != static_cast<std::size_t>(g.dim))
      throw ParseError("PF1 header: shape/origin length does not match dim", 0);
    for (int a = 0; a < g.dim; ++a) {
      g.shape[a] = shape.at(a).get<int>();
      g.origin[a] = origin.at(a).get<double>();
    }
    g.spacing = j.at("spacing").get<double>();
    g.ball_radius = j.value("ball_radius", 0.0);
    u.value_kind = j.value("value_kind", std::string("potential"));
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("PF1 header: {}", e.what()), 0);
  }
  try {
    g.validate();
  } catch (const PreconditionError& e) {
    throw ParseError(fmt::format("PF1 header: {}", e.what()), 0);
  }
  u.values.assign(g.size(), 0.0);
  u.mask.assign(g.size(), 0);
  return u;
}

double to_le(double v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  bits = __builtin_bswap64(bits);
  std::memcpy(&v, &bits, sizeof bits);
  return v;
}

}  // namespace

std::string pf1_header(const PotentialField& u, const std::string& sidecar_name) {
  json j = header_json(u);
  j["sidecar"] = sidecar_name;
  j["layout"] = "values+mask";
  return j.dump(2) + "\n";
}

PotentialField parse_pf1_header(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // json counts bytes from 1.
    const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    throw ParseError(fmt::format("PF1 header parse error at byte {}: {}", offset, e.what()), offset);
  }
  if (!j.is_object()) throw ParseError("PF1 header is not a JSON object", 0);
  return field_from_header(j);
}

void write_pf1(const std::filesystem::path& path, const PotentialField& u) {
  const std::string sidecar = path.filename().string() + ".bin";
  {
    std::ofstream os(path);
    if (!os) throw Error(fmt::format("cannot open {} for writing", path.string()));
    os << pf1_header(u, sidecar);
  }
  std::ofstream bs(path.parent_path() / sidecar, std::ios::binary);
  if (!bs) throw Error(fmt::format("cannot open sidecar for {}", path.string()));
  std::vector<double> buf;
  buf.reserve(2 * u.values.size());
  for (double v : u.values) buf.push_back(to_le(v));
  for (auto m : u.mask) buf.push_back(to_le(m ? 1.0 : 0.0));
  bs.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
}

PotentialField read_pf1(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(fmt::format("cannot open {}", path.string()));
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  PotentialField u = parse_pf1_header(text);
  const json j = json::parse(text);
  const std::string sidecar = j.value("sidecar", path.filename().string() + ".bin");
  std::ifstream bs(path.parent_path() / sidecar, std::ios::binary);
  if (!bs) throw Error(fmt::format("missing PF1 sidecar {}", sidecar));
  const std::size_t n = u.grid.size();
  std::vector<double> buf(2 * n);
  bs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
  if (static_cast<std::size_t>(bs.gcount()) != buf.size() * sizeof(double))
    throw ParseError(fmt::format("PF1 sidecar {} is truncated", sidecar), static_cast<std::size_t>(bs.gcount()));
  for (std::size_t k = 0; k < n; ++k) {
    u.values[k] = to_le(buf[k]);
    u.mask[k] = to_le(buf[n + k]) != 0.0 ? 1 : 0;
  }
  return u;
}

void write_csv(std::ostream& os, const PotentialField& u) {
  const GridSpec& g = u.grid;
  os << "# PF1 " << header_json(u).dump() << "\n";
  static const char* idx_names[] = {"i", "j", "k"};
  static const char* x_names[] = {"x", "y", "z"};
  for (int a = 0; a < g.dim; ++a) os << idx_names[a] << ",";
  for (int a = 0; a < g.dim; ++a) os << x_names[a] << ",";
  os << "value,mask\n";
  std::string line;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Index idx = g.unflat(k);
    const Point x = g.coords(k);
    line.clear();
    for (int a = 0; a < g.dim; ++a) line += fmt::format("{},", idx[a]);
    for (int a = 0; a < g.dim; ++a) line += fmt::format("{:.17g},", x[a]);
    line += fmt::format("{:.17g},{}\n", u.values[k], u.mask[k] ? 1 : 0);
    os << line;
  }
}

void write_csv(const std::filesystem::path& path, const PotentialField& u) {
  std::ofstream os(path);
  if (!os) throw Error(fmt::format("cannot open {} for writing", path.string()));
  write_csv(os, u);
}

PotentialField read_csv(std::istream& is) {
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(is, line) || line.rfind("# PF1 ", 0) != 0)
    throw ParseError("CSV field is missing its '# PF1' metadata line", 0);
  PotentialField u;
  try {
    u = parse_pf1_header(line.substr(6));
  } catch (const ParseError& e) {
    throw ParseError(e.what(), 6 + e.byte_offset());
  }
  offset += line.size() + 1;
  if (!std::getline(is, line)) throw ParseError("CSV field is missing its column line", offset);
  offset += line.size() + 1;
  const GridSpec& g = u.grid;
  std::vector<std::uint8_t> seen(g.size(), 0);
  while (std::getline(is, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    if (cols.size() != static_cast<std::size_t>(2 * g.dim + 2))
      throw ParseError(fmt::format("CSV row has {} columns at byte {}", cols.size(), offset), offset);
    Index idx{0, 0, 0};
    try {
      for (int a = 0; a < g.dim; ++a) idx[a] = std::stoi(cols[a]);
      if (!g.contains(idx)) throw ParseError(fmt::format("CSV node index out of range at byte {}", offset), offset);
      const std::size_t k = g.flat(idx);
      u.values[k] = std::stod(cols[2 * g.dim]);
      u.mask[k] = std::stoi(cols[2 * g.dim + 1]) != 0 ? 1 : 0;
      seen[k] = 1;
    } catch (const std::logic_error&) {
      throw ParseError(fmt::format("malformed CSV number at byte {}", offset), offset);
    }
    offset += line.size() + 1;
  }
  for (auto s : seen)
    if (!s) throw ParseError("CSV field does not list every node", offset);
  return u;
}

PotentialField read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(fmt::format("cannot open {}", path.string()));
  return read_csv(is);
}

PotentialField read_field(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? read_csv(path) : read_pf1(path);
}

void write_field(const std::filesystem::path& path, const PotentialField& u) {
  if (path.extension() == ".csv")
    write_csv(path, u);
  else
    write_pf1(path, u);
}

std::uint64_t field_checksum(const PotentialField& u) {
  std::uint64_t h = 1469598103934665603ull;
  auto feed = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  feed(u.values.data(), u.values.size() * sizeof(double));
  feed(u.mask.data(), u.mask.size());
  return h;
}

}  // namespace slag
