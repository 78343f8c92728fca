#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "slag/grid.hpp"

namespace slag {

// PF1 layout: `<name>` holds a JSON header
//   {"format":"PF1","dim":2,"shape":[n0,n1],"spacing":h,"origin":[o0,o1],
//    "ball_radius":R,"value_kind":"potential","sidecar":"<name>.bin",
//    "layout":"values+mask"}
// and the sidecar holds 2*N little-endian float64: the N node values in
// row-major order (last axis fastest) followed by N mask flags (0.0 / 1.0).

std::string pf1_header(const PotentialField& u, const std::string& sidecar_name);

/// Parses a header; throws ParseError carrying the byte offset of the first
/// malformed character (or of the header start for schema errors).
PotentialField parse_pf1_header(const std::string& text);

void write_pf1(const std::filesystem::path& path, const PotentialField& u);
PotentialField read_pf1(const std::filesystem::path& path);

// CSV layout: a "# PF1 {...}" metadata line (header JSON without sidecar),
// a column line "i,j[,k],x,y[,z],value,mask", then one row per node with
// 17 significant digits.

void write_csv(std::ostream& os, const PotentialField& u);
void write_csv(const std::filesystem::path& path, const PotentialField& u);
PotentialField read_csv(std::istream& is);
PotentialField read_csv(const std::filesystem::path& path);

/// Reads either format, chosen by extension (".csv" means CSV).
PotentialField read_field(const std::filesystem::path& path);
void write_field(const std::filesystem::path& path, const PotentialField& u);

/// FNV-1a over the raw bytes of values and mask; used for round-trip checks.
std::uint64_t field_checksum(const PotentialField& u);

}  // namespace slag
