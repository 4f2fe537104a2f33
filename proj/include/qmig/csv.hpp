#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Minimal CSV utilities.  All files this project writes are plain comma
// separated text without quoting (no field ever contains a comma), so the
// reader is deliberately simple.  Floating point values are formatted with
// %.17g, which round-trips IEEE doubles exactly and keeps every artifact
// byte-reproducible across runs.

namespace qmig::csv {

// Shortest exact decimal representation of a double (%.17g semantics).
std::string format_double(double v);

// Format with fixed precision (for human-facing summary columns).
std::string format_fixed(double v, int digits);

// Split one CSV line on commas; trims a trailing '\r' if present.
std::vector<std::string> split_line(const std::string& line);

// Parse helpers that fail loudly with the offending text.
double parse_double(const std::string& field);
long long parse_int(const std::string& field);

// Read all non-empty lines of a file; throws std::runtime_error on I/O error.
std::vector<std::string> read_lines(const std::string& path);

// Write a whole file atomically enough for our purposes (single write).
void write_file(const std::string& path, const std::string& content);

// FNV-1a 64-bit digest of a byte string; used for artifact manifests.
std::uint64_t fnv1a64(const std::string& bytes);

} // namespace qmig::csv
