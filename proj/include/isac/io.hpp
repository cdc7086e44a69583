// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace isac {

/// Shortest round-trip-safe text for a double (17 significant digits); "nan", "inf", "-inf" for
/// non-finite values.
std::string format_double(double v);

/// RFC 4180 field quoting: fields containing a comma, quote, CR or LF are quoted, quotes doubled.
std::string csv_field(const std::string& s);

/// Writes CRLF-terminated RFC 4180 records.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}
    void row(const std::vector<std::string>& fields);

private:
    std::ostream& os_;
};

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a64(const std::string& data);
std::string hex64(std::uint64_t v);

}  // namespace isac
