// Small CSV / timestamp helpers shared by the stage file formats.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tvp {

std::vector<std::string> split_csv_line(const std::string& line);

// ISO-8601 UTC ("2020-06-01T08:00:00Z", 'Z' optional) or integer epoch
// seconds.
int64_t parse_timestamp(const std::string& s);
std::string format_timestamp(int64_t t);  // ISO-8601 UTC

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace tvp
