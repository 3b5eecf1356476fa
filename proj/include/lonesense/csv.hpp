#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lonesense {

// Minimal RFC-4180-style CSV: quoted fields with doubled quotes, no embedded
// newlines. Files we write may start with `# key=value` comment lines; the
// reader collects them.

std::string csv_escape(std::string_view field);
std::vector<std::string> split_csv_line(const std::string& line);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string config_hash;  // from a leading "# config=<hex>" line, if any
};

CsvTable read_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const std::string& config_hash = "");

// Canonical numeric renderings. All artifact files go through these so that
// reruns are byte-identical.
std::string fmt_real(double v);                 // %.12g, -0 normalized
std::string fmt_fixed(double v, int decimals);  // fixed decimals, -0.00 normalized
// Round to 2 decimals, trim trailing zeros; integers render without a point.
std::string fmt_compact2(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace lonesense
