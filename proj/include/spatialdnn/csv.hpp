#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spatialdnn::csv {

/// Formats a real with enough digits for round-trip-stable output.
[[nodiscard]] std::string fmt(double value);

/// Accumulates rows in memory and writes them in one shot.
class Table {
public:
    explicit Table(std::vector<std::string> header);

    Table& row(std::vector<std::string> cells);
    [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }
    [[nodiscard]] const std::vector<std::string>& header() const noexcept { return header_; }
    [[nodiscard]] std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Writes `content` to `path` through a temporary sibling file and a rename,
/// so readers never observe a partial file.
void write_atomic(const std::filesystem::path& path, std::string_view content);

/// Minimal RFC-4180-ish record splitter (handles double-quoted fields).
[[nodiscard]] std::vector<std::string> split_record(std::string_view line);

struct Document {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Parses a finite real, ignoring surrounding blanks. Empty, malformed or
/// non-finite cells give nullopt.
[[nodiscard]] std::optional<double> parse_real(std::string_view cell);

/// Reads a whole CSV file with a header line. Blank lines are skipped.
[[nodiscard]] Document read_file(const std::filesystem::path& path);

}  // namespace spatialdnn::csv
