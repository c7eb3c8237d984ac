#include "spatialdnn/csv.hpp"

#include "spatialdnn/error.hpp"

#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace spatialdnn::csv {

std::string fmt(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return buf;
}

Table::Table(std::vector<std::string> header) : header_(std::move(header)) {}

Table& Table::row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) {
        throw InvalidInput("csv", "row has " + std::to_string(cells.size()) + " cells, header has " +
                                      std::to_string(header_.size()));
    }
    rows_.push_back(std::move(cells));
    return *this;
}

std::string Table::str() const {
    std::ostringstream out;
    auto emit = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            const std::string& c = cells[i];
            if (c.find_first_of(",\"\n") == std::string::npos) {
                out << c;
                continue;
            }
            out << '"';
            for (char ch : c) {
                if (ch == '"') out << '"';
                out << (ch == '\n' ? ' ' : ch);
            }
            out << '"';
        }
        out << '\n';
    };
    emit(header_);
    for (const auto& r : rows_) emit(r);
    return out.str();
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("csv", "cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("csv", "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<std::string> split_record(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::optional<double> parse_real(std::string_view cell) {
    while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.front()))) cell.remove_prefix(1);
    while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.back()))) cell.remove_suffix(1);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    if (cell.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

Document read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("csv", "cannot open " + path.string());
    Document doc;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = split_record(line);
        if (!have_header) {
            doc.header = std::move(cells);
            have_header = true;
        } else {
            doc.rows.push_back(std::move(cells));
        }
    }
    if (!have_header) throw InvalidInput("csv", "file is empty: " + path.string());
    return doc;
}

}  // namespace spatialdnn::csv
