#include "lowrank/csv.hpp"

#include <charconv>

#include "lowrank/dataset.hpp"
#include "lowrank/error.hpp"

namespace lowrank {

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_csv(const CsvRow& header, const std::vector<CsvRow>& rows) {
    std::string out;
    auto emit = [&out](const CsvRow& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) out += ',';
            out += csv_escape(row[i]);
        }
        out += "\r\n";
    };
    emit(header);
    for (const CsvRow& row : rows) {
        if (row.size() != header.size()) {
            throw ShapeError("csv row has " + std::to_string(row.size()) + " fields, header has " +
                             std::to_string(header.size()));
        }
        emit(row);
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const CsvRow& header, const std::vector<CsvRow>& rows) {
    const std::string text = format_csv(header, rows);
    write_bytes_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<CsvRow> parse_csv(std::string_view text) {
    std::vector<CsvRow> records;
    CsvRow record;
    std::string field;
    std::size_t i = 0;
    bool at_record_start = true;
    while (i < text.size()) {
        at_record_start = false;
        if (text[i] == '"') {
            const std::size_t open = i++;
            for (;;) {
                if (i >= text.size()) throw ParseError("csv: unterminated quoted field", open);
                if (text[i] == '"') {
                    if (i + 1 < text.size() && text[i + 1] == '"') {
                        field += '"';
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                field += text[i++];
            }
            if (i < text.size() && text[i] != ',' && text[i] != '\r' && text[i] != '\n') {
                throw ParseError("csv: unexpected character after quoted field", i);
            }
        } else {
            while (i < text.size() && text[i] != ',' && text[i] != '\r' && text[i] != '\n') {
                if (text[i] == '"') throw ParseError("csv: quote inside unquoted field", i);
                field += text[i++];
            }
        }
        record.push_back(std::move(field));
        field.clear();
        if (i >= text.size()) break;
        if (text[i] == ',') {
            ++i;
            if (i == text.size()) record.emplace_back();
            continue;
        }
        if (text[i] == '\r') ++i;
        if (i < text.size() && text[i] == '\n') ++i;
        records.push_back(std::move(record));
        record.clear();
        at_record_start = true;
    }
    if (!at_record_start) records.push_back(std::move(record));
    return records;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace lowrank
