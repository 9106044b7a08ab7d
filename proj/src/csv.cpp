#include "csv.hpp"

#include "errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace ixrisk {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_int(std::int64_t v) {
    char buf[24];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

int CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

int CsvTable::require_column(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw_invalid("missing CSV column '" + name + "'");
    return c;
}

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& origin,
                                    std::size_t lineno) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(ch);
        }
    }
    if (quoted) {
        throw_invalid(origin + ":" + std::to_string(lineno) + ": unterminated quote");
    }
    out.push_back(std::move(field));
    return out;
}

CsvTable parse_stream(std::istream& in, const std::string& origin) {
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == EOF) break;
        auto fields = split_line(line, origin, lineno);
        if (t.header.empty()) {
            t.header = std::move(fields);
        } else {
            if (fields.size() != t.header.size()) {
                throw_invalid(origin + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(t.header.size()) + " fields, got " +
                              std::to_string(fields.size()));
            }
            t.rows.push_back(std::move(fields));
        }
    }
    if (t.header.empty()) throw_invalid(origin + ": empty CSV");
    return t;
}

} // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open '" + path + "'");
    return parse_stream(in, path);
}

CsvTable read_csv_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    return parse_stream(in, origin);
}

CsvBuilder::CsvBuilder(std::vector<std::string> header) : n_cols_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out_.push_back(',');
        out_ += header[i];
    }
    out_.push_back('\n');
}

CsvBuilder& CsvBuilder::cell(const std::string& v) {
    if (col_ >= n_cols_) throw_invalid("CSV row has too many cells");
    if (col_) out_.push_back(',');
    if (v.find_first_of(",\"\n") != std::string::npos) {
        out_.push_back('"');
        for (char ch : v) {
            if (ch == '"') out_ += "\"\"";
            else out_.push_back(ch);
        }
        out_.push_back('"');
    } else {
        out_ += v;
    }
    ++col_;
    return *this;
}

CsvBuilder& CsvBuilder::cell(double v) { return cell(format_double(v)); }
CsvBuilder& CsvBuilder::cell(std::int64_t v) { return cell(format_int(v)); }

void CsvBuilder::end_row() {
    if (col_ != n_cols_) throw_invalid("CSV row has too few cells");
    out_.push_back('\n');
    col_ = 0;
}

} // namespace ixrisk
