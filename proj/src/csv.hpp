#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ixrisk {

// Deterministic shortest round-trip formatting; the byte-identical output
// contract depends on every float going through here.
std::string format_double(double v);
std::string format_int(std::int64_t v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;          // -1 when absent
    int require_column(const std::string& name) const;  // throws invalid_input
};

CsvTable read_csv(const std::string& path);
CsvTable read_csv_text(const std::string& text, const std::string& origin = "<text>");

class CsvBuilder {
public:
    explicit CsvBuilder(std::vector<std::string> header);

    CsvBuilder& cell(const std::string& v);
    CsvBuilder& cell(double v);
    CsvBuilder& cell(std::int64_t v);
    CsvBuilder& cell(int v) { return cell(static_cast<std::int64_t>(v)); }
    void end_row();

    const std::string& str() const { return out_; }

private:
    std::string out_;
    std::size_t n_cols_ = 0;
    std::size_t col_ = 0;
};

} // namespace ixrisk
