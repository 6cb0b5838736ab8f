#include "isotropica/csvio.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace isotropica {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

// Quote only when the cell would break the grammar; output stays stable
// because quoting depends on content alone.
std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    q += '"';
    return q;
}

} // namespace

CsvWriter::CsvWriter(const std::string& path, std::vector<std::string> columns)
    : path_(path), ncols_(columns.size()) {
    if (columns.empty()) throw std::invalid_argument("csv: no columns");
    out_ = std::fopen(path.c_str(), "wb");
    if (!out_) throw std::invalid_argument("out: cannot open " + path);
    std::string head;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) head += ',';
        head += escape(columns[i]);
    }
    head += '\n';
    std::fwrite(head.data(), 1, head.size(), out_);
}

CsvWriter::~CsvWriter() { close(); }

void CsvWriter::row(const std::vector<CsvValue>& cells) {
    if (!out_) throw std::invalid_argument("csv: writer closed: " + path_);
    if (cells.size() != ncols_)
        throw std::invalid_argument("csv: row arity mismatch in " + path_);
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        if (const auto* n = std::get_if<std::int64_t>(&cells[i])) {
            char buf[24];
            std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(*n));
            line += buf;
        } else if (const auto* d = std::get_if<double>(&cells[i])) {
            line += format_double(*d);
        } else {
            line += escape(std::get<std::string>(cells[i]));
        }
    }
    line += '\n';
    std::fwrite(line.data(), 1, line.size(), out_);
    ++rows_;
}

void CsvWriter::close() {
    if (out_) {
        std::fclose(out_);
        out_ = nullptr;
    }
}

} // namespace isotropica
