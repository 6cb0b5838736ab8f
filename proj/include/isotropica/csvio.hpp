#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <variant>
#include <vector>

namespace isotropica {

inline constexpr const char* version_string = "0.1.0";

// Shortest 17-significant-digit decimal form; round-trips every finite
// double, so equal data yields equal bytes.
std::string format_double(double v);

using CsvValue = std::variant<std::int64_t, double, std::string>;

// CSV emitter with a fixed header row. All formatting is locale-independent
// and files are opened in binary mode, keeping output byte-stable across
// runs and platforms. Unwritable paths raise std::invalid_argument.
class CsvWriter {
public:
    CsvWriter(const std::string& path, std::vector<std::string> columns);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<CsvValue>& cells);
    std::size_t rows() const { return rows_; }
    void close();

private:
    std::FILE* out_ = nullptr;
    std::string path_;
    std::size_t ncols_ = 0;
    std::size_t rows_ = 0;
};

} // namespace isotropica
