#include "xqc/csv.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace xqc {

std::string format_double(double v) {
    if (v == 0.0) v = 0.0; // collapse -0
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = std::strtod(buf, nullptr);
        if (back == v || (std::isnan(back) && std::isnan(v))) return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& header,
                     const std::vector<std::string>& provenance)
    : out_(path) {
    if (!out_) throw std::runtime_error("cannot open output file: " + path);
    for (const auto& line : provenance) out_ << "# " << line << "\n";
    out_ << header << "\n";
}

CsvWriter::~CsvWriter() = default;

void CsvWriter::row(const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
}

} // namespace xqc
