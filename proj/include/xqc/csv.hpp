#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace xqc {

// Shortest round-trippable decimal representation of a double. Keeps CSV
// output byte-reproducible across runs.
std::string format_double(double v);

// Writes rows of comma-separated fields with optional '#' provenance comment
// lines before the header.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& header,
              const std::vector<std::string>& provenance = {});
    ~CsvWriter();

    void row(const std::vector<std::string>& fields);
    bool good() const { return out_.good(); }

private:
    std::ofstream out_;
};

} // namespace xqc
