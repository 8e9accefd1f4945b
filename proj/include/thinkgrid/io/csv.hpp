#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace thinkgrid {

// Append-oriented CSV writer; the header goes out once at creation.
class CsvWriter {
public:
    CsvWriter() = default;

    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns) {
        std::filesystem::create_directories(path.parent_path());
        const bool fresh =
            !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
        out_.open(path, std::ios::app);
        if (!out_) throw std::runtime_error("csv: cannot open " + path.string());
        if (fresh) {
            for (std::size_t i = 0; i < columns.size(); ++i)
                out_ << (i ? "," : "") << columns[i];
            out_ << '\n';
            out_.flush();
        }
    }

    template <typename... Ts>
    void row(const Ts&... values) {
        std::ostringstream line;
        bool first = true;
        ((line << (first ? "" : ",") << values, first = false), ...);
        out_ << line.str() << '\n';
        out_.flush();
    }

    bool open() const { return out_.is_open(); }

private:
    std::ofstream out_;
};

} // namespace thinkgrid
