#pragma once

// CSV and manifest output. All experiment results leave the CLI as CSV files
// plus one manifest per run directory. Rows are assembled in memory, in
// order, on one thread, and numbers are printed with a fixed shortest
// round-trip format, so a run with the same config, seed, and thread setting
// produces byte-identical files. The manifest ties every file back to the
// config hash; nothing time- or host-dependent is recorded.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ppde/config.hpp"
#include "ppde/version.hpp"

namespace ppde {

// A CSV file under assembly: fixed header, cells appended row by row.
class CsvFile {
  public:
    CsvFile(std::string name, std::vector<std::string> header)
        : name_(std::move(name)), width_(header.size()) {
        if (header.empty()) throw std::logic_error("csv: header must name at least one column");
        body_ = join(header) + "\n";
    }

    CsvFile& cell(const std::string& s) {
        if (s.find_first_of(",\n\"") != std::string::npos)
            throw std::logic_error("csv: cell value '" + s + "' needs quoting, which the format forbids");
        row_.push_back(s);
        return *this;
    }
    CsvFile& cell(const char* s) { return cell(std::string(s)); }
    CsvFile& cell(double v) { return cell(fmt_g17(v)); }
    CsvFile& cell(int v) { return cell(std::to_string(v)); }
    CsvFile& cell(long v) { return cell(std::to_string(v)); }
    CsvFile& cell(std::size_t v) { return cell(std::to_string(v)); }
    CsvFile& cell(bool v) { return cell(std::string(v ? "1" : "0")); }
    CsvFile& blank() { return cell(std::string()); }

    void end_row() {
        if (row_.size() != width_)
            throw std::logic_error("csv: row in " + name_ + " has " + std::to_string(row_.size()) +
                                   " cells, header has " + std::to_string(width_));
        body_ += join(row_) + "\n";
        row_.clear();
    }

    const std::string& name() const { return name_; }
    const std::string& bytes() const {
        if (!row_.empty()) throw std::logic_error("csv: unfinished row in " + name_);
        return body_;
    }

  private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string s;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) s += ',';
            s += cells[i];
        }
        return s;
    }

    std::string name_;
    std::size_t width_;
    std::vector<std::string> row_;
    std::string body_;
};

// Non-CSV output riding along with a run (e.g. a value-field dump).
struct NamedBlob {
    std::string name;
    std::string bytes;
};

// Writes the assembled files plus manifest.txt into `dir`, creating it first.
inline void write_run(const std::string& dir, const std::string& command, const Config& cfg,
                      std::uint64_t seed, const std::vector<CsvFile>& files,
                      const std::vector<NamedBlob>& extras = {}) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::string man;
    man += "ppde-manifest " + std::to_string(kManifestFormat) + "\n";
    man += "command " + command + "\n";
    man += "config_hash " + hex64(cfg.hash()) + "\n";
    man += "config_origin " + cfg.origin() + "\n";
    man += "seed " + std::to_string(seed) + "\n";
    man += "library " + std::string(kVersion) + "\n";
    man += "config_format " + std::to_string(kConfigFormat) + "\n";

    const auto put = [&](const std::string& name, const std::string& bytes, const char* tag) {
        const fs::path p = fs::path(dir) / name;
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("output: cannot write " + p.string());
        out << bytes;
        out.close();
        man += std::string(tag) + " " + name + " " + hex64(fnv1a64(bytes)) + "\n";
    };
    for (const CsvFile& f : files) put(f.name(), f.bytes(), "csv");
    for (const NamedBlob& b : extras) put(b.name, b.bytes, "file");

    const fs::path mp = fs::path(dir) / "manifest.txt";
    std::ofstream mout(mp, std::ios::binary | std::ios::trunc);
    if (!mout) throw std::runtime_error("output: cannot write " + mp.string());
    mout << man;
}

}  // namespace ppde
