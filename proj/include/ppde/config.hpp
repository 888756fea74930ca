#pragma once

// Experiment configuration: flat key/value text grouped into [section] blocks.
//
//   # comment
//   [run]
//   seed = 12345
//   output = out/heat
//
//   [grid]
//   levels = 1 2 3 4 5
//
// Keys live inside a section; values run to the end of the line with '#'
// starting a comment. Lists are whitespace separated. Every lookup error
// names the section and key (and parse errors the line) so a bad file can
// be fixed without reading code. The raw text is kept verbatim: its fnv1a64
// hash identifies the run in the output manifest.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppde/math.hpp"

namespace ppde {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline std::string hex64(std::uint64_t v) {
    static const char* d = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = d[v & 0xf];
    return s;
}

class Config {
  public:
    static Config parse_text(const std::string& text, const std::string& origin = "config") {
        Config c;
        c.text_ = text;
        c.origin_ = origin;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string body = trim(line);
            if (body.empty()) continue;
            if (body.front() == '[') {
                if (body.back() != ']')
                    throw ConfigError(origin + " line " + std::to_string(lineno) +
                                      ": unterminated section header '" + body + "'");
                section = trim(body.substr(1, body.size() - 2));
                if (section.empty())
                    throw ConfigError(origin + " line " + std::to_string(lineno) + ": empty section name");
                continue;
            }
            const auto eq = body.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + " line " + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + body + "'");
            const std::string key = trim(body.substr(0, eq));
            const std::string value = trim(body.substr(eq + 1));
            if (key.empty())
                throw ConfigError(origin + " line " + std::to_string(lineno) + ": missing key before '='");
            if (section.empty())
                throw ConfigError(origin + " line " + std::to_string(lineno) + ": key '" + key +
                                  "' appears before any [section]");
            const std::string full = section + "." + key;
            if (c.kv_.count(full))
                throw ConfigError(origin + " line " + std::to_string(lineno) + ": duplicate key [" +
                                  section + "] " + key);
            c.kv_[full] = value;
        }
        return c;
    }

    static Config parse_file(const std::string& filename) {
        std::ifstream in(filename, std::ios::binary);
        if (!in) throw ConfigError("config: cannot open file '" + filename + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_text(buf.str(), filename);
    }

    bool has(const std::string& section, const std::string& key) const {
        return kv_.count(section + "." + key) > 0;
    }

    // --- required getters: a missing or malformed value names [section] key ---

    std::string str(const std::string& section, const std::string& key) const {
        const auto it = kv_.find(section + "." + key);
        if (it == kv_.end()) throw missing(section, key);
        return it->second;
    }

    double num(const std::string& section, const std::string& key) const {
        return to_num(section, key, str(section, key));
    }

    long integer(const std::string& section, const std::string& key) const {
        return to_int(section, key, str(section, key));
    }

    bool flag(const std::string& section, const std::string& key) const {
        return to_flag(section, key, str(section, key));
    }

    std::vector<double> num_list(const std::string& section, const std::string& key) const {
        std::vector<double> out;
        for (const std::string& tok : tokens(str(section, key)))
            out.push_back(to_num(section, key, tok));
        if (out.empty()) throw field(section, key, "list is empty");
        return out;
    }

    std::vector<int> int_list(const std::string& section, const std::string& key) const {
        std::vector<int> out;
        for (const std::string& tok : tokens(str(section, key)))
            out.push_back(static_cast<int>(to_int(section, key, tok)));
        if (out.empty()) throw field(section, key, "list is empty");
        return out;
    }

    std::vector<std::string> str_list(const std::string& section, const std::string& key) const {
        const auto out = tokens(str(section, key));
        if (out.empty()) throw field(section, key, "list is empty");
        return out;
    }

    // --- defaulted getters ---

    std::string str_or(const std::string& section, const std::string& key, const std::string& dflt) const {
        return has(section, key) ? str(section, key) : dflt;
    }
    double num_or(const std::string& section, const std::string& key, double dflt) const {
        return has(section, key) ? num(section, key) : dflt;
    }
    long integer_or(const std::string& section, const std::string& key, long dflt) const {
        return has(section, key) ? integer(section, key) : dflt;
    }
    bool flag_or(const std::string& section, const std::string& key, bool dflt) const {
        return has(section, key) ? flag(section, key) : dflt;
    }
    std::vector<double> num_list_or(const std::string& section, const std::string& key,
                                    std::vector<double> dflt) const {
        return has(section, key) ? num_list(section, key) : std::move(dflt);
    }

    ConfigError field(const std::string& section, const std::string& key, const std::string& why) const {
        return ConfigError(origin_ + ": [" + section + "] " + key + ": " + why);
    }

    // Copy with one key overridden. Internal view for parameter sweeps: the
    // raw text, and hence the run hash, stays that of the original file.
    Config with(const std::string& section, const std::string& key, const std::string& value) const {
        Config c = *this;
        c.kv_[section + "." + key] = value;
        return c;
    }

    const std::string& text() const { return text_; }
    const std::string& origin() const { return origin_; }
    std::uint64_t hash() const { return fnv1a64(text_); }

  private:
    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static std::vector<std::string> tokens(const std::string& s) {
        std::istringstream in(s);
        std::vector<std::string> out;
        std::string tok;
        while (in >> tok) out.push_back(tok);
        return out;
    }

    ConfigError missing(const std::string& section, const std::string& key) const {
        return ConfigError(origin_ + ": missing required key [" + section + "] " + key);
    }

    double to_num(const std::string& section, const std::string& key, const std::string& raw) const {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(raw, &used);
        } catch (const std::exception&) {
            throw field(section, key, "'" + raw + "' is not a number");
        }
        if (used != raw.size()) throw field(section, key, "'" + raw + "' is not a number");
        return v;
    }

    long to_int(const std::string& section, const std::string& key, const std::string& raw) const {
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(raw, &used);
        } catch (const std::exception&) {
            throw field(section, key, "'" + raw + "' is not an integer");
        }
        if (used != raw.size()) throw field(section, key, "'" + raw + "' is not an integer");
        return v;
    }

    bool to_flag(const std::string& section, const std::string& key, const std::string& raw) const {
        if (raw == "true" || raw == "yes" || raw == "1" || raw == "on") return true;
        if (raw == "false" || raw == "no" || raw == "0" || raw == "off") return false;
        throw field(section, key, "'" + raw + "' is not a boolean (true/false)");
    }

    std::map<std::string, std::string> kv_;
    std::string text_;
    std::string origin_ = "config";
};

}  // namespace ppde
