#pragma once

// Flat `key = value` config files: one pair per line, `#` comments, blank
// lines ignored.  Values are stored as strings; typed getters parse on read.

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "common.hpp"

namespace vdiff {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

class Config {
  public:
    Config() = default;

    static Config from_string(const std::string& text) {
        Config cfg;
        std::istringstream in(text);
        std::string line;
        i64 lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string stripped = trim(line);
            if (stripped.empty() || stripped[0] == '#') continue;
            const auto eq = stripped.find('=');
            check_arg(eq != std::string::npos,
                      "config: line " + std::to_string(lineno) + " has no '=': " + stripped);
            const std::string key = trim(stripped.substr(0, eq));
            check_arg(!key.empty(), "config: line " + std::to_string(lineno) + " has empty key");
            cfg.kv_[key] = trim(stripped.substr(eq + 1));
        }
        return cfg;
    }

    static Config from_file(const std::string& path) {
        std::ifstream in(path);
        check_runtime(in.good(), "config: cannot open " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return from_string(buf.str());
    }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    std::string get_str(const std::string& key) const {
        auto it = kv_.find(key);
        check_arg(it != kv_.end(), "config: missing key " + key);
        return it->second;
    }
    std::string get_str(const std::string& key, const std::string& fallback) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    i64 get_int(const std::string& key, i64 fallback) const {
        if (!has(key)) return fallback;
        return parse_int(key, get_str(key));
    }
    double get_double(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        return parse_double(key, get_str(key));
    }
    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = get_str(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        fail_arg("config: key " + key + " is not a bool: " + v);
    }

    // Sorted `key = value` lines; also the on-disk format.
    std::string serialize() const {
        std::ostringstream out;
        for (const auto& [k, v] : kv_) out << k << " = " << v << "\n";
        return out.str();
    }

    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    static i64 parse_int(const std::string& key, const std::string& v) {
        try {
            size_t used = 0;
            const long long x = std::stoll(v, &used);
            check_arg(used == v.size(), "config: key " + key + " is not an integer: " + v);
            return i64(x);
        } catch (const std::invalid_argument&) {
            fail_arg("config: key " + key + " is not an integer: " + v);
        } catch (const std::out_of_range&) {
            fail_arg("config: key " + key + " is out of range: " + v);
        }
    }
    static double parse_double(const std::string& key, const std::string& v) {
        try {
            size_t used = 0;
            const double x = std::stod(v, &used);
            check_arg(used == v.size(), "config: key " + key + " is not a number: " + v);
            return x;
        } catch (const std::invalid_argument&) {
            fail_arg("config: key " + key + " is not a number: " + v);
        } catch (const std::out_of_range&) {
            fail_arg("config: key " + key + " is out of range: " + v);
        }
    }

    std::map<std::string, std::string> kv_;
};

}  // namespace vdiff
