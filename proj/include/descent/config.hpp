#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "descent/error.hpp"

namespace descent {

// Flat key = value configuration file with dotted, namespaced keys:
//
//   # benchmark run
//   model.kind = cnn
//   optimizers = sgd, nrsgd, iagd
//   lr.eta0 = 0.001
//
// '#' starts a comment, blank lines are skipped, later assignments win.
class Config {
public:
    static Config parse_string(const std::string& text) {
        Config cfg;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw Error("config", "line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw Error("config", "line " + std::to_string(lineno) + ": empty key");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream file(path);
        if (!file) throw Error("io", "cannot open config file " + path);
        std::ostringstream buf;
        buf << file.rdbuf();
        return parse_string(buf.str());
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw Error("config", "missing required key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        return to_double(key, values_.at(key));
    }

    long get_long(const std::string& key, long fallback) const {
        if (!has(key)) return fallback;
        const std::string& v = values_.at(key);
        try {
            std::size_t used = 0;
            const long out = std::stol(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw Error("config", "key '" + key + "': expected integer, got '" + v + "'");
        }
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const std::string& v = values_.at(key);
        try {
            std::size_t used = 0;
            const unsigned long long out = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw Error("config", "key '" + key + "': expected unsigned integer, got '" + v + "'");
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string& v = values_.at(key);
        if (v == "true" || v == "on" || v == "1") return true;
        if (v == "false" || v == "off" || v == "0") return false;
        throw Error("config", "key '" + key + "': expected boolean, got '" + v + "'");
    }

    // Comma-separated list.
    std::vector<std::string> get_list(const std::string& key) const {
        std::vector<std::string> out;
        if (!has(key)) return out;
        std::istringstream in(values_.at(key));
        std::string item;
        while (std::getline(in, item, ',')) {
            const std::string t = trim(item);
            if (!t.empty()) out.push_back(t);
        }
        return out;
    }

    std::vector<std::string> keys() const {
        std::vector<std::string> out;
        for (const auto& [k, _] : values_) out.push_back(k);
        return out;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

private:
    static std::string trim(const std::string& s) {
        const auto begin = s.find_first_not_of(" \t\r\n");
        if (begin == std::string::npos) return "";
        const auto end = s.find_last_not_of(" \t\r\n");
        return s.substr(begin, end - begin + 1);
    }

    double to_double(const std::string& key, const std::string& v) const {
        try {
            std::size_t used = 0;
            const double out = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw Error("config", "key '" + key + "': expected number, got '" + v + "'");
        }
    }

    std::map<std::string, std::string> values_;
};

} // namespace descent
