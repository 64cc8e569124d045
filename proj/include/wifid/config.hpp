#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace wifid {

// Plain-text config: "[section]" headers, "key = value" lines, '#' comments.
// Keys are stored flattened as "section.key"; CLI flags override via set().
class Config {
public:
    Config() = default;

    static Config load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("config: cannot open " + path);
        Config c;
        c.parse(f, path);
        return c;
    }

    static Config parse_string(const std::string& text) {
        std::istringstream f(text);
        Config c;
        c.parse(f, "<string>");
        return c;
    }

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::string str(const std::string& key, const std::string& fallback = {}) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }
    long long integer(const std::string& key, long long fallback) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : std::stoll(it->second);
    }
    std::uint64_t u64(const std::string& key, std::uint64_t fallback) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : std::stoull(it->second);
    }
    double real(const std::string& key, double fallback) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : std::stod(it->second);
    }
    bool boolean(const std::string& key, bool fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        const std::string& v = it->second;
        if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
        if (v == "0" || v == "false" || v == "no" || v == "off") return false;
        throw std::runtime_error("config: key '" + key + "' is not a boolean: " + v);
    }

    const std::map<std::string, std::string>& entries() const { return kv_; }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw std::runtime_error("config: cannot write " + path);
        std::string section;
        for (const auto& [k, v] : kv_) {
            const auto dot = k.rfind('.');
            const std::string sec = dot == std::string::npos ? "" : k.substr(0, dot);
            const std::string name = dot == std::string::npos ? k : k.substr(dot + 1);
            if (sec != section) {
                section = sec;
                f << "[" << section << "]\n";
            }
            f << name << " = " << v << "\n";
        }
    }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return {};
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    void parse(std::istream& f, const std::string& origin) {
        std::string line, section;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw std::runtime_error("config: bad section header at " + origin +
                                             ":" + std::to_string(lineno));
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config: expected 'key = value' at " + origin +
                                         ":" + std::to_string(lineno));
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw std::runtime_error("config: empty key at " + origin + ":" +
                                         std::to_string(lineno));
            kv_[section.empty() ? key : section + "." + key] = value;
        }
    }

    std::map<std::string, std::string> kv_;
};

}  // namespace wifid
