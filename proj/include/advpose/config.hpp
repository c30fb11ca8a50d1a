#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "advpose/error.hpp"

namespace advpose {

// Minimal TOML-style key-value document: [section] headers, `key = value`
// lines, '#' comments. Values: quoted strings, numbers, true/false, or
// single-line arrays of numbers or quoted strings. That subset covers every
// configuration key this project defines while staying trivially parseable.
class KvDoc {
public:
    using Value = std::variant<double, bool, std::string, std::vector<double>,
                               std::vector<std::string>>;

    static KvDoc parse_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw Error("cannot open config file: " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        return parse(ss.str(), path);
    }

    static KvDoc parse(const std::string& text, const std::string& name = "<string>") {
        KvDoc doc;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string stripped = strip_comment(line);
            std::string t = trim(stripped);
            if (t.empty()) continue;
            if (t.front() == '[') {
                if (t.back() != ']' || t.size() < 3)
                    throw ParseError(name + ":" + std::to_string(line_no) +
                                     ": malformed section header");
                section = trim(t.substr(1, t.size() - 2));
                doc.sections_[section];    // record even if empty
                continue;
            }
            auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ParseError(name + ":" + std::to_string(line_no) +
                                 ": expected 'key = value'");
            std::string key = trim(t.substr(0, eq));
            std::string raw = trim(t.substr(eq + 1));
            if (key.empty() || raw.empty())
                throw ParseError(name + ":" + std::to_string(line_no) + ": empty key or value");
            doc.sections_[section][key] = parse_value(raw, name, line_no);
        }
        return doc;
    }

    bool has_section(const std::string& section) const { return sections_.count(section) > 0; }

    bool has(const std::string& section, const std::string& key) const {
        auto s = sections_.find(section);
        return s != sections_.end() && s->second.count(key) > 0;
    }

    std::vector<std::string> keys(const std::string& section) const {
        std::vector<std::string> out;
        auto s = sections_.find(section);
        if (s == sections_.end()) return out;
        for (const auto& [k, v] : s->second) out.push_back(k);
        return out;
    }

    double number(const std::string& section, const std::string& key) const {
        return expect<double>(section, key, "number");
    }
    double number_or(const std::string& section, const std::string& key, double fallback) const {
        return has(section, key) ? number(section, key) : fallback;
    }
    long integer(const std::string& section, const std::string& key) const {
        double v = number(section, key);
        long i = static_cast<long>(v);
        if (static_cast<double>(i) != v)
            throw ParseError("[" + section + "]." + key + " must be an integer");
        return i;
    }
    long integer_or(const std::string& section, const std::string& key, long fallback) const {
        return has(section, key) ? integer(section, key) : fallback;
    }
    bool boolean_or(const std::string& section, const std::string& key, bool fallback) const {
        return has(section, key) ? expect<bool>(section, key, "boolean") : fallback;
    }
    std::string str(const std::string& section, const std::string& key) const {
        return expect<std::string>(section, key, "string");
    }
    std::string str_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const {
        return has(section, key) ? str(section, key) : fallback;
    }
    std::vector<double> numbers(const std::string& section, const std::string& key) const {
        return expect<std::vector<double>>(section, key, "number array");
    }
    std::vector<std::string> strings(const std::string& section, const std::string& key) const {
        return expect<std::vector<std::string>>(section, key, "string array");
    }

private:
    template <typename T>
    T expect(const std::string& section, const std::string& key, const char* what) const {
        auto s = sections_.find(section);
        if (s == sections_.end() || !s->second.count(key))
            throw ParseError("missing config key [" + section + "]." + key);
        const Value& v = s->second.at(key);
        if (!std::holds_alternative<T>(v))
            throw ParseError("[" + section + "]." + key + " must be a " + what);
        return std::get<T>(v);
    }

    static std::string trim(const std::string& s) {
        auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    // Strip a '#' comment, respecting quoted strings.
    static std::string strip_comment(const std::string& s) {
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            if (s[i] == '#' && !quoted) return s.substr(0, i);
        }
        return s;
    }

    static Value parse_scalar(const std::string& raw, const std::string& name, int line_no) {
        if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"')
            return raw.substr(1, raw.size() - 2);
        if (raw == "true") return true;
        if (raw == "false") return false;
        try {
            std::size_t used = 0;
            double v = std::stod(raw, &used);
            if (used != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw ParseError(name + ":" + std::to_string(line_no) + ": bad value '" + raw + "'");
        }
    }

    static Value parse_value(const std::string& raw, const std::string& name, int line_no) {
        if (raw.front() != '[') return parse_scalar(raw, name, line_no);
        if (raw.back() != ']')
            throw ParseError(name + ":" + std::to_string(line_no) + ": unterminated array");
        std::string inner = raw.substr(1, raw.size() - 2);
        std::vector<std::string> items;
        std::string cur;
        bool quoted = false;
        for (char c : inner) {
            if (c == '"') quoted = !quoted;
            if (c == ',' && !quoted) {
                items.push_back(trim(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!trim(cur).empty()) items.push_back(trim(cur));
        if (items.empty()) throw ParseError(name + ":" + std::to_string(line_no) + ": empty array");

        if (items.front().front() == '"') {
            std::vector<std::string> out;
            for (const auto& item : items) {
                Value v = parse_scalar(item, name, line_no);
                if (!std::holds_alternative<std::string>(v))
                    throw ParseError(name + ":" + std::to_string(line_no) +
                                     ": mixed array element types");
                out.push_back(std::get<std::string>(v));
            }
            return out;
        }
        std::vector<double> out;
        for (const auto& item : items) {
            Value v = parse_scalar(item, name, line_no);
            if (!std::holds_alternative<double>(v))
                throw ParseError(name + ":" + std::to_string(line_no) +
                                 ": mixed array element types");
            out.push_back(std::get<double>(v));
        }
        return out;
    }

    std::map<std::string, std::map<std::string, Value>> sections_;
};

}  // namespace advpose
