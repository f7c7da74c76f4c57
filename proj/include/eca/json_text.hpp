#pragma once

#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eca/errors.hpp"
#include "eca/linalg.hpp"

namespace eca::jsontext {

/// Decimal with 17 significant digits: enough to reproduce any 64-bit
/// float exactly on re-parse.
inline std::string format_double(double v) {
    if (!std::isfinite(v)) throw NumericsError("refusing to serialize non-finite value");
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Streaming writer for the small document schemas used by this project.
/// Keys are emitted in insertion order so output is byte-stable.
class Writer {
  public:
    Writer& begin_object() { return open('{'); }
    Writer& end_object() { return close('}'); }
    Writer& begin_array() { return open('['); }
    Writer& end_array() { return close(']'); }

    Writer& key(const std::string& k) {
        comma();
        out_ << '"' << escape(k) << "\":";
        pending_value_ = true;
        return *this;
    }

    Writer& value(double v) { return raw(format_double(v)); }
    Writer& value(std::int64_t v) { return raw(std::to_string(v)); }
    Writer& value(std::uint64_t v) { return raw(std::to_string(v)); }
    Writer& value(bool v) { return raw(v ? "true" : "false"); }
    Writer& value(const std::string& v) { return raw('"' + escape(v) + '"'); }
    Writer& value(const char* v) { return value(std::string(v)); }
    Writer& null() { return raw("null"); }

    Writer& value(std::span<const double> v) {
        begin_array();
        for (double x : v) value(x);
        return end_array();
    }
    Writer& value(const Vector& v) { return value(std::span<const double>(v)); }

    /// Matrix as array of row arrays.
    Writer& value(const Matrix& m) {
        begin_array();
        for (std::size_t i = 0; i < m.rows; ++i) value(m.row(i));
        return end_array();
    }

    std::string str() const { return out_.str(); }

  private:
    Writer& open(char c) {
        comma();
        out_ << c;
        first_.push_back(true);
        return *this;
    }
    Writer& close(char c) {
        out_ << c;
        first_.pop_back();
        return *this;
    }
    Writer& raw(const std::string& s) {
        comma();
        out_ << s;
        return *this;
    }
    void comma() {
        if (pending_value_) {
            pending_value_ = false;
            return;  // value directly follows its key
        }
        if (!first_.empty()) {
            if (!first_.back()) out_ << ',';
            first_.back() = false;
        }
    }
    static std::string escape(const std::string& s) {
        std::string r;
        for (char c : s) {
            if (c == '"' || c == '\\') r += '\\';
            r += c;
        }
        return r;
    }

    std::ostringstream out_;
    std::vector<bool> first_;
    bool pending_value_ = false;
};

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << text << '\n';
    if (!f) throw IoError("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline nlohmann::json parse(const std::string& text, const std::string& what) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw FormatError(what + ": not valid JSON");
    return j;
}

inline nlohmann::json parse_file(const std::string& path) {
    return parse(read_file(path), path);
}

inline Vector as_vector(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw FormatError(what + ": expected array");
    Vector v;
    v.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number()) throw FormatError(what + ": expected number");
        v.push_back(x.get<double>());
    }
    return v;
}

inline Matrix as_matrix(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw FormatError(what + ": expected non-empty array of rows");
    Matrix m;
    m.rows = j.size();
    m.cols = j[0].is_array() ? j[0].size() : 0;
    if (m.cols == 0) throw FormatError(what + ": empty or non-array row");
    m.data.reserve(m.rows * m.cols);
    for (const auto& row : j) {
        Vector r = as_vector(row, what);
        if (r.size() != m.cols) throw FormatError(what + ": ragged rows");
        m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
}

}  // namespace eca::jsontext
