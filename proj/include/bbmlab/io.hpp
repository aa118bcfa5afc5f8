#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbmlab {

inline constexpr const char* artifact_version = "0.1.0";

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shortest decimal that round-trips to the same double, so data files are
/// both readable and byte-stable across reruns.
inline std::string format_number(double v) {
    char buf[40];
    if (v == static_cast<long long>(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
        return buf;
    }
    for (int prec = 1; prec <= 16; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Tab-separated data file with a single '#'-prefixed header line.
class DsvWriter {
  public:
    DsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns) {
        out_.open(path);
        if (!out_) throw io_error("cannot open for writing: " + path.string());
        out_ << "#";
        for (const std::string& c : columns) out_ << '\t' << c;
        out_ << '\n';
    }

    void row(const std::vector<double>& values) {
        bool first = true;
        for (double v : values) {
            if (!first) out_ << '\t';
            first = false;
            out_ << format_number(v);
        }
        out_ << '\n';
        if (!out_) throw io_error("write failed");
    }

  private:
    std::ofstream out_;
};

/// 'key = value' block, used for summaries and manifests.
class SummaryWriter {
  public:
    explicit SummaryWriter(const std::filesystem::path& path) {
        out_.open(path);
        if (!out_) throw io_error("cannot open for writing: " + path.string());
    }

    void set(const std::string& key, const std::string& value) {
        out_ << key << " = " << value << '\n';
        if (!out_) throw io_error("write failed");
    }
    void set(const std::string& key, double value) { set(key, format_number(value)); }
    void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
    void set(const std::string& key, int value) { set(key, std::to_string(value)); }
    void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  private:
    std::ofstream out_;
};

/// 'key = value' config file; '#' starts a comment, blank lines are skipped.
inline std::map<std::string, std::string> read_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config: " + path.string());
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        const auto b = s.find_first_not_of(ws);
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(ws) - b + 1);
    };
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw io_error("config " + path.string() + ":" + std::to_string(lineno) +
                           ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw io_error("config " + path.string() + ":" + std::to_string(lineno) +
                           ": empty key or value");
        out[key] = value;
    }
    return out;
}

/// Output directory: explicit flag, else BBMLAB_OUTPUT_DIR, else cwd.
inline std::filesystem::path resolve_output_dir(const std::string& flag_value) {
    std::filesystem::path dir;
    if (!flag_value.empty()) {
        dir = flag_value;
    } else if (const char* env = std::getenv("BBMLAB_OUTPUT_DIR"); env && *env) {
        dir = env;
    } else {
        dir = ".";
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw io_error("output directory not usable: " + dir.string());
    return dir;
}

} // namespace bbmlab
