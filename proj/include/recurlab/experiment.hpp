#pragma once

// Experiment configs and provenance.
//
// Runs are described by flat key=value files. The parser keeps keys in file
// order and rejects duplicates so a config has exactly one reading. Every
// report starts with a provenance record: experiment id, a hash of the raw
// config bytes, the config echoed back, the working precision, the chunk
// size, and the rational-independence assertions in force. Thread count is
// deliberately absent from provenance: it must never change output bytes.

#include "recurlab/angle.hpp"
#include "recurlab/parallel.hpp"
#include "recurlab/setlab.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace recurlab {

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Counter-based generator used wherever a config asks for pseudo-random
// data (random set families, stress instances). Stateless: draw i of a
// stream is a pure function of (seed, i), so parallel evaluation order
// cannot change what is drawn.
inline std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t x = seed + counter * 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// FNV-1a over the raw config bytes; the hash ties a report to the exact
// file that produced it, comments and all.
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

}  // namespace detail

// Decimal in [0, 1] as an exact rational num/10^digits.
struct UnitFraction {
    BigInt num;
    BigInt den;
};

inline UnitFraction parse_unit_fraction(const std::string& text) {
    std::size_t dot = text.find('.');
    std::string whole = dot == std::string::npos ? text : text.substr(0, dot);
    std::string frac = dot == std::string::npos ? "" : text.substr(dot + 1);
    if (whole.empty() && frac.empty())
        throw config_error("not a decimal fraction: '" + text + "'");
    for (char c : whole + frac)
        if (c < '0' || c > '9') throw config_error("not a decimal fraction: '" + text + "'");
    BigInt den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    BigInt num = (whole.empty() ? BigInt(0) : BigInt(whole)) * den +
                 (frac.empty() ? BigInt(0) : BigInt(frac));
    if (num > den) throw config_error("fraction out of [0, 1]: '" + text + "'");
    return {num, den};
}

// floor(num/den * 2^bits); exact for the dyadic endpoints configs use.
inline BigInt unit_fraction_mantissa(const UnitFraction& f, long frac_bits) {
    BigInt m = (f.num * pow2(frac_bits)) / f.den;
    if (m == pow2(frac_bits)) m -= 1;  // 1.0 maps to the top representable point
    return m;
}

// Angle specs accepted in configs:
//   sqrt:D:BITS     fractional part of sqrt(D), D a non-square >= 2
//   dyadic:M:BITS   exact M / 2^BITS
//   zero:BITS       exact 0
//   HEX:BITS:ERR    the serialized form written by angle_to_string
inline Angle parse_angle_spec(const std::string& text) {
    try {
        if (text.rfind("sqrt:", 0) == 0) {
            std::size_t c = text.find(':', 5);
            if (c == std::string::npos) throw config_error("bad angle spec: '" + text + "'");
            return angle_from_quadratic_irrational(BigInt(text.substr(5, c - 5)),
                                                   std::stol(text.substr(c + 1)));
        }
        if (text.rfind("dyadic:", 0) == 0) {
            std::size_t c = text.find(':', 7);
            if (c == std::string::npos) throw config_error("bad angle spec: '" + text + "'");
            return angle_from_dyadic(BigInt(text.substr(7, c - 7)), std::stol(text.substr(c + 1)));
        }
        if (text.rfind("zero:", 0) == 0) return zero_angle(std::stol(text.substr(5)));
        return angle_from_string(text);
    } catch (const config_error&) {
        throw;
    } catch (const std::exception& e) {
        throw config_error("bad angle spec '" + text + "': " + e.what());
    }
}

// Window specs: "full" or "LO:HI" with decimal-fraction endpoints, floored
// to the working precision. "0.75:0.25" wraps through 0.
inline TorusWindow parse_window_spec(const std::string& text, long frac_bits) {
    if (text == "full") return TorusWindow::full(frac_bits);
    std::size_t c = text.find(':');
    if (c == std::string::npos)
        throw config_error("bad window spec (want LO:HI or full): '" + text + "'");
    try {
        UnitFraction lo = parse_unit_fraction(detail::trim(text.substr(0, c)));
        UnitFraction hi = parse_unit_fraction(detail::trim(text.substr(c + 1)));
        Angle a{unit_fraction_mantissa(lo, frac_bits), frac_bits, 0};
        Angle b{unit_fraction_mantissa(hi, frac_bits), frac_bits, 0};
        return TorusWindow::from_bounds(a, b);
    } catch (const config_error& e) {
        throw config_error("bad window spec '" + text + "': " + e.what());
    }
}

class ExperimentConfig {
  public:
    static ExperimentConfig parse(const std::string& text, const std::string& name = "config") {
        ExperimentConfig cfg;
        cfg.name_ = name;
        cfg.raw_ = text;
        std::istringstream is(text);
        std::string line;
        for (int lineno = 1; std::getline(is, line); ++lineno) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::string t = detail::trim(line);
            if (t.empty() || t[0] == '#') continue;
            std::size_t eq = t.find('=');
            if (eq == std::string::npos)
                throw config_error(name + " line " + std::to_string(lineno) +
                                   ": expected key=value, got '" + t + "'");
            std::string key = detail::trim(t.substr(0, eq));
            std::string value = detail::trim(t.substr(eq + 1));
            if (key.empty())
                throw config_error(name + " line " + std::to_string(lineno) + ": empty key");
            for (const auto& [k, v] : cfg.entries_)
                if (k == key)
                    throw config_error(name + " line " + std::to_string(lineno) +
                                       ": duplicate key '" + key + "'");
            cfg.entries_.emplace_back(key, value);
            cfg.lines_.emplace_back(key, lineno);
        }
        return cfg;
    }

    static ExperimentConfig load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw config_error("cannot open config file: " + path);
        std::ostringstream buf;
        buf << f.rdbuf();
        return parse(buf.str(), path);
    }

    const std::string& name() const { return name_; }
    const std::string& raw() const { return raw_; }
    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
    std::uint64_t hash() const { return fnv1a64(raw_); }

    bool has(const std::string& key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return true;
        return false;
    }

    const std::string& require(const std::string& key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return v;
        throw config_error(name_ + ": missing required key '" + key + "'");
    }

    std::string get_or(const std::string& key, const std::string& def) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return v;
        return def;
    }

    long long require_int(const std::string& key) const { return to_int(key, require(key)); }

    long long int_or(const std::string& key, long long def) const {
        return has(key) ? to_int(key, require(key)) : def;
    }

    Angle require_angle(const std::string& key) const {
        try {
            return parse_angle_spec(require(key));
        } catch (const config_error& e) {
            throw wrap(key, e);
        }
    }

    TorusWindow require_window(const std::string& key, long frac_bits) const {
        try {
            return parse_window_spec(require(key), frac_bits);
        } catch (const config_error& e) {
            throw wrap(key, e);
        }
    }

    UnitFraction require_fraction(const std::string& key) const {
        try {
            return parse_unit_fraction(require(key));
        } catch (const config_error& e) {
            throw wrap(key, e);
        }
    }

    // Comma-separated integer list, e.g. "2,3,5".
    std::vector<long> require_ints(const std::string& key) const {
        const std::string& v = require(key);
        std::vector<long> out;
        std::size_t pos = 0;
        while (pos <= v.size()) {
            std::size_t c = v.find(',', pos);
            std::string tok = detail::trim(v.substr(pos, c == std::string::npos ? c : c - pos));
            out.push_back(static_cast<long>(to_int(key, tok)));
            if (c == std::string::npos) break;
            pos = c + 1;
        }
        return out;
    }

  private:
    long long to_int(const std::string& key, const std::string& v) const {
        std::size_t used = 0;
        long long n = 0;
        try {
            n = std::stoll(v, &used);
        } catch (const std::exception&) {
            used = std::string::npos;
        }
        if (used != v.size() || v.empty())
            throw config_error(name_ + " line " + std::to_string(line_of(key)) + ": key '" + key +
                               "': not an integer: '" + v + "'");
        return n;
    }

    config_error wrap(const std::string& key, const config_error& e) const {
        return config_error(name_ + " line " + std::to_string(line_of(key)) + ": key '" + key +
                            "': " + e.what());
    }

    int line_of(const std::string& key) const {
        for (const auto& [k, n] : lines_)
            if (k == key) return n;
        return 0;
    }

    std::string name_;
    std::string raw_;
    std::vector<std::pair<std::string, std::string>> entries_;
    std::vector<std::pair<std::string, int>> lines_;
};

// First line of every report. The config is echoed as ordered [key, value]
// pairs so the artifact alone reproduces the run; 'chunk' pins the fold
// boundaries that error accounting depends on. No thread count here.
inline nlohmann::json provenance_json(const ExperimentConfig& cfg, long frac_bits,
                                      const ParallelContext& ctx,
                                      const std::vector<std::string>& assertions) {
    nlohmann::json echo = nlohmann::json::array();
    for (const auto& [k, v] : cfg.entries()) echo.push_back({k, v});
    nlohmann::json j;
    j["provenance"] = {
        {"experiment", cfg.get_or("experiment", "unnamed")},
        {"config_hash", "fnv1a64:" + detail::hex64(cfg.hash())},
        {"config", echo},
        {"frac_bits", frac_bits},
        {"chunk", effective_chunk(ctx)},
        {"assertions", assertions},
        {"note", "finite-scale surrogate measurements; no asymptotic claim is certified"},
    };
    return j;
}

}  // namespace recurlab
