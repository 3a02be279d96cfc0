#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "eitpod/error.hpp"
#include "eitpod/fem.hpp"
#include "eitpod/hash.hpp"

namespace eitpod::io {

using Metadata = std::map<std::string, std::string>;

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
    if (!out) throw DataError("write failed: " + path);
}

inline std::string file_hash(const std::string& path) { return short_hash(read_text(path)); }

inline nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(1) + "\n"); }

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Frames CSV: a header line `# key=value key=value ...` (always carrying
/// protocol_id), then one frame per row with D comma-separated values.
struct FrameFile {
    Eigen::MatrixXd frames;  // D x n
    Metadata meta;
};

inline std::string frames_to_csv(const Eigen::MatrixXd& frames, const Metadata& meta) {
    if (!meta.count("protocol_id")) throw InvalidArgument("frames file needs a protocol_id");
    std::string out = "#";
    for (const auto& [k, v] : meta) {
        if (k.find_first_of(" =\n") != std::string::npos || v.find_first_of(" \n") != std::string::npos)
            throw InvalidArgument("frames metadata must not contain spaces: " + k);
        out += " " + k + "=" + v;
    }
    out += "\n";
    for (Eigen::Index c = 0; c < frames.cols(); ++c) {
        for (Eigen::Index r = 0; r < frames.rows(); ++r) {
            if (r) out += ',';
            out += format_double(frames(r, c));
        }
        out += '\n';
    }
    return out;
}

inline void write_frames(const std::string& path, const Eigen::MatrixXd& frames, const Metadata& meta) {
    write_text(path, frames_to_csv(frames, meta));
}

inline FrameFile parse_frames(const std::string& text, const std::string& origin = "frames") {
    FrameFile f;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.empty() || line[0] != '#')
        throw DataError(origin + ": missing '#' header line");
    {
        std::istringstream hs(line.substr(1));
        std::string tok;
        while (hs >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) throw DataError(origin + ": bad header token '" + tok + "'");
            f.meta[tok.substr(0, eq)] = tok.substr(eq + 1);
        }
    }
    if (!f.meta.count("protocol_id")) throw DataError(origin + ": header lacks protocol_id");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size() && cell.find_first_not_of(" \r", used) != std::string::npos)
                    throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw DataError(origin + ": bad number '" + cell + "' in row " + std::to_string(rows.size() + 1));
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError(origin + ": ragged row " + std::to_string(rows.size() + 1));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(origin + ": no frames");
    f.frames.resize(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t c = 0; c < rows.size(); ++c)
        for (std::size_t r = 0; r < rows[c].size(); ++r)
            f.frames(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[c][r];
    return f;
}

inline FrameFile read_frames(const std::string& path) { return parse_frames(read_text(path), path); }

namespace detail {

inline constexpr char kJacobianMagic[8] = {'E', 'I', 'T', 'P', 'O', 'D', 'J', '1'};

template <class T>
void put(std::string& out, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw DataError("jacobian file truncated");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof v);
    pos += sizeof v;
    return v;
}

inline std::string fixed16(const std::string& s) {
    std::string out = s.substr(0, 16);
    out.resize(16, ' ');
    return out;
}

}  // namespace detail

/// Jacobian binary: magic "EITPODJ1", u64 rows, u64 cols, 16-byte protocol id,
/// 16-byte layout id, cols doubles of background conductivity, then the matrix
/// row-major as doubles. Host byte order (little-endian on supported targets).
inline std::string jacobian_to_bytes(const Jacobian& j) {
    std::string out(detail::kJacobianMagic, 8);
    detail::put(out, static_cast<std::uint64_t>(j.matrix.rows()));
    detail::put(out, static_cast<std::uint64_t>(j.matrix.cols()));
    out += detail::fixed16(j.protocol_id);
    out += detail::fixed16(j.layout_id);
    for (Eigen::Index k = 0; k < j.matrix.cols(); ++k) detail::put(out, j.background[k]);
    for (Eigen::Index r = 0; r < j.matrix.rows(); ++r)
        for (Eigen::Index c = 0; c < j.matrix.cols(); ++c) detail::put(out, j.matrix(r, c));
    return out;
}

inline Jacobian jacobian_from_bytes(const std::string& in) {
    if (in.size() < 8 || std::memcmp(in.data(), detail::kJacobianMagic, 8) != 0)
        throw DataError("jacobian file: bad magic");
    std::size_t pos = 8;
    const auto rows = detail::take<std::uint64_t>(in, pos);
    const auto cols = detail::take<std::uint64_t>(in, pos);
    if (pos + 32 > in.size()) throw DataError("jacobian file truncated");
    auto trim = [](std::string s) {
        while (!s.empty() && s.back() == ' ') s.pop_back();
        return s;
    };
    Jacobian j;
    j.protocol_id = trim(in.substr(pos, 16));
    j.layout_id = trim(in.substr(pos + 16, 16));
    pos += 32;
    if (in.size() - pos != (cols + rows * cols) * sizeof(double)) throw DataError("jacobian file: size mismatch");
    Eigen::VectorXd bg(static_cast<Eigen::Index>(cols));
    for (std::uint64_t k = 0; k < cols; ++k) bg[static_cast<Eigen::Index>(k)] = detail::take<double>(in, pos);
    try {
        j.background = Conductivity(bg);
    } catch (const InvalidArgument& e) {
        throw DataError(std::string("jacobian file: ") + e.what());
    }
    j.matrix.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t r = 0; r < rows; ++r)
        for (std::uint64_t c = 0; c < cols; ++c)
            j.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = detail::take<double>(in, pos);
    return j;
}

}  // namespace eitpod::io
