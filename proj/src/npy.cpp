#include "koopagru/npy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <vector>

namespace koopagru::npy {
namespace {

template <typename T>
T read_le(const char* bytes) {
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

double decode(const char* p, char kind, int size) {
    switch (kind) {
        case 'f':
            if (size == 4) return read_le<float>(p);
            if (size == 8) return read_le<double>(p);
            break;
        case 'i':
            if (size == 1) return read_le<std::int8_t>(p);
            if (size == 2) return read_le<std::int16_t>(p);
            if (size == 4) return read_le<std::int32_t>(p);
            if (size == 8) return static_cast<double>(read_le<std::int64_t>(p));
            break;
        case 'u':
            if (size == 1) return read_le<std::uint8_t>(p);
            if (size == 2) return read_le<std::uint16_t>(p);
            if (size == 4) return read_le<std::uint32_t>(p);
            if (size == 8) return static_cast<double>(read_le<std::uint64_t>(p));
            break;
        case 'b':
            if (size == 1) return *p != 0 ? 1.0 : 0.0;
            break;
        default:
            break;
    }
    throw IoError(std::string("unsupported npy dtype kind '") + kind + "' size " + std::to_string(size));
}

}  // namespace

Eigen::MatrixXd load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0) throw IoError(path + ": not an npy file");
    const int major = static_cast<unsigned char>(magic[6]);
    std::size_t header_len = 0;
    if (major == 1) {
        char len[2];
        in.read(len, 2);
        header_len = read_le<std::uint16_t>(len);
    } else {
        char len[4];
        in.read(len, 4);
        header_len = read_le<std::uint32_t>(len);
    }
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw IoError(path + ": truncated header");

    std::smatch match;
    if (!std::regex_search(header, match, std::regex(R"('descr'\s*:\s*'([<>|=])(\w)(\d+)')"))) {
        throw IoError(path + ": missing descr");
    }
    if (match[1] == ">") throw IoError(path + ": big-endian arrays are not supported");
    const char kind = match[2].str()[0];
    const int size = std::stoi(match[3]);
    const bool fortran = std::regex_search(header, std::regex(R"('fortran_order'\s*:\s*True)"));
    if (!std::regex_search(header, match, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
        throw IoError(path + ": missing shape");
    }
    std::vector<Index> shape;
    const std::string dims = match[1];
    const std::regex number(R"(\d+)");
    for (std::sregex_iterator it(dims.begin(), dims.end(), number), end; it != end; ++it) {
        shape.push_back(std::stol(it->str()));
    }
    if (shape.empty() || shape.size() > 2) throw IoError(path + ": only rank-1/2 arrays are supported");
    const Index rows = shape[0];
    const Index cols = shape.size() == 2 ? shape[1] : 1;

    std::vector<char> data(static_cast<std::size_t>(rows * cols * size));
    in.read(data.data(), static_cast<std::streamsize>(data.size()));
    if (!in) throw IoError(path + ": truncated data");

    Eigen::MatrixXd out(rows, cols);
    for (Index k = 0; k < rows * cols; ++k) {
        const double v = decode(data.data() + k * size, kind, size);
        if (fortran) {
            out(k % rows, k / rows) = v;
        } else {
            out(k / cols, k % cols) = v;
        }
    }
    return out;
}

void save(const std::string& path, const Eigen::MatrixXd& values) {
    std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" + std::to_string(values.rows()) + ", " +
                         std::to_string(values.cols()) + "), }";
    // Pad so magic + length + header is a multiple of 64, newline terminated.
    const std::size_t total = 10 + header.size() + 1;
    header.append((64 - total % 64) % 64, ' ');
    header.push_back('\n');

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write("\x93NUMPY\x01\x00", 8);
    const auto len = static_cast<std::uint16_t>(header.size());
    out.write(reinterpret_cast<const char*>(&len), 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = values;
    out.write(reinterpret_cast<const char*>(row_major.data()),
              static_cast<std::streamsize>(row_major.size() * sizeof(double)));
}

}  // namespace koopagru::npy
