#include "vcg/binio.hpp"

#include <zlib.h>

#include <fstream>

namespace vcg {

namespace {

bool has_gz_suffix(const std::string& path) {
    return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

}  // namespace

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::vector<std::string> lines;
    if (has_gz_suffix(path)) {
        gzFile gz = gzopen(path.c_str(), "rb");
        if (!gz) throw DataError("cannot open file: " + path);
        std::string line;
        char chunk[1 << 14];
        while (gzgets(gz, chunk, sizeof(chunk)) != nullptr) {
            line += chunk;
            if (!line.empty() && line.back() == '\n') {
                line.pop_back();
                lines.push_back(std::move(line));
                line.clear();
            }
        }
        if (!line.empty()) lines.push_back(std::move(line));
        gzclose(gz);
        return lines;
    }
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    if (has_gz_suffix(path)) {
        gzFile gz = gzopen(path.c_str(), "wb");
        if (!gz) throw DataError("cannot write file: " + path);
        for (const auto& line : lines) {
            if (gzwrite(gz, line.data(), static_cast<unsigned>(line.size())) !=
                    static_cast<int>(line.size()) ||
                gzwrite(gz, "\n", 1) != 1) {
                gzclose(gz);
                throw DataError("write failed: " + path);
            }
        }
        gzclose(gz);
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path);
    for (const auto& line : lines) out << line << '\n';
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace vcg
