#include "gstk/manifest.hpp"

#include <cstdio>
#include <fstream>

#include "gstk/errors.hpp"

namespace gs {

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for digesting");
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
    }
    return hash;
}

ManifestWriter::ManifestWriter(std::string command)
    : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

void ManifestWriter::add(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
}

void ManifestWriter::add(const std::string& key, std::int64_t value) {
    entries_.emplace_back(key, std::to_string(value));
}

void ManifestWriter::add(const std::string& key, std::uint64_t value) {
    entries_.emplace_back(key, std::to_string(value));
}

void ManifestWriter::add(const std::string& key, double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    entries_.emplace_back(key, buf);
}

void ManifestWriter::add_input(const std::string& key, const std::string& path) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64_file(path)));
    entries_.emplace_back("input." + key, path);
    entries_.emplace_back("digest." + key, buf);
}

void ManifestWriter::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest '" + path + "'");
    out << "command=" << command_ << '\n';
    out << "toolkit_version=" << kToolkitVersion << '\n';
    for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3f", wall);
    out << "wall_seconds=" << buf << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace gs
