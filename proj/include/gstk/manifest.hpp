#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace gs {

constexpr const char* kToolkitVersion = "0.1.0";

// FNV-1a over the file bytes; used for input digests in run manifests.
std::uint64_t fnv1a64_file(const std::string& path);

// Accumulates key=value pairs and writes them as a plain-text manifest with
// the toolkit version and wall time appended. Every successful CLI command
// writes exactly one of these next to its outputs.
class ManifestWriter {
public:
    explicit ManifestWriter(std::string command);

    void add(const std::string& key, const std::string& value);
    void add(const std::string& key, std::int64_t value);
    void add(const std::string& key, std::uint64_t value);
    void add(const std::string& key, double value);
    void add_input(const std::string& key, const std::string& path);

    void write(const std::string& path) const;

private:
    std::string command_;
    std::vector<std::pair<std::string, std::string>> entries_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace gs
