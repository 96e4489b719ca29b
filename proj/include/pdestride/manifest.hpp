#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdestride/errors.hpp"

namespace pdestride {

inline constexpr const char* kVersion = "1.0.0";

// FNV-1a over a file's bytes, as a stable content fingerprint.
inline std::uint64_t hash_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot read " + path + " for hashing");
    std::uint64_t h = 1469598103934665603ull;
    char buf[65536];
    while (is.read(buf, sizeof buf) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!is) break;
    }
    return h;
}

// Record of one successful CLI run: enough to replay it exactly and to
// check that the artifacts were not modified afterwards.
class RunManifest {
  public:
    RunManifest(int argc, char** argv) : start_(std::chrono::steady_clock::now()) {
        for (int i = 0; i < argc; ++i) doc_["argv"].push_back(argv[i]);
        doc_["version"] = kVersion;
        doc_["artifacts"] = nlohmann::json::object();
        doc_["seeds"] = nlohmann::json::object();
        doc_["config"] = nlohmann::json::object();
    }

    void set_config(nlohmann::json cfg) { doc_["config"] = std::move(cfg); }
    void add_seed(const std::string& name, std::uint64_t seed) {
        doc_["seeds"][name] = seed;
    }
    void add_artifact(const std::string& path) {
        doc_["artifacts"][path] = hash_file(path);
    }

    void write(const std::string& path) {
        const auto elapsed = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - start_)
                                 .count();
        doc_["wall_time_seconds"] = elapsed;
        std::ofstream os(path);
        if (!os) throw data_error("cannot write " + path);
        os << doc_.dump(2) << "\n";
    }

  private:
    nlohmann::json doc_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace pdestride
