#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <fftw3.h>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include "json.hpp"

#include "flatgrav/core/error.hpp"
#include "flatgrav/core/random.hpp"

namespace flatgrav::cli {

inline constexpr const char* flatgrav_version = "0.1.0";
inline constexpr const char* manifest_format = "flatgrav-manifest v1";

inline std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 failed");
    std::string hex;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

inline std::string sha256_file(const std::filesystem::path& path) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    std::string hex;
    char h[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(h, sizeof h, "%02x", md[i]);
        hex += h;
    }
    return hex;
}

/// Output directory of one subcommand. Every file goes through it, so the
/// manifest lists exactly what was written.
class OutputDir {
public:
    /// Creates the directory and probes that it is writable.
    explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
        std::error_code ec;
        std::filesystem::create_directories(root_, ec);
        if (ec || !std::filesystem::is_directory(root_))
            throw IoError("cannot create output directory " + root_.string() + (ec ? ": " + ec.message() : ""));
        const auto probe = root_ / ".flatgrav-write-probe";
        {
            std::ofstream out(probe);
            if (!out || !(out << 'x') || !out.flush())
                throw IoError("output directory " + root_.string() + " is not writable");
        }
        std::filesystem::remove(probe, ec);
    }

    const std::filesystem::path& root() const noexcept { return root_; }

    /// Absolute path of a new file, recorded for the manifest.
    std::filesystem::path file(const std::string& relative) {
        const std::filesystem::path rel = std::filesystem::path(relative).lexically_normal();
        if (rel.is_absolute() || rel.empty() || *rel.begin() == "..")
            throw IoError("refusing to write outside the output directory: " + relative);
        const auto full = root_ / rel;
        std::error_code ec;
        std::filesystem::create_directories(full.parent_path(), ec);
        if (ec) throw IoError("cannot create " + full.parent_path().string() + ": " + ec.message());
        files_.insert(rel.generic_string());
        return full;
    }

    /// Records every regular file below a subdirectory written by a library
    /// routine (e.g. a saved solution).
    void adopt_tree(const std::string& relative) {
        const auto dir = root_ / relative;
        for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
            if (e.is_regular_file()) files_.insert(std::filesystem::relative(e.path(), root_).generic_string());
    }

    void write_text(const std::string& relative, const std::string& text) {
        const auto path = file(relative);
        std::ofstream out(path, std::ios::binary);
        if (!out || !(out << text) || !out.flush()) throw IoError("write failed for " + path.string());
    }

    const std::set<std::string>& files() const noexcept { return files_; }

private:
    std::filesystem::path root_;
    std::set<std::string> files_;
};

inline nlohmann::json versions() {
    return {{"flatgrav", flatgrav_version}, {"fftw", std::string(fftw_version)}, {"openssl", OPENSSL_VERSION_TEXT},
            {"cxx", static_cast<long>(__cplusplus)}};
}

inline nlohmann::json seed_record(std::uint64_t seed) {
    return {{"seed", seed},
            {"streams",
             {{"sampling", stream_seed(seed, static_cast<std::uint64_t>(Stream::sampling))},
              {"perturbation", stream_seed(seed, static_cast<std::uint64_t>(Stream::perturbation))},
              {"density_family", stream_seed(seed, static_cast<std::uint64_t>(Stream::density_family))},
              {"verification", stream_seed(seed, static_cast<std::uint64_t>(Stream::verification))}}}};
}

/// Adds this run to manifest.json. Runs of other subcommands sharing the
/// directory are kept; their entries for files this run rewrote are dropped,
/// so each file is listed once. No timestamps: identical inputs give an
/// identical manifest.
inline void write_manifest(const OutputDir& out, const std::string& subcommand, const nlohmann::json& config,
                           std::uint64_t seed, const nlohmann::json& inputs = nlohmann::json::object()) {
    const auto path = out.root() / "manifest.json";
    nlohmann::json manifest = {{"format", manifest_format}, {"runs", nlohmann::json::object()}};
    if (std::ifstream old(path); old) {
        try {
            auto prev = nlohmann::json::parse(old);
            if (prev.value("format", "") == manifest_format && prev.contains("runs")) manifest["runs"] = prev["runs"];
        } catch (const nlohmann::json::exception&) {
        }
    }
    auto& runs = manifest["runs"];
    runs.erase(subcommand);
    for (auto& [name, run] : runs.items()) {
        auto& files = run["files"];
        nlohmann::json kept = nlohmann::json::array();
        for (const auto& f : files)
            if (!out.files().count(f.at("path").get<std::string>()) &&
                std::filesystem::exists(out.root() / f.at("path").get<std::string>()))
                kept.push_back(f);
        files = kept;
    }

    nlohmann::json files = nlohmann::json::array();
    for (const auto& rel : out.files()) {
        if (rel == "manifest.json") continue;
        const auto full = out.root() / rel;
        files.push_back({{"path", rel}, {"sha256", sha256_file(full)}, {"bytes", std::filesystem::file_size(full)}});
    }
    runs[subcommand] = {{"config_digest", sha256_hex(config.dump())},
                        {"config", config},
                        {"versions", versions()},
                        {"seeds", seed_record(seed)},
                        {"inputs", inputs},
                        {"files", files}};

    const auto tmp = out.root() / "manifest.json.tmp";
    {
        std::ofstream o(tmp, std::ios::binary);
        if (!o || !(o << manifest.dump(2) << '\n') || !o.flush()) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace flatgrav::cli
