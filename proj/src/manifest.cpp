#include "manifest.hpp"

#include "digest.hpp"
#include "errors.hpp"
#include "fsutil.hpp"
#include "version.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <ctime>

namespace fs = std::filesystem;

namespace ixrisk {

namespace {

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

void write_manifest(const fs::path& target, bool target_is_dir, const RunManifest& manifest) {
    nlohmann::json j;
    j["tool"] = "ixrisk";
    j["version"] = k_version;
    j["command"] = manifest.command;
    j["args"] = manifest.args;
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& p : manifest.inputs) {
        inputs[fs::path(p).filename().string()] = sha256_file_hex(p);
    }
    j["inputs"] = inputs;
    nlohmann::json outputs = nlohmann::json::object();
    for (const auto& p : manifest.outputs) {
        outputs[fs::path(p).filename().string()] = sha256_file_hex(p);
    }
    j["outputs"] = outputs;
    j["started_at"] = manifest.started_at;
    j["elapsed_ms"] = manifest.elapsed_ms;

    const fs::path dest = target_is_dir ? target / "manifest.json"
                                        : fs::path(target.string() + ".manifest.json");
    atomic_write(dest, j.dump(2) + "\n");
}

StageGuard::StageGuard(std::string command, fs::path target, bool target_is_dir)
    : target_(std::move(target)), target_is_dir_(target_is_dir),
      t0_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.started_at = now_iso8601();
    if (target_is_dir_) {
        ensure_dir(target_);
    } else if (target_.has_parent_path()) {
        ensure_dir(target_.parent_path());
    }
}

StageGuard::~StageGuard() {
    if (committed_) return;
    // Failed stage: take the partial outputs with us.
    for (const auto& p : written_) {
        std::error_code ec;
        fs::remove(p, ec);
    }
}

void StageGuard::arg(const std::string& key, const std::string& value) {
    manifest_.args[key] = value;
}

void StageGuard::input(const fs::path& path) { manifest_.inputs.push_back(path.string()); }

void StageGuard::write_output(const fs::path& path, const std::string& content) {
    atomic_write(path, content);
    written_.push_back(path);
    manifest_.outputs.push_back(path.string());
}

void StageGuard::commit() {
    manifest_.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - t0_)
                               .count();
    write_manifest(target_, target_is_dir_, manifest_);
    committed_ = true;
}

} // namespace ixrisk
