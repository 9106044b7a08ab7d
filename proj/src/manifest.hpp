#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ixrisk {

// One manifest per output location: what ran, with which inputs (digested),
// producing which outputs (digested). Timing fields are informational and
// excluded from the byte-identity contract; the output digests carry it.
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> args;
    std::vector<std::string> inputs;  // existing files, digested at write time
    std::vector<std::string> outputs; // produced files, digested at write time
    std::string started_at;           // wall clock, informational
    std::int64_t elapsed_ms = 0;
};

// Writes <dir>/manifest.json (dir mode) or <file>.manifest.json (file mode).
void write_manifest(const std::filesystem::path& target, bool target_is_dir,
                    const RunManifest& manifest);

// Stopwatch + teardown helper for a pipeline stage: collects outputs as they
// are written so the stage can remove partial files on failure.
class StageGuard {
public:
    StageGuard(std::string command, std::filesystem::path target, bool target_is_dir);
    ~StageGuard();

    void arg(const std::string& key, const std::string& value);
    void input(const std::filesystem::path& path);
    // Atomic write + output registration.
    void write_output(const std::filesystem::path& path, const std::string& content);
    void commit(); // writes the manifest; without it, outputs are removed

private:
    RunManifest manifest_;
    std::filesystem::path target_;
    bool target_is_dir_;
    std::vector<std::filesystem::path> written_;
    std::chrono::steady_clock::time_point t0_;
    bool committed_ = false;
};

} // namespace ixrisk
