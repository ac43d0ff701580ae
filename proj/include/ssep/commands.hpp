#pragma once

#include "ssep/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace ssep::cli
{
    enum class Command
    {
        theory,
        simulate,
        validate,
        sweep,
    };

    struct RunOptions
    {
        bool force = false;             // replace an existing output directory
        bool inject_seed_fault = false; // test hook: validate's determinism rerun uses another seed
        std::ostream* log = nullptr;
    };

    /// Files are written into a hidden sibling directory that is renamed into place at the end,
    /// so `out` either does not exist or holds a complete result. Returns the process exit status.
    int run_command(Command cmd, const Manifest& m, const std::filesystem::path& out, const RunOptions& opt = {});

    /// Canonical manifest text plus its FNV-1a hash, as echoed into every output directory.
    std::map<std::string, std::string> manifest_files(const Manifest& m);
} // namespace ssep::cli
