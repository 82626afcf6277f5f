#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lnln::cli {

/// Runs one CLI invocation; `args` excludes the program name. Returns the
/// process exit status (0 on success).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Re-executes a manifest, optionally redirecting its output directory.
int replay(const std::string& manifest_path, const std::string& output_dir, std::ostream& out,
           std::ostream& err);

/// Dispatches a resolved command (what a manifest records).
int execute(const std::string& command, const nlohmann::json& config,
            const nlohmann::json& arguments, std::ostream& out, std::ostream& err);

}  // namespace lnln::cli
