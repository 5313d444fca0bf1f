#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "tempmerge/experiment.hpp"

namespace tempmerge::manifest {

// Plain-text "key = value" experiment manifest. Blank lines and lines starting
// with '#' are ignored. Keys are dotted ("corpus.entity_count",
// "finetune.learning_rate", "paths.run_dir"); unknown keys are errors. The
// top-level `seed` is copied into the corpus and every training config.
experiment::ExperimentConfig parse(std::string_view text, std::string_view source = "<manifest>");
experiment::ExperimentConfig load(const std::filesystem::path& path);

// Renders every key, so parse(format(c)) == c.
std::string format(const experiment::ExperimentConfig& cfg);

// TEMPMERGE_SEED, when set. Throws Error if it is not an unsigned integer.
std::optional<std::uint64_t> seed_from_env();

// load() followed by the environment override and validation.
experiment::ExperimentConfig resolve(const std::optional<std::filesystem::path>& path);

}  // namespace tempmerge::manifest
