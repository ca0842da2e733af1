#pragma once

// Declarative scenarios: a YAML file naming a particle, an environment, a
// damping rate, one pipeline (simulate, ringup, heating or ringdown) with its
// parameters, and an ordered list of estimators to run on the result.
// Every dimensional key carries its unit in the name (pressure_mbar, dt_s).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levitrap/levitrap.hpp"

namespace levitrap::cli {

enum class Format { Csv, Json };

Format parse_format(const std::string& s);

enum class Pipeline { Simulate, Ringup, Heating, Ringdown };

const char* to_string(Pipeline p);

struct SimulateSettings {
    SimConfig config;
    std::optional<double> apd_alpha_v_per_m;
    double readout_psd_v2_per_hz = 0.0;
    double energy_bin_s = 0.1;
    std::size_t psd_segment_samples = 4096;
    double pll_cutoff_hz = 5.0;
    double allan_tau_min_s = 1.0;
    double allan_tau_max_s = 100.0;
    int allan_per_decade = 10;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 0;
    Pipeline pipeline = Pipeline::Simulate;
    ParticleSpec particle;
    Environment env;
    double gamma = 0.0;  // rad/s
    SimulateSettings simulate;
    protocols::RingupProtocol ringup;
    protocols::HeatingProtocol heating;
    protocols::RingdownProtocol ringdown;
    std::vector<std::string> estimators;
    std::string out_dir;

    /// Pushes seed, particle, environment and damping into the pipeline settings.
    void sync();
};

/// Estimator names accepted by each pipeline, in a valid order.
std::vector<std::string> known_estimators(Pipeline p);

/// Parses and validates; throws ConfigError listing every problem found.
Scenario parse_scenario(const std::string& yaml_text);
Scenario load_scenario(const std::string& path);

struct OutputFile {
    std::string name;
    std::string content;
};

struct StepReport {
    std::string name;
    bool ok = true;
    std::string message;
};

struct RunResult {
    std::vector<OutputFile> files;
    std::vector<StepReport> steps;
    std::uint64_t hash = 0;  // FNV-1a over every output name and content

    bool any_failed() const;
    const OutputFile* file(const std::string& name) const;
};

RunResult run_scenario(const Scenario& s, Format format = Format::Json);

/// Writes the files plus a manifest of per-file hashes.
void write_outputs(const RunResult& r, const std::string& dir);

std::string fit_to_csv(const FitResult& f);
std::string fit_output(const FitResult& f, Format format);
std::string fit_summary(const FitResult& f);

std::string comparison_table(const std::vector<ComparisonRow>& rows, Format format);

}  // namespace levitrap::cli
