#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lab/geometry.hpp"
#include "lab/model.hpp"

namespace lab::harness {

std::string code_version();
std::string sha256_hex(const std::string& data);

// Reads an object and remembers which keys were consumed; finish() rejects the rest.
class Fields {
public:
	Fields(const nlohmann::json& j, std::string path);

	const std::string& path() const { return path_; }
	std::string at(const std::string& key) const { return path_ + "." + key; }
	bool has(const std::string& key) const;

	double number(const std::string& key) const;
	double number(const std::string& key, double dflt) const;
	std::int64_t integer(const std::string& key) const;
	std::int64_t integer(const std::string& key, std::int64_t dflt) const;
	bool boolean(const std::string& key, bool dflt) const;
	std::string string(const std::string& key) const;
	std::string string(const std::string& key, const std::string& dflt) const;
	std::vector<double> numbers(const std::string& key) const;
	std::vector<double> numbers(const std::string& key, const std::vector<double>& dflt) const;
	std::vector<std::vector<double>> rows(const std::string& key) const;
	Fields object(const std::string& key) const;

	void finish() const;

private:
	const nlohmann::json& j_;
	std::string path_;
	mutable std::set<std::string> used_;
	const nlohmann::json& get(const std::string& key) const;
};

[[noreturn]] void fail(const std::string& path, const std::string& msg);

model::ModelSpec parse_model(const Fields& f);
geometry::Box parse_box(const Fields& f, const geometry::Lattice& lat);
geometry::Rect parse_rect(const Fields& f, const geometry::Lattice& lat);

struct Context {
	model::ModelSpec spec;
	std::uint64_t seed = 1;
	std::size_t trials = 1;
	unsigned workers = 1;
};

struct Output {
	std::vector<std::pair<std::string, std::string>> files; // name, content
	nlohmann::json summary = nlohmann::json::object();
	std::vector<std::string> failures; // hard assertions that failed
};

class Experiment {
public:
	virtual ~Experiment() = default;
	virtual void run(const Context& ctx, Output& out) const = 0;
	// Sites carrying disorder in one trial.
	virtual geometry::Region support(const Context& ctx) const = 0;
	// Per-trial record shared by the verdict archive and replay; null when the kind keeps none.
	virtual nlohmann::json record(const Context& ctx, std::size_t trial) const;
};

inline const std::vector<std::string>& experiment_kinds() {
	static const std::vector<std::string> k = {"geometry-audit", "wegner",  "wegner-pair", "ct",
	                                           "prob-lemma",     "transport", "identity-check", "correlator",
	                                           "msa-step",       "msa-recursion", "event-R"};
	return k;
}

struct ExperimentConfig {
	std::string kind;
	Context ctx;
	std::string output;
	nlohmann::json effective; // config with CLI overrides applied, without workers
	std::unique_ptr<Experiment> experiment;
};

struct Overrides {
	std::optional<std::size_t> trials;
	std::optional<std::uint64_t> seed;
	std::optional<unsigned> workers;
	std::optional<std::string> out;
};

// Throws ConfigError with the offending field path.
ExperimentConfig parse_config(const nlohmann::json& j, const Overrides& o = {});
nlohmann::json read_json(const std::filesystem::path& p);

// Runs in memory; no files are touched.
Output execute(const ExperimentConfig& cfg);

// Runs, writes artifacts and manifest.json; returns the exit status (0 or 1).
int run(const std::filesystem::path& config, const Overrides& o, std::ostream& log);

// Verifies checksums and rebuilds one trial: field, record and its archived counterpart.
nlohmann::json replay(const std::filesystem::path& manifest, std::size_t trial);

} // namespace lab::harness
