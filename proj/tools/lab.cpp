#include <iostream>

#include <CLI11.hpp>

#include "lab/errors.hpp"
#include "lab/harness.hpp"

int main(int argc, char** argv) {
	CLI::App app{"Random multi-particle Schroedinger operator lab"};
	app.require_subcommand(1);
	app.set_version_flag("--version", lab::harness::code_version());

	lab::harness::Overrides o;
	std::string config;
	std::size_t trials = 0;
	std::uint64_t seed = 0;
	unsigned workers = 0;
	std::string out;
	auto* run = app.add_subcommand("run", "run an experiment config");
	run->add_option("config", config, "JSON config")->required()->check(CLI::ExistingFile);
	auto* t_opt = run->add_option("--trials", trials, "number of trials")->check(CLI::PositiveNumber);
	auto* s_opt = run->add_option("--seed", seed, "master seed");
	auto* w_opt = run->add_option("--workers", workers, "worker threads (default LAB_WORKERS or 1)")
	                  ->check(CLI::PositiveNumber);
	auto* o_opt = run->add_option("--out", out, "output directory");

	std::string manifest;
	std::size_t trial = 0;
	auto* rep = app.add_subcommand("replay", "recompute one archived trial");
	rep->add_option("manifest", manifest, "manifest.json of a run")->required()->check(CLI::ExistingFile);
	rep->add_option("trial", trial, "trial index")->required();

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		int code = app.exit(e);
		return code == 0 ? 0 : 2;
	}

	try {
		if (*run) {
			if (*t_opt) o.trials = trials;
			if (*s_opt) o.seed = seed;
			if (*w_opt) o.workers = workers;
			if (*o_opt) o.out = out;
			return lab::harness::run(config, o, std::cout);
		}
		std::cout << lab::harness::replay(manifest, trial).dump(2) << "\n";
		return 0;
	} catch (const lab::ConfigError& e) {
		std::cerr << "config error: " << e.what() << "\n";
		return 2;
	} catch (const lab::PreconditionError& e) {
		std::cerr << "invalid request: " << e.what() << "\n";
		return 2;
	} catch (const lab::CeilingError& e) {
		std::cerr << "ceiling: " << e.what() << "\n";
		return 3;
	} catch (const lab::AssertionFailure& e) {
		std::cerr << "assertion failure: " << e.what() << "\n";
		return 1;
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	}
}
