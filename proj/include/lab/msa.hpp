#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lab/estimates.hpp"
#include "lab/geometry.hpp"
#include "lab/model.hpp"
#include "lab/spectral.hpp"

namespace lab::msa {

enum class ScaleMode { Multiplicative, Power }; // L_{k+1} = Y L_k or L_k^gamma

struct ScaleSchedule {
	double L0 = 6;
	double Y = 3;
	double gamma = 1.1;
	int J = 0;
	ScaleMode mode = ScaleMode::Multiplicative;
	double zeta = 0.45, tau = 0.9, beta = 0.8, zeta0 = 0.85, zeta1 = 0.7, zeta2 = 0.6;
	double kappa = 0.05;

	// Throws ConfigError naming the first broken relation.
	void validate() const;
	double scale(int k) const;
};

struct MSAThresholds {
	double theta = 8;
	double p = 1;
	double p0 = 0;        // relaxed initial threshold; 0 selects (6Y+2)^{-4d}
	double E1 = 2, E2 = 1; // E1 > E2 > 0
	double m_star = 3;    // one-particle mass m*_tau
	double s = 1;
	double beta = 0.8;
	double kappa = 0.05;

	void validate() const;
	// m*_tau - 1/(2L^kappa) - 6(d+1) log(2L)/L
	double m_of_L(double L, int d) const;
	bool bootstrap_gate(int d) const { return theta > 16.0 * d; }
	spectral::ClassificationParams params() const;
};

double theorem_p0(double Y, int d); // (6Y+2)^{-4d}

struct CellVerdict {
	geometry::Box box;
	spectral::BoxVerdict verdict;
	bool interactive = false;
	bool bad = false; // not (theta,E)-suitable
};

std::vector<CellVerdict> classify_cover(const geometry::Cover& cover, const model::DisorderField& field,
                                        const model::ModelSpec& spec, double E,
                                        const spectral::ClassificationParams& p);

struct DistantSet {
	std::size_t size = 0;
	bool exact = true; // false: node budget hit, size is a lower bound
	std::size_t nodes = 0;
	std::vector<std::size_t> members;
};

inline constexpr std::size_t kNodeBudget = 2'000'000;

// Largest subset with pairwise dist_S of centers > min_ticks.
DistantSet max_distant_set(const std::vector<geometry::Point>& centers, const geometry::Lattice& lat,
                           std::int64_t min_ticks, std::size_t budget = kNodeBudget);
// Bad cells only, pairwise dist_S > 8 ell.
DistantSet max_distant_bad_set(const std::vector<CellVerdict>& cells, double ell, std::size_t budget = kNodeBudget);

struct StepMargins {
	double margin1 = 0;      // (2d-1-theta)(Y/2-3-28J)+s+theta, must be < 0
	std::size_t boundary = 0; // max boundary edge count over cells
	double log_margin2 = 0;  // log(B (Y l)^s B l^{-theta}), must be <= 0
	double log_margin3 = 0;  // log((B l^{-theta})^{Y/2-3-28J} (Y l)^s (Y l)^theta), must be <= 0
	bool coverage = false;
	bool ok = false;
};

StepMargins step_margins(int d, double ell, double Y, int J, double theta, double s, std::size_t boundary,
                         bool coverage);

struct StepReport {
	double ell = 0, L = 0, Y = 0;
	int J = 0;
	StepMargins margins;
	bool hyp_nonresonant = false; // (i)
	bool hyp_budget = false;      // (ii)
	bool hyp_sub_boxes = false;   // (iii)
	bool hypotheses = false;
	bool conclusion = false;
	bool asserted = false;
	bool violation = false;
	std::size_t cells = 0, bad_cells = 0, interactive_cells = 0;
	DistantSet distant;
	spectral::BoxVerdict verdict;
	std::vector<CellVerdict> cover;
};

// Symmetrized box that carries every site touched by the step check (cells and sub-boxes of side j(8l+1)).
geometry::Box step_field_box(const geometry::Box& box, double ell, int J);

// Throws PreconditionError unless theta > 4d-2+s and Y >= 10+56J.
StepReport deterministic_step_check(const geometry::Box& box, double ell, const model::DisorderField& field,
                                    const model::ModelSpec& spec, double E, const spectral::ClassificationParams& p,
                                    int J);

nlohmann::json to_json(const StepMargins& m);
nlohmann::json to_json(const StepReport& r, bool with_cells = false);

struct CenterEstimate {
	geometry::Point center;
	std::size_t hits = 0, trials = 0;
	double p_hat = 0;
	estimates::Interval ci;
};

struct ScaleRow {
	int k = 0;
	double L = 0;
	std::size_t sites = 0;
	std::vector<CenterEstimate> centers;
	double p_max = 0;
	double ci_hi_max = 0;
	double overlay = -1; // recursion bound from the previous row, -1 on the first row
};

ScaleRow estimate_nonsuitable_prob(const model::ModelSpec& spec, double theta, double E, double L,
                                   const std::vector<geometry::Point>& centers, std::size_t trials,
                                   std::uint64_t seed, unsigned workers = 1);

// 1/2 (L_next^{-p} + ((6Y+2)^{2d} p_k)^{J+1})
double recursion_bound(double L_next, double p, double Y, int d, int J, double p_k);

struct RecursionTrace {
	std::vector<ScaleRow> rows;
	bool truncated = false;
	std::string truncation_note;
	double p0_theorem = 0;
	double p0_used = 0;
	bool relaxed = false;
	bool p0_gate = false; // p_hat_0 <= p0_used
	bool nonincreasing = false;

	std::string csv() const;
	nlohmann::json summary() const;
};

// Centers are given in units of the current scale L_k.
RecursionTrace run_scale_recursion(const ScaleSchedule& schedule, const MSAThresholds& th,
                                   const model::ModelSpec& spec, double E, int k_max,
                                   const std::vector<std::vector<double>>& centers_in_L, std::size_t trials,
                                   std::uint64_t seed, unsigned workers = 1);

struct PreregReport {
	bool Lregular = false, Rregular = false, preregular = false;
	bool LNR = false, RNR = false, HNR = false;
	double m_L = 0;
	bool conclusion = false;
	bool asserted = false;
	bool violation = false;
	std::size_t shifts_left = 0, shifts_right = 0;
	spectral::BoxVerdict verdict;
};

PreregReport preregularity_classify(const geometry::Box& box, double ell, const model::DisorderField& field,
                                    const model::ModelSpec& spec, double E, const MSAThresholds& th);

nlohmann::json to_json(const PreregReport& r);

struct EventRResult {
	estimates::EnsembleReport report;
	double overlay = 0; // exp(-L^{zeta2})
	std::size_t energies = 0;
	std::vector<int> occurred; // per trial
};

// One realization of R for the given trial seed.
bool event_R_trial(const model::ModelSpec& spec, double m, double I_lo, double I_hi, const geometry::Point& x,
                   const geometry::Point& y, double L, std::uint64_t trial_seed);
// Energy grid of 64 points on I joined with the eigenvalues of both boxes inside I.
EventRResult estimate_event_R(const model::ModelSpec& spec, double m, double I_lo, double I_hi,
                              const geometry::Point& x, const geometry::Point& y, double L, double zeta2,
                              std::size_t trials, std::uint64_t seed, unsigned workers = 1);

} // namespace lab::msa
